#pragma once

#include <cstddef>
#include <string_view>

// Dense inner loops used by the network and the optimizer. Every kernel has a
// portable scalar reference and, where the CPU supports it, an AVX2+FMA
// variant. The active table is chosen once at startup from CPUID and can be
// forced with ARIM_SIMD=scalar|avx2.

namespace arim::simd {

enum class Isa { Scalar, Avx2 };

struct AdamCoeffs {
    double learning_rate;
    double beta1;
    double beta2;
    double eps;
    double weight_decay;
    double bias_correction1;  // 1 - beta1^t
    double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
    Isa isa;

    // C[m x n] += sum_s A_s[m x k] * B_s[k x n] over `segments` operand pairs
    // that share shapes and leading dimensions. A convolution row is one call:
    // each kernel tap contributes a segment whose A is a shifted input row.
    void (*gemm_nn_segments)(std::size_t m, std::size_t n, std::size_t k, std::size_t segments,
                             const double* const* a, std::size_t lda, const double* const* b,
                             std::size_t ldb, double* c, std::size_t ldc);

    // C[m x n] += A[k x m]^T * B[k x n].
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc);

    // out = x >= 0 ? x : slope * x
    void (*leaky_relu)(const double* in, double* out, std::size_t n, double slope);

    // grad_in = grad_out * (x > 0 ? 1 : slope); the subgradient at 0 is slope.
    void (*leaky_relu_backward)(const double* in, const double* grad_out, double* grad_in,
                                std::size_t n, double slope);

    // Adam with coupled L2 weight decay (grad += weight_decay * param).
    void (*adam_update)(double* param, const double* grad, double* m, double* v, std::size_t n,
                        const AdamCoeffs& coeffs);
};

// Single-segment convenience wrapper over gemm_nn_segments.
void gemm_nn(const KernelTable& t, std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc);

const KernelTable& scalar_kernels();

// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

bool isa_supported(Isa isa);

// The table selected for this process.
const KernelTable& active();

// Overrides the selection; throws ConfigError if the ISA is unsupported.
void set_active(Isa isa);

std::string_view isa_name(Isa isa);

} // namespace arim::simd
