#include "kernels_impl.hpp"

#include <cmath>

namespace arim::simd::detail {

void gemm_nn_segments_scalar(std::size_t m, std::size_t n, std::size_t k, std::size_t segments,
                             const double* const* a, std::size_t lda, const double* const* b,
                             std::size_t ldb, double* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        for (std::size_t s = 0; s < segments; ++s) {
            for (std::size_t p = 0; p < k; ++p) {
                const double av = a[s][i * lda + p];
                const double* brow = b[s] + p * ldb;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[p * lda + i];
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void leaky_relu_scalar(const double* in, double* out, std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] >= 0.0 ? in[i] : slope * in[i];
}

void leaky_relu_backward_scalar(const double* in, const double* grad_out, double* grad_in,
                                std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) grad_in[i] = in[i] > 0.0 ? grad_out[i] : slope * grad_out[i];
}

void adam_update_scalar(double* param, const double* grad, double* m, double* v, std::size_t n,
                        const AdamCoeffs& c) {
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i] + c.weight_decay * param[i];
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        const double m_hat = m[i] / c.bias_correction1;
        const double v_hat = v[i] / c.bias_correction2;
        param[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

} // namespace arim::simd::detail
