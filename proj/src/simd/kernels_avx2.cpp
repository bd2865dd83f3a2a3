// Built with -mavx2 -mfma; only reached after the CPUID check in dispatch.cpp.

#include "kernels_impl.hpp"

#include <immintrin.h>

#include <cmath>

namespace arim::simd::detail {
namespace {

inline __m256i lane_mask(std::size_t count) {
    const auto on = [count](std::size_t lane) { return lane < count ? -1LL : 0LL; };
    return _mm256_setr_epi64x(on(0), on(1), on(2), on(3));
}

// Rows x (4 or 8) tile of C accumulated in registers over every segment.
template <int Rows, bool Wide>
inline void segments_tile(std::size_t k, std::size_t segments, const double* const* a, std::size_t a_row0,
                          std::size_t lda, const double* const* b, std::size_t b_col0, std::size_t ldb,
                          double* c, std::size_t ldc, __m256i m0, __m256i m1) {
    __m256d lo[Rows];
    __m256d hi[Rows];
    for (int r = 0; r < Rows; ++r) {
        lo[r] = _mm256_maskload_pd(c + r * ldc, m0);
        hi[r] = Wide ? _mm256_maskload_pd(c + r * ldc + 4, m1) : _mm256_setzero_pd();
    }
    for (std::size_t s = 0; s < segments; ++s) {
        const double* as = a[s] + a_row0 * lda;
        const double* bs = b[s] + b_col0;
        for (std::size_t p = 0; p < k; ++p) {
            const __m256d b0 = _mm256_maskload_pd(bs + p * ldb, m0);
            const __m256d b1 = Wide ? _mm256_maskload_pd(bs + p * ldb + 4, m1) : _mm256_setzero_pd();
            for (int r = 0; r < Rows; ++r) {
                const __m256d av = _mm256_broadcast_sd(as + r * lda + p);
                lo[r] = _mm256_fmadd_pd(av, b0, lo[r]);
                if (Wide) hi[r] = _mm256_fmadd_pd(av, b1, hi[r]);
            }
        }
    }
    for (int r = 0; r < Rows; ++r) {
        _mm256_maskstore_pd(c + r * ldc, m0, lo[r]);
        if (Wide) _mm256_maskstore_pd(c + r * ldc + 4, m1, hi[r]);
    }
}

template <int Rows>
inline void segments_rows(std::size_t row0, std::size_t n, std::size_t k, std::size_t segments,
                          const double* const* a, std::size_t lda, const double* const* b, std::size_t ldb,
                          double* c, std::size_t ldc) {
    for (std::size_t j = 0; j < n; j += 8) {
        const std::size_t width = n - j < 8 ? n - j : 8;
        const __m256i m0 = lane_mask(width);
        double* ctile = c + row0 * ldc + j;
        if (width > 4) {
            const __m256i m1 = lane_mask(width - 4);
            segments_tile<Rows, true>(k, segments, a, row0, lda, b, j, ldb, ctile, ldc, m0, m1);
        } else {
            segments_tile<Rows, false>(k, segments, a, row0, lda, b, j, ldb, ctile, ldc, m0, m0);
        }
    }
}

// Same tiling for C += A^T B; A is indexed A[p * lda + i].
template <int Rows, bool Wide>
inline void tn_tile(std::size_t k, const double* a, std::size_t lda, const double* b, std::size_t ldb,
                    double* c, std::size_t ldc, __m256i m0, __m256i m1) {
    __m256d lo[Rows];
    __m256d hi[Rows];
    for (int r = 0; r < Rows; ++r) {
        lo[r] = _mm256_maskload_pd(c + r * ldc, m0);
        hi[r] = Wide ? _mm256_maskload_pd(c + r * ldc + 4, m1) : _mm256_setzero_pd();
    }
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_maskload_pd(b + p * ldb, m0);
        const __m256d b1 = Wide ? _mm256_maskload_pd(b + p * ldb + 4, m1) : _mm256_setzero_pd();
        const double* ap = a + p * lda;
        for (int r = 0; r < Rows; ++r) {
            const __m256d av = _mm256_broadcast_sd(ap + r);
            lo[r] = _mm256_fmadd_pd(av, b0, lo[r]);
            if (Wide) hi[r] = _mm256_fmadd_pd(av, b1, hi[r]);
        }
    }
    for (int r = 0; r < Rows; ++r) {
        _mm256_maskstore_pd(c + r * ldc, m0, lo[r]);
        if (Wide) _mm256_maskstore_pd(c + r * ldc + 4, m1, hi[r]);
    }
}

template <int Rows>
inline void tn_rows(std::size_t row0, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc) {
    for (std::size_t j = 0; j < n; j += 8) {
        const std::size_t width = n - j < 8 ? n - j : 8;
        const __m256i m0 = lane_mask(width);
        double* ctile = c + row0 * ldc + j;
        if (width > 4) {
            tn_tile<Rows, true>(k, a + row0, lda, b + j, ldb, ctile, ldc, m0, lane_mask(width - 4));
        } else {
            tn_tile<Rows, false>(k, a + row0, lda, b + j, ldb, ctile, ldc, m0, m0);
        }
    }
}

} // namespace

void gemm_nn_segments_avx2(std::size_t m, std::size_t n, std::size_t k, std::size_t segments,
                           const double* const* a, std::size_t lda, const double* const* b,
                           std::size_t ldb, double* c, std::size_t ldc) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) segments_rows<4>(i, n, k, segments, a, lda, b, ldb, c, ldc);
    for (; i < m; ++i) segments_rows<1>(i, n, k, segments, a, lda, b, ldb, c, ldc);
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) tn_rows<4>(i, n, k, a, lda, b, ldb, c, ldc);
    for (; i < m; ++i) tn_rows<1>(i, n, k, a, lda, b, ldb, c, ldc);
}

void leaky_relu_avx2(const double* in, double* out, std::size_t n, double slope) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d s = _mm256_set1_pd(slope);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(in + i);
        const __m256d keep = _mm256_cmp_pd(x, zero, _CMP_GE_OQ);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(_mm256_mul_pd(x, s), x, keep));
    }
    leaky_relu_scalar(in + i, out + i, n - i, slope);
}

void leaky_relu_backward_avx2(const double* in, const double* grad_out, double* grad_in, std::size_t n,
                              double slope) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d s = _mm256_set1_pd(slope);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(in + i);
        const __m256d g = _mm256_loadu_pd(grad_out + i);
        const __m256d pass = _mm256_cmp_pd(x, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(grad_in + i, _mm256_blendv_pd(_mm256_mul_pd(g, s), g, pass));
    }
    leaky_relu_backward_scalar(in + i, grad_out + i, grad_in + i, n - i, slope);
}

void adam_update_avx2(double* param, const double* grad, double* m, double* v, std::size_t n,
                      const AdamCoeffs& c) {
    const __m256d wd = _mm256_set1_pd(c.weight_decay);
    const __m256d b1 = _mm256_set1_pd(c.beta1);
    const __m256d b2 = _mm256_set1_pd(c.beta2);
    const __m256d one_b1 = _mm256_set1_pd(1.0 - c.beta1);
    const __m256d one_b2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
    const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
    const __m256d lr = _mm256_set1_pd(c.learning_rate);
    const __m256d eps = _mm256_set1_pd(c.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d p = _mm256_loadu_pd(param + i);
        const __m256d g = _mm256_add_pd(_mm256_loadu_pd(grad + i), _mm256_mul_pd(wd, p));
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(one_b1, g));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(_mm256_mul_pd(one_b2, g), g));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d m_hat = _mm256_div_pd(mi, bc1);
        const __m256d v_hat = _mm256_div_pd(vi, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        _mm256_storeu_pd(param + i, _mm256_sub_pd(p, step));
    }
    adam_update_scalar(param + i, grad + i, m + i, v + i, n - i, c);
}

} // namespace arim::simd::detail
