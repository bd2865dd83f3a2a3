#pragma once

#include "arim/simd/kernels.hpp"

namespace arim::simd::detail {

void gemm_nn_segments_scalar(std::size_t, std::size_t, std::size_t, std::size_t, const double* const*,
                             std::size_t, const double* const*, std::size_t, double*, std::size_t);
void gemm_tn_scalar(std::size_t, std::size_t, std::size_t, const double*, std::size_t, const double*,
                    std::size_t, double*, std::size_t);
void leaky_relu_scalar(const double*, double*, std::size_t, double);
void leaky_relu_backward_scalar(const double*, const double*, double*, std::size_t, double);
void adam_update_scalar(double*, const double*, double*, double*, std::size_t, const AdamCoeffs&);

#if defined(ARIM_HAVE_AVX2)
void gemm_nn_segments_avx2(std::size_t, std::size_t, std::size_t, std::size_t, const double* const*,
                           std::size_t, const double* const*, std::size_t, double*, std::size_t);
void gemm_tn_avx2(std::size_t, std::size_t, std::size_t, const double*, std::size_t, const double*,
                  std::size_t, double*, std::size_t);
void leaky_relu_avx2(const double*, double*, std::size_t, double);
void leaky_relu_backward_avx2(const double*, const double*, double*, std::size_t, double);
void adam_update_avx2(double*, const double*, double*, double*, std::size_t, const AdamCoeffs&);
#endif

} // namespace arim::simd::detail
