#include "kernels_impl.hpp"

#include <cstdlib>
#include <string>

#include "arim/error.hpp"

namespace arim::simd {
namespace {

const KernelTable kScalar{
    Isa::Scalar,
    detail::gemm_nn_segments_scalar,
    detail::gemm_tn_scalar,
    detail::leaky_relu_scalar,
    detail::leaky_relu_backward_scalar,
    detail::adam_update_scalar,
};

#if defined(ARIM_HAVE_AVX2)
const KernelTable kAvx2{
    Isa::Avx2,
    detail::gemm_nn_segments_avx2,
    detail::gemm_tn_avx2,
    detail::leaky_relu_avx2,
    detail::leaky_relu_backward_avx2,
    detail::adam_update_avx2,
};
#endif

bool cpu_has_avx2() {
#if defined(ARIM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* initial_table() {
    const char* env = std::getenv("ARIM_SIMD");
    const std::string forced = env ? env : "";
    if (forced == "scalar") return &kScalar;
    if (const auto* avx = avx2_kernels()) return avx;
    return &kScalar;
}

const KernelTable*& active_slot() {
    static const KernelTable* table = initial_table();
    return table;
}

} // namespace

void gemm_nn(const KernelTable& t, std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc) {
    t.gemm_nn_segments(m, n, k, 1, &a, lda, &b, ldb, c, ldc);
}

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#if defined(ARIM_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

bool isa_supported(Isa isa) { return isa == Isa::Scalar || avx2_kernels() != nullptr; }

const KernelTable& active() { return *active_slot(); }

void set_active(Isa isa) {
    if (!isa_supported(isa)) throw ConfigError("SIMD variant '" + std::string(isa_name(isa)) + "' unavailable");
    active_slot() = isa == Isa::Scalar ? &kScalar : avx2_kernels();
}

std::string_view isa_name(Isa isa) { return isa == Isa::Scalar ? "scalar" : "avx2"; }

} // namespace arim::simd
