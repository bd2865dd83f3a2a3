#include <doctest.h>

#include <vector>

#include "arim/error.hpp"
#include "arim/rng.hpp"
#include "arim/simd/kernels.hpp"

using namespace arim;
using namespace arim::simd;

namespace {

std::vector<double> randv(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
}

} // namespace

TEST_CASE("scalar gemm matches a naive product") {
    Rng rng(1);
    const auto& s = scalar_kernels();
    const std::size_t m = 5, n = 7, k = 3;
    const auto a = randv(rng, m * k), b = randv(rng, k * n);
    std::vector<double> c(m * n, 1.0), ref(m * n, 1.0);
    gemm_nn(s, m, n, k, a.data(), k, b.data(), n, c.data(), n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t q = 0; q < k; ++q) ref[i * n + j] += a[i * k + q] * b[q * n + j];
    check_close(c, ref, 1e-14);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
    const auto* v = avx2_kernels();
    if (!v) {
        MESSAGE("AVX2 unavailable; equivalence not exercised");
        return;
    }
    const auto& s = scalar_kernels();
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = static_cast<std::size_t>(rng.uniform_int(1, 37));
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 37));
        const auto k = static_cast<std::size_t>(rng.uniform_int(1, 29));
        const auto segs = static_cast<std::size_t>(rng.uniform_int(1, 5));
        std::vector<std::vector<double>> as, bs;
        std::vector<const double*> ap, bp;
        for (std::size_t q = 0; q < segs; ++q) {
            as.push_back(randv(rng, m * k));
            bs.push_back(randv(rng, k * n));
        }
        for (std::size_t q = 0; q < segs; ++q) {
            ap.push_back(as[q].data());
            bp.push_back(bs[q].data());
        }
        auto c1 = randv(rng, m * n), c2 = c1;
        s.gemm_nn_segments(m, n, k, segs, ap.data(), k, bp.data(), n, c1.data(), n);
        v->gemm_nn_segments(m, n, k, segs, ap.data(), k, bp.data(), n, c2.data(), n);
        check_close(c2, c1, 1e-12);

        const auto at = randv(rng, k * m), b = randv(rng, k * n);
        auto d1 = randv(rng, m * n), d2 = d1;
        s.gemm_tn(m, n, k, at.data(), m, b.data(), n, d1.data(), n);
        v->gemm_tn(m, n, k, at.data(), m, b.data(), n, d2.data(), n);
        check_close(d2, d1, 1e-12);

        const std::size_t len = m * n;
        auto x = randv(rng, len), g = randv(rng, len);
        x[0] = 0.0;
        std::vector<double> o1(len), o2(len), gi1(len), gi2(len);
        s.leaky_relu(x.data(), o1.data(), len, 0.01);
        v->leaky_relu(x.data(), o2.data(), len, 0.01);
        CHECK(o1 == o2);
        s.leaky_relu_backward(x.data(), g.data(), gi1.data(), len, 0.01);
        v->leaky_relu_backward(x.data(), g.data(), gi2.data(), len, 0.01);
        CHECK(gi1 == gi2);

        const AdamCoeffs co{1e-3, 0.9, 0.999, 1e-8, 1e-5, 1.0 - 0.9, 1.0 - 0.999};
        auto p1 = randv(rng, len), p2 = p1;
        auto m1 = randv(rng, len), m2 = m1;
        std::vector<double> v1(len), v2(len);
        for (std::size_t i = 0; i < len; ++i) v1[i] = v2[i] = std::abs(rng.normal());
        s.adam_update(p1.data(), g.data(), m1.data(), v1.data(), len, co);
        v->adam_update(p2.data(), g.data(), m2.data(), v2.data(), len, co);
        check_close(p2, p1, 1e-12);
        check_close(m2, m1, 1e-12);
        check_close(v2, v1, 1e-12);
    }
}

TEST_CASE("selection") {
    CHECK(isa_supported(Isa::Scalar));
    const auto before = active().isa;
    set_active(Isa::Scalar);
    CHECK(active().isa == Isa::Scalar);
    if (!isa_supported(Isa::Avx2)) CHECK_THROWS_AS(set_active(Isa::Avx2), ConfigError);
    set_active(before);
    CHECK(isa_name(Isa::Avx2) == "avx2");
}
