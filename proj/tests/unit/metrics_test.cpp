#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "arim/error.hpp"
#include "arim/metrics.hpp"
#include "arim/mitigate.hpp"
#include "support/oracles.hpp"

using namespace arim;

namespace {

TargetBins bins_at(std::vector<std::size_t> b, std::size_t strongest) { return {std::move(b), strongest}; }

ScenarioSample desk_sample(std::uint64_t seed) {
    GenerationConfig gen;
    gen.radar = RadarConfig::desk();
    gen.distance_max_m = 20.0;
    Rng rng(seed);
    return sample_scenario(gen, rng);
}

} // namespace

TEST_CASE("auc") {
    CHECK(roc_auc(std::vector<double>{3, 1}, std::vector<double>{2, 0}) == 0.75);
    CHECK(roc_auc(std::vector<double>{5}, std::vector<double>{1, 2}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0}, std::vector<double>{1, 2}) == 0.0);
    CHECK(roc_auc(std::vector<double>{1, 1}, std::vector<double>{1, 1}) == 0.5);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{}, std::vector<double>{1}), DomainError);

    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> pos(static_cast<std::size_t>(rng.uniform_int(1, 30)));
        std::vector<double> neg(static_cast<std::size_t>(rng.uniform_int(1, 30)));
        // Coarse values so ties occur.
        for (auto& v : pos) v = static_cast<double>(rng.uniform_int(0, 8));
        for (auto& v : neg) v = static_cast<double>(rng.uniform_int(0, 6));
        const double a = roc_auc(pos, neg);
        CHECK(a == doctest::Approx(oracle::auc_pairs(pos, neg)).epsilon(1e-12));
        // Invariant under strictly increasing maps.
        auto pe = pos, ne = neg;
        for (auto& v : pe) v = std::exp(v) + 3.0;
        for (auto& v : ne) v = std::exp(v) + 3.0;
        CHECK(roc_auc(pe, ne) == doctest::Approx(a).epsilon(1e-12));
    }
}

TEST_CASE("auc on a profile uses a circular tolerance") {
    std::vector<double> p(16, 0.1);
    p[0] = 1.0;
    p[15] = 0.9;
    p[1] = 0.8;
    CHECK(roc_auc(p, bins_at({0}, 0), 1) == 1.0);
    p[15] = 0.0;
    CHECK(roc_auc(p, bins_at({0}, 0), 1) < 1.0);
    CHECK_THROWS_AS(roc_auc(p, bins_at({16}, 16), 1), DomainError);
}

TEST_CASE("target bins") {
    const auto r = RadarConfig{};
    const std::vector<TargetSpec> t{{50.0, 0.3, 0.0}, {50.0, 0.9, 0.0}, {10.0, 0.5, 0.0}};
    const auto tb = target_bins(t, r, 2048);
    CHECK(tb.bins.size() == 2);
    CHECK(tb.strongest == 1067);
    CHECK(std::is_sorted(tb.bins.begin(), tb.bins.end()));
}

TEST_CASE("amplitude and phase errors") {
    const auto tb = bins_at({2}, 2);
    std::vector<double> label(4, 1.0), pred(4, 1.0);
    pred[2] = 2.0;
    CHECK(mae_amplitude_db(pred, label, tb) == doctest::Approx(6.0206).epsilon(1e-4));
    CHECK(mse_amplitude_db(pred, label, tb) == doctest::Approx(6.0206 * 6.0206).epsilon(1e-4));
    pred[2] = 0.0;
    CHECK(mae_amplitude_db(pred, label, tb) == doctest::Approx(240.0));
    pred[2] = -1.0;
    CHECK(mae_amplitude_db(pred, label, tb) == doctest::Approx(0.0));
    label[2] = 0.0;
    CHECK_THROWS_AS(mae_amplitude_db(pred, label, tb), DomainError);

    const double deg = std::numbers::pi / 180.0;
    std::vector<Complex> lp(4, {1, 0}), pp(4, {1, 0});
    lp[2] = std::polar(1.0, 350.0 * deg);
    pp[2] = std::polar(1.0, 0.0);
    CHECK(mae_phase_deg(pp, lp, tb) == doctest::Approx(10.0));
    pp[2] = std::polar(3.0, 170.0 * deg);
    lp[2] = std::polar(1.0, -170.0 * deg);
    CHECK(mae_phase_deg(pp, lp, tb) == doctest::Approx(20.0));
    CHECK(mse_phase_deg(pp, lp, tb) == doctest::Approx(400.0));
    pp[2] = std::polar(1.0, 0.0);
    lp[2] = std::polar(1.0, 180.0 * deg);
    CHECK(mae_phase_deg(pp, lp, tb) == doctest::Approx(180.0));
}

TEST_CASE("snr and delta snr") {
    std::vector<double> before(64, 0.1), after(64, 0.05);
    before[10] = after[10] = 1.0;
    const auto tb = bins_at({10}, 10);
    CHECK(profile_snr_db(before, tb) == doctest::Approx(20.0));
    CHECK(delta_snr(before, after, tb) == doctest::Approx(6.0206).epsilon(1e-4));
    // Guard bins do not enter the floor.
    before[13] = 100.0;
    CHECK(profile_snr_db(before, tb) == doctest::Approx(20.0));
    CHECK_THROWS_AS(profile_snr_db(std::vector<double>(5, 1.0), bins_at({2}, 2), 4), DomainError);
}

TEST_CASE("zeroing detection") {
    std::vector<Complex> s(40, {1.0, 0.0});
    s[20] = {10.0, 0.0};
    const auto d = detect_interference_samples(s, {});
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(d[i] == (i >= 18 && i <= 22));
    CHECK_THROWS_AS(detect_interference_samples(std::vector<Complex>{}, {}), DomainError);

    const auto z = zero_mitigate(s, {}, 64);
    CHECK(z.profile.size() == 64);
    // Removing five unit samples drops the DC bin from 49 to 35.
    CHECK(std::abs(z.profile[0]) == doctest::Approx(35.0));
    CHECK(z.magnitude[0] == doctest::Approx(35.0));

    std::vector<Complex> flat(16, {0.0, 0.0});
    for (bool b : detect_interference_samples(flat, {})) CHECK(!b);
}

TEST_CASE("oracle scores perfectly") {
    const auto s = desk_sample(77);
    const auto radar = RadarConfig::desk();
    const std::size_t n_fft = 512;
    const auto m = evaluate_sample(s, oracle_profile(s, n_fft), radar, n_fft, {});
    REQUIRE(m.ok);
    CHECK(m.mae_amp_db == 0.0);
    CHECK(m.mae_phase_deg == 0.0);
    CHECK(m.auc > 0.9);

    const auto u = unmitigated_profile(s, n_fft);
    CHECK(u.profile == range_fft(s.interfered_signal, n_fft));
}

TEST_CASE("evaluation report") {
    std::vector<ScenarioSample> samples;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 6; ++i) {
        samples.push_back(desk_sample(200 + i));
        idx.push_back(i * 3);
    }
    const auto radar = RadarConfig::desk();
    const MitigationMethod flaky = [&](const ScenarioSample& s) {
        if (&s == &samples[1]) throw DomainError("boom");
        return unmitigated_profile(s, 512);
    };
    const auto rep = evaluate(samples, idx, flaky, "flaky", radar, 512);
    CHECK(rep.failures == 1);
    CHECK(rep.overall.count == 5);
    CHECK(rep.samples.size() == 6);
    CHECK(rep.roc_tpr.size() == 101);
    CHECK(rep.roc_tpr.front() == doctest::Approx(1.0));
    CHECK(rep.roc_fpr.front() == doctest::Approx(1.0));

    const auto again = summarize(rep.samples);
    CHECK(again.auc == rep.overall.auc);
    std::size_t grouped = 0;
    for (const auto& [k, v] : rep.by_interferers) grouped += v.count;
    CHECK(grouped == 5);
    CHECK(summary_text(rep).find("all.auc") != std::string::npos);
    CHECK(samples_csv(rep).find("boom") != std::string::npos);
}

TEST_CASE("rmse from per-sample mse") {
    std::vector<SampleMetrics> s(2);
    s[0].mse_amp_db = 1.0;
    s[1].mse_amp_db = 9.0;
    s[0].mae_amp_db = 1.0;
    s[1].mae_amp_db = 3.0;
    const auto m = summarize(s);
    CHECK(m.rmse_amp_db == doctest::Approx(std::sqrt(5.0)));
    CHECK(m.mae_amp_db == doctest::Approx(2.0));
}
