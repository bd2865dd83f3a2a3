#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "arim/error.hpp"
#include "arim/radar_sim.hpp"
#include "arim/spectral.hpp"
#include "support/oracles.hpp"

using namespace arim;

namespace {

std::size_t argmax_mag(const std::vector<Complex>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    }
    return best;
}

double mean_power(const ComplexVector& v) {
    double p = 0.0;
    for (const auto& z : v) p += std::norm(z);
    return p / static_cast<double>(v.size());
}

} // namespace

TEST_CASE("radar config derived quantities") {
    const RadarConfig cfg;
    CHECK(cfg.samples_per_chirp() == 1024);
    CHECK(cfg.slope() == doctest::Approx(6.25e13));
    CHECK(RadarConfig::desk().samples_per_chirp() == 256);
    CHECK(RadarConfig::desk().slope() == doctest::Approx(cfg.slope()));

    RadarConfig bad = cfg;
    bad.chirp_time_s = 25.61e-6;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.bandwidth_hz = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("beat frequency") {
    const RadarConfig cfg;
    CHECK_THROWS_AS(beat_frequency(0.0, cfg), DomainError);
    CHECK_THROWS_AS(beat_frequency(-1.0, cfg), DomainError);
    const double f95 = beat_frequency(95.0, cfg);
    CHECK(f95 == doctest::Approx(39.58e6).epsilon(1e-3));
    CHECK(f95 < cfg.sample_rate_hz);
    CHECK(beat_frequency(50.0, cfg) == doctest::Approx(2 * 1.6e9 * 50.0 / (kSpeedOfLight * 25.6e-6)));

    // Every distance in the generation range stays alias-free.
    for (double d = 2.0; d <= 95.0; d += 0.5) CHECK(beat_frequency(d, cfg) < cfg.sample_rate_hz);
}

TEST_CASE("95 m beat frequency located by the DFT peak") {
    const RadarConfig cfg;
    const TargetSpec t{95.0, 1.0, 0.0};
    const auto sig = synth_clean_beat(std::span(&t, 1), cfg);
    const auto spec = oracle::dft(sig, 4096);
    const double f_peak = static_cast<double>(argmax_mag(spec)) / 4096.0 * cfg.sample_rate_hz;
    CHECK(std::abs(f_peak - beat_frequency(95.0, cfg)) <= cfg.sample_rate_hz / 4096.0);
}

TEST_CASE("50 m target peaks at bin 1067 of 2048") {
    const RadarConfig cfg;
    const TargetSpec t{50.0, 1.0, 0.0};
    const auto sig = synth_clean_beat(std::span(&t, 1), cfg);
    CHECK(argmax_mag(oracle::dft(sig, 2048)) == 1067);
    CHECK(std::llround(beat_frequency(50.0, cfg) / cfg.sample_rate_hz * 2048) == 1067);
}

TEST_CASE("clean beat synthesis") {
    const RadarConfig cfg = RadarConfig::desk();
    CHECK_THROWS_AS(synth_clean_beat({}, cfg), DomainError);

    SUBCASE("destructive pair cancels") {
        const std::vector<TargetSpec> ts{{40.0, 1.0, 0.0}, {40.0, 1.0, std::numbers::pi}};
        for (const auto& z : synth_clean_beat(ts, cfg)) CHECK(std::abs(z) < 1e-12);
    }
    SUBCASE("constant modulus power") {
        const TargetSpec t{33.3, 0.37, 1.0};
        CHECK(mean_power(synth_clean_beat(std::span(&t, 1), cfg)) == doctest::Approx(0.37 * 0.37).epsilon(1e-12));
    }
    SUBCASE("linearity") {
        const std::vector<TargetSpec> a{{10.0, 0.5, 0.1}, {70.0, 0.2, -2.0}};
        const std::vector<TargetSpec> b{{25.0, 0.9, 1.4}};
        std::vector<TargetSpec> both = a;
        both.insert(both.end(), b.begin(), b.end());
        const auto sa = synth_clean_beat(a, cfg), sb = synth_clean_beat(b, cfg), s = synth_clean_beat(both, cfg);
        for (std::size_t n = 0; n < s.size(); ++n) CHECK(std::abs(s[n] - (sa[n] + sb[n])) < 1e-13);
    }
    SUBCASE("aliasing target rejected") {
        const TargetSpec t{200.0, 1.0, 0.0};
        CHECK_THROWS_AS(synth_clean_beat(std::span(&t, 1), cfg), DomainError);
    }
}

TEST_CASE("interference synthesis") {
    const RadarConfig cfg;
    CHECK(synth_interference({}, 1.0, cfg) == ComplexVector(cfg.samples_per_chirp()));
    const InterferenceSpec one{0.3, 5.0, 3e-6, 0.0};
    CHECK_THROWS_AS(synth_interference(std::span(&one, 1), 0.0, cfg), DomainError);

    SUBCASE("coherent slope covers the chirp with constant modulus") {
        const InterferenceSpec i{1.0, 3.0, 10e-6, 0.7};
        const auto gate = interference_gate(i, cfg);
        CHECK(std::all_of(gate.begin(), gate.end(), [](bool b) { return b; }));
        const auto c = synth_interference_component(i, 1.0, cfg);
        for (const auto& z : c) {
            CHECK(std::abs(z) == doctest::Approx(std::abs(c.front())).epsilon(1e-12));
            CHECK(std::abs(z - c.front()) < 1e-9);
        }
    }
    SUBCASE("gate width for slope ratio 0.5 at mid-chirp") {
        const InterferenceSpec i{0.5, 0.0, cfg.chirp_time_s / 2, 0.0};
        const auto gate = interference_gate(i, cfg);
        const double d_alpha = cfg.slope() * 0.5;
        std::size_t brute = 0;
        for (std::size_t n = 0; n < gate.size(); ++n) {
            const double t = static_cast<double>(n) / cfg.sample_rate_hz;
            if (std::abs(d_alpha * (t - i.center_time_s)) <= cfg.sample_rate_hz / 2) ++brute;
        }
        const auto width = static_cast<std::size_t>(std::count(gate.begin(), gate.end(), true));
        CHECK(width == brute);
        CHECK(width == static_cast<std::size_t>(std::llround(cfg.sample_rate_hz * cfg.sample_rate_hz / d_alpha)));
    }
}

TEST_CASE("gate correctness and SIR calibration on random interferers") {
    const RadarConfig cfg = RadarConfig::desk();
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const InterferenceSpec i{rng.uniform(0.0, 1.5), rng.uniform(-5.0, 40.0), rng.uniform(0.0, cfg.chirp_time_s),
                                 rng.uniform(-std::numbers::pi, std::numbers::pi)};
        const double ref_power = rng.uniform(1e-4, 1.0);
        const auto c = synth_interference_component(i, ref_power, cfg);
        const double d_alpha = cfg.slope() * (1.0 - i.slope_ratio);
        std::size_t support = 0;
        for (std::size_t n = 0; n < c.size(); ++n) {
            const double t = static_cast<double>(n) / cfg.sample_rate_hz;
            const bool pass = std::abs(d_alpha * (t - i.center_time_s)) <= cfg.sample_rate_hz / 2;
            support += pass;
            CHECK((std::abs(c[n]) > 0) == pass);
        }
        if (support > 0) CHECK(std::abs(10 * std::log10(ref_power / mean_power(c)) - i.sir_db) < 1e-6);
    }
}

TEST_CASE("noise") {
    const ComplexVector zeros(1'000'000);
    SUBCASE("disabled noise is the identity") {
        Rng rng(1);
        const ComplexVector x{{1, 2}, {3, 4}};
        CHECK(add_noise(x, kNoNoise, 1.0, rng) == x);
    }
    SUBCASE("empirical variance at 20 dB") {
        Rng rng(42);
        const auto n = add_noise(zeros, 20.0, 1.0, rng);
        CHECK(mean_power(n) == doctest::Approx(0.01).epsilon(0.01));
        double re = 0, im = 0;
        for (const auto& z : n) {
            re += z.real() * z.real();
            im += z.imag() * z.imag();
        }
        CHECK(re / im == doctest::Approx(1.0).epsilon(0.01));
    }
    SUBCASE("same seed, same noise") {
        Rng a(5), b(5);
        const ComplexVector x(64, Complex(1.0, 0.0));
        CHECK(add_noise(x, 10.0, 1.0, a) == add_noise(x, 10.0, 1.0, b));
    }
    SUBCASE("non-positive reference power") {
        Rng rng(1);
        CHECK_THROWS_AS(add_noise(zeros, 10.0, 0.0, rng), DomainError);
    }
}

TEST_CASE("scenario sampling respects the configured ranges") {
    GenerationConfig gen;
    gen.radar = RadarConfig::desk();
    std::set<double> snrs;
    std::set<int> counts;
    std::vector<double> distances;
    for (std::uint64_t s = 0; s < 10'000; ++s) {
        Rng rng(s);
        const auto sample = sample_scenario(gen, rng);
        snrs.insert(sample.snr_db);
        counts.insert(static_cast<int>(sample.interferers.size()));
        CHECK(sample.targets.size() >= 1);
        CHECK(sample.targets.size() <= 4);
        for (const auto& t : sample.targets) {
            distances.push_back(t.distance_m);
            CHECK(t.amplitude >= 0.01);
            CHECK(t.amplitude <= 1.0);
            CHECK(t.phase_rad >= -std::numbers::pi);
            CHECK(t.phase_rad < std::numbers::pi);
        }
        for (const auto& i : sample.interferers) {
            CHECK(i.slope_ratio >= 0.0);
            CHECK(i.slope_ratio <= 1.5);
            CHECK(i.sir_db >= -5.0);
            CHECK(i.sir_db <= 40.0);
            CHECK(i.center_time_s >= 0.0);
            CHECK(i.center_time_s <= gen.radar.chirp_time_s);
        }
        CHECK(sample.clean_signal.size() == sample.interfered_signal.size());
    }
    CHECK(snrs == std::set<double>{5, 10, 15, 20, 25, 30, 35, 40});
    CHECK(counts == std::set<int>{1, 2, 3});
    CHECK(*std::min_element(distances.begin(), distances.end()) >= 2.0);
    CHECK(*std::max_element(distances.begin(), distances.end()) <= 95.0);
    CHECK(oracle::ks_uniform(distances, 2.0, 95.0) < 0.02);
}

TEST_CASE("degenerate scenario and determinism") {
    GenerationConfig gen;
    gen.radar = RadarConfig::desk();
    gen.interferer_counts = {0};
    gen.noise_enabled = false;
    Rng rng(3);
    const auto s = sample_scenario(gen, rng);
    CHECK(s.interfered_signal == s.clean_signal);

    GenerationConfig full;
    full.radar = RadarConfig::desk();
    Rng a(99), b(99);
    CHECK(sample_scenario(full, a) == sample_scenario(full, b));

    GenerationConfig bad;
    bad.sir_db_min = 50;
    Rng c(1);
    CHECK_THROWS_AS(sample_scenario(bad, c), ConfigError);
}

TEST_CASE("generation config round-trips through key = value text") {
    GenerationConfig gen;
    gen.radar = RadarConfig::desk();
    gen.interferer_counts = {4, 5, 6};
    gen.snr_db_max = 30;
    KeyValueConfig kv;
    gen.write_to(kv);
    const auto back = GenerationConfig::from_config(KeyValueConfig::parse(kv.to_string()));
    KeyValueConfig kv2;
    back.write_to(kv2);
    CHECK(kv2.to_string() == kv.to_string());
    CHECK(back.interferer_counts == std::vector<int>{4, 5, 6});
}
