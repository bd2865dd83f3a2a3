#include "arim/radar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "arim/error.hpp"

namespace arim {

std::size_t RadarConfig::samples_per_chirp() const {
    return static_cast<std::size_t>(std::llround(chirp_time_s * sample_rate_hz));
}

void RadarConfig::validate() const {
    if (!(bandwidth_hz > 0) || !(chirp_time_s > 0) || !(sample_rate_hz > 0) || !(carrier_hz > 0)) {
        throw ConfigError("radar parameters must be positive");
    }
    const double n = chirp_time_s * sample_rate_hz;
    if (n < 0.5 || std::abs(n - std::round(n)) > 1e-6 * std::max(1.0, n)) {
        throw ConfigError("chirp_time_s * sample_rate_hz must be a positive integer, got " +
                          std::to_string(n));
    }
    if (!std::isfinite(slope())) throw ConfigError("chirp slope is not finite");
}

RadarConfig RadarConfig::desk() {
    RadarConfig cfg;
    cfg.chirp_time_s = 6.4e-6;
    cfg.bandwidth_hz = 0.4e9;
    return cfg;
}

double ScenarioSample::strongest_amplitude() const {
    double best = 0.0;
    for (const auto& t : targets) best = std::max(best, t.amplitude);
    return best;
}

double beat_frequency(double distance_m, const RadarConfig& cfg) {
    if (!(distance_m > 0)) throw DomainError("beat_frequency: distance must be positive");
    return 2.0 * cfg.bandwidth_hz * distance_m / (kSpeedOfLight * cfg.chirp_time_s);
}

ComplexVector synth_clean_beat(std::span<const TargetSpec> targets, const RadarConfig& cfg) {
    if (targets.empty()) throw DomainError("synth_clean_beat: empty target list");
    const std::size_t n = cfg.samples_per_chirp();
    ComplexVector out(n, Complex{});
    for (const auto& target : targets) {
        const double fb = beat_frequency(target.distance_m, cfg);
        if (fb >= cfg.sample_rate_hz) {
            throw DomainError("synth_clean_beat: target at " + std::to_string(target.distance_m) +
                              " m aliases (beat frequency >= sample rate)");
        }
        const double step = 2.0 * std::numbers::pi * fb / cfg.sample_rate_hz;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] += std::polar(target.amplitude, step * static_cast<double>(i) + target.phase_rad);
        }
    }
    return out;
}

std::vector<bool> interference_gate(const InterferenceSpec& interferer, const RadarConfig& cfg) {
    const std::size_t n = cfg.samples_per_chirp();
    const double fs = cfg.sample_rate_hz;
    const double delta_slope = cfg.slope() * (1.0 - interferer.slope_ratio);
    std::vector<bool> gate(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = static_cast<double>(i) / fs - interferer.center_time_s;
        gate[i] = std::abs(delta_slope * dt) <= 0.5 * fs;
    }
    return gate;
}

ComplexVector synth_interference_component(const InterferenceSpec& interferer, double ref_power,
                                           const RadarConfig& cfg) {
    if (!(ref_power > 0)) throw DomainError("synth_interference: ref_power must be positive");
    const std::size_t n = cfg.samples_per_chirp();
    const double fs = cfg.sample_rate_hz;
    const double delta_slope = cfg.slope() * (1.0 - interferer.slope_ratio);
    const auto gate = interference_gate(interferer, cfg);
    const auto support = static_cast<std::size_t>(std::count(gate.begin(), gate.end(), true));
    ComplexVector out(n, Complex{});
    if (support == 0) return out;

    // Power averaged over the whole chirp meets the requested SIR.
    const double power = ref_power * std::pow(10.0, -interferer.sir_db / 10.0);
    const double amplitude =
        std::sqrt(power * static_cast<double>(n) / static_cast<double>(support));
    for (std::size_t i = 0; i < n; ++i) {
        if (!gate[i]) continue;
        const double dt = static_cast<double>(i) / fs - interferer.center_time_s;
        out[i] = std::polar(amplitude, std::numbers::pi * delta_slope * dt * dt + interferer.phase_rad);
    }
    return out;
}

ComplexVector synth_interference(std::span<const InterferenceSpec> interferers, double ref_power,
                                 const RadarConfig& cfg) {
    if (!(ref_power > 0)) throw DomainError("synth_interference: ref_power must be positive");
    ComplexVector out(cfg.samples_per_chirp(), Complex{});
    for (const auto& interferer : interferers) {
        const auto part = synth_interference_component(interferer, ref_power, cfg);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += part[i];
    }
    return out;
}

ComplexVector add_noise(std::span<const Complex> signal, double snr_db, double ref_power, Rng& rng) {
    if (!(ref_power > 0)) throw DomainError("add_noise: ref_power must be positive");
    ComplexVector out(signal.begin(), signal.end());
    if (std::isinf(snr_db) && snr_db > 0) return out;
    const double variance = ref_power / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(variance / 2.0);
    for (auto& s : out) {
        const double re = rng.normal();
        const double im = rng.normal();
        s += Complex(sigma * re, sigma * im);
    }
    return out;
}

void GenerationConfig::validate() const {
    radar.validate();
    auto check_range = [](double lo, double hi, const char* name) {
        if (!(lo <= hi)) throw ConfigError(std::string("invalid range for ") + name);
    };
    if (interferer_counts.empty()) throw ConfigError("interference_sources must not be empty");
    for (int c : interferer_counts) {
        if (c < 0) throw ConfigError("interference_sources entries must be >= 0");
    }
    check_range(snr_db_min, snr_db_max, "snr_db");
    if (!(snr_db_step > 0)) throw ConfigError("snr_db_step must be positive");
    check_range(sir_db_min, sir_db_max, "sir_db");
    check_range(slope_ratio_min, slope_ratio_max, "slope_ratio");
    if (targets_min < 1) throw ConfigError("targets_min must be >= 1");
    if (targets_min > targets_max) throw ConfigError("invalid range for targets");
    check_range(amplitude_min, amplitude_max, "target_amplitude");
    if (!(amplitude_min > 0)) throw ConfigError("target_amplitude_min must be positive");
    check_range(distance_min_m, distance_max_m, "target_distance_m");
    if (!(distance_min_m > 0)) throw ConfigError("target_distance_min_m must be positive");
    if (beat_frequency(distance_max_m, radar) >= radar.sample_rate_hz) {
        throw ConfigError("target_distance_max_m exceeds the alias-free range");
    }
    check_range(phase_min_rad, phase_max_rad, "target_phase_rad");
}

ScenarioSample sample_scenario(const GenerationConfig& gen, Rng& rng) {
    gen.validate();
    ScenarioSample s;

    const auto count_index = rng.uniform_int(0, static_cast<std::int64_t>(gen.interferer_counts.size()) - 1);
    const int n_int = gen.interferer_counts[static_cast<std::size_t>(count_index)];

    const auto snr_steps =
        static_cast<std::int64_t>(std::floor((gen.snr_db_max - gen.snr_db_min) / gen.snr_db_step + 1e-9));
    const double snr_db = gen.snr_db_min + gen.snr_db_step * static_cast<double>(rng.uniform_int(0, snr_steps));
    s.snr_db = gen.noise_enabled ? snr_db : kNoNoise;

    const auto n_targets = rng.uniform_int(gen.targets_min, gen.targets_max);
    for (std::int64_t j = 0; j < n_targets; ++j) {
        TargetSpec t;
        t.distance_m = rng.uniform(gen.distance_min_m, gen.distance_max_m);
        t.amplitude = rng.uniform(gen.amplitude_min, gen.amplitude_max);
        t.phase_rad = rng.uniform(gen.phase_min_rad, gen.phase_max_rad);
        s.targets.push_back(t);
    }
    for (int k = 0; k < n_int; ++k) {
        InterferenceSpec i;
        i.slope_ratio = rng.uniform(gen.slope_ratio_min, gen.slope_ratio_max);
        i.sir_db = rng.uniform(gen.sir_db_min, gen.sir_db_max);
        i.center_time_s = rng.uniform(0.0, gen.radar.chirp_time_s);
        i.phase_rad = rng.uniform(-std::numbers::pi, std::numbers::pi);
        s.interferers.push_back(i);
    }

    const double ref_power = s.strongest_amplitude() * s.strongest_amplitude();
    s.clean_signal = synth_clean_beat(s.targets, gen.radar);
    const auto interference = synth_interference(s.interferers, ref_power, gen.radar);
    ComplexVector corrupted(s.clean_signal.size());
    for (std::size_t i = 0; i < corrupted.size(); ++i) corrupted[i] = s.clean_signal[i] + interference[i];
    s.interfered_signal = add_noise(corrupted, s.snr_db, ref_power, rng);
    return s;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

} // namespace

const std::vector<std::string>& GenerationConfig::config_keys() {
    static const std::vector<std::string> keys{
        "bandwidth_hz",         "chirp_time_s",         "sample_rate_hz",
        "carrier_hz",           "interference_sources", "snr_db_min",
        "snr_db_max",           "snr_db_step",          "noise",
        "sir_db_min",           "sir_db_max",           "slope_ratio_min",
        "slope_ratio_max",      "targets_min",          "targets_max",
        "target_amplitude_min", "target_amplitude_max", "target_distance_min_m",
        "target_distance_max_m", "target_phase_min_rad", "target_phase_max_rad",
    };
    return keys;
}

GenerationConfig GenerationConfig::from_config(const KeyValueConfig& kv) {
    GenerationConfig g;
    g.radar.bandwidth_hz = kv.get_double_or("bandwidth_hz", g.radar.bandwidth_hz);
    g.radar.chirp_time_s = kv.get_double_or("chirp_time_s", g.radar.chirp_time_s);
    g.radar.sample_rate_hz = kv.get_double_or("sample_rate_hz", g.radar.sample_rate_hz);
    g.radar.carrier_hz = kv.get_double_or("carrier_hz", g.radar.carrier_hz);
    if (auto counts = kv.get_int_list("interference_sources")) {
        g.interferer_counts.assign(counts->begin(), counts->end());
    }
    g.snr_db_min = kv.get_double_or("snr_db_min", g.snr_db_min);
    g.snr_db_max = kv.get_double_or("snr_db_max", g.snr_db_max);
    g.snr_db_step = kv.get_double_or("snr_db_step", g.snr_db_step);
    g.noise_enabled = kv.get_bool("noise").value_or(g.noise_enabled);
    g.sir_db_min = kv.get_double_or("sir_db_min", g.sir_db_min);
    g.sir_db_max = kv.get_double_or("sir_db_max", g.sir_db_max);
    g.slope_ratio_min = kv.get_double_or("slope_ratio_min", g.slope_ratio_min);
    g.slope_ratio_max = kv.get_double_or("slope_ratio_max", g.slope_ratio_max);
    g.targets_min = static_cast<int>(kv.get_int_or("targets_min", g.targets_min));
    g.targets_max = static_cast<int>(kv.get_int_or("targets_max", g.targets_max));
    g.amplitude_min = kv.get_double_or("target_amplitude_min", g.amplitude_min);
    g.amplitude_max = kv.get_double_or("target_amplitude_max", g.amplitude_max);
    g.distance_min_m = kv.get_double_or("target_distance_min_m", g.distance_min_m);
    g.distance_max_m = kv.get_double_or("target_distance_max_m", g.distance_max_m);
    g.phase_min_rad = kv.get_double_or("target_phase_min_rad", g.phase_min_rad);
    g.phase_max_rad = kv.get_double_or("target_phase_max_rad", g.phase_max_rad);
    g.validate();
    return g;
}

void GenerationConfig::write_to(KeyValueConfig& kv) const {
    kv.set("bandwidth_hz", format_double(radar.bandwidth_hz));
    kv.set("chirp_time_s", format_double(radar.chirp_time_s));
    kv.set("sample_rate_hz", format_double(radar.sample_rate_hz));
    kv.set("carrier_hz", format_double(radar.carrier_hz));
    kv.set("interference_sources", join_ints(interferer_counts));
    kv.set("snr_db_min", format_double(snr_db_min));
    kv.set("snr_db_max", format_double(snr_db_max));
    kv.set("snr_db_step", format_double(snr_db_step));
    kv.set("noise", noise_enabled ? "on" : "off");
    kv.set("sir_db_min", format_double(sir_db_min));
    kv.set("sir_db_max", format_double(sir_db_max));
    kv.set("slope_ratio_min", format_double(slope_ratio_min));
    kv.set("slope_ratio_max", format_double(slope_ratio_max));
    kv.set("targets_min", std::to_string(targets_min));
    kv.set("targets_max", std::to_string(targets_max));
    kv.set("target_amplitude_min", format_double(amplitude_min));
    kv.set("target_amplitude_max", format_double(amplitude_max));
    kv.set("target_distance_min_m", format_double(distance_min_m));
    kv.set("target_distance_max_m", format_double(distance_max_m));
    kv.set("target_phase_min_rad", format_double(phase_min_rad));
    kv.set("target_phase_max_rad", format_double(phase_max_rad));
}

} // namespace arim
