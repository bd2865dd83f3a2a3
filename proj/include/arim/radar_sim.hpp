#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "arim/config_file.hpp"
#include "arim/rng.hpp"

namespace arim {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

inline constexpr double kSpeedOfLight = 299'792'458.0;

// Fixed sensor parameters. Defaults are the automotive sensor of the ARIM-v2 set.
struct RadarConfig {
    double bandwidth_hz = 1.6e9;
    double chirp_time_s = 25.6e-6;
    double sample_rate_hz = 40e6;
    double carrier_hz = 78e9;

    double slope() const { return bandwidth_hz / chirp_time_s; }
    std::size_t samples_per_chirp() const;
    // Throws ConfigError when an invariant does not hold.
    void validate() const;

    // Desk-scale sensor: same chirp slope and sample rate, 256 samples per chirp.
    static RadarConfig desk();
};

struct TargetSpec {
    double distance_m = 0.0;
    double amplitude = 1.0;
    double phase_rad = 0.0;
    bool operator==(const TargetSpec&) const = default;
};

struct InterferenceSpec {
    double slope_ratio = 0.0;    // interferer slope / victim slope
    double sir_db = 0.0;         // per-interferer, referenced to the strongest target
    double center_time_s = 0.0;  // instant the beat frequency crosses zero
    double phase_rad = 0.0;
    bool operator==(const InterferenceSpec&) const = default;
};

// Disables noise when passed as snr_db.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct ScenarioSample {
    ComplexVector clean_signal;
    ComplexVector interfered_signal;
    std::vector<TargetSpec> targets;
    std::vector<InterferenceSpec> interferers;
    double snr_db = kNoNoise;

    double strongest_amplitude() const;
    bool operator==(const ScenarioSample&) const = default;
};

// Parameter ranges for scenario sampling. Defaults reproduce the published
// generation table.
struct GenerationConfig {
    RadarConfig radar;
    std::vector<int> interferer_counts{1, 2, 3};
    double snr_db_min = 5.0;
    double snr_db_max = 40.0;
    double snr_db_step = 5.0;
    bool noise_enabled = true;
    double sir_db_min = -5.0;
    double sir_db_max = 40.0;
    double slope_ratio_min = 0.0;
    double slope_ratio_max = 1.5;
    int targets_min = 1;
    int targets_max = 4;
    double amplitude_min = 0.01;
    double amplitude_max = 1.0;
    double distance_min_m = 2.0;
    double distance_max_m = 95.0;
    double phase_min_rad = -std::numbers::pi;
    double phase_max_rad = std::numbers::pi;

    void validate() const;

    // Reads the keys it knows from `kv`; missing keys keep their defaults.
    static GenerationConfig from_config(const KeyValueConfig& kv);
    void write_to(KeyValueConfig& kv) const;
    static const std::vector<std::string>& config_keys();
};

double beat_frequency(double distance_m, const RadarConfig& cfg);

ComplexVector synth_clean_beat(std::span<const TargetSpec> targets, const RadarConfig& cfg);

// One interferer's contribution, gated by the anti-aliasing filter.
ComplexVector synth_interference_component(const InterferenceSpec& interferer, double ref_power,
                                           const RadarConfig& cfg);

ComplexVector synth_interference(std::span<const InterferenceSpec> interferers, double ref_power,
                                 const RadarConfig& cfg);

// Samples where the interferer's instantaneous beat frequency passes the
// anti-aliasing filter.
std::vector<bool> interference_gate(const InterferenceSpec& interferer, const RadarConfig& cfg);

// Adds circular complex white Gaussian noise. snr_db == kNoNoise leaves the
// signal untouched and consumes no random numbers.
ComplexVector add_noise(std::span<const Complex> signal, double snr_db, double ref_power, Rng& rng);

ScenarioSample sample_scenario(const GenerationConfig& gen, Rng& rng);

// Per-sample seeding used by dataset generation.
inline std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index) {
    return base_seed + index;
}

} // namespace arim
