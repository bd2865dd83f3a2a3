#pragma once

#include <span>
#include <string>
#include <vector>

#include "arim/fcn.hpp"
#include "arim/radar_sim.hpp"
#include "arim/spectral.hpp"

namespace arim {

struct ZeroingConfig {
    double detection_factor = 4.0;  // multiple of the median sample magnitude
    int guard_samples = 2;          // dilation on each side of a detection

    void validate() const;
    static ZeroingConfig from_config(const KeyValueConfig& kv);
    void write_to(KeyValueConfig& kv) const;
    static const std::vector<std::string>& config_keys();
};

struct MitigationResult {
    ComplexVector profile;           // length n_fft
    std::vector<double> magnitude;   // |profile| except for the network, whose magnitude channel is kept
    std::string method;
    double scale = 1.0;
};

// Marks |s[n]| > factor * median(|s|), dilated by guard_samples.
std::vector<bool> detect_interference_samples(std::span<const Complex> signal, const ZeroingConfig& cfg);

MitigationResult zero_mitigate(std::span<const Complex> signal, const ZeroingConfig& cfg, std::size_t n_fft);

MitigationResult model_mitigate(const FcnModel& model, std::span<const Complex> signal, const StftConfig& stft_cfg);

MitigationResult oracle_profile(const ScenarioSample& sample, std::size_t n_fft);

// Profile of the interfered signal with no mitigation.
MitigationResult unmitigated_profile(const ScenarioSample& sample, std::size_t n_fft);

} // namespace arim
