#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "arim/config_file.hpp"
#include "arim/fcn.hpp"
#include "arim/metrics.hpp"
#include "arim/mitigate.hpp"
#include "arim/radar_sim.hpp"
#include "arim/spectral.hpp"
#include "arim/train.hpp"

namespace arim {

// Everything a run reads from its configuration file.
struct ExperimentConfig {
    GenerationConfig generation;
    StftConfig stft;
    ArchConfig arch;
    TrainConfig train;
    ZeroingConfig zeroing;
    MetricConfig metrics;
    std::size_t samples = 2400;
    std::uint64_t seed = 0;
    double test_fraction = 1.0 / 6.0;
    double validation_fraction = 0.2;

    // Unknown keys raise ConfigError.
    static ExperimentConfig from_config(const KeyValueConfig& kv);
    static ExperimentConfig load(const std::filesystem::path& path);
    KeyValueConfig to_config() const;

    static std::vector<std::string> known_keys();
};

} // namespace arim
