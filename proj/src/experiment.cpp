#include "arim/experiment.hpp"

#include "arim/error.hpp"

namespace arim {

std::vector<std::string> ExperimentConfig::known_keys() {
    std::vector<std::string> keys{"samples", "seed", "test_fraction", "validation_fraction"};
    for (const auto* group : {&GenerationConfig::config_keys(), &StftConfig::config_keys(), &ArchConfig::config_keys(),
                              &TrainConfig::config_keys(), &ZeroingConfig::config_keys(),
                              &MetricConfig::config_keys()}) {
        keys.insert(keys.end(), group->begin(), group->end());
    }
    return keys;
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& kv) {
    const auto unknown = kv.unknown_keys(known_keys());
    if (!unknown.empty()) {
        std::string list;
        for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError("unknown configuration keys: " + list);
    }
    ExperimentConfig c;
    c.generation = GenerationConfig::from_config(kv);
    c.stft = StftConfig::from_config(kv);
    c.arch = ArchConfig::from_config(kv);
    c.train = TrainConfig::from_config(kv);
    c.zeroing = ZeroingConfig::from_config(kv);
    c.metrics = MetricConfig::from_config(kv);
    const long long samples = kv.get_int_or("samples", static_cast<long long>(c.samples));
    if (samples < 0) throw ConfigError("samples must be non-negative");
    c.samples = static_cast<std::size_t>(samples);
    c.seed = static_cast<std::uint64_t>(kv.get_int_or("seed", 0));
    c.test_fraction = kv.get_double_or("test_fraction", c.test_fraction);
    c.validation_fraction = kv.get_double_or("validation_fraction", c.validation_fraction);
    if (!(c.test_fraction >= 0 && c.test_fraction <= 1)) throw ConfigError("test_fraction must be in [0, 1]");
    if (!(c.validation_fraction >= 0 && c.validation_fraction < 1)) {
        throw ConfigError("validation_fraction must be in [0, 1)");
    }
    c.generation.validate();
    c.stft.validate(c.generation.radar.samples_per_chirp());
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    return from_config(KeyValueConfig::load(path));
}

KeyValueConfig ExperimentConfig::to_config() const {
    KeyValueConfig kv;
    generation.write_to(kv);
    stft.write_to(kv);
    arch.write_to(kv);
    train.write_to(kv);
    zeroing.write_to(kv);
    metrics.write_to(kv);
    kv.set("samples", std::to_string(samples));
    kv.set("seed", std::to_string(seed));
    kv.set("test_fraction", format_double(test_fraction));
    kv.set("validation_fraction", format_double(validation_fraction));
    return kv;
}

} // namespace arim
