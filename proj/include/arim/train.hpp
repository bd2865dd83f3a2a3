#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arim/config_file.hpp"
#include "arim/fcn.hpp"
#include "arim/radar_sim.hpp"
#include "arim/spectral.hpp"

namespace arim {

struct LossConfig {
    double lambda = 10.0;
};

struct LossResult {
    double value = 0.0;
    Tensor3 grad;  // dL/dprediction
};

// L = MSE(magnitude) + lambda * (MSE(real) + MSE(imag)), channels (real, magnitude, imag).
LossResult composite_loss(const Tensor3& prediction, const Tensor3& label, const LossConfig& cfg);

enum class Regime { Conventional, Dropout, Wenort };

Regime parse_regime(const std::string& name);
std::string regime_name(Regime regime);

struct TrainConfig {
    int epochs_stage1 = 100;
    int epochs_stage2 = 20;
    std::size_t batch_size = 16;
    double learning_rate = 5e-5;
    double weight_decay = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int early_stop_patience = 10;
    Regime regime = Regime::Conventional;
    double dropout_rate = 0.25;
    double noise_reduction_ratio = 0.3;
    bool rebuild_mask_each_step = false;
    LossConfig loss;
    std::uint64_t seed = 0;
    // When false the log's wall_seconds column is written as 0 so that logs
    // of repeated runs compare byte-for-byte.
    bool log_wall_time = true;

    void validate() const;
    static TrainConfig from_config(const KeyValueConfig& kv);
    void write_to(KeyValueConfig& kv) const;
    static const std::vector<std::string>& config_keys();
};

struct AdamState {
    ParameterSet m;
    ParameterSet v;
    std::uint64_t step = 0;

    static AdamState for_params(const ParameterSet& params);
};

// One bias-corrected Adam update with coupled L2 weight decay.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, const TrainConfig& cfg);

/// Binary keep-mask over every convolution kernel (biases are never masked).
struct WenortMask {
    std::vector<std::vector<std::uint8_t>> keep;  // per conv, 1 = keep, 0 = zeroed
    std::size_t masked_count = 0;
    std::size_t total = 0;

    double masked_fraction() const {
        return total ? static_cast<double>(masked_count) / static_cast<double>(total) : 0.0;
    }
    void apply(ParameterSet& params) const;
    bool operator==(const WenortMask&) const = default;
};

// Masks exactly floor(r * n) smallest-magnitude kernel weights; ties are broken
// by (layer index, flat index).
WenortMask build_wenort_mask(const ParameterSet& params, double r);
WenortMask build_wenort_mask(const FcnModel& model, double r);

struct Example {
    Tensor3 input;
    Tensor3 label;
    double scale = 1.0;
};

Example make_example(const ScenarioSample& sample, const StftConfig& stft);

// Architecture input shape implied by a chirp length and STFT configuration.
ArchConfig arch_for(ArchConfig arch, std::size_t signal_len, const StftConfig& stft);

struct TrainingData {
    std::vector<ScenarioSample> train;
    std::vector<ScenarioSample> validation;
    StftConfig stft;
};

struct EpochLog {
    int epoch = 0;
    int stage = 1;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double masked_fraction = 0.0;
    double wall_seconds = 0.0;
    bool operator==(const EpochLog&) const = default;
};

std::string training_log_csv(std::span<const EpochLog> log);

// Everything needed to continue a run after an interruption.
struct TrainState {
    ParameterSet params;
    ParameterSet best_params;
    AdamState adam;
    int next_epoch = 0;  // global epoch counter (0-based)
    int stage = 1;
    double best_loss = 0.0;
    bool has_best = false;
    int epochs_since_best = 0;
    std::optional<WenortMask> mask;
    std::vector<EpochLog> log;

    void save(const std::filesystem::path& path) const;
    static TrainState load(const std::filesystem::path& path);
};

struct TrainResult {
    FcnModel model;
    std::vector<EpochLog> log;
    std::optional<WenortMask> mask;
};

struct TrainHooks {
    // Called after every epoch with the resumable state.
    std::function<void(const TrainState&, const FcnModel&)> on_epoch;
    // Called after every parameter update during stage 2 (test instrumentation).
    std::function<void(const FcnModel&, const WenortMask&)> on_stage2_update;
};

/// Two-stage training. Stage 1 is conventional minibatch Adam with early
/// stopping on validation loss (best parameters restored). For the WeNoRT
/// regime, stage 2 builds the mask once and zeroes masked weights after every
/// update. Conventional and dropout regimes run both epoch budgets in stage 1.
TrainResult train(FcnModel model, const TrainingData& data, const TrainConfig& cfg,
                  const TrainHooks& hooks = {}, std::optional<TrainState> resume = std::nullopt);

// Mean composite loss of `model` over `samples`, inference mode.
double evaluate_loss(const FcnModel& model, std::span<const ScenarioSample> samples, const StftConfig& stft,
                     const LossConfig& loss);

} // namespace arim
