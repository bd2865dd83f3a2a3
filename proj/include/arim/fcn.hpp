#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "arim/config_file.hpp"
#include "arim/rng.hpp"
#include "arim/tensor.hpp"

namespace arim {

/// Shape of the fully convolutional network.
///
/// Blocks of stride-1 convolutions (leaky ReLU after each) optionally followed
/// by a 2x1 max-pool. The final two convolutions run without activation after
/// a global vertical average, and the very last one is a 1x1 convolution to
/// the three output channels.
struct ArchConfig {
    std::size_t input_frames = 154;
    std::size_t n_fft = 2048;
    std::vector<std::size_t> block_channels{32, 64, 96, 128};
    std::vector<std::size_t> block_kernel_sizes{13, 9, 5, 5};
    std::vector<std::size_t> convs_per_block{3, 3, 2, 2};
    std::vector<bool> pool_after_block{true, true, true, false};
    double leaky_slope = 0.01;
    double capacity_scale = 1.0;

    static constexpr std::size_t kOutputChannels = 3;
    static constexpr std::size_t kInputChannels = 3;

    // Channel count of a block after capacity scaling (rounded up).
    std::size_t scaled_channels(std::size_t block) const;
    std::size_t total_convs() const;
    void validate() const;

    static ArchConfig from_config(const KeyValueConfig& kv);
    void write_to(KeyValueConfig& kv) const;
    static const std::vector<std::string>& config_keys();

    bool operator==(const ArchConfig&) const = default;
};

enum class PadMode {
    Circular,  // circular horizontally, zero vertically
    Zero,
};

// One convolution's learnable arrays. kernel layout: [dy][dx][c_in][c_out].
struct ConvParams {
    std::size_t k = 1;
    std::size_t c_in = 0;
    std::size_t c_out = 0;
    std::vector<double> kernel;
    std::vector<double> bias;

    ConvParams() = default;
    ConvParams(std::size_t side, std::size_t in, std::size_t out)
        : k(side), c_in(in), c_out(out), kernel(side * side * in * out, 0.0), bias(out, 0.0) {}

    double& w(std::size_t dy, std::size_t dx, std::size_t ci, std::size_t co) {
        return kernel[((dy * k + dx) * c_in + ci) * c_out + co];
    }
    double w(std::size_t dy, std::size_t dx, std::size_t ci, std::size_t co) const {
        return kernel[((dy * k + dx) * c_in + ci) * c_out + co];
    }
    std::size_t parameter_count() const { return kernel.size() + bias.size(); }
    bool operator==(const ConvParams&) const = default;
};

// Parameters (or gradients, or optimizer moments) of every convolution in layer order.
using ParameterSet = std::vector<ConvParams>;

ParameterSet zeros_like(const ParameterSet& params);
void set_zero(ParameterSet& params);

Tensor3 conv2d(const Tensor3& input, const ConvParams& conv, PadMode pad = PadMode::Circular);

// Reverse-mode gradient of conv2d; accumulates parameter gradients into `grads`.
// Returns dL/dinput when `want_input_grad`.
Tensor3 conv2d_backward(const Tensor3& input, const ConvParams& conv, const Tensor3& output_grad,
                        ConvParams& grads, bool want_input_grad, PadMode pad = PadMode::Circular);

// Non-overlapping 2x1 vertical max; odd heights replicate the last row.
Tensor3 maxpool_2x1(const Tensor3& input);
Tensor3 maxpool_2x1_backward(const Tensor3& input, const Tensor3& output_grad);

Tensor3 leaky_relu(const Tensor3& input, double slope);
Tensor3 leaky_relu_backward(const Tensor3& input, const Tensor3& output_grad, double slope);

// Global average over the vertical axis.
Tensor3 vertical_collapse(const Tensor3& input);
Tensor3 vertical_collapse_backward(const Tensor3& input, const Tensor3& output_grad);

enum class LayerKind { Conv, LeakyRelu, MaxPool, Dropout, VerticalCollapse };

struct Layer {
    LayerKind kind;
    std::size_t conv_index = 0;  // valid for Conv
};

struct ForwardOptions {
    bool training = false;
    double dropout_rate = 0.0;
    Rng* dropout_rng = nullptr;
};

class FcnModel {
public:
    // Kernels ~ N(0, 2 / fan_in), biases zero.
    static FcnModel build(const ArchConfig& cfg, Rng& rng);

    const ArchConfig& config() const { return cfg_; }
    const std::vector<Layer>& layers() const { return layers_; }
    const ParameterSet& params() const { return params_; }
    ParameterSet& params() { return params_; }

    std::size_t parameter_count() const;
    std::size_t conv_count() const { return params_.size(); }

    // Runs the network and retains intermediates for backward().
    Tensor3 forward(const Tensor3& input, const ForwardOptions& opts = {});

    // Stateless inference; safe to call concurrently on a shared model.
    Tensor3 infer(const Tensor3& input) const;

    // Accumulates dL/dparams into `grads` (shaped like params()).
    void backward(const Tensor3& output_grad, ParameterSet& grads);
    ParameterSet backward(const Tensor3& output_grad);

    // Output of layer `i` from the last forward(); index 0 is the network input.
    const Tensor3& activation(std::size_t i) const;

    void save(const std::filesystem::path& path) const;
    static FcnModel load(const std::filesystem::path& path);

private:
    FcnModel() = default;
    void check_input(const Tensor3& input) const;
    Tensor3 run(const Tensor3& input, const ForwardOptions& opts, std::vector<Tensor3>* acts,
                std::vector<Tensor3>* masks) const;

    ArchConfig cfg_;
    std::vector<Layer> layers_;
    ParameterSet params_;
    std::vector<Tensor3> acts_;
    std::vector<Tensor3> dropout_masks_;
    bool has_forward_ = false;
};

// Sum over convolutions of k^2 * c_in * c_out + c_out.
std::size_t expected_parameter_count(const ArchConfig& cfg);

// Checkpoint layout helpers shared with the training-state file.
void write_arch(std::ostream& out, const ArchConfig& cfg);
ArchConfig read_arch(std::istream& in);

} // namespace arim
