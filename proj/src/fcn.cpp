#include "arim/fcn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "arim/binary_io.hpp"
#include "arim/error.hpp"
#include "arim/simd/kernels.hpp"

namespace arim {

// ---------------------------------------------------------------------------
// ArchConfig

std::size_t ArchConfig::scaled_channels(std::size_t block) const {
    return static_cast<std::size_t>(std::ceil(static_cast<double>(block_channels.at(block)) * capacity_scale - 1e-9));
}

std::size_t ArchConfig::total_convs() const {
    std::size_t n = 0;
    for (auto c : convs_per_block) n += c;
    return n;
}

void ArchConfig::validate() const {
    const std::size_t blocks = block_channels.size();
    if (blocks == 0) throw ConfigError("architecture needs at least one block");
    if (block_kernel_sizes.size() != blocks || convs_per_block.size() != blocks ||
        pool_after_block.size() != blocks) {
        throw ConfigError("architecture block lists must have equal length");
    }
    if (input_frames == 0 || n_fft == 0) throw ConfigError("architecture input shape must be positive");
    if (total_convs() < 2) throw ConfigError("architecture needs at least two convolutions");
    for (std::size_t b = 0; b < blocks; ++b) {
        if (block_kernel_sizes[b] % 2 == 0) throw ConfigError("kernel sides must be odd");
        if (block_channels[b] == 0) throw ConfigError("block channel counts must be positive");
    }
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must be in [0, 1)");
    if (!(capacity_scale > 0.0 && capacity_scale <= 1.0)) throw ConfigError("capacity_scale must be in (0, 1]");
}

const std::vector<std::string>& ArchConfig::config_keys() {
    static const std::vector<std::string> keys{
        "arch_block_channels", "arch_kernel_sizes", "arch_convs_per_block",
        "arch_pool_after_block", "arch_leaky_slope", "arch_capacity",
    };
    return keys;
}

ArchConfig ArchConfig::from_config(const KeyValueConfig& kv) {
    ArchConfig a;
    auto sizes = [&](const char* key, std::vector<std::size_t>& dst) {
        if (auto v = kv.get_int_list(key)) {
            dst.clear();
            for (auto x : *v) {
                if (x <= 0) throw ConfigError(std::string(key) + " entries must be positive");
                dst.push_back(static_cast<std::size_t>(x));
            }
        }
    };
    sizes("arch_block_channels", a.block_channels);
    sizes("arch_kernel_sizes", a.block_kernel_sizes);
    sizes("arch_convs_per_block", a.convs_per_block);
    if (auto v = kv.get_int_list("arch_pool_after_block")) {
        a.pool_after_block.clear();
        for (auto x : *v) a.pool_after_block.push_back(x != 0);
    }
    a.leaky_slope = kv.get_double_or("arch_leaky_slope", a.leaky_slope);
    a.capacity_scale = kv.get_double_or("arch_capacity", a.capacity_scale);
    return a;
}

void ArchConfig::write_to(KeyValueConfig& kv) const {
    auto join = [](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(static_cast<std::size_t>(v[i]));
        }
        return s;
    };
    kv.set("arch_block_channels", join(block_channels));
    kv.set("arch_kernel_sizes", join(block_kernel_sizes));
    kv.set("arch_convs_per_block", join(convs_per_block));
    kv.set("arch_pool_after_block", join(pool_after_block));
    kv.set("arch_leaky_slope", format_double(leaky_slope));
    kv.set("arch_capacity", format_double(capacity_scale));
}

std::size_t expected_parameter_count(const ArchConfig& cfg) {
    std::size_t total = 0;
    std::size_t c_in = ArchConfig::kInputChannels;
    const std::size_t convs = cfg.total_convs();
    std::size_t index = 0;
    for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
        for (std::size_t i = 0; i < cfg.convs_per_block[b]; ++i, ++index) {
            const bool last = index + 1 == convs;
            const std::size_t k = last ? 1 : cfg.block_kernel_sizes[b];
            const std::size_t c_out = last ? ArchConfig::kOutputChannels : cfg.scaled_channels(b);
            total += k * k * c_in * c_out + c_out;
            c_in = c_out;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Parameter sets

ParameterSet zeros_like(const ParameterSet& params) {
    ParameterSet out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.k, p.c_in, p.c_out);
    return out;
}

void set_zero(ParameterSet& params) {
    for (auto& p : params) {
        std::fill(p.kernel.begin(), p.kernel.end(), 0.0);
        std::fill(p.bias.begin(), p.bias.end(), 0.0);
    }
}

// ---------------------------------------------------------------------------
// Layer primitives

namespace {

void check_conv(const Tensor3& input, const ConvParams& conv) {
    if (conv.k % 2 == 0) throw ConfigError("conv2d: kernel side must be odd, got " + std::to_string(conv.k));
    if (input.c != conv.c_in) {
        throw ShapeError("conv2d: input has " + std::to_string(input.c) + " channels, kernel expects " +
                         std::to_string(conv.c_in));
    }
}

// Copies each row into width + k - 1 columns so that column x + dx of the
// padded row holds input column x + dx - k/2 (wrapped or zero).
Tensor3 pad_width(const Tensor3& t, std::size_t k, PadMode pad) {
    const std::size_t half = k / 2;
    Tensor3 out(t.h, t.w + k - 1, t.c);
    const auto w = static_cast<std::ptrdiff_t>(t.w);
    for (std::size_t y = 0; y < t.h; ++y) {
        for (std::size_t xp = 0; xp < out.w; ++xp) {
            std::ptrdiff_t x = static_cast<std::ptrdiff_t>(xp) - static_cast<std::ptrdiff_t>(half);
            if (pad == PadMode::Circular) {
                x = ((x % w) + w) % w;
            } else if (x < 0 || x >= w) {
                continue;
            }
            std::copy_n(t.row(y) + static_cast<std::size_t>(x) * t.c, t.c, out.row(y) + xp * t.c);
        }
    }
    return out;
}

} // namespace

Tensor3 conv2d(const Tensor3& input, const ConvParams& conv, PadMode pad) {
    check_conv(input, conv);
    const auto& kern = simd::active();
    const std::size_t k = conv.k;
    const std::size_t half = k / 2;
    const Tensor3 padded = pad_width(input, k, pad);
    Tensor3 out(input.h, input.w, conv.c_out);

    std::vector<const double*> a_segs;
    std::vector<const double*> b_segs;
    a_segs.reserve(k * k);
    b_segs.reserve(k * k);
    for (std::size_t y = 0; y < input.h; ++y) {
        double* orow = out.row(y);
        for (std::size_t x = 0; x < input.w; ++x) {
            std::copy(conv.bias.begin(), conv.bias.end(), orow + x * conv.c_out);
        }
        a_segs.clear();
        b_segs.clear();
        for (std::size_t dy = 0; dy < k; ++dy) {
            const auto yy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(half);
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(input.h)) continue;
            for (std::size_t dx = 0; dx < k; ++dx) {
                a_segs.push_back(padded.row(static_cast<std::size_t>(yy)) + dx * conv.c_in);
                b_segs.push_back(conv.kernel.data() + (dy * k + dx) * conv.c_in * conv.c_out);
            }
        }
        if (!a_segs.empty()) {
            kern.gemm_nn_segments(input.w, conv.c_out, conv.c_in, a_segs.size(), a_segs.data(), conv.c_in,
                                  b_segs.data(), conv.c_out, orow, conv.c_out);
        }
    }
    return out;
}

Tensor3 conv2d_backward(const Tensor3& input, const ConvParams& conv, const Tensor3& output_grad,
                        ConvParams& grads, bool want_input_grad, PadMode pad) {
    check_conv(input, conv);
    if (output_grad.h != input.h || output_grad.w != input.w || output_grad.c != conv.c_out) {
        throw ShapeError("conv2d_backward: output gradient shape " + output_grad.shape_string());
    }
    const auto& kern = simd::active();
    const std::size_t k = conv.k;
    const std::size_t half = k / 2;
    const auto height = static_cast<std::ptrdiff_t>(input.h);

    for (std::size_t y = 0; y < output_grad.h; ++y) {
        const double* g = output_grad.row(y);
        for (std::size_t x = 0; x < output_grad.w; ++x) {
            for (std::size_t co = 0; co < conv.c_out; ++co) grads.bias[co] += g[x * conv.c_out + co];
        }
    }

    const Tensor3 padded = pad_width(input, k, pad);
    for (std::size_t y = 0; y < input.h; ++y) {
        for (std::size_t dy = 0; dy < k; ++dy) {
            const auto yy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(half);
            if (yy < 0 || yy >= height) continue;
            for (std::size_t dx = 0; dx < k; ++dx) {
                kern.gemm_tn(conv.c_in, conv.c_out, input.w, padded.row(static_cast<std::size_t>(yy)) + dx * conv.c_in,
                             conv.c_in, output_grad.row(y), conv.c_out,
                             grads.kernel.data() + (dy * k + dx) * conv.c_in * conv.c_out, conv.c_out);
            }
        }
    }
    if (!want_input_grad) return {};

    // dL/dinput is a correlation of the padded output gradient with the
    // spatially flipped, channel-transposed kernel.
    std::vector<double> flipped(conv.kernel.size());
    for (std::size_t tap = 0; tap < k * k; ++tap) {
        for (std::size_t ci = 0; ci < conv.c_in; ++ci) {
            for (std::size_t co = 0; co < conv.c_out; ++co) {
                flipped[(tap * conv.c_out + co) * conv.c_in + ci] = conv.kernel[(tap * conv.c_in + ci) * conv.c_out + co];
            }
        }
    }
    const Tensor3 gpad = pad_width(output_grad, k, pad);
    Tensor3 grad_input(input.h, input.w, input.c);
    std::vector<const double*> a_segs;
    std::vector<const double*> b_segs;
    for (std::size_t y = 0; y < input.h; ++y) {
        a_segs.clear();
        b_segs.clear();
        for (std::size_t dy = 0; dy < k; ++dy) {
            const auto yy = static_cast<std::ptrdiff_t>(y + half) - static_cast<std::ptrdiff_t>(dy);
            if (yy < 0 || yy >= height) continue;
            for (std::size_t dx = 0; dx < k; ++dx) {
                a_segs.push_back(gpad.row(static_cast<std::size_t>(yy)) + (k - 1 - dx) * conv.c_out);
                b_segs.push_back(flipped.data() + (dy * k + dx) * conv.c_out * conv.c_in);
            }
        }
        if (!a_segs.empty()) {
            kern.gemm_nn_segments(input.w, conv.c_in, conv.c_out, a_segs.size(), a_segs.data(), conv.c_out,
                                  b_segs.data(), conv.c_in, grad_input.row(y), conv.c_in);
        }
    }
    return grad_input;
}

Tensor3 maxpool_2x1(const Tensor3& input) {
    Tensor3 out((input.h + 1) / 2, input.w, input.c);
    const std::size_t row = input.w * input.c;
    for (std::size_t y = 0; y < out.h; ++y) {
        const double* top = input.row(2 * y);
        const double* bottom = input.row(std::min(2 * y + 1, input.h - 1));
        double* o = out.row(y);
        for (std::size_t i = 0; i < row; ++i) o[i] = std::max(top[i], bottom[i]);
    }
    return out;
}

Tensor3 maxpool_2x1_backward(const Tensor3& input, const Tensor3& output_grad) {
    Tensor3 grad(input.h, input.w, input.c);
    const std::size_t row = input.w * input.c;
    for (std::size_t y = 0; y < output_grad.h; ++y) {
        const std::size_t top_y = 2 * y;
        const std::size_t bottom_y = std::min(2 * y + 1, input.h - 1);
        const double* top = input.row(top_y);
        const double* bottom = input.row(bottom_y);
        const double* g = output_grad.row(y);
        for (std::size_t i = 0; i < row; ++i) {
            // Ties (and the replicated odd row) route to the upper element.
            const std::size_t src = bottom[i] > top[i] ? bottom_y : top_y;
            grad.row(src)[i] += g[i];
        }
    }
    return grad;
}

Tensor3 leaky_relu(const Tensor3& input, double slope) {
    Tensor3 out(input.h, input.w, input.c);
    simd::active().leaky_relu(input.data.data(), out.data.data(), input.size(), slope);
    return out;
}

Tensor3 leaky_relu_backward(const Tensor3& input, const Tensor3& output_grad, double slope) {
    Tensor3 grad(input.h, input.w, input.c);
    simd::active().leaky_relu_backward(input.data.data(), output_grad.data.data(), grad.data.data(),
                                       input.size(), slope);
    return grad;
}

Tensor3 vertical_collapse(const Tensor3& input) {
    Tensor3 out(1, input.w, input.c);
    const std::size_t row = input.w * input.c;
    for (std::size_t y = 0; y < input.h; ++y) {
        const double* r = input.row(y);
        for (std::size_t i = 0; i < row; ++i) out.data[i] += r[i];
    }
    const double inv = 1.0 / static_cast<double>(input.h);
    for (auto& v : out.data) v *= inv;
    return out;
}

Tensor3 vertical_collapse_backward(const Tensor3& input, const Tensor3& output_grad) {
    Tensor3 grad(input.h, input.w, input.c);
    const std::size_t row = input.w * input.c;
    const double inv = 1.0 / static_cast<double>(input.h);
    for (std::size_t y = 0; y < input.h; ++y) {
        double* r = grad.row(y);
        for (std::size_t i = 0; i < row; ++i) r[i] = output_grad.data[i] * inv;
    }
    return grad;
}

// ---------------------------------------------------------------------------
// FcnModel

FcnModel FcnModel::build(const ArchConfig& cfg, Rng& rng) {
    cfg.validate();
    FcnModel m;
    m.cfg_ = cfg;
    const std::size_t convs = cfg.total_convs();
    std::size_t c_in = ArchConfig::kInputChannels;
    std::size_t index = 0;
    for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
        for (std::size_t i = 0; i < cfg.convs_per_block[b]; ++i, ++index) {
            const bool last = index + 1 == convs;
            const std::size_t k = last ? 1 : cfg.block_kernel_sizes[b];
            const std::size_t c_out = last ? ArchConfig::kOutputChannels : cfg.scaled_channels(b);
            if (index + 2 == convs) m.layers_.push_back({LayerKind::VerticalCollapse});
            ConvParams p(k, c_in, c_out);
            const double stddev = std::sqrt(2.0 / static_cast<double>(k * k * c_in));
            for (auto& w : p.kernel) w = rng.normal(0.0, stddev);
            m.layers_.push_back({LayerKind::Conv, m.params_.size()});
            m.params_.push_back(std::move(p));
            if (index + 2 < convs) m.layers_.push_back({LayerKind::LeakyRelu});
            c_in = c_out;
        }
        if (cfg.pool_after_block[b]) {
            m.layers_.push_back({LayerKind::MaxPool});
            m.layers_.push_back({LayerKind::Dropout});
        }
    }
    return m;
}

std::size_t FcnModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.parameter_count();
    return n;
}

void FcnModel::check_input(const Tensor3& input) const {
    if (input.h != cfg_.input_frames || input.w != cfg_.n_fft || input.c != ArchConfig::kInputChannels) {
        throw ShapeError("forward: input " + input.shape_string() + " does not match model input " +
                         std::to_string(cfg_.input_frames) + "x" + std::to_string(cfg_.n_fft) + "x3 (layer 0)");
    }
}

Tensor3 FcnModel::run(const Tensor3& input, const ForwardOptions& opts, std::vector<Tensor3>* acts,
                      std::vector<Tensor3>* masks) const {
    check_input(input);
    if (acts) {
        acts->clear();
        acts->push_back(input);
    }
    if (masks) masks->assign(layers_.size(), Tensor3{});
    const bool drop = opts.training && opts.dropout_rate > 0.0;
    if (drop && !opts.dropout_rng) throw StateError("dropout requires a random stream");

    Tensor3 x = input;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& layer = layers_[li];
        switch (layer.kind) {
        case LayerKind::Conv: {
            const auto& p = params_[layer.conv_index];
            if (x.c != p.c_in) {
                throw ShapeError("layer " + std::to_string(li) + ": expected " + std::to_string(p.c_in) +
                                 " channels, got " + x.shape_string());
            }
            x = conv2d(x, p);
            break;
        }
        case LayerKind::LeakyRelu:
            x = leaky_relu(x, cfg_.leaky_slope);
            break;
        case LayerKind::MaxPool:
            x = maxpool_2x1(x);
            break;
        case LayerKind::VerticalCollapse:
            x = vertical_collapse(x);
            break;
        case LayerKind::Dropout:
            if (drop) {
                Tensor3 mask(x.h, x.w, x.c);
                const double keep_scale = 1.0 / (1.0 - opts.dropout_rate);
                for (auto& m : mask.data) m = opts.dropout_rng->bernoulli(opts.dropout_rate) ? 0.0 : keep_scale;
                for (std::size_t i = 0; i < x.size(); ++i) x.data[i] *= mask.data[i];
                if (masks) (*masks)[li] = std::move(mask);
            }
            break;
        }
        if (acts) acts->push_back(x);
    }
    return x;
}

Tensor3 FcnModel::forward(const Tensor3& input, const ForwardOptions& opts) {
    Tensor3 out = run(input, opts, &acts_, &dropout_masks_);
    has_forward_ = true;
    return out;
}

Tensor3 FcnModel::infer(const Tensor3& input) const { return run(input, {}, nullptr, nullptr); }

const Tensor3& FcnModel::activation(std::size_t i) const {
    if (!has_forward_) throw StateError("activation requested before forward");
    return acts_.at(i);
}

void FcnModel::backward(const Tensor3& output_grad, ParameterSet& grads) {
    if (!has_forward_) throw StateError("backward called before forward");
    if (!output_grad.same_shape(acts_.back())) {
        throw ShapeError("backward: output gradient " + output_grad.shape_string() + " vs output " +
                         acts_.back().shape_string());
    }
    if (grads.size() != params_.size()) throw ShapeError("backward: gradient set does not match parameters");
    Tensor3 g = output_grad;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& layer = layers_[li];
        const Tensor3& in = acts_[li];
        switch (layer.kind) {
        case LayerKind::Conv:
            g = conv2d_backward(in, params_[layer.conv_index], g, grads[layer.conv_index], li > 0);
            break;
        case LayerKind::LeakyRelu:
            g = leaky_relu_backward(in, g, cfg_.leaky_slope);
            break;
        case LayerKind::MaxPool:
            g = maxpool_2x1_backward(in, g);
            break;
        case LayerKind::VerticalCollapse:
            g = vertical_collapse_backward(in, g);
            break;
        case LayerKind::Dropout:
            if (!dropout_masks_[li].empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= dropout_masks_[li].data[i];
            }
            break;
        }
    }
}

ParameterSet FcnModel::backward(const Tensor3& output_grad) {
    ParameterSet grads = zeros_like(params_);
    backward(output_grad, grads);
    return grads;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

void write_arch(std::ostream& out, const ArchConfig& cfg) {
    using namespace binary;
    write_u32(out, static_cast<std::uint32_t>(cfg.input_frames));
    write_u32(out, static_cast<std::uint32_t>(cfg.n_fft));
    write_u32(out, static_cast<std::uint32_t>(cfg.block_channels.size()));
    for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
        write_u32(out, static_cast<std::uint32_t>(cfg.block_channels[b]));
        write_u32(out, static_cast<std::uint32_t>(cfg.block_kernel_sizes[b]));
        write_u32(out, static_cast<std::uint32_t>(cfg.convs_per_block[b]));
        write_u32(out, cfg.pool_after_block[b] ? 1u : 0u);
    }
    write_f64(out, cfg.leaky_slope);
    write_f64(out, cfg.capacity_scale);
}

ArchConfig read_arch(std::istream& in) {
    using namespace binary;
    ArchConfig cfg;
    cfg.input_frames = read_u32(in, "architecture");
    cfg.n_fft = read_u32(in, "architecture");
    const std::uint32_t blocks = read_u32(in, "architecture");
    if (blocks == 0 || blocks > 64) throw FormatError("implausible block count in checkpoint");
    cfg.block_channels.assign(blocks, 0);
    cfg.block_kernel_sizes.assign(blocks, 0);
    cfg.convs_per_block.assign(blocks, 0);
    cfg.pool_after_block.assign(blocks, false);
    for (std::uint32_t b = 0; b < blocks; ++b) {
        cfg.block_channels[b] = read_u32(in, "architecture");
        cfg.block_kernel_sizes[b] = read_u32(in, "architecture");
        cfg.convs_per_block[b] = read_u32(in, "architecture");
        cfg.pool_after_block[b] = read_u32(in, "architecture") != 0;
    }
    cfg.leaky_slope = read_f64(in, "architecture");
    cfg.capacity_scale = read_f64(in, "architecture");
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("invalid architecture in checkpoint: ") + e.what());
    }
    return cfg;
}

void FcnModel::save(const std::filesystem::path& path) const {
    using namespace binary;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write checkpoint " + path.string());
    write_bytes(out, "FCNW", 4);
    write_u32(out, kCheckpointVersion);
    write_arch(out, cfg_);
    write_u32(out, static_cast<std::uint32_t>(params_.size() * 2));
    for (const auto& p : params_) {
        write_u32(out, 4);
        write_u32(out, static_cast<std::uint32_t>(p.k));
        write_u32(out, static_cast<std::uint32_t>(p.k));
        write_u32(out, static_cast<std::uint32_t>(p.c_in));
        write_u32(out, static_cast<std::uint32_t>(p.c_out));
        for (double v : p.kernel) write_f32(out, static_cast<float>(v));
        write_u32(out, 1);
        write_u32(out, static_cast<std::uint32_t>(p.c_out));
        for (double v : p.bias) write_f32(out, static_cast<float>(v));
    }
    if (!out) throw PersistenceError("write failed for checkpoint " + path.string());
}

FcnModel FcnModel::load(const std::filesystem::path& path) {
    using namespace binary;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot open checkpoint " + path.string());
    const std::string what = "checkpoint " + path.string();
    expect_magic(in, "FCNW", what);
    const std::uint32_t version = read_u32(in, what);
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version in " + path.string());
    const ArchConfig cfg = read_arch(in);
    Rng unused(0);
    FcnModel m = build(cfg, unused);
    const std::uint32_t arrays = read_u32(in, what);
    if (arrays != m.params_.size() * 2) throw FormatError("parameter array count mismatch in " + path.string());
    for (auto& p : m.params_) {
        const std::uint32_t kdims = read_u32(in, what);
        if (kdims != 4) throw FormatError("kernel rank mismatch in " + path.string());
        const std::uint32_t d0 = read_u32(in, what), d1 = read_u32(in, what);
        const std::uint32_t d2 = read_u32(in, what), d3 = read_u32(in, what);
        if (d0 != p.k || d1 != p.k || d2 != p.c_in || d3 != p.c_out) {
            throw FormatError("kernel shape mismatch in " + path.string());
        }
        for (auto& v : p.kernel) v = read_f32(in, what);
        if (read_u32(in, what) != 1 || read_u32(in, what) != p.c_out) {
            throw FormatError("bias shape mismatch in " + path.string());
        }
        for (auto& v : p.bias) v = read_f32(in, what);
    }
    return m;
}

} // namespace arim
