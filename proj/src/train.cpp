#include "arim/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "arim/binary_io.hpp"
#include "arim/error.hpp"
#include "arim/parallel.hpp"
#include "arim/simd/kernels.hpp"

namespace arim {

// ---------------------------------------------------------------------------
// Loss

LossResult composite_loss(const Tensor3& prediction, const Tensor3& label, const LossConfig& cfg) {
    if (!prediction.same_shape(label)) {
        throw ShapeError("composite_loss: prediction " + prediction.shape_string() + " vs label " +
                         label.shape_string());
    }
    if (prediction.c != 3) throw ShapeError("composite_loss: expected 3 channels");
    const std::size_t n = prediction.h * prediction.w;
    const double weights[3] = {cfg.lambda, 1.0, cfg.lambda};
    double sums[3] = {0.0, 0.0, 0.0};
    LossResult r;
    r.grad = Tensor3(prediction.h, prediction.w, prediction.c);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const double d = prediction.data[i * 3 + ch] - label.data[i * 3 + ch];
            sums[ch] += d * d;
            r.grad.data[i * 3 + ch] = 2.0 * weights[ch] * d * inv_n;
        }
    }
    r.value = sums[1] * inv_n + cfg.lambda * (sums[0] * inv_n + sums[2] * inv_n);
    return r;
}

// ---------------------------------------------------------------------------
// Config

Regime parse_regime(const std::string& name) {
    if (name == "conventional") return Regime::Conventional;
    if (name == "dropout") return Regime::Dropout;
    if (name == "wenort") return Regime::Wenort;
    throw ConfigError("unknown training regime '" + name + "'");
}

std::string regime_name(Regime regime) {
    switch (regime) {
    case Regime::Conventional: return "conventional";
    case Regime::Dropout: return "dropout";
    case Regime::Wenort: return "wenort";
    }
    return "conventional";
}

void TrainConfig::validate() const {
    if (epochs_stage1 < 0 || epochs_stage2 < 0) throw ConfigError("epoch counts must be non-negative");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
        throw ConfigError("Adam betas must be in [0, 1)");
    }
    if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (!(dropout_rate >= 0 && dropout_rate < 1)) throw ConfigError("dropout_rate must be in [0, 1)");
    if (!(noise_reduction_ratio >= 0 && noise_reduction_ratio <= 1)) {
        throw ConfigError("noise reduction ratio must be in [0, 1]");
    }
    if (!(loss.lambda > 0)) throw ConfigError("loss lambda must be positive");
}

const std::vector<std::string>& TrainConfig::config_keys() {
    static const std::vector<std::string> keys{
        "epochs_stage1", "epochs_stage2", "batch_size",     "learning_rate",
        "weight_decay",  "adam_beta1",    "adam_beta2",     "adam_eps",
        "early_stop_patience", "regime",  "dropout_rate",   "noise_reduction_ratio",
        "rebuild_mask_each_step", "loss_lambda", "train_seed", "log_wall_time",
    };
    return keys;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
    TrainConfig c;
    c.epochs_stage1 = static_cast<int>(kv.get_int_or("epochs_stage1", c.epochs_stage1));
    c.epochs_stage2 = static_cast<int>(kv.get_int_or("epochs_stage2", c.epochs_stage2));
    c.batch_size = static_cast<std::size_t>(kv.get_int_or("batch_size", static_cast<long long>(c.batch_size)));
    c.learning_rate = kv.get_double_or("learning_rate", c.learning_rate);
    c.weight_decay = kv.get_double_or("weight_decay", c.weight_decay);
    c.adam_beta1 = kv.get_double_or("adam_beta1", c.adam_beta1);
    c.adam_beta2 = kv.get_double_or("adam_beta2", c.adam_beta2);
    c.adam_eps = kv.get_double_or("adam_eps", c.adam_eps);
    c.early_stop_patience = static_cast<int>(kv.get_int_or("early_stop_patience", c.early_stop_patience));
    if (auto r = kv.get_string("regime")) c.regime = parse_regime(*r);
    c.dropout_rate = kv.get_double_or("dropout_rate", c.dropout_rate);
    c.noise_reduction_ratio = kv.get_double_or("noise_reduction_ratio", c.noise_reduction_ratio);
    c.rebuild_mask_each_step = kv.get_bool("rebuild_mask_each_step").value_or(c.rebuild_mask_each_step);
    c.loss.lambda = kv.get_double_or("loss_lambda", c.loss.lambda);
    c.seed = static_cast<std::uint64_t>(kv.get_int_or("train_seed", static_cast<long long>(c.seed)));
    c.log_wall_time = kv.get_bool("log_wall_time").value_or(c.log_wall_time);
    c.validate();
    return c;
}

void TrainConfig::write_to(KeyValueConfig& kv) const {
    kv.set("epochs_stage1", std::to_string(epochs_stage1));
    kv.set("epochs_stage2", std::to_string(epochs_stage2));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("learning_rate", format_double(learning_rate));
    kv.set("weight_decay", format_double(weight_decay));
    kv.set("adam_beta1", format_double(adam_beta1));
    kv.set("adam_beta2", format_double(adam_beta2));
    kv.set("adam_eps", format_double(adam_eps));
    kv.set("early_stop_patience", std::to_string(early_stop_patience));
    kv.set("regime", regime_name(regime));
    kv.set("dropout_rate", format_double(dropout_rate));
    kv.set("noise_reduction_ratio", format_double(noise_reduction_ratio));
    kv.set("rebuild_mask_each_step", rebuild_mask_each_step ? "on" : "off");
    kv.set("loss_lambda", format_double(loss.lambda));
    kv.set("train_seed", std::to_string(seed));
    kv.set("log_wall_time", log_wall_time ? "on" : "off");
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_params(const ParameterSet& params) {
    return AdamState{zeros_like(params), zeros_like(params), 0};
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, const TrainConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
        throw ShapeError("adam_step: parameter, gradient and state sets differ in size");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const simd::AdamCoeffs coeffs{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay,
                                  1.0 - std::pow(cfg.adam_beta1, t), 1.0 - std::pow(cfg.adam_beta2, t)};
    const auto& kern = simd::active();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const auto& g = grads[i];
        if (p.kernel.size() != g.kernel.size() || p.bias.size() != g.bias.size()) {
            throw ShapeError("adam_step: gradient shape mismatch at convolution " + std::to_string(i));
        }
        kern.adam_update(p.kernel.data(), g.kernel.data(), state.m[i].kernel.data(), state.v[i].kernel.data(),
                         p.kernel.size(), coeffs);
        kern.adam_update(p.bias.data(), g.bias.data(), state.m[i].bias.data(), state.v[i].bias.data(),
                         p.bias.size(), coeffs);
    }
}

// ---------------------------------------------------------------------------
// WeNoRT mask

void WenortMask::apply(ParameterSet& params) const {
    for (std::size_t l = 0; l < keep.size(); ++l) {
        auto& kernel = params[l].kernel;
        for (std::size_t i = 0; i < kernel.size(); ++i) {
            if (!keep[l][i]) kernel[i] = 0.0;
        }
    }
}

WenortMask build_wenort_mask(const ParameterSet& params, double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("build_wenort_mask: r must be in [0, 1]");
    struct Entry {
        double magnitude;
        std::uint32_t layer;
        std::uint32_t index;
    };
    std::vector<Entry> entries;
    WenortMask mask;
    for (std::size_t l = 0; l < params.size(); ++l) {
        mask.keep.emplace_back(params[l].kernel.size(), std::uint8_t{1});
        for (std::size_t i = 0; i < params[l].kernel.size(); ++i) {
            entries.push_back({std::abs(params[l].kernel[i]), static_cast<std::uint32_t>(l),
                               static_cast<std::uint32_t>(i)});
        }
    }
    mask.total = entries.size();
    mask.masked_count = static_cast<std::size_t>(std::floor(r * static_cast<double>(mask.total)));
    if (mask.masked_count == 0) return mask;
    const auto by_rank = [](const Entry& a, const Entry& b) {
        if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.index < b.index;
    };
    const auto cut = entries.begin() + static_cast<std::ptrdiff_t>(mask.masked_count);
    std::nth_element(entries.begin(), cut - 1, entries.end(), by_rank);
    for (auto it = entries.begin(); it != cut; ++it) mask.keep[it->layer][it->index] = 0;
    return mask;
}

WenortMask build_wenort_mask(const FcnModel& model, double r) { return build_wenort_mask(model.params(), r); }

// ---------------------------------------------------------------------------
// Examples

Example make_example(const ScenarioSample& sample, const StftConfig& stft_cfg) {
    auto input = assemble_input(stft(sample.interfered_signal, stft_cfg));
    auto label = assemble_label(sample.clean_signal, stft_cfg.n_fft, input.scale);
    return Example{std::move(input.data), std::move(label.data), input.scale};
}

ArchConfig arch_for(ArchConfig arch, std::size_t signal_len, const StftConfig& stft_cfg) {
    stft_cfg.validate(signal_len);
    arch.input_frames = stft_cfg.frame_count(signal_len);
    arch.n_fft = stft_cfg.n_fft;
    return arch;
}

double evaluate_loss(const FcnModel& model, std::span<const ScenarioSample> samples, const StftConfig& stft_cfg,
                     const LossConfig& loss) {
    if (samples.empty()) return 0.0;
    std::vector<double> values(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        const Example ex = make_example(samples[i], stft_cfg);
        values[i] = composite_loss(model.infer(ex.input), ex.label, loss).value;
    });
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(samples.size());
}

std::string training_log_csv(std::span<const EpochLog> log) {
    std::ostringstream out;
    out << "epoch,stage,train_loss,val_loss,masked_fraction,wall_seconds\n";
    for (const auto& e : log) {
        out << e.epoch << ',' << e.stage << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss)
            << ',' << format_double(e.masked_fraction) << ',' << format_double(e.wall_seconds) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Training state persistence

namespace {

constexpr std::uint32_t kStateVersion = 1;

void write_params(std::ostream& out, const ParameterSet& params) {
    using namespace binary;
    write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        write_u32(out, static_cast<std::uint32_t>(p.k));
        write_u32(out, static_cast<std::uint32_t>(p.c_in));
        write_u32(out, static_cast<std::uint32_t>(p.c_out));
        for (double v : p.kernel) write_f64(out, v);
        for (double v : p.bias) write_f64(out, v);
    }
}

ParameterSet read_params(std::istream& in) {
    using namespace binary;
    ParameterSet params(read_u32(in, "training state"));
    for (auto& p : params) {
        const auto k = read_u32(in, "training state");
        const auto ci = read_u32(in, "training state");
        const auto co = read_u32(in, "training state");
        if (k > 1024 || ci > 1u << 16 || co > 1u << 16) throw FormatError("implausible shape in training state");
        p = ConvParams(k, ci, co);
        for (auto& v : p.kernel) v = read_f64(in, "training state");
        for (auto& v : p.bias) v = read_f64(in, "training state");
    }
    return params;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Independent stream per (seed, epoch, purpose); resuming needs only the epoch.
Rng epoch_rng(std::uint64_t seed, int epoch, std::uint64_t purpose) {
    return Rng(splitmix(splitmix(seed) ^ splitmix(static_cast<std::uint64_t>(epoch) * 4 + purpose)));
}

Rng sample_rng(std::uint64_t seed, int epoch, std::size_t position) {
    return Rng(splitmix(epoch_rng(seed, epoch, 2).next_u64() ^ splitmix(position)));
}

} // namespace

void TrainState::save(const std::filesystem::path& path) const {
    using namespace binary;
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw PersistenceError("cannot write training state " + tmp);
        write_bytes(out, "TRST", 4);
        write_u32(out, kStateVersion);
        write_params(out, params);
        write_params(out, best_params);
        write_params(out, adam.m);
        write_params(out, adam.v);
        write_u64(out, adam.step);
        write_u32(out, static_cast<std::uint32_t>(next_epoch));
        write_u32(out, static_cast<std::uint32_t>(stage));
        write_f64(out, best_loss);
        write_u32(out, has_best ? 1u : 0u);
        write_u32(out, static_cast<std::uint32_t>(epochs_since_best));
        write_u32(out, mask ? 1u : 0u);
        if (mask) {
            write_u64(out, mask->masked_count);
            write_u64(out, mask->total);
            write_u32(out, static_cast<std::uint32_t>(mask->keep.size()));
            for (const auto& k : mask->keep) {
                write_u64(out, k.size());
                write_bytes(out, k.data(), k.size());
            }
        }
        write_u32(out, static_cast<std::uint32_t>(log.size()));
        for (const auto& e : log) {
            write_u32(out, static_cast<std::uint32_t>(e.epoch));
            write_u32(out, static_cast<std::uint32_t>(e.stage));
            write_f64(out, e.train_loss);
            write_f64(out, e.val_loss);
            write_f64(out, e.masked_fraction);
            write_f64(out, e.wall_seconds);
        }
        if (!out) throw PersistenceError("write failed for training state " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

TrainState TrainState::load(const std::filesystem::path& path) {
    using namespace binary;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot open training state " + path.string());
    expect_magic(in, "TRST", "training state");
    if (read_u32(in, "training state") != kStateVersion) throw FormatError("unsupported training state version");
    TrainState s;
    s.params = read_params(in);
    s.best_params = read_params(in);
    s.adam.m = read_params(in);
    s.adam.v = read_params(in);
    s.adam.step = read_u64(in, "training state");
    s.next_epoch = static_cast<int>(read_u32(in, "training state"));
    s.stage = static_cast<int>(read_u32(in, "training state"));
    s.best_loss = read_f64(in, "training state");
    s.has_best = read_u32(in, "training state") != 0;
    s.epochs_since_best = static_cast<int>(read_u32(in, "training state"));
    if (read_u32(in, "training state")) {
        WenortMask m;
        m.masked_count = read_u64(in, "training state");
        m.total = read_u64(in, "training state");
        m.keep.resize(read_u32(in, "training state"));
        for (auto& k : m.keep) {
            k.resize(read_u64(in, "training state"));
            read_bytes(in, k.data(), k.size(), "training state");
        }
        s.mask = std::move(m);
    }
    s.log.resize(read_u32(in, "training state"));
    for (auto& e : s.log) {
        e.epoch = static_cast<int>(read_u32(in, "training state"));
        e.stage = static_cast<int>(read_u32(in, "training state"));
        e.train_loss = read_f64(in, "training state");
        e.val_loss = read_f64(in, "training state");
        e.masked_fraction = read_f64(in, "training state");
        e.wall_seconds = read_f64(in, "training state");
    }
    return s;
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(FcnModel model, const TrainingData& data, const TrainConfig& cfg, const TrainHooks& hooks,
                  std::optional<TrainState> resume) {
    cfg.validate();
    if (data.train.empty()) throw ConfigError("train: empty training set");

    const bool wenort = cfg.regime == Regime::Wenort;
    const int stage1_epochs = wenort ? cfg.epochs_stage1 : cfg.epochs_stage1 + cfg.epochs_stage2;
    const int stage2_epochs = wenort ? cfg.epochs_stage2 : 0;
    const double dropout = cfg.regime == Regime::Dropout ? cfg.dropout_rate : 0.0;

    TrainState state;
    if (resume) {
        state = std::move(*resume);
        if (state.params.size() != model.params().size()) throw ConfigError("resume state does not match model");
        model.params() = state.params;
    } else {
        state.params = model.params();
        state.adam = AdamState::for_params(model.params());
    }

    const auto monitor = [&](double train_loss) {
        return data.validation.empty() ? train_loss
                                       : evaluate_loss(model, data.validation, data.stft, cfg.loss);
    };

    std::vector<std::size_t> order(data.train.size());
    ParameterSet grads = zeros_like(model.params());
    std::vector<FcnModel> replicas(std::min(worker_count(), cfg.batch_size), model);
    std::vector<ParameterSet> sample_grads(cfg.batch_size, grads);
    std::vector<double> sample_loss(cfg.batch_size, 0.0);
    int stage2_start = 0;

    const auto run_epoch = [&](int epoch, int stage) {
        const auto started = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = epoch_rng(cfg.seed, epoch, 1);
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0;
        int batch = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::size_t count = end - start;
            const double inv = 1.0 / static_cast<double>(count);
            for (auto& r : replicas) r.params() = model.params();
            // Per-sample gradients are reduced in batch order, so results do not
            // depend on the worker count.
            parallel_for_workers(count, replicas.size(), [&](std::size_t i, std::size_t worker) {
                FcnModel& replica = replicas[worker];
                Rng dropout_rng = sample_rng(cfg.seed, epoch, start + i);
                const ForwardOptions opts{true, dropout, &dropout_rng};
                const Example ex = make_example(data.train[order[start + i]], data.stft);
                const Tensor3 pred = replica.forward(ex.input, opts);
                LossResult l = composite_loss(pred, ex.label, cfg.loss);
                sample_loss[i] = l.value;
                for (auto& g : l.grad.data) g *= inv;
                set_zero(sample_grads[i]);
                if (std::isfinite(l.value)) replica.backward(l.grad, sample_grads[i]);
            });
            set_zero(grads);
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                if (!std::isfinite(sample_loss[i])) {
                    throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                              std::to_string(batch),
                                          epoch, batch);
                }
                batch_loss += sample_loss[i];
                for (std::size_t c = 0; c < grads.size(); ++c) {
                    auto& gk = grads[c].kernel;
                    const auto& sk = sample_grads[i][c].kernel;
                    for (std::size_t j = 0; j < gk.size(); ++j) gk[j] += sk[j];
                    auto& gb = grads[c].bias;
                    const auto& sb = sample_grads[i][c].bias;
                    for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += sb[j];
                }
            }
            loss_sum += batch_loss;
            adam_step(model.params(), grads, state.adam, cfg);
            if (stage == 2 && state.mask) {
                if (cfg.rebuild_mask_each_step) {
                    state.mask = build_wenort_mask(model.params(), cfg.noise_reduction_ratio);
                }
                state.mask->apply(model.params());
                if (hooks.on_stage2_update) hooks.on_stage2_update(model, *state.mask);
            }
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.stage = stage;
        entry.train_loss = loss_sum / static_cast<double>(order.size());
        entry.val_loss = monitor(entry.train_loss);
        entry.masked_fraction = stage == 2 && state.mask ? state.mask->masked_fraction() : 0.0;
        if (cfg.log_wall_time) {
            entry.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        }
        const double tracked = data.validation.empty() ? entry.train_loss : entry.val_loss;
        if (!state.has_best || tracked < state.best_loss) {
            state.best_loss = tracked;
            state.best_params = model.params();
            state.has_best = true;
            state.epochs_since_best = 0;
        } else {
            ++state.epochs_since_best;
        }
        state.log.push_back(entry);
        state.next_epoch = epoch + 1;
        state.params = model.params();
        if (hooks.on_epoch) hooks.on_epoch(state, model);
    };

    const auto begin_stage2 = [&] {
        if (state.has_best) model.params() = state.best_params;
        state.stage = 2;
        state.mask = build_wenort_mask(model.params(), cfg.noise_reduction_ratio);
        state.mask->apply(model.params());
        state.params = model.params();
        state.has_best = false;
        state.epochs_since_best = 0;
    };

    if (state.stage == 1) {
        while (state.next_epoch < stage1_epochs && state.epochs_since_best < cfg.early_stop_patience) {
            run_epoch(state.next_epoch, 1);
        }
        if (stage2_epochs > 0) begin_stage2();
    }
    if (state.stage == 2) {
        // Stage 2 starts where the last stage-1 epoch ended.
        stage2_start = 0;
        for (const auto& e : state.log) {
            if (e.stage == 1) stage2_start = e.epoch + 1;
        }
        while (state.next_epoch < stage2_start + stage2_epochs) run_epoch(state.next_epoch, 2);
    }

    if (state.has_best) model.params() = state.best_params;
    TrainResult result{std::move(model), std::move(state.log), std::move(state.mask)};
    return result;
}

} // namespace arim
