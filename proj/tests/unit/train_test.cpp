#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <filesystem>

#include "arim/error.hpp"
#include "arim/train.hpp"

using namespace arim;

namespace {

Tensor3 random_tensor(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
    Tensor3 t(h, w, c);
    for (auto& v : t.data) v = rng.normal();
    return t;
}

GenerationConfig toy_generation() {
    GenerationConfig gen;
    gen.radar.bandwidth_hz = 0.1e9;
    gen.radar.chirp_time_s = 1.6e-6;  // 64 samples, same slope
    gen.distance_max_m = 20.0;
    return gen;
}

StftConfig toy_stft() { return {16, 8, 64}; }

ArchConfig toy_arch() {
    ArchConfig a;
    a.block_channels = {3, 3, 3, 3};
    a.block_kernel_sizes = {3, 3, 3, 3};
    a.convs_per_block = {1, 1, 1, 2};
    return arch_for(a, 64, toy_stft());
}

std::vector<ScenarioSample> toy_samples(std::size_t n, std::uint64_t seed) {
    const auto gen = toy_generation();
    std::vector<ScenarioSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed + i);
        out.push_back(sample_scenario(gen, rng));
    }
    return out;
}

} // namespace

TEST_CASE("composite loss") {
    Rng rng(1);
    const auto label = random_tensor(rng, 1, 8, 3);
    const auto same = composite_loss(label, label, {});
    CHECK(same.value == 0.0);
    for (double g : same.grad.data) CHECK(g == 0.0);

    Tensor3 zero(1, 8, 3), mag_only(1, 8, 3);
    for (std::size_t k = 0; k < 8; ++k) mag_only.at(0, k, 1) = 0.7;
    CHECK(composite_loss(mag_only, zero, {}).value == doctest::Approx(0.49));

    Tensor3 real_err(1, 8, 3), mag_err(1, 8, 3);
    real_err.at(0, 3, 0) = 1.0;
    mag_err.at(0, 3, 1) = 1.0;
    CHECK(composite_loss(real_err, zero, {10.0}).value == 10.0 * composite_loss(mag_err, zero, {10.0}).value);

    CHECK_THROWS_AS(composite_loss(Tensor3(1, 8, 3), Tensor3(1, 7, 3), {}), ShapeError);

    const auto pred = random_tensor(rng, 1, 8, 3);
    const auto r = composite_loss(pred, label, {10.0});
    const double h = 1e-6;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        auto a = pred, b = pred;
        a.data[i] += h;
        b.data[i] -= h;
        const double fd = (composite_loss(a, label, {10.0}).value - composite_loss(b, label, {10.0}).value) / (2 * h);
        CHECK(std::abs(r.grad.data[i] - fd) <= 1e-6 * std::abs(fd));
    }
}

TEST_CASE("adam") {
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    ParameterSet p{ConvParams(1, 1, 2)};
    p[0].kernel = {0.5, -0.25};
    auto state = AdamState::for_params(p);
    const ParameterSet zero = zeros_like(p);
    auto before = p;
    adam_step(p, zero, state, cfg);
    CHECK(p == before);

    ParameterSet g = zeros_like(p);
    g[0].kernel = {3.0, -0.001};
    auto s2 = AdamState::for_params(p);
    before = p;
    adam_step(p, g, s2, cfg);
    CHECK(p[0].kernel[0] - before[0].kernel[0] == doctest::Approx(-cfg.learning_rate).epsilon(1e-4));
    CHECK(p[0].kernel[1] - before[0].kernel[1] == doctest::Approx(cfg.learning_rate).epsilon(1e-3));

    // Minimizing w^2 from w = 1.
    TrainConfig quad = cfg;
    quad.learning_rate = 0.05;
    ParameterSet w{ConvParams(1, 1, 1)};
    w[0].kernel = {1.0};
    auto sw = AdamState::for_params(w);
    for (int i = 0; i < 100; ++i) {
        ParameterSet gw = zeros_like(w);
        gw[0].kernel[0] = 2.0 * w[0].kernel[0];
        adam_step(w, gw, sw, quad);
    }
    CHECK(std::abs(w[0].kernel[0]) < 0.1);

    // Coupled decay: zero gradient with decay still shrinks the weight.
    TrainConfig decay = cfg;
    decay.weight_decay = 0.1;
    ParameterSet d{ConvParams(1, 1, 1)};
    d[0].kernel = {2.0};
    auto sd = AdamState::for_params(d);
    adam_step(d, zeros_like(d), sd, decay);
    CHECK(d[0].kernel[0] < 2.0);
}

TEST_CASE("wenort mask") {
    ParameterSet hand{ConvParams(1, 1, 4)};
    hand[0].kernel = {0.5, -0.1, 0.3, 0.05};
    const auto m = build_wenort_mask(hand, 0.5);
    CHECK(m.masked_count == 2);
    CHECK(m.keep[0] == std::vector<std::uint8_t>{1, 0, 1, 0});

    CHECK(build_wenort_mask(hand, 0.0).masked_count == 0);
    const auto all = build_wenort_mask(hand, 1.0);
    CHECK(all.masked_count == 4);
    auto zeroed = hand;
    all.apply(zeroed);
    for (double v : zeroed[0].kernel) CHECK(v == 0.0);
    CHECK_THROWS_AS(build_wenort_mask(hand, 1.5), DomainError);

    // Ties resolve by (layer, flat index).
    ParameterSet ties{ConvParams(1, 1, 3), ConvParams(1, 1, 2)};
    ties[0].kernel = {0.2, 0.1, 0.1};
    ties[1].kernel = {0.1, 0.3};
    const auto t = build_wenort_mask(ties, 0.4);
    CHECK(t.masked_count == 2);
    CHECK(t.keep[0] == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(t.keep[1] == std::vector<std::uint8_t>{1, 1});

    // Biases are never masked.
    auto biased = hand;
    biased[0].bias = {1e-9, 1e-9, 1e-9, 1e-9};
    build_wenort_mask(biased, 0.75).apply(biased);
    for (double b : biased[0].bias) CHECK(b == 1e-9);
}

TEST_CASE("mask cardinality on random models") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        ArchConfig a = toy_arch();
        a.block_channels = {static_cast<std::size_t>(rng.uniform_int(1, 5)), static_cast<std::size_t>(rng.uniform_int(1, 5)),
                            static_cast<std::size_t>(rng.uniform_int(1, 5)), static_cast<std::size_t>(rng.uniform_int(1, 5))};
        const auto model = FcnModel::build(a, rng);
        std::size_t n = 0;
        for (const auto& p : model.params()) n += p.kernel.size();
        for (double r : {0.15, 0.3, 0.45}) {
            const auto m = build_wenort_mask(model, r);
            CHECK(m.masked_count == static_cast<std::size_t>(std::floor(r * static_cast<double>(n))));
            std::size_t zeros = 0;
            for (const auto& k : m.keep) zeros += static_cast<std::size_t>(std::count(k.begin(), k.end(), 0));
            CHECK(zeros == m.masked_count);
        }
    }
}

TEST_CASE("train config parsing") {
    const auto kv = KeyValueConfig::parse("regime = wenort\nnoise_reduction_ratio = 0.45\nbatch_size = 4\n");
    const auto c = TrainConfig::from_config(kv);
    CHECK(c.regime == Regime::Wenort);
    CHECK(c.noise_reduction_ratio == 0.45);
    CHECK(c.batch_size == 4);
    CHECK_THROWS_AS(TrainConfig::from_config(KeyValueConfig::parse("regime = sgd\n")), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_config(KeyValueConfig::parse("dropout_rate = 1\n")), ConfigError);
    KeyValueConfig out;
    c.write_to(out);
    KeyValueConfig again;
    TrainConfig::from_config(out).write_to(again);
    CHECK(again.to_string() == out.to_string());
}

TEST_CASE("training runs") {
    const auto samples = toy_samples(32, 100);
    TrainingData data{samples, {}, toy_stft()};
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.learning_rate = 3e-3;
    cfg.log_wall_time = false;
    cfg.early_stop_patience = 1000;

    SUBCASE("empty dataset") {
        Rng rng(1);
        TrainingData empty{{}, {}, toy_stft()};
        CHECK_THROWS_AS(train(FcnModel::build(toy_arch(), rng), empty, cfg), ConfigError);
    }
    SUBCASE("conventional descent") {
        cfg.epochs_stage1 = 30;
        cfg.epochs_stage2 = 0;
        Rng rng(3);
        const auto r = train(FcnModel::build(toy_arch(), rng), data, cfg);
        REQUIRE(r.log.size() == 30);
        CHECK(r.log.back().train_loss < r.log.front().train_loss);
        for (const auto& e : r.log) CHECK(e.stage == 1);
    }
    SUBCASE("dropout at rate 0 reproduces the conventional trajectory") {
        cfg.epochs_stage1 = 3;
        cfg.epochs_stage2 = 1;
        Rng a(4), b(4);
        const auto conv = train(FcnModel::build(toy_arch(), a), data, cfg);
        TrainConfig drop = cfg;
        drop.regime = Regime::Dropout;
        drop.dropout_rate = 0.0;
        const auto d = train(FcnModel::build(toy_arch(), b), data, drop);
        CHECK(conv.log == d.log);
        CHECK(conv.model.params() == d.model.params());
    }
    SUBCASE("wenort keeps masked weights at zero after every update") {
        cfg.regime = Regime::Wenort;
        cfg.epochs_stage1 = 2;
        cfg.epochs_stage2 = 5;
        TrainHooks hooks;
        std::size_t updates = 0;
        bool all_zero = true;
        hooks.on_stage2_update = [&](const FcnModel& m, const WenortMask& mask) {
            ++updates;
            for (std::size_t c = 0; c < mask.keep.size(); ++c) {
                for (std::size_t i = 0; i < mask.keep[c].size(); ++i) {
                    if (!mask.keep[c][i] && m.params()[c].kernel[i] != 0.0) all_zero = false;
                }
            }
        };
        Rng rng(5);
        const auto r = train(FcnModel::build(toy_arch(), rng), data, cfg, hooks);
        CHECK(updates == 5 * 4);
        CHECK(all_zero);
        REQUIRE(r.mask);
        CHECK(r.log.size() == 7);
        for (std::size_t e = 2; e < 7; ++e) {
            CHECK(r.log[e].stage == 2);
            CHECK(r.log[e].masked_fraction == doctest::Approx(0.3).epsilon(0.01));
        }
        for (std::size_t c = 0; c < r.mask->keep.size(); ++c) {
            for (std::size_t i = 0; i < r.mask->keep[c].size(); ++i) {
                if (!r.mask->keep[c][i]) CHECK(r.model.params()[c].kernel[i] == 0.0);
            }
        }
    }
    SUBCASE("early stopping on validation loss") {
        data.validation = toy_samples(8, 900);
        cfg.learning_rate = 0.5;  // large enough to stop improving quickly
        cfg.epochs_stage1 = 50;
        cfg.epochs_stage2 = 0;
        cfg.early_stop_patience = 2;
        Rng rng(6);
        const auto r = train(FcnModel::build(toy_arch(), rng), data, cfg);
        CHECK(r.log.size() < 50);
    }
    SUBCASE("seed determinism and resume") {
        cfg.regime = Regime::Wenort;
        cfg.epochs_stage1 = 3;
        cfg.epochs_stage2 = 2;
        Rng a(7), b(7), c(7);
        const auto first = train(FcnModel::build(toy_arch(), a), data, cfg);
        const auto second = train(FcnModel::build(toy_arch(), b), data, cfg);
        CHECK(first.log == second.log);
        CHECK(first.model.params() == second.model.params());
        CHECK(training_log_csv(first.log) == training_log_csv(second.log));

        // Interrupt after epoch 3 (first stage-2 epoch), then resume from disk.
        const auto path = std::filesystem::temp_directory_path() / "arim_train_state.bin";
        TrainHooks hooks;
        hooks.on_epoch = [&](const TrainState& s, const FcnModel&) {
            if (s.next_epoch == 4) {
                s.save(path);
                throw StateError("interrupted");
            }
        };
        CHECK_THROWS_AS(train(FcnModel::build(toy_arch(), c), data, cfg, hooks), StateError);
        Rng d(7);
        const auto resumed = train(FcnModel::build(toy_arch(), d), data, cfg, {}, TrainState::load(path));
        CHECK(resumed.log == first.log);
        CHECK(resumed.model.params() == first.model.params());
        std::filesystem::remove(path);
    }
    SUBCASE("non-finite loss reports epoch and batch") {
        cfg.epochs_stage1 = 2;
        Rng rng(8);
        auto model = FcnModel::build(toy_arch(), rng);
        model.params()[0].bias[0] = std::numeric_limits<double>::infinity();
        try {
            train(std::move(model), data, cfg);
            FAIL("expected divergence");
        } catch (const DivergenceError& e) {
            CHECK(e.epoch() == 0);
            CHECK(e.batch() == 0);
        }
    }
}
