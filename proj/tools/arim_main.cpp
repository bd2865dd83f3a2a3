#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arim/dataset.hpp"
#include "arim/error.hpp"
#include "arim/experiment.hpp"
#include "arim/metrics.hpp"
#include "arim/mitigate.hpp"
#include "arim/train.hpp"

namespace fs = std::filesystem;
using namespace arim;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write " + path.string());
    out << text;
    if (!out) throw PersistenceError("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw PersistenceError("cannot create directory " + dir.string());
}

ExperimentConfig load_experiment(const std::string& path) {
    return path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError("expected a comma-separated integer list, got '" + text + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty integer list");
    return out;
}

// --- generate --------------------------------------------------------------

struct GenerateArgs {
    std::string config, out, ood;
    std::optional<std::size_t> samples;
    std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& a) {
    ExperimentConfig cfg = load_experiment(a.config);
    if (a.samples) cfg.samples = *a.samples;
    if (a.seed) cfg.seed = *a.seed;
    DatasetManifest m;
    m.generation = cfg.generation;
    m.stft = cfg.stft;
    m.base_seed = cfg.seed;
    m.sample_count = cfg.samples;
    m.test_fraction = cfg.test_fraction;
    const fs::path out = a.out;
    if (!a.ood.empty()) {
        if (!a.samples) m.sample_count = kDefaultOodCount;
        m = generate_ood_testset(m, parse_int_list(a.ood), m.sample_count, out);
        cfg.generation = m.generation;
        cfg.samples = m.sample_count;
    } else {
        m = generate_dataset(m, out);
    }
    cfg.to_config().save(out / "resolved.cfg");
    std::cout << "generated " << m.sample_count << " samples (train " << m.train.size() << ", test "
              << m.test.size() << ") seed " << m.base_seed << " -> " << out.string() << "\n";
    return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    std::string config, data, out, regime;
    std::optional<double> r, rate, capacity, lr;
    std::optional<int> epochs1, epochs2;
    std::optional<std::uint64_t> seed;
    bool resume = false;
};

int cmd_train(const TrainArgs& a) {
    ExperimentConfig cfg = load_experiment(a.config);
    if (!a.regime.empty()) cfg.train.regime = parse_regime(a.regime);
    if (a.r) cfg.train.noise_reduction_ratio = *a.r;
    if (a.rate) cfg.train.dropout_rate = *a.rate;
    if (a.capacity) cfg.arch.capacity_scale = *a.capacity;
    if (a.lr) cfg.train.learning_rate = *a.lr;
    if (a.epochs1) cfg.train.epochs_stage1 = *a.epochs1;
    if (a.epochs2) cfg.train.epochs_stage2 = *a.epochs2;
    if (a.seed) cfg.train.seed = *a.seed;
    cfg.train.validate();

    DatasetManifest m = DatasetManifest::load(a.data);
    cfg.generation = m.generation;
    cfg.stft = m.stft;
    m = split_dataset(m, cfg.validation_fraction, cfg.train.seed);
    if (m.train.empty()) throw ConfigError("dataset has no training samples");

    const fs::path out = a.out;
    ensure_dir(out);
    cfg.to_config().save(out / "resolved.cfg");

    TrainingData data{read_samples(m, m.train), read_samples(m, m.validation), m.stft};
    const ArchConfig arch = arch_for(cfg.arch, m.radar().samples_per_chirp(), m.stft);
    Rng init(cfg.train.seed);
    FcnModel model = FcnModel::build(arch, init);

    const fs::path state_path = out / "train_state.bin";
    std::optional<TrainState> resume;
    if (a.resume && fs::exists(state_path)) {
        resume = TrainState::load(state_path);
        std::cout << "resuming at epoch " << resume->next_epoch << "\n";
    }

    TrainHooks hooks;
    hooks.on_epoch = [&](const TrainState& s, const FcnModel&) {
        s.save(state_path);
        write_text(out / "train_log.csv", training_log_csv(s.log));
        const auto& e = s.log.back();
        std::cout << "epoch " << e.epoch << " stage " << e.stage << " train " << e.train_loss << " val "
                  << e.val_loss << "\n";
    };
    TrainResult result = train(std::move(model), data, cfg.train, hooks, std::move(resume));
    result.model.save(out / "model.fcnw");
    write_text(out / "train_log.csv", training_log_csv(result.log));
    std::cout << "wrote " << (out / "model.fcnw").string() << " (" << result.model.parameter_count()
              << " parameters)\n";
    return 0;
}

// --- evaluate --------------------------------------------------------------

struct NamedMethod {
    std::string name;
    MitigationMethod run;
};

std::vector<NamedMethod> parse_methods(const std::string& spec, const ExperimentConfig& cfg,
                                       std::vector<std::shared_ptr<FcnModel>>& models) {
    std::vector<NamedMethod> methods;
    std::stringstream ss(spec);
    std::string tok;
    const std::size_t n_fft = cfg.stft.n_fft;
    while (std::getline(ss, tok, ',')) {
        if (tok == "oracle") {
            methods.push_back({"oracle", [n_fft](const ScenarioSample& s) { return oracle_profile(s, n_fft); }});
        } else if (tok == "zeroing") {
            const auto z = cfg.zeroing;
            methods.push_back({"zeroing", [z, n_fft](const ScenarioSample& s) {
                                   return zero_mitigate(s.interfered_signal, z, n_fft);
                               }});
        } else if (tok == "none") {
            methods.push_back({"none", [n_fft](const ScenarioSample& s) { return unmitigated_profile(s, n_fft); }});
        } else if (tok.rfind("fcn:", 0) == 0) {
            const fs::path ckpt = tok.substr(4);
            if (!fs::exists(ckpt)) throw PersistenceError("checkpoint not found: " + ckpt.string());
            auto model = std::make_shared<FcnModel>(FcnModel::load(ckpt));
            models.push_back(model);
            const auto stft_cfg = cfg.stft;
            const std::string name = "fcn-" + (ckpt.parent_path().filename().empty()
                                                   ? ckpt.stem().string()
                                                   : ckpt.parent_path().filename().string());
            methods.push_back({name, [model, stft_cfg](const ScenarioSample& s) {
                                   return model_mitigate(*model, s.interfered_signal, stft_cfg);
                               }});
        } else {
            throw ConfigError("unknown method '" + tok + "' (expected oracle, zeroing, none or fcn:<checkpoint>)");
        }
    }
    if (methods.empty()) throw ConfigError("no methods given");
    return methods;
}

struct EvaluateArgs {
    std::string config, data, out, methods = "oracle,zeroing", split = "test", group_by = "n-int";
};

int cmd_evaluate(const EvaluateArgs& a) {
    ExperimentConfig cfg = load_experiment(a.config);
    const DatasetManifest m = DatasetManifest::load(a.data);
    cfg.generation = m.generation;
    cfg.stft = m.stft;
    std::vector<std::size_t> indices;
    if (a.split == "test") {
        indices = m.test;
    } else if (a.split == "train") {
        indices = m.train;
    } else if (a.split == "all") {
        for (std::size_t i = 0; i < m.sample_count; ++i) indices.push_back(i);
    } else {
        throw ConfigError("unknown split '" + a.split + "'");
    }
    if (a.group_by != "n-int" && a.group_by != "none") throw ConfigError("unknown grouping '" + a.group_by + "'");
    std::vector<std::shared_ptr<FcnModel>> models;
    const auto methods = parse_methods(a.methods, cfg, models);

    const fs::path out = a.out;
    ensure_dir(out);
    cfg.to_config().save(out / "resolved.cfg");
    const auto samples = read_samples(m, indices);
    std::vector<EvalReport> reports;
    std::size_t failures = 0;
    for (const auto& method : methods) {
        EvalReport r = evaluate(samples, indices, method.run, method.name, m.radar(), m.stft.n_fft, cfg.metrics);
        if (a.group_by == "none") r.by_interferers.clear();
        write_text(out / (method.name + "_samples.csv"), samples_csv(r));
        write_text(out / (method.name + "_summary.cfg"), summary_text(r));
        write_text(out / (method.name + "_roc.csv"), roc_csv(r));
        std::printf("%-12s auc %.4f  mae_amp %.3f dB  mae_phase %.3f deg  dsnr %.3f dB  (%zu samples, %zu failed)\n",
                    r.method.c_str(), r.overall.auc, r.overall.mae_amp_db, r.overall.mae_phase_deg,
                    r.overall.delta_snr_db, r.samples.size(), r.failures);
        for (const auto& s : r.samples) {
            if (!s.ok) std::cerr << r.method << ": sample " << s.index << " failed: " << s.error << "\n";
        }
        failures += r.failures;
        reports.push_back(std::move(r));
    }
    write_text(out / "grouped.csv", grouped_csv(reports));
    return failures ? 1 : 0;
}

// --- mitigate --------------------------------------------------------------

struct MitigateArgs {
    std::string config, data, record, method = "zeroing", out;
    std::optional<std::size_t> index;
};

std::string profile_csv(const ComplexVector& profile, std::span<const double> magnitude) {
    std::ostringstream out;
    out << "bin,magnitude_db,phase_deg\n";
    for (std::size_t k = 0; k < profile.size(); ++k) {
        const double mag = std::max(std::abs(magnitude[k]), kMagnitudeFloor);
        const double phase = std::abs(profile[k]) < kPhaseMagnitudeFloor ? 0.0 : std::arg(profile[k]);
        out << k << ',' << format_double(20.0 * std::log10(mag)) << ','
            << format_double(phase * 180.0 / std::numbers::pi) << '\n';
    }
    return out.str();
}

int cmd_mitigate(const MitigateArgs& a) {
    ExperimentConfig cfg = load_experiment(a.config);
    ScenarioSample sample;
    if (!a.record.empty()) {
        sample = read_sample_file(a.record);
    } else {
        if (a.data.empty() || !a.index) throw ConfigError("give --record, or --data with --index");
        const DatasetManifest m = DatasetManifest::load(a.data);
        cfg.generation = m.generation;
        cfg.stft = m.stft;
        sample = read_sample(m, *a.index);
    }
    std::vector<std::shared_ptr<FcnModel>> models;
    const auto methods = parse_methods(a.method, cfg, models);
    if (methods.size() != 1) throw ConfigError("mitigate takes exactly one method");
    const fs::path out = a.out;
    ensure_dir(out);
    const auto before = unmitigated_profile(sample, cfg.stft.n_fft);
    const auto after = methods.front().run(sample);
    write_text(out / "before.csv", profile_csv(before.profile, before.magnitude));
    write_text(out / "after.csv", profile_csv(after.profile, after.magnitude));
    write_text(out / "label.csv", profile_csv(oracle_profile(sample, cfg.stft.n_fft).profile,
                                              oracle_profile(sample, cfg.stft.n_fft).magnitude));
    cfg.to_config().save(out / "resolved.cfg");
    std::cout << "wrote before/after/label profiles to " << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FMCW radar interference simulation, mitigation and evaluation"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Generate a dataset");
    g->add_option("--config", gen.config, "Experiment configuration file");
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--samples", gen.samples, "Number of samples");
    g->add_option("--seed", gen.seed, "Base seed");
    g->add_option("--ood-interferers", gen.ood, "Out-of-distribution interferer counts, e.g. 4,5,6");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a network");
    t->add_option("--config", tr.config, "Experiment configuration file");
    t->add_option("--data", tr.data, "Dataset directory")->required();
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--regime", tr.regime, "conventional, dropout or wenort");
    t->add_option("--r", tr.r, "WeNoRT noise reduction ratio");
    t->add_option("--rate", tr.rate, "Dropout rate");
    t->add_option("--capacity", tr.capacity, "Capacity scale for block channels");
    t->add_option("--lr", tr.lr, "Learning rate");
    t->add_option("--epochs1", tr.epochs1, "Stage-1 epochs");
    t->add_option("--epochs2", tr.epochs2, "Stage-2 epochs");
    t->add_option("--seed", tr.seed, "Training seed");
    t->add_flag("--resume", tr.resume, "Continue from the last saved epoch in --out");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Evaluate mitigation methods");
    e->add_option("--config", ev.config, "Experiment configuration file");
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--out", ev.out, "Report directory")->required();
    e->add_option("--methods", ev.methods, "Comma list of oracle, zeroing, none, fcn:<checkpoint>");
    e->add_option("--split", ev.split, "test, train or all");
    e->add_option("--group-by", ev.group_by, "n-int or none");

    MitigateArgs mi;
    auto* mt = app.add_subcommand("mitigate", "Write before/after range profiles of one sample");
    mt->add_option("--config", mi.config, "Experiment configuration file");
    mt->add_option("--data", mi.data, "Dataset directory");
    mt->add_option("--index", mi.index, "Sample index within the dataset");
    mt->add_option("--record", mi.record, "Single record file");
    mt->add_option("--method", mi.method, "oracle, zeroing, none or fcn:<checkpoint>");
    mt->add_option("--out", mi.out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*g) return cmd_generate(gen);
        if (*t) return cmd_train(tr);
        if (*e) return cmd_evaluate(ev);
        if (*mt) return cmd_mitigate(mi);
    } catch (const DivergenceError& err) {
        std::cerr << "error: training diverged at epoch " << err.epoch() << ", batch " << err.batch() << ": "
                  << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 0;
}
