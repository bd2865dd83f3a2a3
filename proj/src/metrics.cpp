#include "arim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "arim/error.hpp"
#include "arim/parallel.hpp"

namespace arim {

TargetBins target_bins(std::span<const TargetSpec> targets, const RadarConfig& radar, std::size_t n_fft) {
    if (targets.empty()) throw DomainError("target_bins: no targets");
    TargetBins tb;
    double strongest_amp = -1.0;
    for (const auto& t : targets) {
        const double pos = beat_frequency(t.distance_m, radar) / radar.sample_rate_hz * static_cast<double>(n_fft);
        const auto bin = static_cast<std::size_t>(std::llround(pos)) % n_fft;
        tb.bins.push_back(bin);
        if (t.amplitude > strongest_amp) {
            strongest_amp = t.amplitude;
            tb.strongest = bin;
        }
    }
    std::sort(tb.bins.begin(), tb.bins.end());
    tb.bins.erase(std::unique(tb.bins.begin(), tb.bins.end()), tb.bins.end());
    return tb;
}

double roc_auc(std::span<const double> positives, std::span<const double> negatives) {
    if (positives.empty() || negatives.empty()) {
        throw DomainError("roc_auc: needs at least one positive and one negative");
    }
    // Rank-sum form of the U statistic with midranks for ties.
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> items;
    items.reserve(positives.size() + negatives.size());
    for (double s : positives) items.push_back({s, true});
    for (double s : negatives) items.push_back({s, false});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t q = i; q < j; ++q) {
            if (items[q].positive) rank_sum += midrank;
        }
        i = j;
    }
    const double np = static_cast<double>(positives.size());
    const double nn = static_cast<double>(negatives.size());
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace {

std::size_t circular_distance(std::size_t a, std::size_t b, std::size_t n) {
    const std::size_t d = a > b ? a - b : b - a;
    return std::min(d, n - d);
}

std::vector<bool> near_targets(std::size_t n, const TargetBins& targets, int radius) {
    std::vector<bool> near(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t b : targets.bins) {
            if (circular_distance(k, b, n) <= static_cast<std::size_t>(radius)) {
                near[k] = true;
                break;
            }
        }
    }
    return near;
}

void check_bins(std::size_t n, const TargetBins& targets, const char* what) {
    if (targets.bins.empty()) throw DomainError(std::string(what) + ": no target bins");
    for (std::size_t b : targets.bins) {
        if (b >= n) throw DomainError(std::string(what) + ": target bin out of range");
    }
}

double to_db(double mag) { return 20.0 * std::log10(std::max(std::abs(mag), kMagnitudeFloor)); }

double phase_error_deg(Complex pred, Complex label) {
    const auto angle = [](Complex z) { return std::abs(z) < kPhaseMagnitudeFloor ? 0.0 : std::arg(z); };
    double d = (angle(pred) - angle(label)) * 180.0 / std::numbers::pi;
    d = std::fmod(d, 360.0);
    if (d > 180.0) d -= 360.0;
    if (d <= -180.0) d += 360.0;
    return std::abs(d);
}

template <class F>
double mean_over_bins(const TargetBins& targets, F&& f) {
    double sum = 0.0;
    for (std::size_t b : targets.bins) sum += f(b);
    return sum / static_cast<double>(targets.bins.size());
}

void check_label(std::span<const double> label_mag, const TargetBins& targets, const char* what) {
    for (std::size_t b : targets.bins) {
        if (!(std::abs(label_mag[b]) > 0)) throw DomainError(std::string(what) + ": zero label magnitude at a target bin");
    }
}

std::vector<double> abs_all(std::span<const Complex> z) {
    std::vector<double> m(z.size());
    std::transform(z.begin(), z.end(), m.begin(), [](const Complex& c) { return std::abs(c); });
    return m;
}

} // namespace

double roc_auc(std::span<const double> profile_mag, const TargetBins& targets, int tolerance_bins) {
    check_bins(profile_mag.size(), targets, "roc_auc");
    const auto near = near_targets(profile_mag.size(), targets, tolerance_bins);
    std::vector<double> pos, neg;
    for (std::size_t k = 0; k < profile_mag.size(); ++k) {
        (near[k] ? pos : neg).push_back(std::abs(profile_mag[k]));
    }
    return roc_auc(pos, neg);
}

double mae_amplitude_db(std::span<const double> pred_mag, std::span<const double> label_mag,
                        const TargetBins& targets) {
    check_bins(std::min(pred_mag.size(), label_mag.size()), targets, "mae_amplitude_db");
    check_label(label_mag, targets, "mae_amplitude_db");
    return mean_over_bins(targets, [&](std::size_t b) { return std::abs(to_db(pred_mag[b]) - to_db(label_mag[b])); });
}

double mse_amplitude_db(std::span<const double> pred_mag, std::span<const double> label_mag,
                        const TargetBins& targets) {
    check_bins(std::min(pred_mag.size(), label_mag.size()), targets, "mse_amplitude_db");
    check_label(label_mag, targets, "mse_amplitude_db");
    return mean_over_bins(targets, [&](std::size_t b) {
        const double d = to_db(pred_mag[b]) - to_db(label_mag[b]);
        return d * d;
    });
}

double mae_phase_deg(std::span<const Complex> pred, std::span<const Complex> label, const TargetBins& targets) {
    check_bins(std::min(pred.size(), label.size()), targets, "mae_phase_deg");
    check_label(abs_all(label), targets, "mae_phase_deg");
    return mean_over_bins(targets, [&](std::size_t b) { return phase_error_deg(pred[b], label[b]); });
}

double mse_phase_deg(std::span<const Complex> pred, std::span<const Complex> label, const TargetBins& targets) {
    check_bins(std::min(pred.size(), label.size()), targets, "mse_phase_deg");
    check_label(abs_all(label), targets, "mse_phase_deg");
    return mean_over_bins(targets, [&](std::size_t b) {
        const double d = phase_error_deg(pred[b], label[b]);
        return d * d;
    });
}

double profile_snr_db(std::span<const double> profile_mag, const TargetBins& targets, int guard_bins) {
    check_bins(profile_mag.size(), targets, "profile_snr_db");
    const auto near = near_targets(profile_mag.size(), targets, guard_bins);
    std::vector<double> noise;
    for (std::size_t k = 0; k < profile_mag.size(); ++k) {
        if (!near[k]) noise.push_back(std::abs(profile_mag[k]));
    }
    if (noise.empty()) throw DomainError("profile_snr_db: no noise bins outside the guard regions");
    const auto mid = noise.begin() + static_cast<std::ptrdiff_t>(noise.size() / 2);
    std::nth_element(noise.begin(), mid, noise.end());
    double floor = *mid;
    if (noise.size() % 2 == 0) floor = 0.5 * (floor + *std::max_element(noise.begin(), mid));
    return to_db(profile_mag[targets.strongest]) - to_db(floor);
}

double delta_snr(std::span<const double> before_mag, std::span<const double> after_mag, const TargetBins& targets,
                 int guard_bins) {
    return profile_snr_db(after_mag, targets, guard_bins) - profile_snr_db(before_mag, targets, guard_bins);
}

// ---------------------------------------------------------------------------

void MetricConfig::validate() const {
    if (tolerance_bins < 0 || guard_bins < 0) throw ConfigError("metric bin counts must be non-negative");
    if (roc_points < 2) throw ConfigError("metric_roc_points must be >= 2");
}

const std::vector<std::string>& MetricConfig::config_keys() {
    static const std::vector<std::string> keys{"metric_tolerance_bins", "metric_guard_bins", "metric_roc_points"};
    return keys;
}

MetricConfig MetricConfig::from_config(const KeyValueConfig& kv) {
    MetricConfig c;
    c.tolerance_bins = static_cast<int>(kv.get_int_or("metric_tolerance_bins", c.tolerance_bins));
    c.guard_bins = static_cast<int>(kv.get_int_or("metric_guard_bins", c.guard_bins));
    c.roc_points = static_cast<std::size_t>(kv.get_int_or("metric_roc_points", static_cast<long long>(c.roc_points)));
    c.validate();
    return c;
}

void MetricConfig::write_to(KeyValueConfig& kv) const {
    kv.set("metric_tolerance_bins", std::to_string(tolerance_bins));
    kv.set("metric_guard_bins", std::to_string(guard_bins));
    kv.set("metric_roc_points", std::to_string(roc_points));
}

SampleMetrics evaluate_sample(const ScenarioSample& sample, const MitigationResult& result, const RadarConfig& radar,
                              std::size_t n_fft, const MetricConfig& cfg) {
    if (result.profile.size() != n_fft || result.magnitude.size() != n_fft) {
        throw ShapeError("evaluate_sample: profile length differs from n_fft");
    }
    for (std::size_t k = 0; k < n_fft; ++k) {
        if (!std::isfinite(result.profile[k].real()) || !std::isfinite(result.profile[k].imag()) ||
            !std::isfinite(result.magnitude[k])) {
            throw DomainError("evaluate_sample: non-finite profile entry");
        }
    }
    const TargetBins tb = target_bins(sample.targets, radar, n_fft);
    const ComplexVector label = range_fft(sample.clean_signal, n_fft);
    const auto label_mag = abs_all(label);
    const auto before_mag = abs_all(range_fft(sample.interfered_signal, n_fft));
    SampleMetrics m;
    m.n_int = static_cast<int>(sample.interferers.size());
    m.auc = roc_auc(result.magnitude, tb, cfg.tolerance_bins);
    m.mae_amp_db = mae_amplitude_db(result.magnitude, label_mag, tb);
    m.mse_amp_db = mse_amplitude_db(result.magnitude, label_mag, tb);
    m.mae_phase_deg = mae_phase_deg(result.profile, label, tb);
    m.mse_phase_deg = mse_phase_deg(result.profile, label, tb);
    m.delta_snr_db = delta_snr(before_mag, result.magnitude, tb, cfg.guard_bins);
    return m;
}

MetricSummary summarize(std::span<const SampleMetrics> samples) {
    MetricSummary s;
    for (const auto& m : samples) {
        if (!m.ok) continue;
        ++s.count;
        s.auc += m.auc;
        s.mae_amp_db += m.mae_amp_db;
        s.mae_phase_deg += m.mae_phase_deg;
        s.rmse_amp_db += m.mse_amp_db;
        s.rmse_phase_deg += m.mse_phase_deg;
        s.delta_snr_db += m.delta_snr_db;
    }
    if (s.count == 0) return s;
    const double n = static_cast<double>(s.count);
    s.auc /= n;
    s.mae_amp_db /= n;
    s.mae_phase_deg /= n;
    s.rmse_amp_db = std::sqrt(s.rmse_amp_db / n);
    s.rmse_phase_deg = std::sqrt(s.rmse_phase_deg / n);
    s.delta_snr_db /= n;
    return s;
}

EvalReport evaluate(std::span<const ScenarioSample> samples, std::span<const std::size_t> indices,
                    const MitigationMethod& method, const std::string& method_name, const RadarConfig& radar,
                    std::size_t n_fft, const MetricConfig& cfg) {
    cfg.validate();
    if (indices.size() != samples.size()) throw ShapeError("evaluate: one index per sample required");
    EvalReport report;
    report.method = method_name;
    report.samples.resize(samples.size());
    const std::size_t P = cfg.roc_points;
    std::vector<std::vector<double>> tpr(samples.size()), fpr(samples.size());

    parallel_for(samples.size(), [&](std::size_t i) {
        SampleMetrics& m = report.samples[i];
        try {
            const MitigationResult r = method(samples[i]);
            m = evaluate_sample(samples[i], r, radar, n_fft, cfg);
            const TargetBins tb = target_bins(samples[i].targets, radar, n_fft);
            const auto near = near_targets(n_fft, tb, cfg.tolerance_bins);
            double peak = 0.0;
            for (double v : r.magnitude) peak = std::max(peak, std::abs(v));
            tpr[i].assign(P, 0.0);
            fpr[i].assign(P, 0.0);
            std::size_t npos = 0;
            for (bool b : near) npos += b;
            const std::size_t nneg = n_fft - npos;
            for (std::size_t k = 0; k < n_fft; ++k) {
                const double score = peak > 0 ? std::abs(r.magnitude[k]) / peak : 0.0;
                // Thresholds j/(P-1) that this score reaches.
                const auto reach = std::min<std::size_t>(
                    P - 1, static_cast<std::size_t>(std::floor(score * static_cast<double>(P - 1) + 1e-12)));
                auto& curve = near[k] ? tpr[i] : fpr[i];
                for (std::size_t j = 0; j <= reach; ++j) curve[j] += 1.0;
            }
            for (auto& v : tpr[i]) v /= static_cast<double>(npos);
            for (auto& v : fpr[i]) v /= static_cast<double>(nneg);
        } catch (const std::exception& e) {
            m = SampleMetrics{};
            m.ok = false;
            m.error = e.what();
        }
        m.index = indices[i];
        m.n_int = static_cast<int>(samples[i].interferers.size());
    });

    report.overall = summarize(report.samples);
    std::map<int, std::vector<SampleMetrics>> groups;
    for (const auto& m : report.samples) {
        if (!m.ok) ++report.failures;
        groups[m.n_int].push_back(m);
    }
    for (const auto& [k, v] : groups) report.by_interferers[k] = summarize(v);

    report.roc_threshold.resize(P);
    report.roc_tpr.assign(P, 0.0);
    report.roc_fpr.assign(P, 0.0);
    std::size_t used = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!report.samples[i].ok) continue;
        ++used;
        for (std::size_t j = 0; j < P; ++j) {
            report.roc_tpr[j] += tpr[i][j];
            report.roc_fpr[j] += fpr[i][j];
        }
    }
    for (std::size_t j = 0; j < P; ++j) {
        report.roc_threshold[j] = static_cast<double>(j) / static_cast<double>(P - 1);
        if (used) {
            report.roc_tpr[j] /= static_cast<double>(used);
            report.roc_fpr[j] /= static_cast<double>(used);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report formatting

std::string samples_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "index,n_int,ok,auc,mae_amp_db,mae_phase_deg,mse_amp_db,mse_phase_deg,delta_snr_db,error\n";
    for (const auto& m : report.samples) {
        std::string err = m.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << m.index << ',' << m.n_int << ',' << (m.ok ? 1 : 0) << ',' << format_double(m.auc) << ','
            << format_double(m.mae_amp_db) << ',' << format_double(m.mae_phase_deg) << ','
            << format_double(m.mse_amp_db) << ',' << format_double(m.mse_phase_deg) << ','
            << format_double(m.delta_snr_db) << ',' << err << '\n';
    }
    return out.str();
}

namespace {

void put_summary(KeyValueConfig& kv, const std::string& prefix, const MetricSummary& s) {
    kv.set(prefix + "count", std::to_string(s.count));
    kv.set(prefix + "auc", format_double(s.auc));
    kv.set(prefix + "mae_amp_db", format_double(s.mae_amp_db));
    kv.set(prefix + "mae_phase_deg", format_double(s.mae_phase_deg));
    kv.set(prefix + "rmse_amp_db", format_double(s.rmse_amp_db));
    kv.set(prefix + "rmse_phase_deg", format_double(s.rmse_phase_deg));
    kv.set(prefix + "delta_snr_db", format_double(s.delta_snr_db));
}

void put_row(std::ostringstream& out, const std::string& method, const std::string& group, const MetricSummary& s) {
    out << method << ',' << group << ',' << s.count << ',' << format_double(s.auc) << ','
        << format_double(s.mae_amp_db) << ',' << format_double(s.mae_phase_deg) << ','
        << format_double(s.rmse_amp_db) << ',' << format_double(s.rmse_phase_deg) << ','
        << format_double(s.delta_snr_db) << '\n';
}

} // namespace

std::string summary_text(const EvalReport& report) {
    KeyValueConfig kv;
    kv.set("method", report.method);
    kv.set("samples", std::to_string(report.samples.size()));
    kv.set("failures", std::to_string(report.failures));
    put_summary(kv, "all.", report.overall);
    for (const auto& [k, s] : report.by_interferers) put_summary(kv, "n_int_" + std::to_string(k) + ".", s);
    return kv.to_string();
}

std::string grouped_csv(std::span<const EvalReport> reports) {
    std::ostringstream out;
    out << "method,n_int,count,auc,mae_amp_db,mae_phase_deg,rmse_amp_db,rmse_phase_deg,delta_snr_db\n";
    for (const auto& r : reports) {
        for (const auto& [k, s] : r.by_interferers) put_row(out, r.method, std::to_string(k), s);
        put_row(out, r.method, "all", r.overall);
    }
    return out.str();
}

std::string roc_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "threshold,tpr,fpr\n";
    for (std::size_t j = 0; j < report.roc_threshold.size(); ++j) {
        out << format_double(report.roc_threshold[j]) << ',' << format_double(report.roc_tpr[j]) << ','
            << format_double(report.roc_fpr[j]) << '\n';
    }
    return out.str();
}

} // namespace arim
