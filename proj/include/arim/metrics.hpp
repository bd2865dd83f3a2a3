#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "arim/mitigate.hpp"
#include "arim/radar_sim.hpp"

namespace arim {

struct TargetBins {
    std::vector<std::size_t> bins;  // ascending, unique
    std::size_t strongest = 0;      // bin of the highest-amplitude target
};

// round(f_b / f_s * n_fft) mod n_fft per target; targets sharing a bin merge
// into the strongest one.
TargetBins target_bins(std::span<const TargetSpec> targets, const RadarConfig& radar, std::size_t n_fft);

// Normalized Mann-Whitney U, ties count one half.
double roc_auc(std::span<const double> positives, std::span<const double> negatives);

// Positives are bins within +-tolerance_bins (circular) of a target bin.
double roc_auc(std::span<const double> profile_mag, const TargetBins& targets, int tolerance_bins = 1);

// Predicted magnitudes below this are raised to it before taking logarithms.
inline constexpr double kMagnitudeFloor = 1e-12;

double mae_amplitude_db(std::span<const double> pred_mag, std::span<const double> label_mag,
                        const TargetBins& targets);
double mae_phase_deg(std::span<const Complex> pred, std::span<const Complex> label, const TargetBins& targets);

// Mean squared errors behind the RMSE variants.
double mse_amplitude_db(std::span<const double> pred_mag, std::span<const double> label_mag,
                        const TargetBins& targets);
double mse_phase_deg(std::span<const Complex> pred, std::span<const Complex> label, const TargetBins& targets);

// 20 log10(|p[b*]| / median |p| over bins farther than guard_bins from every target).
double profile_snr_db(std::span<const double> profile_mag, const TargetBins& targets, int guard_bins = 4);

double delta_snr(std::span<const double> before_mag, std::span<const double> after_mag, const TargetBins& targets,
                 int guard_bins = 4);

struct MetricConfig {
    int tolerance_bins = 1;
    int guard_bins = 4;
    std::size_t roc_points = 101;

    void validate() const;
    static MetricConfig from_config(const KeyValueConfig& kv);
    void write_to(KeyValueConfig& kv) const;
    static const std::vector<std::string>& config_keys();
};

struct SampleMetrics {
    std::size_t index = 0;
    int n_int = 0;
    bool ok = true;
    std::string error;
    double auc = 0.0;
    double mae_amp_db = 0.0;
    double mae_phase_deg = 0.0;
    double mse_amp_db = 0.0;
    double mse_phase_deg = 0.0;
    double delta_snr_db = 0.0;
};

struct MetricSummary {
    std::size_t count = 0;
    double auc = 0.0;
    double mae_amp_db = 0.0;
    double mae_phase_deg = 0.0;
    double rmse_amp_db = 0.0;
    double rmse_phase_deg = 0.0;
    double delta_snr_db = 0.0;
};

struct EvalReport {
    std::string method;
    std::vector<SampleMetrics> samples;  // sample-index order
    MetricSummary overall;
    std::map<int, MetricSummary> by_interferers;
    std::size_t failures = 0;
    // Mean ROC over samples; each sample's magnitudes are divided by their maximum.
    std::vector<double> roc_threshold;
    std::vector<double> roc_tpr;
    std::vector<double> roc_fpr;
};

using MitigationMethod = std::function<MitigationResult(const ScenarioSample&)>;

SampleMetrics evaluate_sample(const ScenarioSample& sample, const MitigationResult& result,
                              const RadarConfig& radar, std::size_t n_fft, const MetricConfig& cfg);

// Per-sample failures are recorded in the report, not thrown.
EvalReport evaluate(std::span<const ScenarioSample> samples, std::span<const std::size_t> indices,
                    const MitigationMethod& method, const std::string& method_name, const RadarConfig& radar,
                    std::size_t n_fft, const MetricConfig& cfg = {});

// Aggregates recomputed from per-sample records.
MetricSummary summarize(std::span<const SampleMetrics> samples);

std::string samples_csv(const EvalReport& report);
std::string summary_text(const EvalReport& report);
std::string grouped_csv(std::span<const EvalReport> reports);
std::string roc_csv(const EvalReport& report);

} // namespace arim
