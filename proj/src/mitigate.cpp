#include "arim/mitigate.hpp"

#include <algorithm>
#include <cmath>

#include "arim/error.hpp"

namespace arim {

void ZeroingConfig::validate() const {
    if (!(detection_factor > 1.0)) throw ConfigError("zeroing_detection_factor must be > 1");
    if (guard_samples < 0) throw ConfigError("zeroing_guard_samples must be >= 0");
}

const std::vector<std::string>& ZeroingConfig::config_keys() {
    static const std::vector<std::string> keys{"zeroing_detection_factor", "zeroing_guard_samples"};
    return keys;
}

ZeroingConfig ZeroingConfig::from_config(const KeyValueConfig& kv) {
    ZeroingConfig c;
    c.detection_factor = kv.get_double_or("zeroing_detection_factor", c.detection_factor);
    c.guard_samples = static_cast<int>(kv.get_int_or("zeroing_guard_samples", c.guard_samples));
    c.validate();
    return c;
}

void ZeroingConfig::write_to(KeyValueConfig& kv) const {
    kv.set("zeroing_detection_factor", format_double(detection_factor));
    kv.set("zeroing_guard_samples", std::to_string(guard_samples));
}

namespace {

std::vector<double> magnitudes(std::span<const Complex> z) {
    std::vector<double> m(z.size());
    std::transform(z.begin(), z.end(), m.begin(), [](const Complex& c) { return std::abs(c); });
    return m;
}

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

} // namespace

std::vector<bool> detect_interference_samples(std::span<const Complex> signal, const ZeroingConfig& cfg) {
    if (signal.empty()) throw DomainError("detect_interference_samples: empty signal");
    cfg.validate();
    const auto mag = magnitudes(signal);
    const double threshold = cfg.detection_factor * median(mag);
    const auto n = static_cast<std::ptrdiff_t>(signal.size());
    std::vector<bool> mask(signal.size(), false);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (!(mag[static_cast<std::size_t>(i)] > threshold)) continue;
        const auto lo = std::max<std::ptrdiff_t>(0, i - cfg.guard_samples);
        const auto hi = std::min<std::ptrdiff_t>(n - 1, i + cfg.guard_samples);
        for (auto j = lo; j <= hi; ++j) mask[static_cast<std::size_t>(j)] = true;
    }
    return mask;
}

MitigationResult zero_mitigate(std::span<const Complex> signal, const ZeroingConfig& cfg, std::size_t n_fft) {
    const auto mask = detect_interference_samples(signal, cfg);
    ComplexVector repaired(signal.begin(), signal.end());
    for (std::size_t i = 0; i < repaired.size(); ++i) {
        if (mask[i]) repaired[i] = 0.0;
    }
    MitigationResult r;
    r.profile = range_fft(repaired, n_fft);
    r.magnitude = magnitudes(r.profile);
    r.method = "zeroing";
    return r;
}

MitigationResult model_mitigate(const FcnModel& model, std::span<const Complex> signal, const StftConfig& stft_cfg) {
    const auto input = assemble_input(stft(signal, stft_cfg));
    const Tensor3 out = model.infer(input.data);
    MitigationResult r;
    r.profile = complex_from_channels(out, input.scale);
    r.magnitude.resize(out.w);
    for (std::size_t k = 0; k < out.w; ++k) r.magnitude[k] = out.at(0, k, 1) * input.scale;
    r.method = "fcn";
    r.scale = input.scale;
    return r;
}

MitigationResult oracle_profile(const ScenarioSample& sample, std::size_t n_fft) {
    MitigationResult r;
    r.profile = range_fft(sample.clean_signal, n_fft);
    r.magnitude = magnitudes(r.profile);
    r.method = "oracle";
    return r;
}

MitigationResult unmitigated_profile(const ScenarioSample& sample, std::size_t n_fft) {
    MitigationResult r;
    r.profile = range_fft(sample.interfered_signal, n_fft);
    r.magnitude = magnitudes(r.profile);
    r.method = "none";
    return r;
}

} // namespace arim
