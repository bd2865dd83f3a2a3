#include "arim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "arim/error.hpp"
#include "arim/fft.hpp"

namespace arim {

std::size_t StftConfig::frame_count(std::size_t signal_len) const {
    if (signal_len < window_len || hop == 0) return 0;
    return (signal_len - window_len) / hop + 1;
}

void StftConfig::validate(std::size_t signal_len) const {
    if (window_len == 0 || hop == 0 || n_fft == 0) throw ConfigError("STFT sizes must be positive");
    if (window_len > n_fft) throw ConfigError("STFT window_len must not exceed n_fft");
    if (signal_len < window_len) throw DomainError("signal shorter than STFT window");
}

const std::vector<std::string>& StftConfig::config_keys() {
    static const std::vector<std::string> keys{"stft_window_len", "stft_hop", "n_fft", "stft_window"};
    return keys;
}

StftConfig StftConfig::from_config(const KeyValueConfig& kv) {
    StftConfig c;
    c.window_len = static_cast<std::size_t>(kv.get_int_or("stft_window_len", static_cast<long long>(c.window_len)));
    c.hop = static_cast<std::size_t>(kv.get_int_or("stft_hop", static_cast<long long>(c.hop)));
    c.n_fft = static_cast<std::size_t>(kv.get_int_or("n_fft", static_cast<long long>(c.n_fft)));
    if (auto w = kv.get_string("stft_window"); w && *w != "hamming") {
        throw ConfigError("unsupported stft_window '" + *w + "'");
    }
    if (c.window_len == 0 || c.hop == 0 || c.n_fft == 0 || c.window_len > c.n_fft) {
        throw ConfigError("invalid STFT configuration");
    }
    return c;
}

void StftConfig::write_to(KeyValueConfig& kv) const {
    kv.set("stft_window_len", std::to_string(window_len));
    kv.set("stft_hop", std::to_string(hop));
    kv.set("n_fft", std::to_string(n_fft));
    kv.set("stft_window", "hamming");
}

std::vector<double> hamming_window(std::size_t len) {
    std::vector<double> w(len, 1.0);
    if (len < 2) return w;
    const double denom = static_cast<double>(len - 1);
    for (std::size_t n = 0; n < len; ++n) {
        w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
    }
    return w;
}

ComplexMatrix stft(std::span<const Complex> signal, const StftConfig& cfg) {
    cfg.validate(signal.size());
    const auto window = hamming_window(cfg.window_len);
    const std::size_t frames = cfg.frame_count(signal.size());
    ComplexMatrix out{frames, cfg.n_fft, ComplexVector(frames * cfg.n_fft)};
    ComplexVector buf(cfg.n_fft);
    for (std::size_t m = 0; m < frames; ++m) {
        std::fill(buf.begin(), buf.end(), Complex{});
        const std::size_t start = m * cfg.hop;
        // Sample n lands at n mod n_fft so the kernel phase follows absolute time.
        for (std::size_t i = 0; i < cfg.window_len; ++i) {
            const std::size_t n = start + i;
            buf[n % cfg.n_fft] += signal[n] * window[i];
        }
        fft_inplace(buf);
        std::copy(buf.begin(), buf.end(), out.data.begin() + static_cast<std::ptrdiff_t>(m * cfg.n_fft));
    }
    return out;
}

ComplexVector range_fft(std::span<const Complex> signal, std::size_t n_fft) {
    if (n_fft < signal.size()) throw DomainError("range_fft: n_fft shorter than signal");
    ComplexVector buf(n_fft, Complex{});
    std::copy(signal.begin(), signal.end(), buf.begin());
    fft_inplace(buf);
    return buf;
}

ThreeChannelInput assemble_input(const ComplexMatrix& spec) {
    ThreeChannelInput in;
    in.data = Tensor3(spec.rows, spec.cols, 3);
    double peak = 0.0;
    for (const auto& z : spec.data) peak = std::max(peak, std::abs(z));
    in.scale = peak > 0.0 ? peak : 1.0;
    for (std::size_t r = 0; r < spec.rows; ++r) {
        for (std::size_t c = 0; c < spec.cols; ++c) {
            const Complex z = spec(r, c);
            in.data.at(r, c, 0) = z.real() / in.scale;
            in.data.at(r, c, 1) = std::abs(z) / in.scale;
            in.data.at(r, c, 2) = z.imag() / in.scale;
        }
    }
    return in;
}

ThreeChannelLabel assemble_label(std::span<const Complex> clean_signal, std::size_t n_fft, double scale) {
    if (!(scale > 0)) throw DomainError("assemble_label: scale must be positive");
    const auto spectrum = range_fft(clean_signal, n_fft);
    ThreeChannelLabel label;
    label.scale = scale;
    label.data = Tensor3(1, n_fft, 3);
    for (std::size_t k = 0; k < n_fft; ++k) {
        const Complex z = spectrum[k] / scale;
        label.data.at(0, k, 0) = z.real();
        label.data.at(0, k, 1) = std::abs(z);
        label.data.at(0, k, 2) = z.imag();
    }
    return label;
}

RangeProfile profile_from_channels(const Tensor3& channels) {
    if (channels.c != 3 || channels.h != 1) {
        throw ShapeError("profile_from_channels: expected 1xNx3, got " + channels.shape_string());
    }
    RangeProfile p;
    p.magnitude.resize(channels.w);
    p.phase.resize(channels.w);
    for (std::size_t k = 0; k < channels.w; ++k) {
        const double re = channels.at(0, k, 0);
        const double im = channels.at(0, k, 2);
        p.magnitude[k] = channels.at(0, k, 1);
        double phase = std::hypot(re, im) < kPhaseMagnitudeFloor ? 0.0 : std::atan2(im, re);
        if (phase == -std::numbers::pi) phase = std::numbers::pi;
        p.phase[k] = phase;
    }
    return p;
}

ComplexVector complex_from_channels(const Tensor3& channels, double scale) {
    if (channels.c != 3 || channels.h != 1) {
        throw ShapeError("complex_from_channels: expected 1xNx3, got " + channels.shape_string());
    }
    ComplexVector out(channels.w);
    for (std::size_t k = 0; k < channels.w; ++k) {
        out[k] = Complex(channels.at(0, k, 0), channels.at(0, k, 2)) * scale;
    }
    return out;
}

} // namespace arim
