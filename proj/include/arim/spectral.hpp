#pragma once

#include <span>
#include <utility>
#include <vector>

#include "arim/config_file.hpp"
#include "arim/radar_sim.hpp"
#include "arim/tensor.hpp"

namespace arim {

enum class WindowKind { Hamming };

struct StftConfig {
    std::size_t window_len = 32;
    std::size_t hop = 8;
    std::size_t n_fft = 512;
    WindowKind window = WindowKind::Hamming;

    // Frames that fit without running past the end of the signal.
    std::size_t frame_count(std::size_t signal_len) const;
    void validate(std::size_t signal_len) const;

    // 154 frames of 2048 bins over a 1024-sample chirp.
    static StftConfig full_scale() { return {106, 6, 2048, WindowKind::Hamming}; }
    static StftConfig desk() { return {}; }

    static StftConfig from_config(const KeyValueConfig& kv);
    void write_to(KeyValueConfig& kv) const;
    static const std::vector<std::string>& config_keys();
};

// Row-major T x N complex matrix.
struct ComplexMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Complex> data;

    Complex& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    Complex operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Channels: 0 = real, 1 = magnitude, 2 = imaginary; all divided by `scale`.
struct ThreeChannelInput {
    Tensor3 data;  // T x N x 3
    double scale = 1.0;
};

struct ThreeChannelLabel {
    Tensor3 data;  // 1 x N x 3
    double scale = 1.0;
};

std::vector<double> hamming_window(std::size_t len);

/// Short-time Fourier transform with the phase referenced to absolute sample
/// time: X(m, k) = sum_n x[n] w[n - m*hop] exp(-2 pi i k n / n_fft).
///
/// With this reference a stationary tone keeps the same phase in every frame,
/// and summing frames approximates the full-length transform.
ComplexMatrix stft(std::span<const Complex> signal, const StftConfig& cfg);

// Zero-padded DFT without a window.
ComplexVector range_fft(std::span<const Complex> signal, std::size_t n_fft);

ThreeChannelInput assemble_input(const ComplexMatrix& spec);

ThreeChannelLabel assemble_label(std::span<const Complex> clean_signal, std::size_t n_fft, double scale);

struct RangeProfile {
    std::vector<double> magnitude;
    std::vector<double> phase;  // radians, (-pi, pi]
};

// Bins whose magnitude is below this get phase 0.
inline constexpr double kPhaseMagnitudeFloor = 1e-12;

RangeProfile profile_from_channels(const Tensor3& channels);

// Complex profile from channels 0 and 2 of a 1 x N x 3 tensor.
ComplexVector complex_from_channels(const Tensor3& channels, double scale = 1.0);

} // namespace arim
