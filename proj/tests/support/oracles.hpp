#pragma once

// Independent brute-force references used to check the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "arim/fcn.hpp"
#include "arim/tensor.hpp"

namespace oracle {

using cd = std::complex<double>;

inline cd twiddle(std::size_t k, std::size_t n, std::size_t size) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * n) % size) / static_cast<double>(size);
    return {std::cos(angle), std::sin(angle)};
}

inline std::vector<cd> dft(const std::vector<cd>& x, std::size_t n_fft) {
    std::vector<cd> out(n_fft);
    for (std::size_t k = 0; k < n_fft; ++k) {
        for (std::size_t n = 0; n < x.size(); ++n) out[k] += x[n] * twiddle(k, n, n_fft);
    }
    return out;
}

inline double hamming(std::size_t n, std::size_t len) {
    if (len < 2) return 1.0;
    return 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(len - 1));
}

// X(m, k) = sum_n x[m*hop + n] w[n] exp(-2 pi i k (m*hop + n) / n_fft)
inline std::vector<std::vector<cd>> stft(const std::vector<cd>& x, std::size_t len, std::size_t hop,
                                         std::size_t n_fft) {
    std::vector<std::vector<cd>> out;
    for (std::size_t m = 0; m * hop + len <= x.size(); ++m) {
        std::vector<cd> row(n_fft);
        for (std::size_t k = 0; k < n_fft; ++k) {
            for (std::size_t n = 0; n < len; ++n) {
                const std::size_t t = m * hop + n;
                row[k] += x[t] * hamming(n, len) * twiddle(k, t, n_fft);
            }
        }
        out.push_back(row);
    }
    return out;
}

// Cross-correlation, circular horizontally and zero-padded vertically.
inline arim::Tensor3 conv(const arim::Tensor3& in, const arim::ConvParams& p) {
    arim::Tensor3 out(in.h, in.w, p.c_out);
    const long half = static_cast<long>(p.k / 2);
    const long H = static_cast<long>(in.h), W = static_cast<long>(in.w);
    for (long y = 0; y < H; ++y) {
        for (long x = 0; x < W; ++x) {
            for (std::size_t co = 0; co < p.c_out; ++co) {
                double acc = p.bias[co];
                for (long dy = 0; dy < static_cast<long>(p.k); ++dy) {
                    const long yy = y + dy - half;
                    if (yy < 0 || yy >= H) continue;
                    for (long dx = 0; dx < static_cast<long>(p.k); ++dx) {
                        const long xx = ((x + dx - half) % W + W) % W;
                        for (std::size_t ci = 0; ci < p.c_in; ++ci) {
                            acc += in.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), ci) *
                                   p.w(static_cast<std::size_t>(dy), static_cast<std::size_t>(dx), ci, co);
                        }
                    }
                }
                out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), co) = acc;
            }
        }
    }
    return out;
}

inline arim::Tensor3 maxpool(const arim::Tensor3& in) {
    arim::Tensor3 out((in.h + 1) / 2, in.w, in.c);
    for (std::size_t y = 0; y < out.h; ++y) {
        for (std::size_t x = 0; x < in.w; ++x) {
            for (std::size_t c = 0; c < in.c; ++c) {
                const std::size_t y1 = std::min(2 * y + 1, in.h - 1);
                out.at(y, x, c) = std::max(in.at(2 * y, x, c), in.at(y1, x, c));
            }
        }
    }
    return out;
}

inline double auc_pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos) {
        for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    }
    return wins / static_cast<double>(pos.size() * neg.size());
}

// Kolmogorov-Smirnov distance between a sample and the uniform CDF on [lo, hi].
inline double ks_uniform(std::vector<double> v, double lo, double hi) {
    std::sort(v.begin(), v.end());
    double d = 0.0;
    const double n = static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = (v[i] - lo) / (hi - lo);
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return d;
}

} // namespace oracle
