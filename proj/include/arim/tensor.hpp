#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace arim {

// Dense height x width x channels array, channels fastest (HWC).
struct Tensor3 {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t c = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
        : h(height), w(width), c(channels), data(height * width * channels, fill) {}

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    double& at(std::size_t y, std::size_t x, std::size_t ch) { return data[(y * w + x) * c + ch]; }
    double at(std::size_t y, std::size_t x, std::size_t ch) const { return data[(y * w + x) * c + ch]; }

    double* row(std::size_t y) { return data.data() + y * w * c; }
    const double* row(std::size_t y) const { return data.data() + y * w * c; }

    bool same_shape(const Tensor3& o) const { return h == o.h && w == o.w && c == o.c; }
    std::string shape_string() const {
        return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
    }

    bool operator==(const Tensor3&) const = default;
};

} // namespace arim
