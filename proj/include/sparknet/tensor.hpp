#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparknet {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Channel-major 2D activation: data[c * time + t].
struct Tensor2 {
    int channels = 0;
    int time = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(int c, int t) : channels(c), time(t), data(static_cast<size_t>(c) * t, 0.0) {}

    double& at(int c, int t) { return data[static_cast<size_t>(c) * time + t]; }
    double at(int c, int t) const { return data[static_cast<size_t>(c) * time + t]; }

    size_t size() const { return data.size(); }
};

inline void require_shape(const Tensor2& x, int channels, const char* what) {
    if (x.channels != channels)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(channels) +
                         " channels, got " + std::to_string(x.channels));
}

// Trainable array with its gradient and SGD momentum buffer.
struct Parameter {
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> momentum_buf;

    void resize(size_t n) {
        value.assign(n, 0.0);
        grad.assign(n, 0.0);
        momentum_buf.assign(n, 0.0);
    }
    size_t size() const { return value.size(); }
    void zero_grad() { grad.assign(grad.size(), 0.0); }
};

}  // namespace sparknet
