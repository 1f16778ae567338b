#pragma once

#include <cmath>

#include "sparknet/rng.hpp"
#include "sparknet/tensor.hpp"

namespace sparknet {

struct GateConfig {
    double sigma = 0.5;
    bool training_noise = true;
};

// z = clamp(0.5 + mu + eps, 0, 1); eps ~ N(0, sigma^2) in training, 0 in eval.
// pre_clip is kept so the backward pass knows where the clamp saturated.
struct GateTensor {
    Tensor2 z;
    Tensor2 pre_clip;
};

inline GateTensor sample_gates(const Tensor2& mu, const GateConfig& cfg, Rng* noise = nullptr) {
    GateTensor out;
    out.pre_clip = Tensor2(mu.channels, mu.time);
    out.z = Tensor2(mu.channels, mu.time);
    const bool noisy = cfg.training_noise && noise != nullptr;
    for (size_t i = 0; i < mu.data.size(); ++i) {
        double pre = 0.5 + mu.data[i] + (noisy ? noise->normal(0.0, cfg.sigma) : 0.0);
        out.pre_clip.data[i] = pre;
        out.z.data[i] = std::clamp(pre, 0.0, 1.0);
    }
    return out;
}

// Gradient passes only where the clamp was strictly interior.
inline Tensor2 gate_backward(const GateTensor& gates, const Tensor2& gout) {
    Tensor2 gin(gout.channels, gout.time);
    for (size_t i = 0; i < gout.data.size(); ++i) {
        double pre = gates.pre_clip.data[i];
        gin.data[i] = (pre > 0.0 && pre < 1.0) ? gout.data[i] : 0.0;
    }
    return gin;
}

// Expected L0 of the gates in closed form: per entry
// P(z > 0) = 0.5 - 0.5*erf(-(mu + 0.5) / (sqrt(2)*sigma)).
inline double sparsity_term(double mu, double sigma) {
    return 0.5 - 0.5 * std::erf(-(mu + 0.5) / (std::sqrt(2.0) * sigma));
}

inline double sparsity_term_grad(double mu, double sigma) {
    double a = (mu + 0.5) / sigma;
    return std::exp(-0.5 * a * a) / (sigma * std::sqrt(2.0 * M_PI));
}

// Mean over all F*T entries; grad is written into gmu (accumulated).
inline double sparsity_loss(const Tensor2& mu, const GateConfig& cfg, Tensor2* gmu = nullptr) {
    const double n = static_cast<double>(mu.data.size());
    double loss = 0.0;
    for (size_t i = 0; i < mu.data.size(); ++i) {
        loss += sparsity_term(mu.data[i], cfg.sigma);
        if (gmu) gmu->data[i] += sparsity_term_grad(mu.data[i], cfg.sigma) / n;
    }
    return loss / n;
}

}  // namespace sparknet
