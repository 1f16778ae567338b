#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sparknet/tensor.hpp"

namespace sparknet {

// Debug-mode multiply counter used to validate the analytic MAC model.
// Only conv/linear kernels report; disabled it costs one branch per row.
struct MulCounter {
    static inline bool enabled = false;
    static inline long long count = 0;
    static void reset() { count = 0; }
    static void add(long long n) {
        if (enabled) count += n;
    }
};

// Depthwise temporal conv, stride 1, same-length output via symmetric zero
// padding of (K-1)/2. weights laid out [channel][tap], no bias.
inline Tensor2 depthwise_conv1d(const Tensor2& in, const std::vector<double>& w, int K) {
    if (static_cast<size_t>(in.channels) * K != w.size())
        throw ShapeError("depthwise_conv1d: weight count does not match channels*K");
    const int pad = (K - 1) / 2;
    Tensor2 out(in.channels, in.time);
    for (int c = 0; c < in.channels; ++c) {
        const double* wc = w.data() + static_cast<size_t>(c) * K;
        for (int t = 0; t < in.time; ++t) {
            double acc = 0.0;
            for (int k = 0; k < K; ++k) {
                int src = t + k - pad;
                if (src >= 0 && src < in.time) acc += wc[k] * in.at(c, src);
            }
            out.at(c, t) = acc;
        }
        MulCounter::add(static_cast<long long>(K) * in.time);
    }
    return out;
}

inline void depthwise_conv1d_backward(const Tensor2& in, const std::vector<double>& w,
                                      int K, const Tensor2& gout,
                                      Tensor2& gin, std::vector<double>& gw) {
    const int pad = (K - 1) / 2;
    gin = Tensor2(in.channels, in.time);
    for (int c = 0; c < in.channels; ++c) {
        const double* wc = w.data() + static_cast<size_t>(c) * K;
        double* gwc = gw.data() + static_cast<size_t>(c) * K;
        for (int t = 0; t < in.time; ++t) {
            const double g = gout.at(c, t);
            for (int k = 0; k < K; ++k) {
                int src = t + k - pad;
                if (src >= 0 && src < in.time) {
                    gin.at(c, src) += wc[k] * g;
                    gwc[k] += in.at(c, src) * g;
                }
            }
        }
    }
}

// Per-frame channel mix: weights C_out x C_in row-major, optional bias.
inline Tensor2 pointwise_conv1d(const Tensor2& in, const std::vector<double>& w,
                                int c_out, const std::vector<double>* bias = nullptr) {
    if (w.size() != static_cast<size_t>(c_out) * in.channels)
        throw ShapeError("pointwise_conv1d: weight shape mismatch");
    Tensor2 out(c_out, in.time);
    for (int o = 0; o < c_out; ++o) {
        const double* wo = w.data() + static_cast<size_t>(o) * in.channels;
        const double b = bias ? (*bias)[o] : 0.0;
        for (int t = 0; t < in.time; ++t) {
            double acc = b;
            for (int i = 0; i < in.channels; ++i) acc += wo[i] * in.at(i, t);
            out.at(o, t) = acc;
        }
        MulCounter::add(static_cast<long long>(in.channels) * in.time);
    }
    return out;
}

inline void pointwise_conv1d_backward(const Tensor2& in, const std::vector<double>& w,
                                      int c_out, const Tensor2& gout, Tensor2& gin,
                                      std::vector<double>& gw,
                                      std::vector<double>* gbias = nullptr) {
    gin = Tensor2(in.channels, in.time);
    for (int o = 0; o < c_out; ++o) {
        const double* wo = w.data() + static_cast<size_t>(o) * in.channels;
        double* gwo = gw.data() + static_cast<size_t>(o) * in.channels;
        for (int t = 0; t < in.time; ++t) {
            const double g = gout.at(o, t);
            if (gbias) (*gbias)[o] += g;
            for (int i = 0; i < in.channels; ++i) {
                gin.at(i, t) += wo[i] * g;
                gwo[i] += in.at(i, t) * g;
            }
        }
    }
}

struct BatchNormState {
    Parameter gamma, beta;
    std::vector<double> running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;
    int channels = 0;

    void init(int c) {
        channels = c;
        gamma.resize(c);
        beta.resize(c);
        std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
        running_mean.assign(c, 0.0);
        running_var.assign(c, 1.0);
    }
};

// Saved forward state needed by the batchnorm backward pass.
struct BatchNormCache {
    std::vector<Tensor2> xhat;
    std::vector<double> mean, inv_std;
    long long count = 0;  // batch * time elements per channel
};

// Train: normalize over (batch, time) per channel with batch statistics and
// update running stats (biased variance normalizes, unbiased feeds running_var).
// Eval: running stats only.
inline std::vector<Tensor2> batchnorm1d(const std::vector<Tensor2>& in, BatchNormState& st,
                                        bool train, BatchNormCache* cache = nullptr) {
    if (in.empty()) return {};
    const int C = st.channels;
    for (const auto& x : in) require_shape(x, C, "batchnorm1d");
    const int T = in[0].time;
    const long long n = static_cast<long long>(in.size()) * T;
    if (train && n < 2) throw ShapeError("batchnorm1d: train mode needs >= 2 elements per channel");

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (train) {
        for (const auto& x : in)
            for (int c = 0; c < C; ++c)
                for (int t = 0; t < T; ++t) mean[c] += x.at(c, t);
        for (int c = 0; c < C; ++c) mean[c] /= n;
        for (const auto& x : in)
            for (int c = 0; c < C; ++c)
                for (int t = 0; t < T; ++t) {
                    double d = x.at(c, t) - mean[c];
                    var[c] += d * d;
                }
        for (int c = 0; c < C; ++c) var[c] /= n;
        for (int c = 0; c < C; ++c) {
            double unbiased = (n > 1) ? var[c] * n / (n - 1) : var[c];
            st.running_mean[c] = (1.0 - st.momentum) * st.running_mean[c] + st.momentum * mean[c];
            st.running_var[c] = (1.0 - st.momentum) * st.running_var[c] + st.momentum * unbiased;
        }
    } else {
        mean = st.running_mean;
        var = st.running_var;
    }

    std::vector<double> inv_std(C);
    for (int c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + st.eps);

    std::vector<Tensor2> out(in.size());
    std::vector<Tensor2> xhat(in.size());
    for (size_t b = 0; b < in.size(); ++b) {
        out[b] = Tensor2(C, T);
        xhat[b] = Tensor2(C, T);
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < T; ++t) {
                double h = (in[b].at(c, t) - mean[c]) * inv_std[c];
                xhat[b].at(c, t) = h;
                out[b].at(c, t) = st.gamma.value[c] * h + st.beta.value[c];
            }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->mean = std::move(mean);
        cache->inv_std = std::move(inv_std);
        cache->count = n;
    }
    return out;
}

// Backward through the batch-statistics normalization (train-mode graph).
inline std::vector<Tensor2> batchnorm1d_backward(const BatchNormCache& cache,
                                                 BatchNormState& st,
                                                 const std::vector<Tensor2>& gout) {
    const int C = st.channels;
    const int T = gout[0].time;
    const double n = static_cast<double>(cache.count);

    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    for (size_t b = 0; b < gout.size(); ++b)
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < T; ++t) {
                double g = gout[b].at(c, t);
                sum_g[c] += g;
                sum_gx[c] += g * cache.xhat[b].at(c, t);
            }
    for (int c = 0; c < C; ++c) {
        st.gamma.grad[c] += sum_gx[c];
        st.beta.grad[c] += sum_g[c];
    }

    std::vector<Tensor2> gin(gout.size());
    for (size_t b = 0; b < gout.size(); ++b) {
        gin[b] = Tensor2(C, T);
        for (int c = 0; c < C; ++c) {
            const double k = st.gamma.value[c] * cache.inv_std[c];
            for (int t = 0; t < T; ++t) {
                double g = gout[b].at(c, t);
                gin[b].at(c, t) =
                    k * (g - sum_g[c] / n - cache.xhat[b].at(c, t) * sum_gx[c] / n);
            }
        }
    }
    return gin;
}

// Eval-mode backward: normalization constants are fixed, so the pass is an
// affine map per channel. Used by the full-model gradient check.
inline std::vector<Tensor2> batchnorm1d_backward_eval(const BatchNormState& st,
                                                      const std::vector<Tensor2>& gout) {
    std::vector<Tensor2> gin(gout.size());
    for (size_t b = 0; b < gout.size(); ++b) {
        gin[b] = Tensor2(st.channels, gout[b].time);
        for (int c = 0; c < st.channels; ++c) {
            double k = st.gamma.value[c] / std::sqrt(st.running_var[c] + st.eps);
            for (int t = 0; t < gout[b].time; ++t)
                gin[b].at(c, t) = k * gout[b].at(c, t);
        }
    }
    return gin;
}

inline Tensor2 relu(const Tensor2& in) {
    Tensor2 out = in;
    for (double& v : out.data) v = std::max(0.0, v);
    return out;
}

inline Tensor2 relu_backward(const Tensor2& in, const Tensor2& gout) {
    Tensor2 gin(in.channels, in.time);
    for (size_t i = 0; i < in.data.size(); ++i)
        gin.data[i] = in.data[i] > 0.0 ? gout.data[i] : 0.0;
    return gin;
}

inline Tensor2 tanh_fwd(const Tensor2& in) {
    Tensor2 out = in;
    for (double& v : out.data) v = std::tanh(v);
    return out;
}

inline Tensor2 tanh_backward(const Tensor2& out, const Tensor2& gout) {
    Tensor2 gin(out.channels, out.time);
    for (size_t i = 0; i < out.data.size(); ++i)
        gin.data[i] = (1.0 - out.data[i] * out.data[i]) * gout.data[i];
    return gin;
}

inline std::vector<double> avg_pool_time(const Tensor2& in) {
    std::vector<double> out(in.channels, 0.0);
    for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (int t = 0; t < in.time; ++t) acc += in.at(c, t);
        out[c] = acc / in.time;
    }
    return out;
}

inline Tensor2 avg_pool_time_backward(int channels, int time, const std::vector<double>& gout) {
    Tensor2 gin(channels, time);
    for (int c = 0; c < channels; ++c)
        for (int t = 0; t < time; ++t) gin.at(c, t) = gout[c] / time;
    return gin;
}

inline std::vector<double> linear(const std::vector<double>& in, const std::vector<double>& w,
                                  int n_out, const std::vector<double>& bias) {
    const int n_in = static_cast<int>(in.size());
    if (w.size() != static_cast<size_t>(n_out) * n_in)
        throw ShapeError("linear: weight shape mismatch");
    std::vector<double> out(n_out);
    for (int o = 0; o < n_out; ++o) {
        double acc = bias[o];
        const double* wo = w.data() + static_cast<size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) acc += wo[i] * in[i];
        out[o] = acc;
    }
    MulCounter::add(static_cast<long long>(n_out) * n_in);
    return out;
}

inline std::vector<double> linear_backward(const std::vector<double>& in,
                                           const std::vector<double>& w, int n_out,
                                           const std::vector<double>& gout,
                                           std::vector<double>& gw, std::vector<double>& gbias) {
    const int n_in = static_cast<int>(in.size());
    std::vector<double> gin(n_in, 0.0);
    for (int o = 0; o < n_out; ++o) {
        const double g = gout[o];
        gbias[o] += g;
        const double* wo = w.data() + static_cast<size_t>(o) * n_in;
        double* gwo = gw.data() + static_cast<size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) {
            gin[i] += wo[i] * g;
            gwo[i] += in[i] * g;
        }
    }
    return gin;
}

// Returns (loss, dloss/dlogits); max-subtraction keeps the exp stable.
inline std::pair<double, std::vector<double>> softmax_cross_entropy(
    const std::vector<double>& logits, int target) {
    const int n = static_cast<int>(logits.size());
    if (target < 0 || target >= n) throw ShapeError("softmax_cross_entropy: target out of range");
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (int i = 0; i < n; ++i) p[i] /= z;
    double loss = -std::log(p[target]);
    std::vector<double> grad = p;
    grad[target] -= 1.0;
    return {loss, grad};
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    std::vector<double> p(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

}  // namespace sparknet
