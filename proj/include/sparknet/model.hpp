#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "sparknet/gates.hpp"
#include "sparknet/layers.hpp"
#include "sparknet/rng.hpp"
#include "sparknet/tensor.hpp"

namespace sparknet {

struct ModelConfig {
    int channels = 16;       // C
    int feat_bins = 32;      // F
    int num_classes = 12;
    std::array<int, 4> kernels = {11, 15, 19, 29};
    GateConfig gate;
    bool sparsity_enabled = true;
};

// One TCS block: depthwise(K) -> pointwise -> BN, optional skip path
// (pointwise + BN on the block input) added before the ReLU.
struct TcsBlock {
    int in_ch = 0, out_ch = 0, kernel = 0;
    bool has_residual = false;
    Parameter dw;   // in_ch * K
    Parameter pw;   // out_ch x in_ch
    BatchNormState bn;
    Parameter res_pw;  // out_ch x in_ch
    BatchNormState res_bn;
};

struct SparkNetParams {
    ModelConfig config;
    std::array<TcsBlock, 4> blocks;
    Parameter head_w;  // F x C, the only conv with a bias
    Parameter head_b;  // F
    BatchNormState head_bn;
    Parameter fc_w;  // num_classes x F
    Parameter fc_b;
    std::uint64_t init_seed = 0;

    // fn(Parameter&, bool is_batchnorm_affine)
    template <typename Fn>
    void for_each_parameter(Fn&& fn) {
        for (auto& b : blocks) {
            fn(b.dw, false);
            fn(b.pw, false);
            fn(b.bn.gamma, true);
            fn(b.bn.beta, true);
            if (b.has_residual) {
                fn(b.res_pw, false);
                fn(b.res_bn.gamma, true);
                fn(b.res_bn.beta, true);
            }
        }
        fn(head_w, false);
        fn(head_b, false);
        fn(head_bn.gamma, true);
        fn(head_bn.beta, true);
        fn(fc_w, false);
        fn(fc_b, false);
    }

    size_t count_trainable() {
        size_t n = 0;
        for_each_parameter([&](Parameter& p, bool) { n += p.size(); });
        return n;
    }

    void zero_grads() {
        for_each_parameter([](Parameter& p, bool) { p.zero_grad(); });
    }
};

namespace detail {

inline void kaiming_uniform(Parameter& p, int fan_in, Rng& rng) {
    double bound = std::sqrt(6.0 / fan_in);
    for (double& v : p.value) v = rng.uniform(-bound, bound);
}

}  // namespace detail

inline SparkNetParams build(const ModelConfig& cfg, std::uint64_t init_seed) {
    SparkNetParams p;
    p.config = cfg;
    p.init_seed = init_seed;
    Rng rng(derive_seed(init_seed, 0x1717));

    const int C = cfg.channels;
    const int F = cfg.feat_bins;
    for (int i = 0; i < 4; ++i) {
        TcsBlock& b = p.blocks[i];
        b.in_ch = (i == 0) ? F : C;
        b.out_ch = C;
        b.kernel = cfg.kernels[i];
        b.has_residual = (i > 0);
        b.dw.resize(static_cast<size_t>(b.in_ch) * b.kernel);
        detail::kaiming_uniform(b.dw, b.kernel, rng);
        b.pw.resize(static_cast<size_t>(b.out_ch) * b.in_ch);
        detail::kaiming_uniform(b.pw, b.in_ch, rng);
        b.bn.init(b.out_ch);
        if (b.has_residual) {
            b.res_pw.resize(static_cast<size_t>(b.out_ch) * b.in_ch);
            detail::kaiming_uniform(b.res_pw, b.in_ch, rng);
            b.res_bn.init(b.out_ch);
        }
    }
    p.head_w.resize(static_cast<size_t>(F) * C);
    detail::kaiming_uniform(p.head_w, C, rng);
    p.head_b.resize(F);
    p.head_bn.init(F);
    p.fc_w.resize(static_cast<size_t>(cfg.num_classes) * F);
    detail::kaiming_uniform(p.fc_w, F, rng);
    p.fc_b.resize(cfg.num_classes);
    return p;
}

struct ForwardResult {
    std::vector<std::vector<double>> logits;
    std::vector<Tensor2> mu;
    std::vector<Tensor2> z;
};

struct ForwardCache {
    bool train_bn = false;
    std::vector<Tensor2> input;
    struct BlockCache {
        std::vector<Tensor2> in;
        std::vector<Tensor2> dw_out;
        std::vector<Tensor2> pre_relu;
        BatchNormCache bn;
        BatchNormCache res_bn;
    };
    std::array<BlockCache, 4> blocks;
    std::vector<Tensor2> backbone_out;
    BatchNormCache head_bn;
    std::vector<Tensor2> mu;
    std::vector<GateTensor> gates;
    std::vector<std::vector<double>> pooled;
};

// Full forward pass over a batch. `train` selects batch-statistics BN (and
// updates running stats); gate noise is drawn from `noise` when provided and
// the gate config enables it.
inline ForwardResult forward(const std::vector<Tensor2>& features, SparkNetParams& params,
                             bool train, Rng* noise = nullptr, ForwardCache* cache = nullptr) {
    const ModelConfig& cfg = params.config;
    for (const auto& f : features) require_shape(f, cfg.feat_bins, "model forward input");

    if (cache) {
        *cache = ForwardCache{};
        cache->train_bn = train;
        cache->input = features;
    }

    std::vector<Tensor2> x = features;
    for (int i = 0; i < 4; ++i) {
        TcsBlock& b = params.blocks[i];
        std::vector<Tensor2> dw_out(x.size()), pw_out(x.size());
        for (size_t s = 0; s < x.size(); ++s) {
            dw_out[s] = depthwise_conv1d(x[s], b.dw.value, b.kernel);
            pw_out[s] = pointwise_conv1d(dw_out[s], b.pw.value, b.out_ch);
        }
        auto* bc = cache ? &cache->blocks[i] : nullptr;
        std::vector<Tensor2> bn_out =
            batchnorm1d(pw_out, b.bn, train, bc ? &bc->bn : nullptr);
        if (b.has_residual) {
            std::vector<Tensor2> res(x.size());
            for (size_t s = 0; s < x.size(); ++s)
                res[s] = pointwise_conv1d(x[s], b.res_pw.value, b.out_ch);
            std::vector<Tensor2> res_bn =
                batchnorm1d(res, b.res_bn, train, bc ? &bc->res_bn : nullptr);
            for (size_t s = 0; s < x.size(); ++s)
                for (size_t j = 0; j < bn_out[s].data.size(); ++j)
                    bn_out[s].data[j] += res_bn[s].data[j];
        }
        if (bc) {
            bc->in = std::move(x);
            bc->dw_out = std::move(dw_out);
            bc->pre_relu = bn_out;
        }
        std::vector<Tensor2> activated(bn_out.size());
        for (size_t s = 0; s < bn_out.size(); ++s) activated[s] = relu(bn_out[s]);
        x = std::move(activated);
    }
    if (cache) cache->backbone_out = x;

    std::vector<Tensor2> head(x.size());
    for (size_t s = 0; s < x.size(); ++s)
        head[s] = pointwise_conv1d(x[s], params.head_w.value, cfg.feat_bins,
                                   &params.head_b.value);
    std::vector<Tensor2> head_bn =
        batchnorm1d(head, params.head_bn, train, cache ? &cache->head_bn : nullptr);

    ForwardResult out;
    out.logits.resize(x.size());
    out.mu.resize(x.size());
    out.z.resize(x.size());
    if (cache) {
        cache->gates.resize(x.size());
        cache->pooled.resize(x.size());
        cache->mu.resize(x.size());
    }
    for (size_t s = 0; s < x.size(); ++s) {
        Tensor2 mu = tanh_fwd(head_bn[s]);
        GateTensor g = sample_gates(mu, cfg.gate, train ? noise : nullptr);
        std::vector<double> pooled = avg_pool_time(g.z);
        out.logits[s] = linear(pooled, params.fc_w.value, cfg.num_classes, params.fc_b.value);
        out.z[s] = g.z;
        if (cache) {
            cache->mu[s] = mu;
            cache->gates[s] = std::move(g);
            cache->pooled[s] = std::move(pooled);
        }
        out.mu[s] = std::move(mu);
    }
    return out;
}

// Accumulates parameter gradients for the batch the cache was built from.
// dlogits: per-sample gradient of the loss wrt logits; dmu_direct, when
// present, is added at mu (the sparsity loss attaches there, bypassing gates).
inline void backward(SparkNetParams& params, const ForwardCache& cache,
                     const std::vector<std::vector<double>>& dlogits,
                     const std::vector<Tensor2>* dmu_direct = nullptr) {
    const ModelConfig& cfg = params.config;
    const size_t B = cache.input.size();
    const int T = cache.input[0].time;

    std::vector<Tensor2> g_head_bn_out(B);
    for (size_t s = 0; s < B; ++s) {
        std::vector<double> gpool =
            linear_backward(cache.pooled[s], params.fc_w.value, cfg.num_classes,
                            dlogits[s], params.fc_w.grad, params.fc_b.grad);
        Tensor2 gz = avg_pool_time_backward(cfg.feat_bins, T, gpool);
        Tensor2 gmu = gate_backward(cache.gates[s], gz);
        if (dmu_direct)
            for (size_t j = 0; j < gmu.data.size(); ++j)
                gmu.data[j] += (*dmu_direct)[s].data[j];
        g_head_bn_out[s] = tanh_backward(cache.mu[s], gmu);
    }

    // Eval-mode backward propagates input gradients only; parameter grads are
    // a training-mode concern and training always runs train_bn.
    std::vector<Tensor2> g_head =
        cache.train_bn ? batchnorm1d_backward(cache.head_bn, params.head_bn, g_head_bn_out)
                       : batchnorm1d_backward_eval(params.head_bn, g_head_bn_out);

    std::vector<Tensor2> g_x(B);
    for (size_t s = 0; s < B; ++s) {
        Tensor2 gin;
        pointwise_conv1d_backward(cache.backbone_out[s], params.head_w.value, cfg.feat_bins,
                                  g_head[s], gin, params.head_w.grad, &params.head_b.grad);
        g_x[s] = std::move(gin);
    }

    for (int i = 3; i >= 0; --i) {
        TcsBlock& b = params.blocks[i];
        const auto& bc = cache.blocks[i];
        std::vector<Tensor2> g_sum(B);
        for (size_t s = 0; s < B; ++s) g_sum[s] = relu_backward(bc.pre_relu[s], g_x[s]);

        std::vector<Tensor2> g_pw_out =
            cache.train_bn ? batchnorm1d_backward(bc.bn, b.bn, g_sum)
                           : batchnorm1d_backward_eval(b.bn, g_sum);
        std::vector<Tensor2> g_in(B);
        for (size_t s = 0; s < B; ++s) {
            Tensor2 g_dw_out;
            pointwise_conv1d_backward(bc.dw_out[s], b.pw.value, b.out_ch, g_pw_out[s],
                                      g_dw_out, b.pw.grad);
            Tensor2 gin;
            depthwise_conv1d_backward(bc.in[s], b.dw.value, b.kernel, g_dw_out, gin, b.dw.grad);
            g_in[s] = std::move(gin);
        }
        if (b.has_residual) {
            std::vector<Tensor2> g_res_out =
                cache.train_bn ? batchnorm1d_backward(bc.res_bn, b.res_bn, g_sum)
                               : batchnorm1d_backward_eval(b.res_bn, g_sum);
            for (size_t s = 0; s < B; ++s) {
                Tensor2 gin;
                pointwise_conv1d_backward(bc.in[s], b.res_pw.value, b.out_ch, g_res_out[s],
                                          gin, b.res_pw.grad);
                for (size_t j = 0; j < g_in[s].data.size(); ++j)
                    g_in[s].data[j] += gin.data[j];
            }
        }
        g_x = std::move(g_in);
    }
}

struct MacReport {
    struct Layer {
        std::string name;
        long long macs;
    };
    std::vector<Layer> layers;
    long long total = 0;      // strict: conv/linear multiplies only
    long long extended = 0;   // + BN (2*C*T each) and elementwise ops
    int frames = 0;
};

// Strict convention: one MAC per scalar multiply in conv/linear kernels; BN,
// activations and pooling are free. The extended figure adds 2*C*T per BN
// plus one op per element for each activation/gate/pool stage, which is the
// kind of thing external op counters tend to include.
inline MacReport count_macs(const ModelConfig& cfg, int T) {
    MacReport r;
    r.frames = T;
    const int C = cfg.channels;
    const int F = cfg.feat_bins;
    long long elementwise = 0;

    auto add = [&](const std::string& name, long long macs) {
        r.layers.push_back({name, macs});
        r.total += macs;
    };

    for (int i = 0; i < 4; ++i) {
        const int in_ch = (i == 0) ? F : C;
        const std::string tag = "block" + std::to_string(i + 1);
        add(tag + ".depthwise(K=" + std::to_string(cfg.kernels[i]) + ")",
            static_cast<long long>(in_ch) * cfg.kernels[i] * T);
        add(tag + ".pointwise", static_cast<long long>(in_ch) * C * T);
        elementwise += 2LL * C * T;  // BN
        if (i > 0) {
            add(tag + ".residual.pointwise", static_cast<long long>(in_ch) * C * T);
            elementwise += 2LL * C * T;  // residual BN
            elementwise += static_cast<long long>(C) * T;  // add
        }
        elementwise += static_cast<long long>(C) * T;  // relu
    }
    add("head.pointwise", static_cast<long long>(C) * F * T);
    elementwise += 2LL * F * T;  // head BN
    elementwise += static_cast<long long>(F) * T;  // tanh
    elementwise += static_cast<long long>(F) * T;  // gate clamp
    elementwise += static_cast<long long>(F) * T;  // average pool
    add("classifier.linear", static_cast<long long>(F) * cfg.num_classes);

    r.extended = r.total + elementwise;
    return r;
}

// Runs one forward pass with the multiply counter armed. Must agree exactly
// with count_macs under the strict convention.
inline long long instrumented_multiply_count(const Tensor2& features, SparkNetParams& params) {
    MulCounter::reset();
    MulCounter::enabled = true;
    std::vector<Tensor2> batch{features};
    forward(batch, params, /*train=*/false);
    MulCounter::enabled = false;
    return MulCounter::count;
}

}  // namespace sparknet
