#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "sparknet/checkpoint.hpp"
#include "sparknet/data.hpp"
#include "sparknet/eval.hpp"
#include "sparknet/model.hpp"

namespace sparknet {

struct TrainDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int epochs = 200;
    int batch_size = 128;
    double lr_max = 1e-2;
    double lr_min = 1e-6;
    double warmup_ratio = 0.05;
    double hold_ratio = 0.40;
    double poly_power = 2.0;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    bool decay_bn_params = true;
    double lambda_ce = 1e2;
    std::uint64_t seed = 0;
    bool sparsity_enabled = true;
    int jobs = 1;

    void validate() const {
        if (warmup_ratio + hold_ratio >= 1.0)
            throw ConfigError("train config: warmup_ratio + hold_ratio must be < 1");
        if (lr_max <= 0 || lr_min <= 0 || lr_min > lr_max)
            throw ConfigError("train config: need 0 < lr_min <= lr_max");
        if (batch_size < 2) throw ConfigError("train config: batch_size must be >= 2");
    }
};

// Warmup-hold-decay: linear ramp lr_min -> lr_max over the warmup fraction,
// flat at lr_max through the hold fraction, then polynomial decay back down
// over whatever remains. Continuous at both joints.
inline double lr_at(long long step, long long total_steps, const TrainConfig& cfg) {
    const double warm_end = cfg.warmup_ratio * total_steps;
    const double hold_end = (cfg.warmup_ratio + cfg.hold_ratio) * total_steps;
    const double s = static_cast<double>(step);
    if (s <= warm_end)
        return warm_end > 0 ? cfg.lr_min + (cfg.lr_max - cfg.lr_min) * s / warm_end : cfg.lr_max;
    if (s <= hold_end) return cfg.lr_max;
    double tau = (s - hold_end) / (total_steps - hold_end);
    tau = std::clamp(tau, 0.0, 1.0);
    return (cfg.lr_max - cfg.lr_min) * std::pow(1.0 - tau, cfg.poly_power) + cfg.lr_min;
}

// Classical SGD with momentum; L2 decay folded into the gradient. Decay
// applies to every parameter unless decay_bn_params turns it off for the
// batchnorm affine terms.
inline void sgd_step(SparkNetParams& params, const TrainConfig& cfg, double lr) {
    params.for_each_parameter([&](Parameter& p, bool is_bn) {
        const double wd = (is_bn && !cfg.decay_bn_params) ? 0.0 : cfg.weight_decay;
        for (size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(p.grad[i]))
                throw TrainDivergence("non-finite gradient encountered; aborting step");
            double g = p.grad[i] + wd * p.value[i];
            p.momentum_buf[i] = cfg.momentum * p.momentum_buf[i] + g;
            p.value[i] -= lr * p.momentum_buf[i];
        }
    });
}

namespace detail {

template <typename Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    size_t num = std::min<size_t>(jobs, n);
    for (size_t w = 0; w < num; ++w)
        workers.emplace_back([&, w] {
            for (size_t i = w; i < n; i += num) fn(i);
        });
    for (auto& t : workers) t.join();
}

}  // namespace detail

struct EpochMetrics {
    double loss_total = 0.0;
    double loss_sparse = 0.0;
    double loss_ce = 0.0;
    double train_acc = 0.0;
    long long steps = 0;
    double last_lr = 0.0;
};

// Everything a training run needs besides the model.
struct TrainContext {
    std::vector<ManifestEntry> train_entries;
    std::vector<ManifestEntry> val_entries;
    std::vector<AudioClip> background;  // full-length recordings for augmentation
    MfccExtractor frontend;
    AugmentConfig augment_cfg;

    TrainContext(std::vector<ManifestEntry> train, std::vector<ManifestEntry> val,
                 const MfccConfig& mfcc, const AugmentConfig& aug)
        : train_entries(std::move(train)), val_entries(std::move(val)), frontend(mfcc),
          augment_cfg(aug) {}
};

// Deterministic per-sample feature pipeline: the rng stream depends only on
// (seed, epoch, position in the shuffled order), so worker count never
// changes the batch contents.
inline Tensor2 training_features(const ManifestEntry& entry, const TrainContext& ctx,
                                 std::uint64_t seed, int epoch, size_t order_index) {
    Rng rng(derive_seed(seed, 0xA06, static_cast<std::uint64_t>(epoch), order_index));
    AudioClip clip;
    if (entry.class_index == kSilenceClass) {
        AudioClip full = load_wav_full(entry.path);
        std::int64_t max_off = static_cast<std::int64_t>(full.samples.size()) - kClipSamples;
        clip = crop_clip(full, max_off > 0 ? rng.uniform_int(0, max_off) : 0);
    } else {
        clip = load_entry_audio(entry);
    }
    AudioClip bg_crop;
    const AudioClip* bg = nullptr;
    if (!ctx.background.empty() && ctx.augment_cfg.background_noise_prob > 0.0) {
        size_t bi = static_cast<size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(ctx.background.size()) - 1));
        std::int64_t max_off =
            static_cast<std::int64_t>(ctx.background[bi].samples.size()) - kClipSamples;
        bg_crop = crop_clip(ctx.background[bi], max_off > 0 ? rng.uniform_int(0, max_off) : 0);
        bg = &bg_crop;
    }
    AudioClip aug = augment(clip, ctx.augment_cfg, rng, bg);
    return ctx.frontend.compute(aug).data;
}

inline EpochMetrics train_epoch(SparkNetParams& params, TrainContext& ctx,
                                const TrainConfig& cfg, int epoch, long long step_offset,
                                long long total_steps) {
    std::vector<size_t> order(ctx.train_entries.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5FF1E, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    EpochMetrics m;
    long long correct = 0, seen = 0;
    const bool gates_stochastic = cfg.sparsity_enabled;

    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
        size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
        const size_t B = end - start;

        std::vector<Tensor2> feats(B);
        detail::parallel_for(B, cfg.jobs, [&](size_t i) {
            feats[i] = training_features(ctx.train_entries[order[start + i]], ctx, cfg.seed,
                                         epoch, start + i);
        });

        params.zero_grads();
        Rng gate_rng(derive_seed(cfg.seed, 0x6A7E, static_cast<std::uint64_t>(epoch),
                                 start / cfg.batch_size));
        ForwardCache cache;
        ForwardResult out =
            forward(feats, params, /*train=*/true, gates_stochastic ? &gate_rng : nullptr, &cache);

        double ce = 0.0, sparse = 0.0;
        std::vector<std::vector<double>> dlogits(B);
        std::vector<Tensor2> dmu(B);
        for (size_t i = 0; i < B; ++i) {
            int target = ctx.train_entries[order[start + i]].class_index;
            auto [loss_i, grad_i] = softmax_cross_entropy(out.logits[i], target);
            ce += loss_i;
            for (double& g : grad_i) g *= cfg.lambda_ce / B;
            dlogits[i] = std::move(grad_i);
            dmu[i] = Tensor2(out.mu[i].channels, out.mu[i].time);
            if (cfg.sparsity_enabled) {
                sparse += sparsity_loss(out.mu[i], params.config.gate, &dmu[i]);
                for (double& g : dmu[i].data) g /= B;
            }
            if (argmax_class(out.logits[i]) == target) ++correct;
        }
        ce /= B;
        sparse /= B;
        backward(params, cache, dlogits, cfg.sparsity_enabled ? &dmu : nullptr);

        long long step = step_offset + m.steps;
        double lr = lr_at(step, total_steps, cfg);
        sgd_step(params, cfg, lr);

        m.loss_ce += ce;
        m.loss_sparse += sparse;
        m.loss_total += sparse + cfg.lambda_ce * ce;
        m.last_lr = lr;
        ++m.steps;
        seen += static_cast<long long>(B);
    }
    if (m.steps > 0) {
        m.loss_ce /= m.steps;
        m.loss_sparse /= m.steps;
        m.loss_total /= m.steps;
    }
    m.train_acc = seen > 0 ? static_cast<double>(correct) / seen : 0.0;
    return m;
}

struct TrainResult {
    double best_val_acc = 0.0;
    int best_epoch = -1;
    double final_val_acc = 0.0;
    std::string best_path;
    std::string final_path;
};

// Full run: epochs of SGD, per-epoch validation, metrics CSV, best-val and
// final checkpoints.
inline TrainResult train_model(SparkNetParams& params, TrainContext& ctx,
                               const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    std::ofstream metrics(out_dir + "/metrics.csv");
    metrics << "epoch,step,lr,loss_total,loss_sparse,loss_ce,train_acc,val_acc,gate_open_frac\n";

    const long long steps_per_epoch =
        (static_cast<long long>(ctx.train_entries.size()) + cfg.batch_size - 1) / cfg.batch_size;
    const long long total_steps = steps_per_epoch * cfg.epochs;

    TrainResult result;
    result.best_path = out_dir + "/best.ckpt";
    result.final_path = out_dir + "/final.ckpt";
    long long step = 0;
    char buf[512];
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochMetrics m = train_epoch(params, ctx, cfg, epoch, step, total_steps);
        step += m.steps;

        double val_acc = 0.0, open_frac = 0.0;
        if (!ctx.val_entries.empty()) {
            EvalReport r = evaluate(params, ctx.frontend, ctx.val_entries);
            val_acc = r.top1;
            open_frac = r.gate_open_frac;
        }
        std::snprintf(buf, sizeof buf, "%d,%lld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      epoch, step, m.last_lr, m.loss_total, m.loss_sparse, m.loss_ce,
                      m.train_acc, val_acc, open_frac);
        metrics << buf;
        metrics.flush();

        if (val_acc >= result.best_val_acc) {
            result.best_val_acc = val_acc;
            result.best_epoch = epoch;
            save_checkpoint(params, ctx.frontend.config(), label_names(), result.best_path);
        }
        result.final_val_acc = val_acc;
    }
    save_checkpoint(params, ctx.frontend.config(), label_names(), result.final_path);
    if (result.best_epoch < 0)
        save_checkpoint(params, ctx.frontend.config(), label_names(), result.best_path);
    return result;
}

}  // namespace sparknet
