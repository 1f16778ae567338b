#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sparknet/data.hpp"
#include "sparknet/mfcc.hpp"
#include "sparknet/model.hpp"

namespace sparknet {

struct EvalReport {
    double top1 = 0.0;
    std::vector<std::vector<long long>> confusion;  // [true][pred]
    long long n_samples = 0;
    double gate_open_frac = 0.0;  // mean fraction of z > 0
    MacReport macs;
};

inline int argmax_class(const std::vector<double>& logits) {
    // ties break toward the lowest index
    int best = 0;
    for (size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    return best;
}

inline std::vector<Tensor2> extract_features(const MfccExtractor& fe,
                                             const std::vector<ManifestEntry>& entries,
                                             size_t begin, size_t end) {
    std::vector<Tensor2> feats(end - begin);
    for (size_t i = begin; i < end; ++i)
        feats[i - begin] = fe.compute(load_entry_audio(entries[i])).data;
    return feats;
}

inline EvalReport evaluate(SparkNetParams& params, const MfccExtractor& fe,
                           const std::vector<ManifestEntry>& entries, size_t batch_size = 64) {
    if (entries.empty()) throw IngestError("evaluate: empty split");
    if (fe.config().n_mfcc != params.config.feat_bins)
        throw ConfigError("evaluate: frontend bins do not match model input");
    EvalReport r;
    r.confusion.assign(kNumClasses, std::vector<long long>(kNumClasses, 0));
    long long correct = 0;
    double open_acc = 0.0;
    for (size_t start = 0; start < entries.size(); start += batch_size) {
        size_t end = std::min(entries.size(), start + batch_size);
        std::vector<Tensor2> feats = extract_features(fe, entries, start, end);
        ForwardResult out = forward(feats, params, /*train=*/false);
        for (size_t i = 0; i < feats.size(); ++i) {
            int pred = argmax_class(out.logits[i]);
            int truth = entries[start + i].class_index;
            r.confusion[truth][pred]++;
            if (pred == truth) ++correct;
            long long open = 0;
            for (double z : out.z[i].data)
                if (z > 0.0) ++open;
            open_acc += static_cast<double>(open) / out.z[i].data.size();
        }
    }
    r.n_samples = static_cast<long long>(entries.size());
    r.top1 = static_cast<double>(correct) / r.n_samples;
    r.gate_open_frac = open_acc / r.n_samples;
    r.macs = count_macs(params.config, fe.config().frame_count());
    return r;
}

struct SnrSweepReport {
    struct Point {
        int snr_db = 0;  // INT_MIN-free sentinel: clean uses snr_db = 999
        double mean_acc = 0.0;
        double std_acc = 0.0;
        int n_seeds = 0;
    };
    std::vector<Point> points;
    double clean_acc = 0.0;
};

constexpr int kCleanSnrTag = 999;

// variants: (seed -> manifest) per SNR value.
inline SnrSweepReport evaluate_snr_sweep(
    SparkNetParams& params, const MfccExtractor& fe,
    const std::map<int, std::map<int, std::vector<ManifestEntry>>>& variants,
    const std::vector<ManifestEntry>& clean_test) {
    SnrSweepReport rep;
    for (const auto& [snr, by_seed] : variants) {
        SnrSweepReport::Point p;
        p.snr_db = snr;
        std::vector<double> accs;
        for (const auto& [seed, entries] : by_seed)
            accs.push_back(evaluate(params, fe, entries).top1);
        p.n_seeds = static_cast<int>(accs.size());
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= accs.size();
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        p.mean_acc = mean;
        p.std_acc = accs.size() > 1 ? std::sqrt(var / (accs.size() - 1)) : 0.0;
        rep.points.push_back(p);
    }
    rep.clean_acc = evaluate(params, fe, clean_test).top1;
    rep.points.push_back({kCleanSnrTag, rep.clean_acc, 0.0, 1});
    return rep;
}

inline void write_eval_report_csv(const EvalReport& r, const std::string& path) {
    std::ofstream f(path);
    f << "metric,value\n";
    f << "top1," << r.top1 << "\n";
    f << "n_samples," << r.n_samples << "\n";
    f << "gate_open_frac," << r.gate_open_frac << "\n";
    f << "macs_strict," << r.macs.total << "\n";
    f << "macs_extended," << r.macs.extended << "\n";
    f << "confusion_row,";
    for (int c = 0; c < kNumClasses; ++c) f << (c ? ";" : "") << c;
    f << "\n";
    for (int t = 0; t < kNumClasses; ++t) {
        f << "confusion_" << t << ",";
        for (int c = 0; c < kNumClasses; ++c) f << (c ? ";" : "") << r.confusion[t][c];
        f << "\n";
    }
}

inline void write_snr_report_csv(const SnrSweepReport& r, const std::string& path) {
    std::ofstream f(path);
    f << "snr_db,mean_acc,std_acc,n_seeds\n";
    for (const auto& p : r.points) {
        if (p.snr_db == kCleanSnrTag)
            f << "clean";
        else
            f << p.snr_db;
        f << "," << p.mean_acc << "," << p.std_acc << "," << p.n_seeds << "\n";
    }
}

namespace detail {

inline void write_pgm(const Tensor2& m, const std::string& path, bool hard_threshold) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IngestError("cannot write pgm: " + path);
    f << "P5\n" << m.time << " " << m.channels << "\n255\n";
    for (int c = 0; c < m.channels; ++c)
        for (int t = 0; t < m.time; ++t) {
            double v = m.at(c, t);
            unsigned char byte;
            if (hard_threshold)
                byte = v > 0.5 ? 255 : 0;
            else
                byte = static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
            f.put(static_cast<char>(byte));
        }
}

inline void write_matrix_csv(const Tensor2& m, const std::string& path) {
    std::ofstream f(path);
    for (int c = 0; c < m.channels; ++c) {
        for (int t = 0; t < m.time; ++t) f << (t ? "," : "") << m.at(c, t);
        f << "\n";
    }
}

}  // namespace detail

// Writes z (soft or hard) and the input MFCC matrix as CSV + PGM per clip,
// the raw material for a side-by-side mask visualization.
inline void dump_gates(SparkNetParams& params, const MfccExtractor& fe,
                       const std::vector<std::string>& wav_paths, bool hard,
                       const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (const auto& wav : wav_paths) {
        AudioClip clip = load_wav(wav);
        FeatureMatrix feat = fe.compute(clip);
        std::vector<Tensor2> batch{feat.data};
        ForwardResult out = forward(batch, params, /*train=*/false);
        std::string stem =
            (std::filesystem::path(out_dir) / std::filesystem::path(wav).stem()).string();
        detail::write_matrix_csv(out.z[0], stem + "_gates.csv");
        detail::write_pgm(out.z[0], stem + "_gates.pgm", hard);
        detail::write_matrix_csv(feat.data, stem + "_mfcc.csv");
        // scale MFCC to [0,1] for its graymap
        Tensor2 scaled = feat.data;
        double lo = *std::min_element(scaled.data.begin(), scaled.data.end());
        double hi = *std::max_element(scaled.data.begin(), scaled.data.end());
        double span = (hi > lo) ? hi - lo : 1.0;
        for (double& v : scaled.data) v = (v - lo) / span;
        detail::write_pgm(scaled, stem + "_mfcc.pgm", false);
    }
}

}  // namespace sparknet
