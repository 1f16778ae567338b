#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparknet/rng.hpp"
#include "sparknet/wav.hpp"

namespace sparknet {

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kNumClasses = 12;
constexpr int kUnknownClass = 10;
constexpr int kSilenceClass = 11;
constexpr const char* kBackgroundDir = "_background_noise_";

inline const std::vector<std::string>& target_words() {
    static const std::vector<std::string> words = {"yes", "no",  "up",   "down", "left",
                                                   "right", "on", "off", "stop", "go"};
    return words;
}

inline const std::vector<std::string>& label_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n = target_words();
        n.push_back("unknown");
        n.push_back("silence");
        return n;
    }();
    return names;
}

// 0..9 for targets, 10 for anything else. Silence is assigned separately.
inline int class_for_word(const std::string& word) {
    const auto& t = target_words();
    for (size_t i = 0; i < t.size(); ++i)
        if (t[i] == word) return static_cast<int>(i);
    return kUnknownClass;
}

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        default: return "test";
    }
}

inline Split split_from_name(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw IngestError("unknown split name: " + s);
}

struct ManifestEntry {
    std::string path;
    Split split = Split::Train;
    int class_index = 0;
    std::string source_word;
    std::int64_t crop_offset = -1;  // >= 0 only for silence entries

    // noisy-testset fields; only meaningful when has_noise
    bool has_noise = false;
    std::string noise_path;
    std::int64_t noise_crop = 0;
    double alpha = 0.0;
    int snr_db = 0;
};

inline std::vector<ManifestEntry> filter_split(const std::vector<ManifestEntry>& m, Split s) {
    std::vector<ManifestEntry> out;
    for (const auto& e : m)
        if (e.split == s) out.push_back(e);
    return out;
}

namespace detail {

inline std::set<std::string> read_list_file(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw IngestError("missing list file: " + p.string());
    std::set<std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' '))
            line.pop_back();
        if (!line.empty()) out.insert(line);
    }
    return out;
}

inline size_t wav_sample_count(const std::string& path) {
    return load_wav_full(path).samples.size();
}

// Uniform subsample without replacement, seeded.
template <typename T>
std::vector<T> subsample(std::vector<T> v, size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::shuffle(v.begin(), v.end(), rng.engine());
    if (v.size() > n) v.resize(n);
    std::sort(v.begin(), v.end(), [](const T& a, const T& b) { return a.path < b.path; });
    return v;
}

}  // namespace detail

// Walk a Speech Commands style directory and produce the 12-class manifest.
// List-file membership decides the split; unknown and silence are rebalanced
// to the mean target-class count within every split, following the standard
// 12-class benchmark protocol. Train-split rebalancing uses
// `seed`; val/test use fixed seeds so the held-out sets never move.
inline std::vector<ManifestEntry> build_manifest(const std::string& dataset_root,
                                                 std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::path root(dataset_root);
    if (!fs::is_directory(root)) throw IngestError("dataset root not found: " + dataset_root);
    auto val_list = detail::read_list_file(root / "validation_list.txt");
    auto test_list = detail::read_list_file(root / "testing_list.txt");
    if (!fs::is_directory(root / kBackgroundDir))
        throw IngestError("missing background noise folder: " + (root / kBackgroundDir).string());

    std::vector<ManifestEntry> targets_and_unknown;
    for (const auto& dir : fs::directory_iterator(root)) {
        if (!dir.is_directory()) continue;
        std::string word = dir.path().filename().string();
        if (word == kBackgroundDir) continue;
        for (const auto& file : fs::directory_iterator(dir.path())) {
            if (file.path().extension() != ".wav") continue;
            std::string rel = word + "/" + file.path().filename().string();
            ManifestEntry e;
            e.path = file.path().string();
            e.source_word = word;
            e.class_index = class_for_word(word);
            if (test_list.count(rel))
                e.split = Split::Test;
            else if (val_list.count(rel))
                e.split = Split::Val;
            else
                e.split = Split::Train;
            targets_and_unknown.push_back(std::move(e));
        }
    }
    if (targets_and_unknown.empty())
        throw IngestError("no word folders with wav files under: " + dataset_root);
    std::sort(targets_and_unknown.begin(), targets_and_unknown.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });

    std::vector<std::string> noise_files;
    for (const auto& file : fs::directory_iterator(root / kBackgroundDir))
        if (file.path().extension() == ".wav") noise_files.push_back(file.path().string());
    std::sort(noise_files.begin(), noise_files.end());
    if (noise_files.empty())
        throw IngestError("no wav files in " + (root / kBackgroundDir).string());
    std::vector<size_t> noise_len(noise_files.size());
    for (size_t i = 0; i < noise_files.size(); ++i) {
        noise_len[i] = detail::wav_sample_count(noise_files[i]);
        if (noise_len[i] < kClipSamples)
            throw IngestError("background file shorter than 1 s: " + noise_files[i]);
    }

    std::vector<ManifestEntry> manifest;
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        std::vector<ManifestEntry> targets, unknown;
        for (const auto& e : targets_and_unknown) {
            if (e.split != split) continue;
            (e.class_index == kUnknownClass ? unknown : targets).push_back(e);
        }
        size_t n_target_classes = target_words().size();
        size_t quota = static_cast<size_t>(
            std::llround(static_cast<double>(targets.size()) / n_target_classes));
        quota = std::max<size_t>(quota, 1);

        std::uint64_t split_seed = (split == Split::Train)
                                       ? derive_seed(seed, 0xDA7A, 0)
                                       : derive_seed(0x5EEDu, static_cast<int>(split));
        unknown = detail::subsample(std::move(unknown), quota, split_seed);

        manifest.insert(manifest.end(), targets.begin(), targets.end());
        manifest.insert(manifest.end(), unknown.begin(), unknown.end());

        Rng rng(derive_seed(split_seed, 0x51EE));
        for (size_t i = 0; i < quota; ++i) {
            ManifestEntry e;
            size_t ni = static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(noise_files.size()) - 1));
            e.path = noise_files[ni];
            e.split = split;
            e.class_index = kSilenceClass;
            e.source_word = "silence";
            e.crop_offset = rng.uniform_int(0, static_cast<std::int64_t>(noise_len[ni]) - kClipSamples);
            manifest.push_back(std::move(e));
        }
    }
    return manifest;
}

// Raw utterance count across all word folders (the dataset-size figure).
inline size_t count_utterances(const std::string& dataset_root) {
    namespace fs = std::filesystem;
    size_t n = 0;
    for (const auto& dir : fs::directory_iterator(dataset_root)) {
        if (!dir.is_directory() || dir.path().filename() == kBackgroundDir) continue;
        for (const auto& file : fs::directory_iterator(dir.path()))
            if (file.path().extension() == ".wav") ++n;
    }
    return n;
}

inline void write_manifest(const std::vector<ManifestEntry>& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IngestError("cannot write manifest: " + path);
    for (const auto& e : m) {
        f << e.path << '\t' << split_name(e.split) << '\t' << e.class_index << '\t'
          << e.source_word << '\t' << e.crop_offset;
        if (e.has_noise) {
            char alpha_buf[40];
            std::snprintf(alpha_buf, sizeof alpha_buf, "%.17g", e.alpha);
            f << '\t' << e.noise_path << '\t' << e.noise_crop << '\t' << alpha_buf << '\t'
              << e.snr_db;
        }
        f << '\n';
    }
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IngestError("cannot read manifest: " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 5 && cols.size() != 9)
            throw IngestError("bad manifest line: " + line);
        ManifestEntry e;
        e.path = cols[0];
        e.split = split_from_name(cols[1]);
        e.class_index = std::stoi(cols[2]);
        e.source_word = cols[3];
        e.crop_offset = std::stoll(cols[4]);
        if (cols.size() == 9) {
            e.has_noise = true;
            e.noise_path = cols[5];
            e.noise_crop = std::stoll(cols[6]);
            e.alpha = std::stod(cols[7]);
            e.snr_db = std::stoi(cols[8]);
        }
        out.push_back(std::move(e));
    }
    return out;
}

struct AugmentConfig {
    double time_shift_ms = 100.0;        // uniform in [-x, x]
    double white_noise_db_lo = -90.0;    // dBFS RMS
    double white_noise_db_hi = -46.0;
    double white_noise_prob = 0.8;
    double background_noise_prob = 0.0;  // 0.8 for the C=32 recipe
    double background_snr_lo_db = 0.0;
    double background_snr_hi_db = 20.0;
};

inline double mean_power(const std::vector<double>& s) {
    double acc = 0.0;
    for (double v : s) acc += v * v;
    return acc / s.size();
}

// Scale noise so signal/noise power ratio hits snr_db, then sum and clamp.
inline AudioClip mix_at_snr(const AudioClip& signal, const AudioClip& noise, double snr_db,
                            double* alpha_out = nullptr) {
    if (noise.samples.size() != signal.samples.size())
        throw IngestError("mix_at_snr: noise must match signal length");
    double p_n = mean_power(noise.samples);
    if (p_n <= 0.0) throw IngestError("mix_at_snr: zero-power noise");
    double p_s = mean_power(signal.samples);
    double alpha = (p_s > 0.0) ? std::sqrt(p_s / (p_n * std::pow(10.0, snr_db / 10.0))) : 0.0;
    if (alpha_out) *alpha_out = alpha;
    AudioClip out = signal;
    for (size_t i = 0; i < out.samples.size(); ++i)
        out.samples[i] = std::clamp(out.samples[i] + alpha * noise.samples[i], -1.0, 1.0);
    return out;
}

inline AudioClip mix_with_alpha(const AudioClip& signal, const AudioClip& noise, double alpha) {
    AudioClip out = signal;
    for (size_t i = 0; i < out.samples.size(); ++i)
        out.samples[i] = std::clamp(out.samples[i] + alpha * noise.samples[i], -1.0, 1.0);
    return out;
}

// Time shift + white noise (+ optional background mixing), all seeded.
inline AudioClip augment(const AudioClip& clip, const AugmentConfig& cfg, Rng& rng,
                         const AudioClip* background = nullptr) {
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.assign(clip.samples.size(), 0.0);
    const auto n = static_cast<std::int64_t>(clip.samples.size());

    double shift_ms = rng.uniform(-cfg.time_shift_ms, cfg.time_shift_ms);
    std::int64_t shift = std::llround(shift_ms * kSampleRate / 1000.0);
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t src = i - shift;
        if (src >= 0 && src < n) out.samples[i] = clip.samples[src];
    }

    if (rng.uniform(0.0, 1.0) < cfg.white_noise_prob) {
        double db = rng.uniform(cfg.white_noise_db_lo, cfg.white_noise_db_hi);
        double rms = std::pow(10.0, db / 20.0);
        for (double& v : out.samples) v += rng.normal(0.0, rms);
    }

    if (background != nullptr && cfg.background_noise_prob > 0.0 &&
        rng.uniform(0.0, 1.0) < cfg.background_noise_prob) {
        double snr = rng.uniform(cfg.background_snr_lo_db, cfg.background_snr_hi_db);
        double p_n = mean_power(background->samples);
        double p_s = mean_power(out.samples);
        if (p_n > 0.0 && p_s > 0.0) {
            double alpha = std::sqrt(p_s / (p_n * std::pow(10.0, snr / 10.0)));
            for (size_t i = 0; i < out.samples.size(); ++i)
                out.samples[i] += alpha * background->samples[i];
        }
    }

    for (double& v : out.samples) v = std::clamp(v, -1.0, 1.0);
    return out;
}

// One noisy variant of the clean test split: every clip gets a random noise
// file, a random 1 s crop and a mixing gain hitting the requested SNR. The
// assignment is a pure function of (seed, clip index, snr).
inline std::vector<ManifestEntry> make_noisy_variant(const std::vector<ManifestEntry>& test_entries,
                                                     const std::vector<std::string>& noise_files,
                                                     const std::vector<size_t>& noise_lengths,
                                                     int snr_db, std::uint64_t seed) {
    if (noise_files.empty()) throw IngestError("noise corpus is empty");
    std::vector<ManifestEntry> out;
    out.reserve(test_entries.size());
    for (size_t idx = 0; idx < test_entries.size(); ++idx) {
        ManifestEntry e = test_entries[idx];
        Rng rng(derive_seed(seed, idx, static_cast<std::uint64_t>(snr_db + 1000)));
        size_t ni = static_cast<size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(noise_files.size()) - 1));
        e.has_noise = true;
        e.noise_path = noise_files[ni];
        e.noise_crop =
            rng.uniform_int(0, static_cast<std::int64_t>(noise_lengths[ni]) - kClipSamples);
        e.snr_db = snr_db;

        AudioClip sig = load_wav(e.path);
        if (e.class_index == kSilenceClass)
            sig = crop_clip(load_wav_full(e.path), e.crop_offset);
        AudioClip noise = crop_clip(load_wav_full(e.noise_path), e.noise_crop);
        mix_at_snr(sig, noise, snr_db, &e.alpha);
        out.push_back(std::move(e));
    }
    return out;
}

// Loads the audio for a manifest entry: silence entries crop their source
// recording, noisy entries mix at the recorded gain.
inline AudioClip load_entry_audio(const ManifestEntry& e) {
    AudioClip clip;
    if (e.class_index == kSilenceClass && e.crop_offset >= 0)
        clip = crop_clip(load_wav_full(e.path), e.crop_offset);
    else
        clip = load_wav(e.path);
    if (e.has_noise) {
        AudioClip noise = crop_clip(load_wav_full(e.noise_path), e.noise_crop);
        clip = mix_with_alpha(clip, noise, e.alpha);
    }
    return clip;
}

inline std::vector<std::string> list_noise_corpus(const std::string& dir,
                                                  std::vector<size_t>* lengths = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IngestError("noise corpus dir not found: " + dir);
    std::vector<std::string> files;
    for (const auto& f : fs::directory_iterator(dir))
        if (f.path().extension() == ".wav") files.push_back(f.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IngestError("noise corpus has no wav files: " + dir);
    if (lengths) {
        lengths->resize(files.size());
        for (size_t i = 0; i < files.size(); ++i) {
            (*lengths)[i] = detail::wav_sample_count(files[i]);
            if ((*lengths)[i] < kClipSamples)
                throw IngestError("noise file shorter than 1 s: " + files[i]);
        }
    }
    return files;
}

}  // namespace sparknet
