#pragma once

// Builds a miniature Speech Commands style directory tree from synthetic
// audio: each class is a distinct pair of tones with jittered pitch, phase
// and amplitude, plus long broadband background recordings. Classes are
// separable but not trivially so once augmentation noise is applied.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sparknet/data.hpp"
#include "sparknet/rng.hpp"
#include "support/wav_io.hpp"

namespace testsupport {

struct SynthSpec {
    int train_per_class = 20;
    int val_per_class = 4;
    int test_per_class = 4;
    int unknown_words = 3;  // extra word folders feeding the unknown class
    std::uint64_t seed = 42;
};

inline std::vector<double> tone_clip(double f1, double f2, sparknet::Rng& rng) {
    const int n = sparknet::kClipSamples;
    std::vector<double> s(n, 0.0);
    double detune = rng.uniform(0.97, 1.03);
    double ph1 = rng.uniform(0.0, 2.0 * M_PI);
    double ph2 = rng.uniform(0.0, 2.0 * M_PI);
    double amp = rng.uniform(0.25, 0.4);
    int onset = static_cast<int>(rng.uniform_int(0, 3000));
    int length = static_cast<int>(rng.uniform_int(8000, 12000));
    for (int i = 0; i < n; ++i) {
        int k = i - onset;
        if (k < 0 || k >= length) continue;
        double env = std::sin(M_PI * k / length);  // half-sine envelope
        double t = static_cast<double>(i) / sparknet::kSampleRate;
        s[i] = amp * env *
               (std::sin(2.0 * M_PI * f1 * detune * t + ph1) +
                0.6 * std::sin(2.0 * M_PI * f2 * detune * t + ph2));
        s[i] += 0.002 * rng.normal(0.0, 1.0);
    }
    return s;
}

inline std::pair<double, double> class_tones(int word_index) {
    double f1 = 280.0 + 170.0 * word_index;
    double f2 = 2.1 * f1 + 90.0;
    return {f1, f2};
}

// Background recordings: broadband noise plus wandering chirps, so mixing at
// low SNR genuinely masks the tone structure.
inline std::vector<double> background_recording(int seconds, std::uint64_t seed) {
    sparknet::Rng rng(seed);
    const int n = seconds * sparknet::kSampleRate;
    std::vector<double> s(n);
    double freq = rng.uniform(300.0, 3000.0);
    double phase = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i % 4000 == 0) freq = rng.uniform(300.0, 3500.0);
        phase += 2.0 * M_PI * freq / sparknet::kSampleRate;
        s[i] = 0.15 * rng.normal(0.0, 1.0) + 0.2 * std::sin(phase);
    }
    return s;
}

// Returns the dataset root. Deterministic for a given spec.
inline std::string make_synthetic_dataset(const std::string& root, const SynthSpec& spec) {
    namespace fs = std::filesystem;
    fs::remove_all(root);
    fs::create_directories(root);

    std::vector<std::string> words = sparknet::target_words();
    static const char* extra[] = {"bed", "cat", "tree", "wow", "bird"};
    for (int i = 0; i < spec.unknown_words && i < 5; ++i) words.push_back(extra[i]);

    std::ofstream val_list(root + "/validation_list.txt");
    std::ofstream test_list(root + "/testing_list.txt");

    for (size_t w = 0; w < words.size(); ++w) {
        fs::create_directories(root + "/" + words[w]);
        auto [f1, f2] = class_tones(static_cast<int>(w));
        int total = spec.train_per_class + spec.val_per_class + spec.test_per_class;
        for (int i = 0; i < total; ++i) {
            sparknet::Rng rng(sparknet::derive_seed(spec.seed, w, i));
            char name[64];
            std::snprintf(name, sizeof name, "clip_%03d.wav", i);
            std::string rel = words[w] + "/" + name;
            write_wav(root + "/" + rel, tone_clip(f1, f2, rng));
            if (i < spec.val_per_class)
                val_list << rel << "\n";
            else if (i < spec.val_per_class + spec.test_per_class)
                test_list << rel << "\n";
        }
    }

    fs::create_directories(root + "/" + sparknet::kBackgroundDir);
    for (int b = 0; b < 3; ++b) {
        std::string path = root + "/" + std::string(sparknet::kBackgroundDir) + "/noise_" +
                           std::to_string(b) + ".wav";
        write_wav(path, background_recording(20, sparknet::derive_seed(spec.seed, 0xB6, b)));
    }
    return root;
}

}  // namespace testsupport
