#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <map>

#include "sparknet/data.hpp"
#include "support/synthetic.hpp"

using namespace sparknet;

namespace {
const std::string& dataset_root() {
    static std::string root = [] {
        auto dir = std::filesystem::temp_directory_path() / "sparknet_data_tests" / "sc";
        testsupport::SynthSpec spec;
        return testsupport::make_synthetic_dataset(dir.string(), spec);
    }();
    return root;
}
}  // namespace

TEST_CASE("manifest splits follow the list files and rebalance the fillers") {
    auto manifest = build_manifest(dataset_root(), 1);
    testsupport::SynthSpec spec;

    std::map<Split, std::map<int, int>> counts;
    for (const auto& e : manifest) counts[e.split][e.class_index]++;

    for (int k = 0; k < 10; ++k) {
        REQUIRE(counts[Split::Train][k] == spec.train_per_class);
        REQUIRE(counts[Split::Val][k] == spec.val_per_class);
        REQUIRE(counts[Split::Test][k] == spec.test_per_class);
    }
    // unknown and silence are subsampled/generated to the mean target count
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
        int per = (s == Split::Train) ? spec.train_per_class
                  : (s == Split::Val) ? spec.val_per_class
                                      : spec.test_per_class;
        REQUIRE(counts[s][kUnknownClass] == per);
        REQUIRE(counts[s][kSilenceClass] == per);
    }
    for (const auto& e : manifest) {
        if (e.class_index == kSilenceClass) {
            REQUIRE(e.crop_offset >= 0);
            REQUIRE(e.source_word == "silence");
        } else {
            REQUIRE(e.crop_offset == -1);
        }
    }
}

TEST_CASE("val and test membership never depends on the training seed") {
    auto m1 = build_manifest(dataset_root(), 1);
    auto m2 = build_manifest(dataset_root(), 999);
    auto key = [](const std::vector<ManifestEntry>& m, Split s) {
        std::vector<std::string> k;
        for (const auto& e : m)
            if (e.split == s) k.push_back(e.path + "#" + std::to_string(e.crop_offset));
        std::sort(k.begin(), k.end());
        return k;
    };
    REQUIRE(key(m1, Split::Val) == key(m2, Split::Val));
    REQUIRE(key(m1, Split::Test) == key(m2, Split::Test));
}

TEST_CASE("manifest file round trip including noisy columns") {
    auto manifest = build_manifest(dataset_root(), 1);
    manifest[0].has_noise = true;
    manifest[0].noise_path = "/tmp/x.wav";
    manifest[0].noise_crop = 12345;
    manifest[0].alpha = 0.123456789012345678;
    manifest[0].snr_db = -5;

    auto path = (std::filesystem::temp_directory_path() / "sparknet_data_tests" / "m.tsv").string();
    write_manifest(manifest, path);
    auto back = read_manifest(path);
    REQUIRE(back.size() == manifest.size());
    for (size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].path == manifest[i].path);
        REQUIRE(back[i].split == manifest[i].split);
        REQUIRE(back[i].class_index == manifest[i].class_index);
        REQUIRE(back[i].crop_offset == manifest[i].crop_offset);
        REQUIRE(back[i].has_noise == manifest[i].has_noise);
    }
    REQUIRE(back[0].alpha == manifest[0].alpha);  // %.17g survives exactly
    REQUIRE(back[0].snr_db == -5);
}

TEST_CASE("mix_at_snr gain worked examples") {
    AudioClip s, n;
    s.samples.assign(1000, 0.1);
    n.samples.assign(1000, 0.1);
    double alpha = -1.0;
    mix_at_snr(s, n, 0.0, &alpha);  // equal powers at 0 dB
    REQUIRE(alpha == Catch::Approx(1.0).epsilon(1e-12));

    n.samples.assign(1000, 0.2);
    mix_at_snr(s, n, 20.0, &alpha);  // 0.01 / (0.04 * 100) -> alpha = 0.05
    REQUIRE(alpha == Catch::Approx(0.05).epsilon(1e-12));

    AudioClip zero;
    zero.samples.assign(1000, 0.0);
    mix_at_snr(zero, n, 0.0, &alpha);
    REQUIRE(alpha == 0.0);
    REQUIRE_THROWS_AS(mix_at_snr(s, zero, 0.0), IngestError);
}

TEST_CASE("mix_at_snr hits the requested SNR and is subtractable") {
    Rng rng(8);
    AudioClip s, n;
    s.samples.resize(kClipSamples);
    n.samples.resize(kClipSamples);
    for (double& v : s.samples) v = 0.05 * rng.normal(0.0, 1.0);
    for (double& v : n.samples) v = 0.05 * rng.normal(0.0, 1.0);

    double alpha = 0.0;
    AudioClip mixed = mix_at_snr(s, n, 6.0, &alpha);
    double measured = 10.0 * std::log10(mean_power(s.samples) /
                                        (alpha * alpha * mean_power(n.samples)));
    REQUIRE(measured == Catch::Approx(6.0).margin(1e-6));
    for (size_t i = 0; i < s.samples.size(); ++i)
        REQUIRE(mixed.samples[i] - alpha * n.samples[i] ==
                Catch::Approx(s.samples[i]).margin(1e-7));
}

TEST_CASE("augment time shift moves a delta by at most the configured span") {
    AudioClip clip;
    clip.samples.assign(kClipSamples, 0.0);
    clip.samples[8000] = 1.0;
    AugmentConfig cfg;
    cfg.white_noise_prob = 0.0;
    Rng rng(3);
    AudioClip out = augment(clip, cfg, rng);
    int hits = 0, pos = -1;
    for (int i = 0; i < kClipSamples; ++i)
        if (out.samples[i] != 0.0) {
            ++hits;
            pos = i;
        }
    REQUIRE(hits == 1);
    REQUIRE(std::abs(pos - 8000) <= 1600);  // |shift| <= 100 ms at 16 kHz

    cfg.time_shift_ms = 0.0;
    Rng rng2(3);
    AudioClip same = augment(clip, cfg, rng2);
    REQUIRE(same.samples == clip.samples);
}

TEST_CASE("white noise floor lands at the configured RMS") {
    AudioClip clip;
    clip.samples.assign(kClipSamples, 0.0);
    AugmentConfig cfg;
    cfg.time_shift_ms = 0.0;
    cfg.white_noise_prob = 1.0;
    cfg.white_noise_db_lo = cfg.white_noise_db_hi = -46.0;
    Rng rng(4);
    AudioClip out = augment(clip, cfg, rng);
    double rms = std::sqrt(mean_power(out.samples));
    REQUIRE(rms == Catch::Approx(std::pow(10.0, -46.0 / 20.0)).epsilon(0.05));
}

TEST_CASE("noisy test variants are deterministic and hit their SNR") {
    auto manifest = build_manifest(dataset_root(), 1);
    auto test_entries = filter_split(manifest, Split::Test);
    std::vector<size_t> lens;
    auto noise =
        list_noise_corpus(dataset_root() + "/" + std::string(kBackgroundDir), &lens);

    auto v1 = make_noisy_variant(test_entries, noise, lens, 5, 17);
    auto v2 = make_noisy_variant(test_entries, noise, lens, 5, 17);
    auto v3 = make_noisy_variant(test_entries, noise, lens, 5, 18);
    REQUIRE(v1.size() == test_entries.size());
    bool any_diff = false;
    for (size_t i = 0; i < v1.size(); ++i) {
        REQUIRE(v1[i].has_noise);
        REQUIRE(v1[i].snr_db == 5);
        REQUIRE(v1[i].noise_path == v2[i].noise_path);
        REQUIRE(v1[i].noise_crop == v2[i].noise_crop);
        REQUIRE(v1[i].alpha == v2[i].alpha);
        if (v1[i].noise_crop != v3[i].noise_crop || v1[i].alpha != v3[i].alpha)
            any_diff = true;
    }
    REQUIRE(any_diff);  // a different seed draws different noise

    // the recorded alpha reproduces the mix through load_entry_audio
    AudioClip mixed = load_entry_audio(v1[0]);
    AudioClip clean = load_entry_audio(test_entries[0]);
    AudioClip ncrop = crop_clip(load_wav_full(v1[0].noise_path), v1[0].noise_crop);
    for (size_t i = 0; i < mixed.samples.size(); ++i) {
        double expect = std::clamp(clean.samples[i] + v1[0].alpha * ncrop.samples[i], -1.0, 1.0);
        REQUIRE(mixed.samples[i] == Catch::Approx(expect).margin(1e-12));
    }
}
