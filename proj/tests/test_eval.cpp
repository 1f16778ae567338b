#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "sparknet/eval.hpp"
#include "support/synthetic.hpp"

using namespace sparknet;

namespace {
const std::string& dataset_root() {
    static std::string root = [] {
        auto dir = std::filesystem::temp_directory_path() / "sparknet_eval_tests" / "sc";
        testsupport::SynthSpec spec;
        spec.train_per_class = 2;
        spec.val_per_class = 2;
        spec.test_per_class = 3;
        return testsupport::make_synthetic_dataset(dir.string(), spec);
    }();
    return root;
}
}  // namespace

TEST_CASE("argmax breaks ties toward the lowest class") {
    REQUIRE(argmax_class({0.0, 3.0, 3.0, 1.0}) == 1);
    REQUIRE(argmax_class({5.0, 1.0}) == 0);
}

TEST_CASE("evaluation report conserves counts and is order-invariant") {
    auto manifest = build_manifest(dataset_root(), 2);
    auto test_entries = filter_split(manifest, Split::Test);
    ModelConfig mc;
    SparkNetParams p = build(mc, 3);  // untrained
    MfccExtractor fe{MfccConfig{}};

    EvalReport r = evaluate(p, fe, test_entries, 7);  // odd batch size on purpose
    REQUIRE(r.n_samples == static_cast<long long>(test_entries.size()));
    long long total = 0;
    for (const auto& row : r.confusion)
        for (long long v : row) total += v;
    REQUIRE(total == r.n_samples);
    REQUIRE(r.top1 >= 0.0);
    REQUIRE(r.top1 < 0.6);  // untrained net must not look trained
    REQUIRE(r.gate_open_frac >= 0.0);
    REQUIRE(r.gate_open_frac <= 1.0);
    REQUIRE(r.macs.total == count_macs(mc, 98).total);

    auto shuffled = test_entries;
    std::reverse(shuffled.begin(), shuffled.end());
    EvalReport r2 = evaluate(p, fe, shuffled, 64);
    REQUIRE(r2.top1 == r.top1);
    REQUIRE(r2.confusion == r.confusion);
}

TEST_CASE("evaluate rejects mismatched frontend") {
    auto manifest = build_manifest(dataset_root(), 2);
    auto test_entries = filter_split(manifest, Split::Test);
    ModelConfig mc;
    SparkNetParams p = build(mc, 3);
    MfccConfig bad;
    bad.n_mfcc = 16;
    MfccExtractor fe{bad};
    REQUIRE_THROWS_AS(evaluate(p, fe, test_entries), ConfigError);
}

TEST_CASE("snr sweep report aggregates seeds and tags the clean point") {
    auto manifest = build_manifest(dataset_root(), 2);
    auto test_entries = filter_split(manifest, Split::Test);
    std::vector<size_t> lens;
    auto noise = list_noise_corpus(dataset_root() + "/" + std::string(kBackgroundDir), &lens);

    std::map<int, std::map<int, std::vector<ManifestEntry>>> variants;
    for (int snr : {0, 20})
        for (int seed : {1, 2, 3})
            variants[snr][seed] = make_noisy_variant(test_entries, noise, lens, snr, seed);

    ModelConfig mc;
    SparkNetParams p = build(mc, 4);
    MfccExtractor fe{MfccConfig{}};
    SnrSweepReport rep = evaluate_snr_sweep(p, fe, variants, test_entries);
    REQUIRE(rep.points.size() == 3);
    REQUIRE(rep.points.back().snr_db == kCleanSnrTag);
    REQUIRE(rep.points.back().mean_acc == rep.clean_acc);
    for (const auto& pt : rep.points) {
        if (pt.snr_db == kCleanSnrTag) continue;
        REQUIRE(pt.n_seeds == 3);
        REQUIRE(pt.std_acc >= 0.0);
    }

    auto dir = std::filesystem::temp_directory_path() / "sparknet_eval_tests";
    auto csv = (dir / "snr.csv").string();
    write_snr_report_csv(rep, csv);
    std::ifstream f(csv);
    std::string header;
    std::getline(f, header);
    REQUIRE(header == "snr_db,mean_acc,std_acc,n_seeds");
}

TEST_CASE("gate dumps: csv and graymap encodings") {
    namespace fs = std::filesystem;
    auto manifest = build_manifest(dataset_root(), 2);
    std::string wav;
    for (const auto& e : manifest)
        if (e.class_index == 0) {
            wav = e.path;
            break;
        }
    REQUIRE_FALSE(wav.empty());

    ModelConfig mc;
    SparkNetParams p = build(mc, 5);
    MfccExtractor fe{MfccConfig{}};
    auto out_hard = (fs::temp_directory_path() / "sparknet_eval_tests" / "gates_hard").string();
    auto out_soft = (fs::temp_directory_path() / "sparknet_eval_tests" / "gates_soft").string();
    dump_gates(p, fe, {wav}, /*hard=*/true, out_hard);
    dump_gates(p, fe, {wav}, /*hard=*/false, out_soft);

    std::string stem = fs::path(wav).stem().string();
    for (const char* suffix : {"_gates.csv", "_gates.pgm", "_mfcc.csv", "_mfcc.pgm"}) {
        REQUIRE(fs::exists(fs::path(out_hard) / (stem + suffix)));
        REQUIRE(fs::exists(fs::path(out_soft) / (stem + suffix)));
    }

    auto read_pgm = [](const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        std::string magic;
        int w, h, maxv;
        f >> magic >> w >> h >> maxv;
        f.get();  // single whitespace before raster
        std::vector<unsigned char> pix(static_cast<size_t>(w) * h);
        f.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
        REQUIRE(magic == "P5");
        REQUIRE(maxv == 255);
        return std::tuple{w, h, pix};
    };

    auto [w, h, hard] = read_pgm((fs::path(out_hard) / (stem + "_gates.pgm")).string());
    REQUIRE(w == 98);
    REQUIRE(h == 32);
    for (unsigned char b : hard) REQUIRE((b == 0 || b == 255));

    // soft bytes are round(255 * z) for the same forward pass
    std::vector<Tensor2> batch{fe.compute(load_wav(wav)).data};
    ForwardResult out = forward(batch, p, false);
    auto [w2, h2, soft] = read_pgm((fs::path(out_soft) / (stem + "_gates.pgm")).string());
    REQUIRE(w2 == 98);
    REQUIRE(h2 == 32);
    size_t i = 0;
    for (int c = 0; c < 32; ++c)
        for (int t = 0; t < 98; ++t, ++i)
            REQUIRE(soft[i] ==
                    static_cast<unsigned char>(std::lround(255.0 * out.z[0].at(c, t))));
}
