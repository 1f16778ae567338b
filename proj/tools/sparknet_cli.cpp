#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparknet/checkpoint.hpp"
#include "sparknet/config.hpp"
#include "sparknet/data.hpp"
#include "sparknet/eval.hpp"
#include "sparknet/model.hpp"
#include "sparknet/train.hpp"

namespace {

using namespace sparknet;

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> overrides;  // key=value
    std::string preset;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "key=value config file");
    cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set train.epochs=20");
    cmd->add_option("--preset", opts.preset, "model preset: sparknet-4|8|16|32");
}

AppConfig resolve_config(const CommonOpts& opts) {
    AppConfig cfg;
    if (!opts.config_file.empty()) cfg.load_file(opts.config_file);
    if (!opts.preset.empty()) apply_preset(cfg, opts.preset);
    for (const auto& kv : opts.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void banner(const AppConfig& cfg) {
    std::cout << kVersionString << "\n-- resolved config --\n" << cfg.dump() << "---------------------\n";
}

void write_provenance(const AppConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir + "/resolved_config.txt");
    f << "# " << kVersionString << "\n" << cfg.dump();
}

std::vector<AudioClip> load_background(const std::string& dir) {
    std::vector<AudioClip> out;
    if (dir.empty()) return out;
    for (const auto& path : list_noise_corpus(dir)) out.push_back(load_wav_full(path));
    return out;
}

int cmd_prepare_data(const std::string& root, const std::string& out, std::uint64_t seed) {
    auto manifest = build_manifest(root, seed);
    write_manifest(manifest, out);
    std::map<std::string, int> per_split;
    for (const auto& e : manifest) per_split[split_name(e.split)]++;
    std::cout << "wrote " << manifest.size() << " entries to " << out << " (";
    bool first = true;
    for (const auto& [k, v] : per_split) {
        std::cout << (first ? "" : ", ") << k << "=" << v;
        first = false;
    }
    std::cout << ")\n";
    return 0;
}

int cmd_train(const AppConfig& cfg, const std::string& manifest_path,
              const std::string& out_dir, const std::string& background_dir) {
    banner(cfg);
    write_provenance(cfg, out_dir);
    auto manifest = read_manifest(manifest_path);
    TrainContext ctx(filter_split(manifest, Split::Train), filter_split(manifest, Split::Val),
                     cfg.mfcc, cfg.augment);
    ctx.background = load_background(background_dir);
    ModelConfig mc = cfg.model;
    mc.sparsity_enabled = cfg.train.sparsity_enabled;
    SparkNetParams params = build(mc, cfg.train.seed);
    std::cout << "model: C=" << mc.channels << ", trainable params=" << params.count_trainable()
              << ", train clips=" << ctx.train_entries.size()
              << ", val clips=" << ctx.val_entries.size() << "\n";
    TrainResult r = train_model(params, ctx, cfg.train, out_dir);
    std::cout << "best val acc " << r.best_val_acc << " at epoch " << r.best_epoch
              << "; checkpoints: " << r.best_path << ", " << r.final_path << "\n";
    return 0;
}

int cmd_eval(const AppConfig& cfg, const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& split, const std::string& out) {
    banner(cfg);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    MfccExtractor fe(ckpt.mfcc);
    auto entries = filter_split(read_manifest(manifest_path), split_from_name(split));
    EvalReport r = evaluate(ckpt.params, fe, entries);
    std::cout << "split=" << split << " n=" << r.n_samples << " top1=" << r.top1
              << " gate_open_frac=" << r.gate_open_frac << " macs_strict=" << r.macs.total
              << " macs_extended=" << r.macs.extended << "\n";
    if (!out.empty()) {
        write_eval_report_csv(r, out);
        std::cout << "report written to " << out << "\n";
    }
    return 0;
}

int cmd_make_noisy_test(const AppConfig& cfg, const std::string& manifest_path,
                        const std::string& noise_dir, const std::vector<int>& snrs,
                        int n_seeds, const std::string& out_dir) {
    banner(cfg);
    std::filesystem::create_directories(out_dir);
    write_provenance(cfg, out_dir);
    auto test_entries = filter_split(read_manifest(manifest_path), Split::Test);
    std::vector<size_t> lengths;
    auto noise_files = list_noise_corpus(noise_dir, &lengths);
    for (int seed = 0; seed < n_seeds; ++seed)
        for (int snr : snrs) {
            auto variant = make_noisy_variant(test_entries, noise_files, lengths, snr,
                                              derive_seed(cfg.train.seed, 0x7E57, seed));
            char name[64];
            std::snprintf(name, sizeof name, "/noisy_seed%02d_snr%02d.tsv", seed, snr);
            write_manifest(variant, out_dir + name);
        }
    std::cout << "wrote " << n_seeds * snrs.size() << " noisy test variants ("
              << test_entries.size() << " clips each) to " << out_dir << "\n";
    return 0;
}

int cmd_eval_noisy(const AppConfig& cfg, const std::string& ckpt_path,
                   const std::string& noisy_dir, const std::string& manifest_path,
                   const std::string& out) {
    banner(cfg);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    MfccExtractor fe(ckpt.mfcc);
    auto clean_test = filter_split(read_manifest(manifest_path), Split::Test);

    std::map<int, std::map<int, std::vector<ManifestEntry>>> variants;
    for (const auto& f : std::filesystem::directory_iterator(noisy_dir)) {
        int seed, snr;
        std::string name = f.path().filename().string();
        if (std::sscanf(name.c_str(), "noisy_seed%d_snr%d.tsv", &seed, &snr) == 2)
            variants[snr][seed] = read_manifest(f.path().string());
    }
    if (variants.empty()) throw IngestError("no noisy_seedXX_snrYY.tsv manifests in " + noisy_dir);
    SnrSweepReport rep = evaluate_snr_sweep(ckpt.params, fe, variants, clean_test);
    for (const auto& p : rep.points) {
        if (p.snr_db == kCleanSnrTag)
            std::cout << "clean";
        else
            std::cout << p.snr_db << " dB";
        std::printf(": %.4f +/- %.4f (n=%d)\n", p.mean_acc, p.std_acc, p.n_seeds);
    }
    if (!out.empty()) {
        write_snr_report_csv(rep, out);
        std::cout << "report written to " << out << "\n";
    }
    return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::vector<std::string>& wavs) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    MfccExtractor fe(ckpt.mfcc);
    for (const auto& wav : wavs) {
        FeatureMatrix feat = fe.compute(load_wav(wav));
        std::vector<Tensor2> batch{feat.data};
        ForwardResult out = forward(batch, ckpt.params, /*train=*/false);
        std::vector<double> probs = softmax(out.logits[0]);
        int pred = argmax_class(out.logits[0]);
        std::printf("%s\t%s\t%.4f\n", wav.c_str(), ckpt.labels[pred].c_str(), probs[pred]);
    }
    return 0;
}

int cmd_macs(const AppConfig& cfg, int frames) {
    banner(cfg);
    SparkNetParams params = build(cfg.model, 0);
    MacReport r = count_macs(cfg.model, frames);
    std::cout << "params=" << params.count_trainable() << "\n";
    for (const auto& l : r.layers) std::printf("%-28s %10lld\n", l.name.c_str(), l.macs);
    std::cout << "total_strict=" << r.total << " (conv/linear multiplies, T=" << frames << ")\n";
    std::cout << "total_extended=" << r.extended << " (adds batchnorm and elementwise ops)\n";
    return 0;
}

int cmd_dump_gates(const std::string& ckpt_path, const std::string& mode,
                   const std::string& out_dir, const std::vector<std::string>& wavs) {
    if (mode != "soft" && mode != "hard") throw ConfigError("mode must be soft or hard");
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    MfccExtractor fe(ckpt.mfcc);
    dump_gates(ckpt.params, fe, wavs, mode == "hard", out_dir);
    std::cout << "wrote gate dumps for " << wavs.size() << " clips to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SparkNet keyword spotting: training, evaluation and analysis"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string data_root, manifest_path, out_path, out_dir, ckpt_path, noise_dir, noisy_dir;
    std::string split = "test", mode = "soft", background_dir;
    std::vector<std::string> wavs;
    std::vector<int> snrs = {0, 5, 10, 15, 20};
    int n_seeds = 10, frames = 98;
    std::uint64_t seed = 0;

    auto* prep = app.add_subcommand("prepare-data", "build the 12-class manifest from a dataset root");
    prep->add_option("--data-root", data_root, "speech commands style dataset root")->required();
    prep->add_option("--out", out_path, "output manifest path")->required();
    prep->add_option("--seed", seed, "rebalancing seed");

    auto* train = app.add_subcommand("train", "train a model");
    add_common(train, common);
    train->add_option("--manifest", manifest_path, "manifest from prepare-data")->required();
    train->add_option("--out-dir", out_dir, "output directory")->required();
    train->add_option("--background-dir", background_dir,
                      "noise recordings for background augmentation");
    train->add_option("--seed", seed, "training seed (same as --set train.seed)");
    bool seed_given = false;
    train->callback([&] { seed_given = train->count("--seed") > 0; });

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
    add_common(eval, common);
    eval->add_option("--checkpoint", ckpt_path)->required();
    eval->add_option("--manifest", manifest_path)->required();
    eval->add_option("--split", split, "train|val|test");
    eval->add_option("--out", out_path, "report csv path");

    auto* mknoisy = app.add_subcommand("make-noisy-test", "generate noisy test variants");
    add_common(mknoisy, common);
    mknoisy->add_option("--manifest", manifest_path)->required();
    mknoisy->add_option("--noise-dir", noise_dir, "directory of noise wav files")->required();
    mknoisy->add_option("--snrs", snrs, "SNR list in dB")->delimiter(',');
    mknoisy->add_option("--seeds", n_seeds, "number of random seeds");
    mknoisy->add_option("--out-dir", out_dir)->required();

    auto* evnoisy = app.add_subcommand("eval-noisy", "run the SNR robustness sweep");
    add_common(evnoisy, common);
    evnoisy->add_option("--checkpoint", ckpt_path)->required();
    evnoisy->add_option("--noisy-dir", noisy_dir, "directory from make-noisy-test")->required();
    evnoisy->add_option("--manifest", manifest_path, "clean manifest (for the clean column)")->required();
    evnoisy->add_option("--out", out_path, "report csv path");

    auto* infer = app.add_subcommand("infer", "classify wav files");
    infer->add_option("--checkpoint", ckpt_path)->required();
    infer->add_option("wavs", wavs, "wav files")->required();

    int channels = 0;
    auto* macs = app.add_subcommand("macs", "print parameter and MAC accounting");
    add_common(macs, common);
    macs->add_option("--channels", channels, "channel width C (overrides preset/config)");
    macs->add_option("--frames", frames, "frame count T");

    auto* dump = app.add_subcommand("dump-gates", "write gate masks for wav files");
    dump->add_option("--checkpoint", ckpt_path)->required();
    dump->add_option("--mode", mode, "soft|hard");
    dump->add_option("--out-dir", out_dir)->required();
    dump->add_option("wavs", wavs, "wav files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (prep->parsed()) return cmd_prepare_data(data_root, out_path, seed);
        AppConfig cfg = resolve_config(common);
        if (train->parsed()) {
            if (seed_given) cfg.train.seed = seed;
            return cmd_train(cfg, manifest_path, out_dir, background_dir);
        }
        if (eval->parsed()) return cmd_eval(cfg, ckpt_path, manifest_path, split, out_path);
        if (mknoisy->parsed())
            return cmd_make_noisy_test(cfg, manifest_path, noise_dir, snrs, n_seeds, out_dir);
        if (evnoisy->parsed())
            return cmd_eval_noisy(cfg, ckpt_path, noisy_dir, manifest_path, out_path);
        if (infer->parsed()) return cmd_infer(ckpt_path, wavs);
        if (macs->parsed()) {
            if (channels > 0) cfg.model.channels = channels;
            return cmd_macs(cfg, frames);
        }
        if (dump->parsed()) return cmd_dump_gates(ckpt_path, mode, out_dir, wavs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
