#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparknet/mfcc.hpp"
#include "sparknet/model.hpp"

namespace sparknet {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr char kCheckpointMagic[8] = {'S', 'P', 'R', 'K', 'N', 'E', 'T', '1'};
constexpr int kCheckpointVersion = 1;

inline std::uint32_t crc32(const unsigned char* data, size_t len, std::uint32_t crc = 0) {
    crc = ~crc;
    for (size_t i = 0; i < len; ++i) {
        crc ^= data[i];
        for (int b = 0; b < 8; ++b)
            crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

namespace detail {

// Declared serialization order: every array in the checkpoint, by name.
// Covers trainable tensors plus BN running statistics.
template <typename Fn>
void for_each_tensor(SparkNetParams& p, Fn&& fn) {
    for (int i = 0; i < 4; ++i) {
        TcsBlock& b = p.blocks[i];
        const std::string tag = "block" + std::to_string(i + 1);
        fn(tag + ".dw", b.dw.value);
        fn(tag + ".pw", b.pw.value);
        fn(tag + ".bn.gamma", b.bn.gamma.value);
        fn(tag + ".bn.beta", b.bn.beta.value);
        fn(tag + ".bn.running_mean", b.bn.running_mean);
        fn(tag + ".bn.running_var", b.bn.running_var);
        if (b.has_residual) {
            fn(tag + ".res_pw", b.res_pw.value);
            fn(tag + ".res_bn.gamma", b.res_bn.gamma.value);
            fn(tag + ".res_bn.beta", b.res_bn.beta.value);
            fn(tag + ".res_bn.running_mean", b.res_bn.running_mean);
            fn(tag + ".res_bn.running_var", b.res_bn.running_var);
        }
    }
    fn("head.w", p.head_w.value);
    fn("head.b", p.head_b.value);
    fn("head_bn.gamma", p.head_bn.gamma.value);
    fn("head_bn.beta", p.head_bn.beta.value);
    fn("head_bn.running_mean", p.head_bn.running_mean);
    fn("head_bn.running_var", p.head_bn.running_var);
    fn("classifier.w", p.fc_w.value);
    fn("classifier.b", p.fc_b.value);
}

inline nlohmann::json mfcc_to_json(const MfccConfig& m) {
    return {{"n_mfcc", m.n_mfcc},       {"n_fft", m.n_fft},
            {"window_len", m.window_len}, {"hop_len", m.hop_len},
            {"n_mels", m.n_mels},       {"fmin", m.fmin},
            {"fmax", m.fmax},           {"log_floor", m.log_floor},
            {"preemphasis", m.preemphasis},
            {"normalize_per_feature", m.normalize_per_feature}};
}

inline MfccConfig mfcc_from_json(const nlohmann::json& j) {
    MfccConfig m;
    m.n_mfcc = j.at("n_mfcc");
    m.n_fft = j.at("n_fft");
    m.window_len = j.at("window_len");
    m.hop_len = j.at("hop_len");
    m.n_mels = j.at("n_mels");
    m.fmin = j.at("fmin");
    m.fmax = j.at("fmax");
    m.log_floor = j.at("log_floor");
    m.preemphasis = j.at("preemphasis");
    m.normalize_per_feature = j.at("normalize_per_feature");
    return m;
}

}  // namespace detail

struct Checkpoint {
    SparkNetParams params;
    MfccConfig mfcc;
    std::vector<std::string> labels;
};

inline void save_checkpoint(SparkNetParams& params, const MfccConfig& mfcc,
                            const std::vector<std::string>& labels,
                            const std::string& path) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["model"] = {{"channels", params.config.channels},
                       {"feat_bins", params.config.feat_bins},
                       {"num_classes", params.config.num_classes},
                       {"kernels", params.config.kernels},
                       {"sigma", params.config.gate.sigma},
                       {"sparsity_enabled", params.config.sparsity_enabled}};
    header["mfcc"] = detail::mfcc_to_json(mfcc);
    header["labels"] = labels;
    header["init_seed"] = params.init_seed;
    nlohmann::json tensors = nlohmann::json::array();
    detail::for_each_tensor(params, [&](const std::string& name, std::vector<double>& v) {
        tensors.push_back({{"name", name}, {"size", v.size()}});
    });
    header["tensors"] = tensors;

    std::string hdr = header.dump();
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 8);
    std::uint32_t hlen = static_cast<std::uint32_t>(hdr.size());
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(hlen >> (8 * i)));
    buf.insert(buf.end(), hdr.begin(), hdr.end());
    detail::for_each_tensor(params, [&](const std::string&, std::vector<double>& v) {
        for (double d : v) {
            float f = static_cast<float>(d);
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(u >> (8 * i)));
        }
    });
    std::uint32_t crc = crc32(buf.data(), buf.size());
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(crc >> (8 * i)));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint for writing: " + path);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw CheckpointError("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0)
        throw CheckpointError("bad checkpoint magic: " + path);
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= std::uint32_t(buf[buf.size() - 4 + i]) << (8 * i);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc)
        throw CheckpointError("checkpoint CRC mismatch: " + path);

    std::uint32_t hlen = 0;
    for (int i = 0; i < 4; ++i) hlen |= std::uint32_t(buf[8 + i]) << (8 * i);
    if (12 + hlen > buf.size() - 4) throw CheckpointError("truncated checkpoint header: " + path);
    nlohmann::json header =
        nlohmann::json::parse(buf.begin() + 12, buf.begin() + 12 + hlen);
    if (header.at("format_version").get<int>() != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version");

    ModelConfig cfg;
    const auto& m = header.at("model");
    cfg.channels = m.at("channels");
    cfg.feat_bins = m.at("feat_bins");
    cfg.num_classes = m.at("num_classes");
    auto kv = m.at("kernels").get<std::vector<int>>();
    if (kv.size() != 4) throw CheckpointError("bad kernel list in checkpoint");
    std::copy(kv.begin(), kv.end(), cfg.kernels.begin());
    cfg.gate.sigma = m.at("sigma");
    cfg.sparsity_enabled = m.at("sparsity_enabled");

    Checkpoint ckpt;
    ckpt.params = build(cfg, header.at("init_seed").get<std::uint64_t>());
    ckpt.mfcc = detail::mfcc_from_json(header.at("mfcc"));
    ckpt.labels = header.at("labels").get<std::vector<std::string>>();

    size_t pos = 12 + hlen;
    size_t ti = 0;
    const auto& tensors = header.at("tensors");
    detail::for_each_tensor(ckpt.params, [&](const std::string& name, std::vector<double>& v) {
        if (ti >= tensors.size())
            throw CheckpointError("checkpoint missing tensor " + name);
        if (tensors[ti].at("name").get<std::string>() != name ||
            tensors[ti].at("size").get<size_t>() != v.size())
            throw CheckpointError("checkpoint tensor shape mismatch at " + name);
        ++ti;
        if (pos + 4 * v.size() > buf.size() - 4)
            throw CheckpointError("checkpoint truncated in tensor " + name);
        for (double& d : v) {
            std::uint32_t u = 0;
            for (int i = 0; i < 4; ++i) u |= std::uint32_t(buf[pos + i]) << (8 * i);
            float fv;
            std::memcpy(&fv, &u, 4);
            d = fv;
            pos += 4;
        }
    });
    if (ti != tensors.size() || pos != buf.size() - 4)
        throw CheckpointError("checkpoint has trailing or missing tensor data");
    return ckpt;
}

// Load with a shape requirement, e.g. when the caller asked for a specific C.
inline Checkpoint load_checkpoint(const std::string& path, int expect_channels) {
    Checkpoint c = load_checkpoint(path);
    if (c.params.config.channels != expect_channels)
        throw CheckpointError("checkpoint channels=" +
                              std::to_string(c.params.config.channels) +
                              " but " + std::to_string(expect_channels) + " requested");
    return c;
}

}  // namespace sparknet
