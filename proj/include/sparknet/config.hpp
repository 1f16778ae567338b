#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sparknet/data.hpp"
#include "sparknet/mfcc.hpp"
#include "sparknet/model.hpp"
#include "sparknet/train.hpp"

namespace sparknet {

constexpr const char* kVersionString = "sparknet 0.1.0";

// Every tunable in one place, addressable as flat key=value text. Precedence:
// built-in defaults < config file < CLI overrides; the resolved result is
// echoed at startup and written next to every artifact.
struct AppConfig {
    MfccConfig mfcc;
    ModelConfig model;
    TrainConfig train;
    AugmentConfig augment;

    using Setter = std::function<void(AppConfig&, const std::string&)>;
    using Getter = std::function<std::string(const AppConfig&)>;

    struct Field {
        Setter set;
        Getter get;
    };

    static const std::map<std::string, Field>& fields() {
        static const std::map<std::string, Field> f = make_fields();
        return f;
    }

    void set(const std::string& key, const std::string& value) {
        auto it = fields().find(key);
        if (it == fields().end()) throw ConfigError("unknown config key: " + key);
        it->second.set(*this, value);
    }

    std::string dump() const {
        std::ostringstream out;
        for (const auto& [key, field] : fields()) out << key << "=" << field.get(*this) << "\n";
        return out.str();
    }

    void load_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file: " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            size_t h = line.find('#');
            if (h != std::string::npos) line.resize(h);
            size_t a = line.find_first_not_of(" \t");
            if (a == std::string::npos) continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
            auto trim = [](std::string s) {
                size_t b = s.find_first_not_of(" \t");
                size_t e = s.find_last_not_of(" \t");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

private:
    static std::map<std::string, Field> make_fields();
};

namespace detail {

inline bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("not a boolean: " + v);
}

template <typename T>
std::string to_str(const T& v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}
inline std::string to_str(bool v) { return v ? "true" : "false"; }

}  // namespace detail

inline std::map<std::string, AppConfig::Field> AppConfig::make_fields() {
    std::map<std::string, Field> f;
    auto reg = [&](const std::string& key, auto accessor) {
        using T = std::remove_reference_t<decltype(accessor(std::declval<AppConfig&>()))>;
        f[key] = {[accessor](AppConfig& c, const std::string& v) {
                      if constexpr (std::is_same_v<T, bool>)
                          accessor(c) = detail::parse_bool(v);
                      else if constexpr (std::is_same_v<T, int>)
                          accessor(c) = std::stoi(v);
                      else if constexpr (std::is_same_v<T, std::uint64_t>)
                          accessor(c) = std::stoull(v);
                      else
                          accessor(c) = std::stod(v);
                  },
                  [accessor](const AppConfig& c) {
                      return detail::to_str(accessor(const_cast<AppConfig&>(c)));
                  }};
    };

    reg("mfcc.n_mfcc", [](AppConfig& c) -> int& { return c.mfcc.n_mfcc; });
    reg("mfcc.n_fft", [](AppConfig& c) -> int& { return c.mfcc.n_fft; });
    reg("mfcc.window_len", [](AppConfig& c) -> int& { return c.mfcc.window_len; });
    reg("mfcc.hop_len", [](AppConfig& c) -> int& { return c.mfcc.hop_len; });
    reg("mfcc.n_mels", [](AppConfig& c) -> int& { return c.mfcc.n_mels; });
    reg("mfcc.fmin", [](AppConfig& c) -> double& { return c.mfcc.fmin; });
    reg("mfcc.fmax", [](AppConfig& c) -> double& { return c.mfcc.fmax; });
    reg("mfcc.log_floor", [](AppConfig& c) -> double& { return c.mfcc.log_floor; });
    reg("mfcc.preemphasis", [](AppConfig& c) -> double& { return c.mfcc.preemphasis; });
    reg("mfcc.normalize_per_feature",
        [](AppConfig& c) -> bool& { return c.mfcc.normalize_per_feature; });

    reg("model.channels", [](AppConfig& c) -> int& { return c.model.channels; });
    reg("model.feat_bins", [](AppConfig& c) -> int& { return c.model.feat_bins; });
    reg("model.num_classes", [](AppConfig& c) -> int& { return c.model.num_classes; });
    reg("model.sigma", [](AppConfig& c) -> double& { return c.model.gate.sigma; });
    reg("model.sparsity_enabled",
        [](AppConfig& c) -> bool& { return c.model.sparsity_enabled; });

    reg("train.epochs", [](AppConfig& c) -> int& { return c.train.epochs; });
    reg("train.batch_size", [](AppConfig& c) -> int& { return c.train.batch_size; });
    reg("train.lr_max", [](AppConfig& c) -> double& { return c.train.lr_max; });
    reg("train.lr_min", [](AppConfig& c) -> double& { return c.train.lr_min; });
    reg("train.warmup_ratio", [](AppConfig& c) -> double& { return c.train.warmup_ratio; });
    reg("train.hold_ratio", [](AppConfig& c) -> double& { return c.train.hold_ratio; });
    reg("train.poly_power", [](AppConfig& c) -> double& { return c.train.poly_power; });
    reg("train.momentum", [](AppConfig& c) -> double& { return c.train.momentum; });
    reg("train.weight_decay", [](AppConfig& c) -> double& { return c.train.weight_decay; });
    reg("train.decay_bn_params", [](AppConfig& c) -> bool& { return c.train.decay_bn_params; });
    reg("train.lambda_ce", [](AppConfig& c) -> double& { return c.train.lambda_ce; });
    reg("train.seed", [](AppConfig& c) -> std::uint64_t& { return c.train.seed; });
    reg("train.sparsity_enabled", [](AppConfig& c) -> bool& { return c.train.sparsity_enabled; });
    reg("train.jobs", [](AppConfig& c) -> int& { return c.train.jobs; });

    reg("augment.time_shift_ms", [](AppConfig& c) -> double& { return c.augment.time_shift_ms; });
    reg("augment.white_noise_db_lo",
        [](AppConfig& c) -> double& { return c.augment.white_noise_db_lo; });
    reg("augment.white_noise_db_hi",
        [](AppConfig& c) -> double& { return c.augment.white_noise_db_hi; });
    reg("augment.white_noise_prob",
        [](AppConfig& c) -> double& { return c.augment.white_noise_prob; });
    reg("augment.background_noise_prob",
        [](AppConfig& c) -> double& { return c.augment.background_noise_prob; });
    reg("augment.background_snr_lo_db",
        [](AppConfig& c) -> double& { return c.augment.background_snr_lo_db; });
    reg("augment.background_snr_hi_db",
        [](AppConfig& c) -> double& { return c.augment.background_snr_hi_db; });
    return f;
}

// Named presets from the scaling study.
inline void apply_preset(AppConfig& cfg, const std::string& name) {
    if (name == "sparknet-4")
        cfg.model.channels = 4;
    else if (name == "sparknet-8")
        cfg.model.channels = 8;
    else if (name == "sparknet-16")
        cfg.model.channels = 16;
    else if (name == "sparknet-32") {
        cfg.model.channels = 32;
        cfg.augment.background_noise_prob = 0.8;
    } else {
        throw ConfigError("unknown preset: " + name);
    }
}

}  // namespace sparknet
