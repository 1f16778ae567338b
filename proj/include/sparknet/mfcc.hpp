#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "sparknet/tensor.hpp"
#include "sparknet/wav.hpp"

namespace sparknet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MfccConfig {
    int n_mfcc = 32;       // F
    int n_fft = 512;
    int window_len = 400;  // 25 ms
    int hop_len = 160;     // 10 ms
    int n_mels = 64;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1.0 / (1 << 24);
    double preemphasis = 0.0;  // 0 disables
    bool normalize_per_feature = true;

    void validate() const {
        if (n_mfcc > n_mels || n_mels > n_fft / 2 + 1)
            throw ConfigError("mfcc config: need n_mfcc <= n_mels <= n_fft/2+1");
        if (hop_len > window_len || window_len > n_fft)
            throw ConfigError("mfcc config: need hop_len <= window_len <= n_fft");
        if (!(fmin < fmax) || fmax > kSampleRate / 2.0)
            throw ConfigError("mfcc config: need fmin < fmax <= nyquist");
        if (log_floor <= 0.0)
            throw ConfigError("mfcc config: log_floor must be positive");
    }

    int frame_count() const {
        return 1 + (kClipSamples - window_len) / hop_len;
    }
};

struct FeatureMatrix {
    Tensor2 data;  // F x T, channel index = frequency bin
    int bins() const { return data.channels; }
    int frames() const { return data.time; }
};

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters with mel-uniform centers, evaluated at FFT bin
// frequencies (no bin snapping). n_mels x (n_fft/2+1), row-major.
inline std::vector<double> mel_filterbank(const MfccConfig& cfg) {
    cfg.validate();
    const int n_bins = cfg.n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

    std::vector<double> fb(static_cast<size_t>(cfg.n_mels) * n_bins, 0.0);
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
        bool any = false;
        for (int b = 0; b < n_bins; ++b) {
            double f = static_cast<double>(b) * kSampleRate / cfg.n_fft;
            double up = (f - lo) / (center - lo);
            double down = (hi - f) / (hi - center);
            double w = std::max(0.0, std::min(up, down));
            fb[static_cast<size_t>(m) * n_bins + b] = w;
            any = any || w > 0.0;
        }
        if (!any)
            throw ConfigError("mel filter " + std::to_string(m) +
                              " has empty support; reduce n_mels or raise n_fft");
    }
    return fb;
}

namespace detail {

// In-place iterative radix-2 FFT; n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw ConfigError("fft size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * M_PI / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

}  // namespace detail

// Orthonormal DCT-II matrix, n_out x n_in row-major.
inline std::vector<double> dct2_matrix(int n_out, int n_in) {
    std::vector<double> m(static_cast<size_t>(n_out) * n_in);
    for (int k = 0; k < n_out; ++k) {
        double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / n_in);
        for (int n = 0; n < n_in; ++n)
            m[static_cast<size_t>(k) * n_in + n] =
                norm * std::cos(M_PI * k * (2.0 * n + 1.0) / (2.0 * n_in));
    }
    return m;
}

// Precomputed, shareable frontend state.
class MfccExtractor {
public:
    explicit MfccExtractor(const MfccConfig& cfg)
        : cfg_(cfg), filterbank_(mel_filterbank(cfg)),
          dct_(dct2_matrix(cfg.n_mfcc, cfg.n_mels)), window_(cfg.window_len) {
        // periodic Hann
        for (int i = 0; i < cfg.window_len; ++i)
            window_[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg.window_len);
    }

    const MfccConfig& config() const { return cfg_; }

    // Pre-log mel energies, n_mels x T. Exposed for tests.
    Tensor2 mel_energies(const AudioClip& clip) const {
        if (static_cast<int>(clip.samples.size()) != kClipSamples)
            throw ConfigError("clip must be normalized to 16000 samples");
        std::vector<double> x = clip.samples;
        if (cfg_.preemphasis > 0.0) {
            for (size_t i = x.size(); i-- > 1;)
                x[i] -= cfg_.preemphasis * x[i - 1];
            x[0] *= 1.0 - cfg_.preemphasis;
        }
        const int T = cfg_.frame_count();
        const int n_bins = cfg_.n_fft / 2 + 1;
        Tensor2 mel(cfg_.n_mels, T);
        std::vector<std::complex<double>> buf(cfg_.n_fft);
        std::vector<double> power(n_bins);
        for (int t = 0; t < T; ++t) {
            const int start = t * cfg_.hop_len;
            for (int i = 0; i < cfg_.n_fft; ++i)
                buf[i] = (i < cfg_.window_len) ? x[start + i] * window_[i] : 0.0;
            detail::fft_radix2(buf);
            for (int b = 0; b < n_bins; ++b) power[b] = std::norm(buf[b]);
            for (int m = 0; m < cfg_.n_mels; ++m) {
                const double* row = filterbank_.data() + static_cast<size_t>(m) * n_bins;
                double acc = 0.0;
                for (int b = 0; b < n_bins; ++b) acc += row[b] * power[b];
                mel.at(m, t) = acc;
            }
        }
        return mel;
    }

    FeatureMatrix compute(const AudioClip& clip) const {
        Tensor2 mel = mel_energies(clip);
        const int T = mel.time;
        for (double& v : mel.data) v = std::log(v + cfg_.log_floor);

        FeatureMatrix out;
        out.data = Tensor2(cfg_.n_mfcc, T);
        for (int t = 0; t < T; ++t)
            for (int k = 0; k < cfg_.n_mfcc; ++k) {
                const double* row = dct_.data() + static_cast<size_t>(k) * cfg_.n_mels;
                double acc = 0.0;
                for (int m = 0; m < cfg_.n_mels; ++m) acc += row[m] * mel.at(m, t);
                out.data.at(k, t) = acc;
            }

        if (cfg_.normalize_per_feature) {
            for (int k = 0; k < cfg_.n_mfcc; ++k) {
                double mean = 0.0;
                for (int t = 0; t < T; ++t) mean += out.data.at(k, t);
                mean /= T;
                double var = 0.0;
                for (int t = 0; t < T; ++t) {
                    double d = out.data.at(k, t) - mean;
                    var += d * d;
                }
                double std_dev = std::sqrt(var / T);
                for (int t = 0; t < T; ++t)
                    out.data.at(k, t) = (out.data.at(k, t) - mean) / (std_dev + 1e-5);
            }
        }
        return out;
    }

    // Center frequency of each mel filter, for diagnostics.
    std::vector<double> filter_centers() const {
        const double mel_lo = hz_to_mel(cfg_.fmin);
        const double mel_hi = hz_to_mel(cfg_.fmax);
        std::vector<double> c(cfg_.n_mels);
        for (int m = 0; m < cfg_.n_mels; ++m)
            c[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg_.n_mels + 1));
        return c;
    }

private:
    MfccConfig cfg_;
    std::vector<double> filterbank_;
    std::vector<double> dct_;
    std::vector<double> window_;
};

}  // namespace sparknet
