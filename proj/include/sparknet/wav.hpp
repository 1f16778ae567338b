#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparknet {

struct WavFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WavUnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kSampleRate = 16000;
constexpr int kClipSamples = 16000;  // every model input is exactly 1 s

struct AudioClip {
    std::vector<double> samples;  // amplitudes in [-1, 1]
    int sample_rate = kSampleRate;
};

namespace detail {

inline std::uint32_t rd_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
           std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t rd_u16(const unsigned char* p) {
    return std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8;
}

}  // namespace detail

// Reads a RIFF/WAVE file at its native length. PCM 16-bit or IEEE float,
// mono, 16 kHz only; anything else is rejected, never resampled.
inline AudioClip load_wav_full(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw WavFormatError("cannot open wav file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw WavFormatError("not a RIFF/WAVE file: " + path);

    std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;
    bool have_fmt = false;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        std::uint32_t chunk_len = detail::rd_u32(hdr + 4);
        size_t body = pos + 8;
        if (body + chunk_len > bytes.size())
            chunk_len = static_cast<std::uint32_t>(bytes.size() - body);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw WavFormatError("truncated fmt chunk: " + path);
            fmt_tag = detail::rd_u16(bytes.data() + body);
            channels = detail::rd_u16(bytes.data() + body + 2);
            rate = detail::rd_u32(bytes.data() + body + 4);
            bits = detail::rd_u16(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data == nullptr)
        throw WavFormatError("missing fmt or data chunk: " + path);
    if (channels != 1)
        throw WavUnsupportedError("only mono wav supported: " + path);
    if (rate != kSampleRate)
        throw WavUnsupportedError("sample rate must be 16000, got " +
                                  std::to_string(rate) + ": " + path);

    AudioClip clip;
    clip.sample_rate = kSampleRate;
    if (fmt_tag == 1 && bits == 16) {
        size_t n = data_len / 2;
        clip.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
            std::int16_t s = static_cast<std::int16_t>(detail::rd_u16(data + 2 * i));
            clip.samples[i] = s / 32768.0;
        }
    } else if (fmt_tag == 3 && bits == 32) {
        size_t n = data_len / 4;
        clip.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
            std::uint32_t u = detail::rd_u32(data + 4 * i);
            float v;
            std::memcpy(&v, &u, 4);
            clip.samples[i] = v;
        }
    } else {
        throw WavUnsupportedError("unsupported wav encoding (fmt=" +
                                  std::to_string(fmt_tag) + ", bits=" +
                                  std::to_string(bits) + "): " + path);
    }
    return clip;
}

// Pad with trailing zeros / center-crop to exactly 1 s.
inline void normalize_length(AudioClip& clip) {
    auto& s = clip.samples;
    if (s.size() < kClipSamples) {
        s.resize(kClipSamples, 0.0);
    } else if (s.size() > kClipSamples) {
        size_t start = (s.size() - kClipSamples) / 2;
        std::vector<double> out(s.begin() + start, s.begin() + start + kClipSamples);
        s = std::move(out);
    }
}

inline AudioClip load_wav(const std::string& path) {
    AudioClip clip = load_wav_full(path);
    normalize_length(clip);
    return clip;
}

// 1 s window of a longer recording (background noise files are minutes long).
inline AudioClip crop_clip(const AudioClip& src, std::int64_t offset) {
    if (offset < 0 || offset + kClipSamples > static_cast<std::int64_t>(src.samples.size()))
        throw std::out_of_range("crop offset out of range");
    AudioClip out;
    out.sample_rate = src.sample_rate;
    out.samples.assign(src.samples.begin() + offset,
                       src.samples.begin() + offset + kClipSamples);
    return out;
}

}  // namespace sparknet
