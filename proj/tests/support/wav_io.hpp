#pragma once

// Test-side WAV writer; the library itself only reads.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace testsupport {

inline void put_u32(std::ofstream& f, std::uint32_t v) {
    char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
    f.write(b, 4);
}
inline void put_u16(std::ofstream& f, std::uint16_t v) {
    char b[2] = {char(v), char(v >> 8)};
    f.write(b, 2);
}

inline void write_wav_pcm16(const std::string& path, const std::vector<std::int16_t>& samples,
                            int rate = 16000) {
    std::ofstream f(path, std::ios::binary);
    std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
    f.write("RIFF", 4);
    put_u32(f, 36 + data_len);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(f, 16);
    put_u16(f, 1);   // PCM
    put_u16(f, 1);   // mono
    put_u32(f, rate);
    put_u32(f, rate * 2);
    put_u16(f, 2);
    put_u16(f, 16);
    f.write("data", 4);
    put_u32(f, data_len);
    for (std::int16_t s : samples) put_u16(f, static_cast<std::uint16_t>(s));
}

inline void write_wav(const std::string& path, const std::vector<double>& samples,
                      int rate = 16000) {
    std::vector<std::int16_t> pcm(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        double v = samples[i] * 32767.0;
        if (v > 32767.0) v = 32767.0;
        if (v < -32768.0) v = -32768.0;
        pcm[i] = static_cast<std::int16_t>(v);
    }
    write_wav_pcm16(path, pcm, rate);
}

}  // namespace testsupport
