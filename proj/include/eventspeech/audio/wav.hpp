#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsp::audio {

// 16-bit PCM mono RIFF/WAVE. Samples normalized to [-1, 1) in memory.

namespace detail {

inline void put_u32(std::ofstream& f, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    f.write(b, 4);
}

inline void put_u16(std::ofstream& f, std::uint16_t v) {
    char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    f.write(b, 2);
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
}

} // namespace detail

inline void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    f.write("RIFF", 4);
    detail::put_u32(f, 36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    detail::put_u32(f, 16);
    detail::put_u16(f, 1); // PCM
    detail::put_u16(f, 1); // mono
    detail::put_u32(f, static_cast<std::uint32_t>(sample_rate));
    detail::put_u32(f, static_cast<std::uint32_t>(sample_rate * 2));
    detail::put_u16(f, 2);  // block align
    detail::put_u16(f, 16); // bits
    f.write("data", 4);
    detail::put_u32(f, data_bytes);
    for (double s : samples) {
        double c = s < -1.0 ? -1.0 : (s > 1.0 - 1.0 / 32768.0 ? 1.0 - 1.0 / 32768.0 : s);
        const auto v = static_cast<std::int16_t>(std::lround(c * 32768.0));
        detail::put_u16(f, static_cast<std::uint16_t>(v));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

struct WavData {
    std::vector<double> samples;
    int sample_rate = 0;
};

inline WavData read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open: " + path);
    const auto size = static_cast<size_t>(f.tellg());
    f.seekg(0);
    std::vector<std::uint8_t> b(size);
    f.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(size));
    if (!f || size < 44) throw std::runtime_error("not a wav file: " + path);
    if (std::string(b.begin(), b.begin() + 4) != "RIFF" || std::string(b.begin() + 8, b.begin() + 12) != "WAVE")
        throw std::runtime_error("not a wav file: " + path);

    WavData out;
    size_t pos = 12;
    int bits = 0, channels = 0;
    bool got_fmt = false;
    while (pos + 8 <= size) {
        const std::string id(b.begin() + pos, b.begin() + pos + 4);
        const std::uint32_t len = detail::get_u32(&b[pos + 4]);
        pos += 8;
        if (pos + len > size) throw std::runtime_error("truncated wav chunk: " + path);
        if (id == "fmt ") {
            if (len < 16) throw std::runtime_error("malformed fmt chunk: " + path);
            const auto fmt = detail::get_u16(&b[pos]);
            channels = detail::get_u16(&b[pos + 2]);
            out.sample_rate = static_cast<int>(detail::get_u32(&b[pos + 4]));
            bits = detail::get_u16(&b[pos + 14]);
            if (fmt != 1) throw std::runtime_error("only PCM wav supported: " + path);
            got_fmt = true;
        } else if (id == "data") {
            if (!got_fmt) throw std::runtime_error("wav data before fmt: " + path);
            if (bits != 16 || channels != 1)
                throw std::runtime_error("only 16-bit mono wav supported: " + path);
            const size_t n = len / 2;
            out.samples.resize(n);
            for (size_t i = 0; i < n; ++i) {
                const auto v = static_cast<std::int16_t>(detail::get_u16(&b[pos + 2 * i]));
                out.samples[i] = double(v) / 32768.0;
            }
            return out;
        }
        pos += len + (len & 1);
    }
    throw std::runtime_error("wav has no data chunk: " + path);
}

} // namespace evsp::audio
