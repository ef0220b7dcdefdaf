#pragma once

#include "eventspeech/common.hpp"
#include "eventspeech/event/types.hpp"

#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsp::harness {

inline void write_ppm(const event::Frame& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("ppm: cannot write " + path);
    out << "P6\n" << f.width << " " << f.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
}

inline event::Frame read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ppm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error("ppm: not a P6 file: " + path);
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("ppm: bad header in " + path);
    in.get();
    event::Frame f;
    f.width = w;
    f.height = h;
    f.rgb.resize(static_cast<size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
    if (!in) throw std::runtime_error("ppm: truncated pixel data in " + path);
    return f;
}

namespace detail {

inline void png_chunk(std::ofstream& out, const char type[4], const std::vector<std::uint8_t>& payload) {
    auto be32 = [](std::uint32_t v) {
        return std::array<std::uint8_t, 4>{static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                                           static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    };
    auto len = be32(static_cast<std::uint32_t>(payload.size()));
    out.write(reinterpret_cast<const char*>(len.data()), 4);
    out.write(type, 4);
    if (!payload.empty()) out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    std::uint32_t crc = static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(type), 4));
    if (!payload.empty()) crc = static_cast<std::uint32_t>(crc32(crc, payload.data(), static_cast<uInt>(payload.size())));
    auto crcb = be32(crc);
    out.write(reinterpret_cast<const char*>(crcb.data()), 4);
}

} // namespace detail

// rgb is height*width*3 interleaved, 8-bit
inline void write_png(const std::uint8_t* rgb, int width, int height, const std::string& path) {
    if (width <= 0 || height <= 0) throw std::runtime_error("png: empty image");
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = rgb + static_cast<size_t>(y) * width * 3;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> deflated(bound);
    if (compress2(deflated.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    deflated.resize(bound);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("png: cannot write " + path);
    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<std::uint8_t> ihdr(13, 0);
    auto put32 = [&](size_t off, std::uint32_t v) {
        ihdr[off] = static_cast<std::uint8_t>(v >> 24);
        ihdr[off + 1] = static_cast<std::uint8_t>(v >> 16);
        ihdr[off + 2] = static_cast<std::uint8_t>(v >> 8);
        ihdr[off + 3] = static_cast<std::uint8_t>(v);
    };
    put32(0, static_cast<std::uint32_t>(width));
    put32(4, static_cast<std::uint32_t>(height));
    ihdr[8] = 8;  // bit depth
    ihdr[9] = 2;  // truecolor
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", deflated);
    detail::png_chunk(out, "IEND", {});
}

inline void write_png(const event::Frame& f, const std::string& path) {
    write_png(f.rgb.data(), f.width, f.height, path);
}

// .npy version 1.0, float64, C order
inline void write_npy(const Mat& m, const std::string& path) {
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) + ", " +
                         std::to_string(m.cols()) + "), }";
    size_t total = 10 + header.size() + 1;
    header.append(63 - (total - 1) % 64, ' ');
    header += '\n';

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("npy: cannot write " + path);
    out.write("\x93NUMPY\x01\x00", 8);
    std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
    out.write(reinterpret_cast<const char*>(&hlen), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v = m(r, c);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
}

inline Mat read_npy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("npy: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) throw std::runtime_error("npy: bad magic in " + path);
    std::uint16_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 2);
    std::string header(hlen, '\0');
    in.read(header.data(), hlen);
    if (header.find("'<f8'") == std::string::npos) throw std::runtime_error("npy: expected float64 in " + path);
    if (header.find("False") == std::string::npos) throw std::runtime_error("npy: expected C order in " + path);
    auto open = header.find('(');
    auto comma = header.find(',', open);
    auto close = header.find(')', open);
    if (open == std::string::npos || comma == std::string::npos || close == std::string::npos)
        throw std::runtime_error("npy: bad shape in " + path);
    long rows = std::stol(header.substr(open + 1, comma - open - 1));
    std::string rest = header.substr(comma + 1, close - comma - 1);
    long cols = rest.find_first_not_of(" ") == std::string::npos ? 1 : std::stol(rest);
    Mat m(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) {
            double v = 0;
            in.read(reinterpret_cast<char*>(&v), 8);
            m(r, c) = v;
        }
    if (!in) throw std::runtime_error("npy: truncated data in " + path);
    return m;
}

} // namespace evsp::harness
