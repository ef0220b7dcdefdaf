#pragma once

#include "eventspeech/event/types.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsp::event {

// .evt container, little-endian:
//   header, 18 bytes: magic "EVTS", version u16 = 1, width u16, height u16, count u64
//   then count records of 16 bytes: t_us u64, x u16, y u16, polarity i8, 3 zero pad bytes
inline constexpr size_t evt_header_size = 18;
inline constexpr size_t evt_record_size = 16;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
}

inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}

} // namespace detail

inline std::vector<std::uint8_t> write_evt(const EventStream& s) {
    std::vector<std::uint8_t> b;
    b.reserve(evt_header_size + s.events.size() * evt_record_size);
    b.push_back('E'); b.push_back('V'); b.push_back('T'); b.push_back('S');
    detail::put_u16(b, 1);
    detail::put_u16(b, s.width);
    detail::put_u16(b, s.height);
    detail::put_u64(b, s.events.size());
    for (const auto& e : s.events) {
        detail::put_u64(b, e.t_us);
        detail::put_u16(b, e.x);
        detail::put_u16(b, e.y);
        b.push_back(static_cast<std::uint8_t>(e.polarity));
        b.push_back(0); b.push_back(0); b.push_back(0);
    }
    return b;
}

inline EventStream read_evt(const std::vector<std::uint8_t>& b) {
    if (b.size() < evt_header_size) throw ParseError("truncated header");
    if (!(b[0] == 'E' && b[1] == 'V' && b[2] == 'T' && b[3] == 'S')) throw ParseError("bad magic");
    const std::uint16_t version = detail::get_u16(&b[4]);
    if (version != 1) throw ParseError("unsupported version " + std::to_string(version));
    EventStream s;
    s.width = detail::get_u16(&b[6]);
    s.height = detail::get_u16(&b[8]);
    const std::uint64_t count = detail::get_u64(&b[10]);
    if (b.size() != evt_header_size + count * evt_record_size) throw ParseError("truncated record");
    s.events.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint8_t* p = &b[evt_header_size + i * evt_record_size];
        Event& e = s.events[i];
        e.t_us = detail::get_u64(p);
        e.x = detail::get_u16(p + 8);
        e.y = detail::get_u16(p + 10);
        const auto pol = static_cast<std::int8_t>(p[12]);
        if (pol != 1 && pol != -1) throw ParseError("bad polarity");
        e.polarity = pol;
        if (e.x >= s.width || e.y >= s.height) throw ParseError("out-of-bounds coordinate");
    }
    return s;
}

inline void save_evt(const std::string& path, const EventStream& s) {
    const auto bytes = write_evt(s);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline EventStream load_evt(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open: " + path);
    const auto size = static_cast<size_t>(f.tellg());
    f.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!f) throw std::runtime_error("read failed: " + path);
    return read_evt(bytes);
}

} // namespace evsp::event
