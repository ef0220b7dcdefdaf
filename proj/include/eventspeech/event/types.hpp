#pragma once

#include "eventspeech/common.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace evsp::event {

// one frame of video, 8-bit RGB interleaved, row-major
struct Frame {
    int height = 0, width = 0;
    std::vector<std::uint8_t> rgb; // height*width*3

    std::uint8_t r(int y, int x) const { return rgb[3 * (static_cast<size_t>(y) * width + x) + 0]; }
    std::uint8_t g(int y, int x) const { return rgb[3 * (static_cast<size_t>(y) * width + x) + 1]; }
    std::uint8_t b(int y, int x) const { return rgb[3 * (static_cast<size_t>(y) * width + x) + 2]; }
};

struct Event {
    std::uint64_t t_us = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t polarity = 1; // +1 or -1

    friend bool operator==(const Event& a, const Event& b) {
        return a.t_us == b.t_us && a.x == b.x && a.y == b.y && a.polarity == b.polarity;
    }
};

struct EventStream {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<Event> events; // sorted by (t, y, x, polarity)

    friend bool operator==(const EventStream& a, const EventStream& b) {
        return a.width == b.width && a.height == b.height && a.events == b.events;
    }
};

struct Thresholds {
    double theta_pos = 0.2;
    double theta_neg = 0.2;
};

inline void validate_thresholds(const Thresholds& th) {
    if (!(th.theta_pos > 0.0) || !(th.theta_neg > 0.0) ||
        !std::isfinite(th.theta_pos) || !std::isfinite(th.theta_neg))
        throw std::runtime_error("thresholds must be finite and positive");
}

// (T' x N x H x W) signed event counts
struct VoxelGrid {
    int t_prime = 0, n_bins = 0, height = 0, width = 0;
    std::uint64_t frame_interval_us = 0;
    std::vector<double> data;

    double& at(int k, int b, int y, int x) {
        return data[((static_cast<size_t>(k) * n_bins + b) * height + y) * width + x];
    }
    double at(int k, int b, int y, int x) const {
        return data[((static_cast<size_t>(k) * n_bins + b) * height + y) * width + x];
    }

    // one time step as (H*W) rows x N channel cols, for the spatial encoder
    Mat slice(int k) const {
        Mat m(static_cast<Eigen::Index>(height) * width, n_bins);
        for (int b = 0; b < n_bins; ++b)
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    m(static_cast<Eigen::Index>(y) * width + x, b) = at(k, b, y, x);
        return m;
    }
};

inline bool event_order(const Event& a, const Event& b) {
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.polarity < b.polarity;
}

} // namespace evsp::event
