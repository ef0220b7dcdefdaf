#pragma once

#include "eventspeech/event/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace evsp::event {

inline double luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

inline std::vector<double> to_gray(const Frame& f) {
    std::vector<double> g(static_cast<size_t>(f.height) * f.width);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            g[static_cast<size_t>(y) * f.width + x] = luminance(f.r(y, x), f.g(y, x), f.b(y, x));
    return g;
}

// per-pixel log-luminance threshold crossing with a leaky reference:
// the reference only advances by emitted quanta, so sub-threshold
// drift accumulates across frame intervals
inline EventStream gray_frames_to_events(const std::vector<std::vector<double>>& gray,
                                         int height, int width, double fps,
                                         const Thresholds& th, double log_eps = 1e-3) {
    if (gray.size() < 2) throw std::runtime_error("insufficient frames");
    validate_thresholds(th);
    if (!(fps > 0.0)) throw std::runtime_error("fps must be positive");
    for (const auto& g : gray)
        if (g.size() != static_cast<size_t>(height) * width)
            throw std::runtime_error("non-uniform frame sizes");

    EventStream out;
    out.width = static_cast<std::uint16_t>(width);
    out.height = static_cast<std::uint16_t>(height);

    const double interval_us = 1e6 / fps;
    const size_t npix = static_cast<size_t>(height) * width;
    std::vector<double> ref(npix);
    for (size_t p = 0; p < npix; ++p) ref[p] = std::log(gray[0][p] + log_eps);

    for (size_t k = 0; k + 1 < gray.size(); ++k) {
        const double t0 = double(k) * interval_us;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const size_t p = static_cast<size_t>(y) * width + x;
                const double d = std::log(gray[k + 1][p] + log_eps) - ref[p];
                const double theta = d >= 0.0 ? th.theta_pos : th.theta_neg;
                const auto m = static_cast<std::uint64_t>(std::floor(std::abs(d) / theta));
                if (m == 0) continue;
                const std::int8_t pol = d >= 0.0 ? 1 : -1;
                for (std::uint64_t j = 0; j < m; ++j) {
                    Event e;
                    e.t_us = static_cast<std::uint64_t>(
                        std::llround(t0 + (double(j) + 0.5) / double(m) * interval_us));
                    e.x = static_cast<std::uint16_t>(x);
                    e.y = static_cast<std::uint16_t>(y);
                    e.polarity = pol;
                    out.events.push_back(e);
                }
                ref[p] += double(pol) * double(m) * theta;
            }
    }
    std::sort(out.events.begin(), out.events.end(), event_order);
    return out;
}

inline EventStream frames_to_events(const std::vector<Frame>& video, double fps,
                                    const Thresholds& th, double log_eps = 1e-3) {
    if (video.size() < 2) throw std::runtime_error("insufficient frames");
    const int H = video[0].height, W = video[0].width;
    std::vector<std::vector<double>> gray;
    gray.reserve(video.size());
    for (const auto& f : video) {
        if (f.height != H || f.width != W) throw std::runtime_error("non-uniform frame sizes");
        gray.push_back(to_gray(f));
    }
    return gray_frames_to_events(gray, H, W, fps, th, log_eps);
}

// differentiable relaxation: signed per-pixel event mass d/theta per frame
// interval, without flooring. The reference tracks the previous frame
// exactly, so no residual accrues. Returned as T'-long list of H*W vectors.
inline std::vector<std::vector<double>> soft_event_counts(const std::vector<std::vector<double>>& gray,
                                                          int height, int width,
                                                          const Thresholds& th, double log_eps = 1e-3) {
    if (gray.size() < 2) throw std::runtime_error("insufficient frames");
    validate_thresholds(th);
    const size_t npix = static_cast<size_t>(height) * width;
    std::vector<std::vector<double>> out(gray.size() - 1, std::vector<double>(npix));
    for (size_t k = 0; k + 1 < gray.size(); ++k)
        for (size_t p = 0; p < npix; ++p) {
            const double d = std::log(gray[k + 1][p] + log_eps) - std::log(gray[k][p] + log_eps);
            out[k][p] = d >= 0.0 ? d / th.theta_pos : d / th.theta_neg;
        }
    return out;
}

// uniform timestamp perturbation in [-max_jitter_us, +max_jitter_us],
// clamped to the original span; coordinates and polarities untouched
inline EventStream jitter_events(const EventStream& stream, std::uint64_t max_jitter_us,
                                 std::uint64_t seed) {
    EventStream out = stream;
    if (max_jitter_us == 0 || stream.events.empty()) return out;
    const std::uint64_t lo = stream.events.front().t_us;
    const std::uint64_t hi = stream.events.back().t_us;
    Rng rng(seed);
    const auto m = static_cast<std::int64_t>(max_jitter_us);
    for (auto& e : out.events) {
        std::int64_t t = static_cast<std::int64_t>(e.t_us) + uniform_int(rng, -m, m);
        t = std::max<std::int64_t>(t, static_cast<std::int64_t>(lo));
        t = std::min<std::int64_t>(t, static_cast<std::int64_t>(hi));
        e.t_us = static_cast<std::uint64_t>(t);
    }
    std::sort(out.events.begin(), out.events.end(), event_order);
    return out;
}

} // namespace evsp::event
