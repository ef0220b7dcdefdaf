#pragma once

#include "eventspeech/event/types.hpp"

#include <stdexcept>

namespace evsp::event {

// bins events into (t_prime x n_bins x H x W) signed counts. Each frame
// interval of frame_interval_us is split into n_bins equal sub-bins.
// Boundary timestamps fall into the later bin; the end of the whole span
// falls into the very last bin.
inline VoxelGrid voxelize(const EventStream& stream, int n_bins, int t_prime,
                          std::uint64_t frame_interval_us) {
    if (n_bins < 1) throw std::runtime_error("n_bins must be >= 1");
    if (t_prime < 1) throw std::runtime_error("t_prime must be >= 1");
    if (frame_interval_us == 0) throw std::runtime_error("frame interval must be positive");

    VoxelGrid g;
    g.t_prime = t_prime;
    g.n_bins = n_bins;
    g.height = stream.height;
    g.width = stream.width;
    g.frame_interval_us = frame_interval_us;
    g.data.assign(static_cast<size_t>(t_prime) * n_bins * stream.height * stream.width, 0.0);

    const std::uint64_t span = frame_interval_us * static_cast<std::uint64_t>(t_prime);
    for (const auto& e : stream.events) {
        if (e.t_us > span) throw std::runtime_error("event out of range");
        if (e.x >= stream.width || e.y >= stream.height) throw std::runtime_error("event out of range");
        int k, b;
        if (e.t_us == span) {
            k = t_prime - 1;
            b = n_bins - 1;
        } else {
            k = static_cast<int>(e.t_us / frame_interval_us);
            const std::uint64_t r = e.t_us - static_cast<std::uint64_t>(k) * frame_interval_us;
            b = static_cast<int>(r * static_cast<std::uint64_t>(n_bins) / frame_interval_us);
        }
        g.at(k, b, e.y, e.x) += double(e.polarity);
    }
    return g;
}

} // namespace evsp::event
