#pragma once

#include "eventspeech/harness/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace evsp::harness {

// compact dark-to-bright color ramp for spectrogram cells
inline std::array<std::uint8_t, 3> heat_color(double v) {
    v = std::clamp(v, 0.0, 1.0);
    static const double anchors[5][3] = {
        {0.05, 0.03, 0.25}, {0.20, 0.20, 0.60}, {0.10, 0.55, 0.55}, {0.65, 0.80, 0.20}, {0.99, 0.95, 0.40}};
    const double pos = v * 4.0;
    const int lo = std::min(3, static_cast<int>(pos));
    const double f = pos - lo;
    std::array<std::uint8_t, 3> out{};
    for (int ch = 0; ch < 3; ++ch)
        out[static_cast<size_t>(ch)] =
            static_cast<std::uint8_t>(255.0 * (anchors[lo][ch] * (1.0 - f) + anchors[lo + 1][ch] * f));
    return out;
}

inline void plot_mel(const Mat& mel, const std::string& out_png, int cell_w = 3, int cell_h = 2) {
    if (mel.size() == 0) throw std::runtime_error("plot: empty spectrogram");
    const double lo = mel.minCoeff();
    const double span = std::max(mel.maxCoeff() - lo, 1e-9);
    const int W = static_cast<int>(mel.rows()) * cell_w;
    const int H = static_cast<int>(mel.cols()) * cell_h;
    std::vector<std::uint8_t> rgb(static_cast<size_t>(W) * H * 3, 18);
    for (Eigen::Index t = 0; t < mel.rows(); ++t)
        for (Eigen::Index b = 0; b < mel.cols(); ++b) {
            const auto c = heat_color((mel(t, b) - lo) / span);
            const int y0 = (static_cast<int>(mel.cols()) - 1 - static_cast<int>(b)) * cell_h;
            const int x0 = static_cast<int>(t) * cell_w;
            for (int dy = 0; dy < cell_h; ++dy)
                for (int dx = 0; dx < cell_w; ++dx) {
                    std::uint8_t* px = &rgb[3 * (static_cast<size_t>(y0 + dy) * W + x0 + dx)];
                    px[0] = c[0];
                    px[1] = c[1];
                    px[2] = c[2];
                }
        }
    write_png(rgb.data(), W, H, out_png);
}

// stacked heatmaps (reference above, generated below) with a shared color
// scale; time runs left to right, low mel bands at the bottom
inline void plot_mel_pair(const Mat& ref, const Mat& gen, const std::string& out_png, int cell_w = 3,
                          int cell_h = 2) {
    if (ref.size() == 0 || gen.size() == 0) throw std::runtime_error("plot: empty spectrogram");
    const double lo = std::min(ref.minCoeff(), gen.minCoeff());
    const double hi = std::max(ref.maxCoeff(), gen.maxCoeff());
    const double span = std::max(hi - lo, 1e-9);

    const int gap = 6;
    const auto cols = static_cast<int>(std::max(ref.rows(), gen.rows()));
    const auto bands = static_cast<int>(std::max(ref.cols(), gen.cols()));
    const int W = cols * cell_w;
    const int H = bands * cell_h * 2 + gap;
    std::vector<std::uint8_t> rgb(static_cast<size_t>(W) * H * 3, 18);

    auto paint = [&](const Mat& m, int y_off) {
        for (Eigen::Index t = 0; t < m.rows(); ++t)
            for (Eigen::Index b = 0; b < m.cols(); ++b) {
                const auto c = heat_color((m(t, b) - lo) / span);
                const int y0 = y_off + (bands - 1 - static_cast<int>(b)) * cell_h;
                const int x0 = static_cast<int>(t) * cell_w;
                for (int dy = 0; dy < cell_h; ++dy)
                    for (int dx = 0; dx < cell_w; ++dx) {
                        std::uint8_t* px = &rgb[3 * (static_cast<size_t>(y0 + dy) * W + x0 + dx)];
                        px[0] = c[0];
                        px[1] = c[1];
                        px[2] = c[2];
                    }
            }
    };
    paint(ref, 0);
    paint(gen, bands * cell_h + gap);
    write_png(rgb.data(), W, H, out_png);
}

} // namespace evsp::harness
