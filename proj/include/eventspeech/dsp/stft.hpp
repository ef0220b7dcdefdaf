#pragma once

#include "eventspeech/common.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <stdexcept>
#include <vector>

namespace evsp::dsp {

using CMat = Eigen::MatrixXcd;

inline Vec hann_window(int n) {
    Vec w(n);
    for (int i = 0; i < n; ++i) w(i) = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
    return w;
}

inline Eigen::Index num_frames(size_t len, int n_fft, int hop) {
    if (len < static_cast<size_t>(n_fft)) throw std::runtime_error("waveform shorter than one analysis window");
    return 1 + static_cast<Eigen::Index>((len - n_fft) / hop);
}

// complex STFT without centering: frame t covers samples [t*hop, t*hop + n_fft)
inline CMat stft(const std::vector<double>& x, int n_fft, int hop) {
    const Eigen::Index T = num_frames(x.size(), n_fft, hop);
    const Eigen::Index bins = n_fft / 2 + 1;
    const Vec w = hann_window(n_fft);
    Eigen::FFT<double> fft;
    CMat out(T, bins);
    std::vector<double> frame(n_fft);
    std::vector<std::complex<double>> spec(n_fft);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (int i = 0; i < n_fft; ++i) frame[i] = x[t * hop + i] * w(i);
        fft.fwd(spec, frame);
        for (Eigen::Index b = 0; b < bins; ++b) out(t, b) = spec[b];
    }
    return out;
}

inline Mat stft_magnitude(const std::vector<double>& x, int n_fft, int hop) {
    return stft(x, n_fft, hop).cwiseAbs();
}

// weighted overlap-add inverse; output length reconstructs T frames
inline std::vector<double> istft(const CMat& spec, int n_fft, int hop) {
    const Eigen::Index T = spec.rows();
    const Eigen::Index bins = n_fft / 2 + 1;
    if (spec.cols() != bins) throw std::runtime_error("spectrogram bin count does not match n_fft");
    const Vec w = hann_window(n_fft);
    const size_t len = static_cast<size_t>((T - 1) * hop + n_fft);
    std::vector<double> acc(len, 0.0), norm(len, 0.0);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> full(n_fft);
    std::vector<double> frame(n_fft);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index b = 0; b < bins; ++b) full[b] = spec(t, b);
        for (Eigen::Index b = bins; b < n_fft; ++b) full[b] = std::conj(spec(t, n_fft - b));
        fft.inv(frame, full);
        for (int i = 0; i < n_fft; ++i) {
            acc[t * hop + i] += frame[i] * w(i);
            norm[t * hop + i] += w(i) * w(i);
        }
    }
    for (size_t i = 0; i < len; ++i) acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
    return acc;
}

} // namespace evsp::dsp
