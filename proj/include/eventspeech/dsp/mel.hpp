#pragma once

#include "eventspeech/common.hpp"

#include <cmath>
#include <stdexcept>

namespace evsp::dsp {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// triangular filterbank, (n_mels x n_bins), peaks normalized to 1
inline Mat mel_filterbank(int sample_rate, int n_fft, int n_mels, double fmin = 0.0, double fmax = -1.0) {
    if (fmax <= 0.0) fmax = sample_rate / 2.0;
    const int bins = n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(fmin), mel_hi = hz_to_mel(fmax);
    Vec peaks(n_mels + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        peaks(i) = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
    Mat fb = Mat::Zero(n_mels, bins);
    for (int m = 0; m < n_mels; ++m) {
        const double lo = peaks(m), mid = peaks(m + 1), hi = peaks(m + 2);
        for (int b = 0; b < bins; ++b) {
            const double f = double(b) * sample_rate / n_fft;
            if (f <= lo || f >= hi) continue;
            fb(m, b) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
        }
    }
    return fb;
}

// log-mel from a magnitude spectrogram (T x bins) -> (T x n_mels)
inline Mat log_mel(const Mat& mag, const Mat& fb, double floor_value = 1e-5) {
    if (mag.cols() != fb.cols()) throw std::runtime_error("filterbank does not match spectrogram bins");
    Mat mel = mag * fb.transpose();
    return mel.array().max(floor_value).log().matrix();
}

} // namespace evsp::dsp
