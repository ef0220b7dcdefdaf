#pragma once

#include "eventspeech/audio/features.hpp"

#include <complex>
#include <vector>

namespace evsp::audio {

// least-squares inversion of the mel projection, clamped non-negative
inline Mat mel_to_linear(const Mat& log_mel_frames, const AudioConfig& cfg) {
    const Mat fb = dsp::mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels);
    const Mat mel = log_mel_frames.array().exp().matrix(); // back to magnitude domain
    // least-norm solution of fb * s = mel per frame, with Tikhonov damping
    Mat gram = fb * fb.transpose();
    gram.diagonal().array() += 1e-8;
    Mat mag = mel * gram.ldlt().solve(fb);
    return mag.array().max(0.0).matrix();
}

// classic iterative phase recovery from a log-mel spectrogram
inline std::vector<double> griffin_lim(const Mat& log_mel_frames, const AudioConfig& cfg,
                                       int iterations = 32, std::uint64_t seed = 0) {
    const Mat mag = mel_to_linear(log_mel_frames, cfg);
    const Eigen::Index T = mag.rows(), bins = mag.cols();
    dsp::CMat spec(T, bins);
    Rng rng(seed);
    for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index b = 0; b < bins; ++b) {
            const double phi = uniform_real(rng, 0.0, 2.0 * M_PI);
            spec(t, b) = std::polar(mag(t, b), phi);
        }
    std::vector<double> wav;
    for (int it = 0; it < iterations; ++it) {
        wav = dsp::istft(spec, cfg.n_fft, cfg.hop);
        dsp::CMat re = dsp::stft(wav, cfg.n_fft, cfg.hop);
        for (Eigen::Index t = 0; t < T; ++t)
            for (Eigen::Index b = 0; b < bins; ++b) {
                const double m = std::abs(re(t, b));
                spec(t, b) = m > 1e-12 ? re(t, b) / m * mag(t, b) : std::complex<double>(mag(t, b), 0.0);
            }
    }
    wav = dsp::istft(spec, cfg.n_fft, cfg.hop);
    double peak = 1e-9;
    for (double s : wav) peak = std::max(peak, std::abs(s));
    if (peak > 0.99) for (double& s : wav) s *= 0.99 / peak;
    return wav;
}

} // namespace evsp::audio
