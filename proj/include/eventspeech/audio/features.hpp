#pragma once

#include "eventspeech/dsp/mel.hpp"
#include "eventspeech/dsp/stft.hpp"
#include "eventspeech/dsp/yin.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace evsp::audio {

struct AudioConfig {
    int sample_rate = 22050;
    int n_fft = 1024;
    int hop = 256;
    int n_mels = 80;
    double mel_floor = 1e-5;
    double f0_lo = 60.0;
    double f0_hi = 400.0;
    double yin_threshold = 0.15;
};

// frame-level acoustic analysis: log-mel, f0, frame RMS, voiced-run length
struct AcousticFeatures {
    Mat mel;              // T_a x n_mels, natural log
    Vec f0;               // Hz, 0 where unvoiced
    Vec energy;           // per-frame RMS
    Vec duration;         // frames in the voiced run containing t, 0 if unvoiced

    Eigen::Index frames() const { return mel.rows(); }
};

inline AcousticFeatures analyze_audio(const std::vector<double>& wav, const AudioConfig& cfg = {}) {
    if (wav.empty()) throw std::runtime_error("empty waveform");
    const Eigen::Index T = dsp::num_frames(wav.size(), cfg.n_fft, cfg.hop);

    AcousticFeatures f;
    f.mel = dsp::log_mel(dsp::stft_magnitude(wav, cfg.n_fft, cfg.hop),
                         dsp::mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels), cfg.mel_floor);

    f.f0 = Vec::Zero(T);
    f.energy = Vec::Zero(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const double* frame = wav.data() + t * cfg.hop;
        double sq = 0.0;
        for (int i = 0; i < cfg.n_fft; ++i) sq += frame[i] * frame[i];
        f.energy(t) = std::sqrt(sq / cfg.n_fft);
        f.f0(t) = dsp::yin_pitch(frame, cfg.n_fft, cfg.sample_rate, cfg.f0_lo, cfg.f0_hi, cfg.yin_threshold);
    }

    f.duration = Vec::Zero(T);
    Eigen::Index t = 0;
    while (t < T) {
        if (f.f0(t) > 0.0) {
            Eigen::Index end = t;
            while (end < T && f.f0(end) > 0.0) ++end;
            for (Eigen::Index i = t; i < end; ++i) f.duration(i) = double(end - t);
            t = end;
        } else {
            ++t;
        }
    }
    return f;
}

} // namespace evsp::audio
