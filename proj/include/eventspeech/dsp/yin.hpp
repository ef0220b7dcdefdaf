#pragma once

#include "eventspeech/common.hpp"

#include <cmath>
#include <vector>

namespace evsp::dsp {

// YIN pitch tracking on one frame: cumulative-mean-normalized difference
// over lags covering [f_lo, f_hi], absolute threshold with parabolic
// refinement. Returns 0 for unvoiced frames.
inline double yin_pitch(const double* x, int n, int sample_rate,
                        double f_lo = 60.0, double f_hi = 400.0, double threshold = 0.15) {
    const int tau_min = std::max(2, int(std::floor(double(sample_rate) / f_hi)));
    const int tau_max = std::min(n / 2, int(std::ceil(double(sample_rate) / f_lo)));
    if (tau_max <= tau_min) return 0.0;
    const int span = n - tau_max; // common integration window for all lags

    std::vector<double> diff(tau_max + 1, 0.0);
    for (int tau = 1; tau <= tau_max; ++tau) {
        double s = 0.0;
        for (int i = 0; i < span; ++i) {
            const double d = x[i] - x[i + tau];
            s += d * d;
        }
        diff[tau] = s;
    }

    std::vector<double> cmnd(tau_max + 1, 1.0);
    double cum = 0.0;
    for (int tau = 1; tau <= tau_max; ++tau) {
        cum += diff[tau];
        cmnd[tau] = cum > 0.0 ? diff[tau] * double(tau) / cum : 1.0;
    }

    int best = -1;
    for (int tau = tau_min; tau <= tau_max; ++tau) {
        if (cmnd[tau] < threshold) {
            while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
            best = tau;
            break;
        }
    }
    if (best < 0) return 0.0;

    double tau_refined = double(best);
    if (best > 1 && best < tau_max) {
        const double a = cmnd[best - 1], b = cmnd[best], c = cmnd[best + 1];
        const double denom = a - 2.0 * b + c;
        if (std::abs(denom) > 1e-12) {
            const double shift = 0.5 * (a - c) / denom;
            if (std::abs(shift) < 1.0) tau_refined += shift;
        }
    }
    const double f0 = double(sample_rate) / tau_refined;
    return (f0 >= f_lo && f0 <= f_hi) ? f0 : 0.0;
}

} // namespace evsp::dsp
