#pragma once

#include "eventspeech/nn/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsp::dsp {

using nn::Var;

enum class Wavelet { haar, db4 };

inline Wavelet wavelet_from_string(const std::string& s) {
    if (s == "haar") return Wavelet::haar;
    if (s == "db4") return Wavelet::db4;
    throw std::runtime_error("unknown wavelet family: " + s);
}

namespace detail {

inline std::vector<Eigen::Index> strided(Eigen::Index count, Eigen::Index start, Eigen::Index step, Eigen::Index mod) {
    std::vector<Eigen::Index> idx(count);
    for (Eigen::Index i = 0; i < count; ++i) idx[i] = (start + step * i) % mod;
    return idx;
}

inline std::vector<Eigen::Index> interleave(Eigen::Index half) {
    std::vector<Eigen::Index> idx(2 * half);
    for (Eigen::Index i = 0; i < half; ++i) {
        idx[2 * i] = i;
        idx[2 * i + 1] = half + i;
    }
    return idx;
}

// orthonormal 4-tap Daubechies lowpass
inline const double db4_h[4] = {
    (1.0 + std::sqrt(3.0)) / (4.0 * std::sqrt(2.0)),
    (3.0 + std::sqrt(3.0)) / (4.0 * std::sqrt(2.0)),
    (3.0 - std::sqrt(3.0)) / (4.0 * std::sqrt(2.0)),
    (1.0 - std::sqrt(3.0)) / (4.0 * std::sqrt(2.0)),
};
// highpass g[k] = (-1)^k h[3-k]
inline const double db4_g[4] = {db4_h[3], -db4_h[2], db4_h[1], -db4_h[0]};

} // namespace detail

struct Bands {
    Var approx;
    std::vector<Var> details; // finest level last
};

// single-level DWT along rows; T must be even. Periodic extension for db4.
inline std::pair<Var, Var> dwt_level(const Var& x, Wavelet w) {
    using namespace nn;
    const Eigen::Index T = x->val.rows();
    if (T % 2 != 0) throw std::runtime_error("wavelet input length must be even");
    const Eigen::Index half = T / 2;
    const double s = 1.0 / std::sqrt(2.0);
    if (w == Wavelet::haar) {
        Var even = gather_rows(x, detail::strided(half, 0, 2, T));
        Var odd = gather_rows(x, detail::strided(half, 1, 2, T));
        return {scale(add(even, odd), s), scale(sub(even, odd), s)};
    }
    Var a, d;
    for (int k = 0; k < 4; ++k) {
        Var g = gather_rows(x, detail::strided(half, k, 2, T));
        Var ha = scale(g, detail::db4_h[k]);
        Var hd = scale(g, detail::db4_g[k]);
        a = k == 0 ? ha : add(a, ha);
        d = k == 0 ? hd : add(d, hd);
    }
    return {a, d};
}

inline Var idwt_level(const Var& a, const Var& d, Wavelet w) {
    using namespace nn;
    const Eigen::Index half = a->val.rows();
    const double s = 1.0 / std::sqrt(2.0);
    if (w == Wavelet::haar) {
        Var even = scale(add(a, d), s);
        Var odd = scale(sub(a, d), s);
        return gather_rows(concat_rows(even, odd), detail::interleave(half));
    }
    // x[2m]   = h0 a[m] + h2 a[m-1] + g0 d[m] + g2 d[m-1]
    // x[2m+1] = h1 a[m] + h3 a[m-1] + g1 d[m] + g3 d[m-1]   (indices mod half)
    auto prev = detail::strided(half, half - 1, 1, half);
    Var a_prev = gather_rows(a, prev);
    Var d_prev = gather_rows(d, prev);
    Var even = add(add(scale(a, detail::db4_h[0]), scale(a_prev, detail::db4_h[2])),
                   add(scale(d, detail::db4_g[0]), scale(d_prev, detail::db4_g[2])));
    Var odd = add(add(scale(a, detail::db4_h[1]), scale(a_prev, detail::db4_h[3])),
                  add(scale(d, detail::db4_g[1]), scale(d_prev, detail::db4_g[3])));
    return gather_rows(concat_rows(even, odd), detail::interleave(half));
}

// multi-level analysis; caller guarantees divisibility by 2^levels
inline Bands dwt(const Var& x, int levels, Wavelet w) {
    Bands b;
    Var cur = x;
    b.details.resize(levels);
    for (int l = 0; l < levels; ++l) {
        auto [a, d] = dwt_level(cur, w);
        b.details[levels - 1 - l] = d;
        cur = a;
    }
    b.approx = cur;
    return b;
}

inline Var idwt(const Bands& b, Wavelet w) {
    Var cur = b.approx;
    for (size_t l = 0; l < b.details.size(); ++l) cur = idwt_level(cur, b.details[l], w);
    return cur;
}

// padded length for a T-row signal: a multiple of 2^levels, with the
// coarsest level kept at >= 4 rows for the db4 support
inline Eigen::Index padded_length(Eigen::Index T, int levels, Wavelet w) {
    const Eigen::Index unit = Eigen::Index(1) << levels;
    Eigen::Index L = ((T + unit - 1) / unit) * unit;
    if (w == Wavelet::db4) L = std::max(L, unit * 4);
    return std::max(L, unit);
}

} // namespace evsp::dsp
