#pragma once

#include "eventspeech/nn/autograd.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace evsp::nn {

inline Mat glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    const double lim = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform_real(rng, -lim, lim);
    return m;
}

inline Mat gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng, 0.0, stddev);
    return m;
}

struct Linear {
    Var W, b;

    Linear() = default;
    Linear(Rng& rng, Eigen::Index in, Eigen::Index out)
        : W(param(glorot(rng, in, out))), b(param(Mat::Zero(1, out))) {}

    Var forward(const Var& x) const { return add_rowvec(mm(x, W), b); }

    void params(ParamMap& pm, const std::string& p) const {
        pm.add(p + ".W", W);
        pm.add(p + ".b", b);
    }
};

struct LayerNorm {
    Var gamma, beta;

    LayerNorm() = default;
    explicit LayerNorm(Eigen::Index dim)
        : gamma(param(Mat::Ones(1, dim))), beta(param(Mat::Zero(1, dim))) {}

    Var forward(const Var& x) const {
        return add_rowvec(mul_rowvec(layer_norm_rows(x), gamma), beta);
    }

    void params(ParamMap& pm, const std::string& p) const {
        pm.add(p + ".gamma", gamma);
        pm.add(p + ".beta", beta);
    }
};

// feature-map normalization: statistics pooled over positions and channels
// jointly, affine per channel; suited to sparse maps where most positions
// carry an identical (bias-only) activation
struct MapNorm {
    Var gamma, beta;

    MapNorm() = default;
    explicit MapNorm(Eigen::Index dim)
        : gamma(param(Mat::Ones(1, dim))), beta(param(Mat::Zero(1, dim))) {}

    Var forward(const Var& x) const {
        return add_rowvec(mul_rowvec(layer_norm_all(x), gamma), beta);
    }

    void params(ParamMap& pm, const std::string& p) const {
        pm.add(p + ".gamma", gamma);
        pm.add(p + ".beta", beta);
    }
};

struct Mlp {
    Linear fc1, fc2;

    Mlp() = default;
    Mlp(Rng& rng, Eigen::Index in, Eigen::Index hidden, Eigen::Index out)
        : fc1(rng, in, hidden), fc2(rng, hidden, out) {}

    Var forward(const Var& x) const { return fc2.forward(gelu(fc1.forward(x))); }

    void params(ParamMap& pm, const std::string& p) const {
        fc1.params(pm, p + ".fc1");
        fc2.params(pm, p + ".fc2");
    }
};

// 1-D convolution along the time axis (rows), same padding, odd kernel
struct Conv1d {
    std::vector<Var> taps; // kernel taps, each Cin x Cout
    Var b;
    int k = 3;

    Conv1d() = default;
    Conv1d(Rng& rng, Eigen::Index in, Eigen::Index out, int kernel = 3) : k(kernel) {
        for (int i = 0; i < k; ++i) taps.push_back(param(glorot(rng, in, out) / std::sqrt(double(k))));
        b = param(Mat::Zero(1, out));
    }

    Var forward(const Var& x) const {
        const Eigen::Index T = x->val.rows();
        const int half = k / 2;
        Var p = pad_rows(x, half, half);
        Var y = mm(slice_rows(p, 0, T), taps[0]);
        for (int i = 1; i < k; ++i) y = add(y, mm(slice_rows(p, i, T), taps[i]));
        return add_rowvec(y, b);
    }

    void params(ParamMap& pm, const std::string& p) const {
        for (size_t i = 0; i < taps.size(); ++i) pm.add(p + ".w" + std::to_string(i), taps[i]);
        pm.add(p + ".b", b);
    }
};

// 2-D convolution over feature maps stored as (H*W) rows x C cols
struct Conv2d {
    Var W; // (kh*kw*Cin) x Cout
    Var b;
    int kh = 3, kw = 3, stride = 1, pad = 1;

    Conv2d() = default;
    Conv2d(Rng& rng, Eigen::Index cin, Eigen::Index cout, int kernel, int stride_, int pad_)
        : kh(kernel), kw(kernel), stride(stride_), pad(pad_) {
        W = param(glorot(rng, kh * kw * cin, cout));
        b = param(Mat::Zero(1, cout));
    }

    Var forward(const Var& x, int H, int Wd, int& Ho, int& Wo) const {
        Ho = (H + 2 * pad - kh) / stride + 1;
        Wo = (Wd + 2 * pad - kw) / stride + 1;
        return add_rowvec(mm(im2col(x, H, Wd, kh, kw, stride, pad), W), b);
    }

    void params(ParamMap& pm, const std::string& p) const {
        pm.add(p + ".W", W);
        pm.add(p + ".b", b);
    }
};

struct GruCell {
    Var Wxr, Whr, br, Wxz, Whz, bz, Wxn, Whn, bn;

    GruCell() = default;
    GruCell(Rng& rng, Eigen::Index in, Eigen::Index hidden)
        : Wxr(param(glorot(rng, in, hidden))), Whr(param(glorot(rng, hidden, hidden))), br(param(Mat::Zero(1, hidden))),
          Wxz(param(glorot(rng, in, hidden))), Whz(param(glorot(rng, hidden, hidden))), bz(param(Mat::Zero(1, hidden))),
          Wxn(param(glorot(rng, in, hidden))), Whn(param(glorot(rng, hidden, hidden))), bn(param(Mat::Zero(1, hidden))) {}

    Var step(const Var& x, const Var& h) const {
        Var r = sigmoid(add_rowvec(add(mm(x, Wxr), mm(h, Whr)), br));
        Var z = sigmoid(add_rowvec(add(mm(x, Wxz), mm(h, Whz)), bz));
        Var n = tanh_(add_rowvec(add(mm(x, Wxn), mul(r, mm(h, Whn))), bn));
        // h' = (1-z)*n + z*h
        return add(mul(sub(constant(Mat::Ones(1, n->val.cols())), z), n), mul(z, h));
    }

    void params(ParamMap& pm, const std::string& p) const {
        pm.add(p + ".Wxr", Wxr); pm.add(p + ".Whr", Whr); pm.add(p + ".br", br);
        pm.add(p + ".Wxz", Wxz); pm.add(p + ".Whz", Whz); pm.add(p + ".bz", bz);
        pm.add(p + ".Wxn", Wxn); pm.add(p + ".Whn", Whn); pm.add(p + ".bn", bn);
    }
};

// runs a GRU over (T x Din), returns (T x Dh); reverse=true scans backwards
inline Var gru_scan(const GruCell& cell, const Var& x, Eigen::Index hidden, bool reverse = false) {
    const Eigen::Index T = x->val.rows();
    Var h = constant(Mat::Zero(1, hidden));
    std::vector<Var> outs(T);
    for (Eigen::Index i = 0; i < T; ++i) {
        const Eigen::Index t = reverse ? T - 1 - i : i;
        h = cell.step(slice_rows(x, t, 1), h);
        outs[t] = h;
    }
    Var y = outs[0];
    for (Eigen::Index t = 1; t < T; ++t) y = concat_rows(y, outs[t]);
    return y;
}

struct BiGru {
    GruCell fwd, bwd;
    Eigen::Index hidden = 0;

    BiGru() = default;
    BiGru(Rng& rng, Eigen::Index in, Eigen::Index hidden_)
        : fwd(rng, in, hidden_), bwd(rng, in, hidden_), hidden(hidden_) {}

    Var forward(const Var& x) const {
        return concat_cols(gru_scan(fwd, x, hidden, false), gru_scan(bwd, x, hidden, true));
    }

    void params(ParamMap& pm, const std::string& p) const {
        fwd.params(pm, p + ".fwd");
        bwd.params(pm, p + ".bwd");
    }
};

// multi-head attention; query (Tq x Dq), key/value (Tk x Dk).
// attn_out, when given, receives the per-head row-stochastic weights.
struct MultiHeadAttention {
    Linear q_proj, k_proj, v_proj, o_proj;
    int heads = 4;
    Eigen::Index dim = 0;

    MultiHeadAttention() = default;
    MultiHeadAttention(Rng& rng, Eigen::Index dq, Eigen::Index dk, Eigen::Index d, int heads_)
        : q_proj(rng, dq, d), k_proj(rng, dk, d), v_proj(rng, dk, d), o_proj(rng, d, d),
          heads(heads_), dim(d) {
        if (d % heads != 0) throw std::runtime_error("attention dim must divide heads");
    }

    Var forward(const Var& query, const Var& keyval, std::vector<Mat>* attn_out = nullptr) const {
        Var q = q_proj.forward(query);
        Var k = k_proj.forward(keyval);
        Var v = v_proj.forward(keyval);
        const Eigen::Index dh = dim / heads;
        Var out;
        for (int h = 0; h < heads; ++h) {
            Var qh = slice_cols(q, h * dh, dh);
            Var kh = slice_cols(k, h * dh, dh);
            Var vh = slice_cols(v, h * dh, dh);
            Var attn = softmax_rows(scale(mm_nt(qh, kh), 1.0 / std::sqrt(double(dh))));
            if (attn_out) attn_out->push_back(attn->val);
            Var oh = mm(attn, vh);
            out = (h == 0) ? oh : concat_cols(out, oh);
        }
        return o_proj.forward(out);
    }

    void params(ParamMap& pm, const std::string& p) const {
        q_proj.params(pm, p + ".q");
        k_proj.params(pm, p + ".k");
        v_proj.params(pm, p + ".v");
        o_proj.params(pm, p + ".o");
    }
};

struct Embedding {
    Var table; // V x D

    Embedding() = default;
    Embedding(Rng& rng, Eigen::Index vocab, Eigen::Index dim)
        : table(param(gaussian(rng, vocab, dim, 0.02))) {}

    Var lookup(const std::vector<Eigen::Index>& ids) const { return gather_rows(table, ids); }
    Var lookup(Eigen::Index id) const { return gather_rows(table, {id}); }

    void params(ParamMap& pm, const std::string& p) const { pm.add(p + ".table", table); }
};

// sinusoidal embedding of a scalar in [0,1]; non-trainable
inline Mat sinusoidal_embedding(double t, Eigen::Index dim) {
    Mat e(1, dim);
    for (Eigen::Index i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * double(i) / double(dim));
        e(0, 2 * i) = std::sin(1000.0 * t * freq);
        e(0, 2 * i + 1) = std::cos(1000.0 * t * freq);
    }
    return e;
}

// fixed position encoding for (T x dim)
inline Mat positional_encoding(Eigen::Index T, Eigen::Index dim) {
    Mat e(T, dim);
    for (Eigen::Index p = 0; p < T; ++p)
        for (Eigen::Index i = 0; i < dim / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * double(i) / double(dim));
            e(p, 2 * i) = std::sin(double(p) * freq);
            e(p, 2 * i + 1) = std::cos(double(p) * freq);
        }
    return e;
}

} // namespace evsp::nn
