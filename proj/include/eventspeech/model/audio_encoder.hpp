#pragma once

#include "eventspeech/audio/features.hpp"
#include "eventspeech/dsp/wavelet.hpp"
#include "eventspeech/nn/layers.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace evsp::model {

using nn::Var;

// uniform scalar quantizer; values exactly on an interior bin edge fall
// into the lower bin, and everything clamps into [0, n_bins-1]
inline Eigen::Index quantize_bin(double v, double lo, double hi, int n_bins) {
    const double w = (hi - lo) / double(n_bins);
    const auto idx = static_cast<Eigen::Index>(std::ceil((v - lo) / w)) - 1;
    return std::min<Eigen::Index>(std::max<Eigen::Index>(idx, 0), n_bins - 1);
}

struct ProsodyConfig {
    int n_mels = 80;
    int dim = 64;       // D of F_p
    int n_bins = 256;
    double f0_lo = 60.0;
    double f0_hi = 400.0;
    double duration_hi = 64.0;
};

// F_p: projected mel plus embedded quantized pitch, energy, and duration
struct ProsodyEmbedder {
    ProsodyConfig cfg;
    nn::Linear mel_proj;
    nn::Embedding f0_emb, energy_emb, duration_emb;

    ProsodyEmbedder() = default;
    ProsodyEmbedder(Rng& rng, const ProsodyConfig& c)
        : cfg(c), mel_proj(rng, c.n_mels, c.dim),
          f0_emb(rng, c.n_bins, c.dim), energy_emb(rng, c.n_bins, c.dim),
          duration_emb(rng, c.n_bins, c.dim) {}

    std::vector<Eigen::Index> f0_bins(const Vec& f0) const {
        std::vector<Eigen::Index> ids(f0.size());
        for (Eigen::Index t = 0; t < f0.size(); ++t)
            ids[t] = f0(t) > 0.0
                ? quantize_bin(std::log(f0(t)), std::log(cfg.f0_lo), std::log(cfg.f0_hi), cfg.n_bins)
                : 0;
        return ids;
    }

    std::vector<Eigen::Index> energy_bins(const Vec& energy) const {
        const double peak = energy.size() ? energy.maxCoeff() : 0.0;
        std::vector<Eigen::Index> ids(energy.size());
        for (Eigen::Index t = 0; t < energy.size(); ++t)
            ids[t] = quantize_bin(peak > 0.0 ? energy(t) / peak : 0.0, 0.0, 1.0, cfg.n_bins);
        return ids;
    }

    std::vector<Eigen::Index> duration_bins(const Vec& duration) const {
        std::vector<Eigen::Index> ids(duration.size());
        for (Eigen::Index t = 0; t < duration.size(); ++t)
            ids[t] = quantize_bin(std::min(duration(t), cfg.duration_hi), 0.0, cfg.duration_hi, cfg.n_bins);
        return ids;
    }

    Var forward(const audio::AcousticFeatures& f) const {
        Var mel = mel_proj.forward(nn::constant(f.mel));
        Var fp = nn::add(mel, f0_emb.lookup(f0_bins(f.f0)));
        fp = nn::add(fp, energy_emb.lookup(energy_bins(f.energy)));
        return nn::add(fp, duration_emb.lookup(duration_bins(f.duration)));
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        mel_proj.params(pm, p + ".mel");
        f0_emb.params(pm, p + ".f0");
        energy_emb.params(pm, p + ".energy");
        duration_emb.params(pm, p + ".duration");
    }
};

// diagonal selective state-space layer with a scalar state per channel:
//   h_t = exp(dt_t * A) h_{t-1} + dt_t * B_t * u_t
//   y_t = C_t * h_t + D * u_t
// dt, B, C are linear in u_t; A = -exp(a) stays negative-real. Residual add.
struct SsmLayer {
    Var a_log;   // 1 x D, A = -exp(a_log)
    Var d_skip;  // 1 x D
    nn::Linear dt_proj, b_proj, c_proj;
    int dim = 0;

    SsmLayer() = default;
    SsmLayer(Rng& rng, int d)
        : a_log(nn::param(Mat::Zero(1, d))), d_skip(nn::param(Mat::Ones(1, d))),
          dt_proj(rng, d, d), b_proj(rng, d, d), c_proj(rng, d, d), dim(d) {}

    Var scan(const Var& x) const {
        using namespace nn;
        const Eigen::Index T = x->val.rows();
        Var A = scale(exp_(a_log), -1.0);
        Var dt = softplus(dt_proj.forward(x)); // T x D
        Var B = b_proj.forward(x);
        Var C = c_proj.forward(x);
        Var h = constant(Mat::Zero(1, dim));
        std::vector<Var> ys(T);
        for (Eigen::Index t = 0; t < T; ++t) {
            Var dt_t = slice_rows(dt, t, 1);
            Var u_t = slice_rows(x, t, 1);
            Var abar = exp_(mul(dt_t, A));
            h = add(mul(abar, h), mul(mul(dt_t, slice_rows(B, t, 1)), u_t));
            ys[t] = mul(slice_rows(C, t, 1), h);
        }
        Var y = ys[0];
        for (Eigen::Index t = 1; t < T; ++t) y = concat_rows(y, ys[t]);
        return add(y, mul_rowvec(x, d_skip));
    }

    Var forward(const Var& x) const { return nn::add(x, scan(x)); }

    void params(nn::ParamMap& pm, const std::string& p) const {
        pm.add(p + ".a_log", a_log);
        pm.add(p + ".d_skip", d_skip);
        dt_proj.params(pm, p + ".dt");
        b_proj.params(pm, p + ".B");
        c_proj.params(pm, p + ".C");
    }
};

// hierarchical wavelet context: analyze along time, mix each band with a
// residual MLP (zero-initialized, so the layer starts as the identity),
// resynthesize, trim, and add back to the input
struct HwcLayer {
    dsp::Wavelet family = dsp::Wavelet::haar;
    int levels = 2;
    std::vector<nn::Mlp> band_mixers; // approx, then coarsest..finest detail

    HwcLayer() = default;
    HwcLayer(Rng& rng, int dim, int levels_ = 2, dsp::Wavelet family_ = dsp::Wavelet::haar)
        : family(family_), levels(levels_) {
        for (int i = 0; i < levels + 1; ++i) {
            nn::Mlp m(rng, dim, dim, dim);
            m.fc2.W = nn::param(Mat::Zero(dim, dim));
            band_mixers.push_back(std::move(m));
        }
    }

    Var forward(const Var& x) const {
        using namespace nn;
        const Eigen::Index T = x->val.rows();
        const Eigen::Index L = dsp::padded_length(T, levels, family);
        Var padded = L == T ? x : pad_rows(x, 0, L - T);
        auto bands = dsp::dwt(padded, levels, family);
        bands.approx = add(bands.approx, band_mixers[0].forward(bands.approx));
        for (int l = 0; l < levels; ++l)
            bands.details[l] = add(bands.details[l], band_mixers[1 + l].forward(bands.details[l]));
        Var recon = dsp::idwt(bands, family);
        if (L != T) recon = slice_rows(recon, 0, T);
        return add(x, recon);
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        for (size_t i = 0; i < band_mixers.size(); ++i)
            band_mixers[i].params(pm, p + ".band" + std::to_string(i));
    }
};

// the gated two-branch combination: alpha*h_tau + (1-alpha)*h_omega + f_tilde
inline Var gate_combine(const Var& h_tau, const Var& h_omega, const Var& f_tilde, const Var& alpha) {
    using namespace nn;
    Var one_minus = add_const(scale(alpha, -1.0), 1.0);
    return add(add(mul_rowvec(h_tau, alpha), mul_rowvec(h_omega, one_minus)), f_tilde);
}

struct FuseConfig {
    int dim = 64;     // D of F_p and F~
    int dim_out = 64; // D_a
    int dim_timbre = 16;
};

// the dual-path fusion producing F_a: a local convolutional branch and a
// global linear branch over F_p, gated per channel, plus wavelet context,
// concatenated with the broadcast timbre vector and projected
struct DualPathFuse {
    FuseConfig cfg;
    nn::Conv1d tau_branch;   // local temporal consistencies
    nn::Linear omega_branch; // position-independent spectral map
    Var gate_logit;          // 1 x D
    nn::Linear w_f;

    DualPathFuse() = default;
    DualPathFuse(Rng& rng, const FuseConfig& c)
        : cfg(c), tau_branch(rng, c.dim, c.dim, 3), omega_branch(rng, c.dim, c.dim),
          gate_logit(nn::param(Mat::Zero(1, c.dim))), w_f(rng, c.dim + c.dim_timbre, c.dim_out) {}

    Var alpha() const { return nn::sigmoid(gate_logit); }

    Var forward(const Var& f_p, const Var& f_tilde, const Var& e_tmb) const {
        using namespace nn;
        Var mix = gate_combine(tau_branch.forward(f_p), omega_branch.forward(f_p), f_tilde, alpha());
        Var tmb = broadcast_rows(e_tmb, mix->val.rows());
        return w_f.forward(concat_cols(mix, tmb));
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        tau_branch.params(pm, p + ".tau");
        omega_branch.params(pm, p + ".omega");
        pm.add(p + ".gate", gate_logit);
        w_f.params(pm, p + ".w_f");
    }
};

// global timbre vector: learned projection of a reference mel, time-averaged
struct TimbreEmbedder {
    nn::Linear proj;

    TimbreEmbedder() = default;
    TimbreEmbedder(Rng& rng, int n_mels, int dim_timbre) : proj(rng, n_mels, dim_timbre) {}

    Var forward(const Mat& reference_mel) const {
        return nn::col_mean(proj.forward(nn::constant(reference_mel)));
    }

    void params(nn::ParamMap& pm, const std::string& p) const { proj.params(pm, p + ".proj"); }
};

struct AudioEncoderConfig {
    ProsodyConfig prosody;
    FuseConfig fuse;
    int ssm_layers = 1;
    int hwc_levels = 2;
    std::string wavelet = "haar";
};

// waveform-side encoder: F_p -> SSM -> HWC -> F~ -> fuse -> F_a
struct AudioEncoder {
    AudioEncoderConfig cfg;
    ProsodyEmbedder prosody;
    std::vector<SsmLayer> ssm;
    HwcLayer hwc;
    DualPathFuse fuse;
    TimbreEmbedder timbre;

    AudioEncoder() = default;
    AudioEncoder(Rng& rng, const AudioEncoderConfig& c)
        : cfg(c), prosody(rng, c.prosody),
          hwc(rng, c.prosody.dim, c.hwc_levels, dsp::wavelet_from_string(c.wavelet)),
          fuse(rng, c.fuse), timbre(rng, c.prosody.n_mels, c.fuse.dim_timbre) {
        for (int i = 0; i < c.ssm_layers; ++i) ssm.emplace_back(rng, c.prosody.dim);
    }

    Var context(const Var& f_p) const {
        Var x = f_p;
        for (const auto& layer : ssm) x = layer.forward(x);
        return hwc.forward(x);
    }

    struct Output {
        Var f_p, f_tilde, f_a, e_tmb;
    };

    Output forward(const audio::AcousticFeatures& feats, const Mat& reference_mel) const {
        Output o;
        o.f_p = prosody.forward(feats);
        o.f_tilde = context(o.f_p);
        o.e_tmb = timbre.forward(reference_mel);
        o.f_a = fuse.forward(o.f_p, o.f_tilde, o.e_tmb);
        return o;
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        prosody.params(pm, p + ".prosody");
        for (size_t i = 0; i < ssm.size(); ++i) ssm[i].params(pm, p + ".ssm" + std::to_string(i));
        hwc.params(pm, p + ".hwc");
        fuse.params(pm, p + ".fuse");
        timbre.params(pm, p + ".timbre");
    }
};

} // namespace evsp::model
