#pragma once

#include "eventspeech/nn/layers.hpp"

#include <stdexcept>
#include <vector>

namespace evsp::model {

using nn::Var;

// Row i of the resampling matrix holds the linear-interpolation weights that
// map t_src rows onto t_dst rows with both endpoints fixed.
inline Mat resample_matrix(Eigen::Index t_src, Eigen::Index t_dst) {
    if (t_src < 1 || t_dst < 1) throw std::invalid_argument("resample_matrix: lengths must be >= 1");
    Mat w = Mat::Zero(t_dst, t_src);
    if (t_src == 1) {
        w.col(0).setOnes();
        return w;
    }
    if (t_dst == 1) {
        w(0, 0) = 1.0;
        return w;
    }
    for (Eigen::Index i = 0; i < t_dst; ++i) {
        const double pos = double(i * (t_src - 1)) / double(t_dst - 1);
        const auto lo = static_cast<Eigen::Index>(pos);
        if (lo >= t_src - 1) {
            w(i, t_src - 1) = 1.0;
            continue;
        }
        const double frac = pos - double(lo);
        w(i, lo) = 1.0 - frac;
        w(i, lo + 1) = frac;
    }
    return w;
}

inline Var temporal_resample(const Var& f_v, Eigen::Index t_a) {
    return nn::mm(nn::constant(resample_matrix(f_v->val.rows(), t_a)), f_v);
}

inline Mat temporal_resample(const Mat& f_v, Eigen::Index t_a) {
    return resample_matrix(f_v.rows(), t_a) * f_v;
}

struct CrossAttentionConfig {
    Eigen::Index dim_visual = 64;
    Eigen::Index dim_acoustic = 64;
    Eigen::Index dim_fused = 64;
    int heads = 4;
};

// Two attention passes over length-matched streams: acoustic frames querying
// visual keys and the reverse; the per-frame concatenation is fused by an MLP.
struct BidirectionalCrossAttention {
    nn::MultiHeadAttention a_over_v, v_over_a;
    nn::Mlp fuse;

    BidirectionalCrossAttention() = default;
    BidirectionalCrossAttention(Rng& rng, const CrossAttentionConfig& cfg)
        : a_over_v(rng, cfg.dim_acoustic, cfg.dim_visual, cfg.dim_fused, cfg.heads),
          v_over_a(rng, cfg.dim_visual, cfg.dim_acoustic, cfg.dim_fused, cfg.heads),
          fuse(rng, 2 * cfg.dim_fused, cfg.dim_fused, cfg.dim_fused) {}

    Var forward(const Var& f_v_aligned, const Var& f_a,
                std::vector<Mat>* attn_av = nullptr, std::vector<Mat>* attn_va = nullptr) const {
        if (f_v_aligned->val.rows() != f_a->val.rows())
            throw std::invalid_argument("cross attention: sequence lengths differ");
        Var ha = a_over_v.forward(f_a, f_v_aligned, attn_av);
        Var hv = v_over_a.forward(f_v_aligned, f_a, attn_va);
        return fuse.forward(nn::concat_cols(ha, hv));
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        a_over_v.params(pm, p + ".a_over_v");
        v_over_a.params(pm, p + ".v_over_a");
        fuse.params(pm, p + ".fuse");
    }
};

// Contrastive loss over a batch of pooled embeddings, one direction:
// rows of z_q are anchors, the matching row of z_k is the positive and the
// remaining rows are in-batch negatives.
inline Var info_nce_direction(const Var& z_q, const Var& z_k, double tau) {
    const Eigen::Index n = z_q->val.rows();
    Var p = nn::softmax_rows(nn::scale(nn::mm_nt(z_q, z_k), 1.0 / tau));
    Var diag = nn::mm(nn::mul(p, nn::constant(Mat::Identity(n, n))), nn::constant(Mat::Ones(n, 1)));
    return nn::scale(nn::sum_all(nn::log_(diag)), -1.0 / double(n));
}

inline Var info_nce(const Var& z_v, const Var& z_a, double tau = 0.07, bool symmetric = true) {
    if (tau <= 0.0) throw std::invalid_argument("info_nce: temperature must be positive");
    if (z_v->val.rows() != z_a->val.rows() || z_v->val.cols() != z_a->val.cols())
        throw std::invalid_argument("info_nce: batch shapes differ");
    Var va = info_nce_direction(z_v, z_a, tau);
    if (!symmetric) return va;
    return nn::scale(nn::add(va, info_nce_direction(z_a, z_v, tau)), 0.5);
}

struct LatentProjection {
    Var z;                    // 1 x dim_latent, unit norm
    bool degenerate = false;  // projection collapsed; z is a fixed basis vector
};

// Time-mean pool, project through a two-layer MLP, L2-normalize.
struct ProjectionHead {
    nn::Mlp psi;

    ProjectionHead() = default;
    ProjectionHead(Rng& rng, Eigen::Index in, Eigen::Index hidden, Eigen::Index out)
        : psi(rng, in, hidden, out) {}

    LatentProjection forward(const Var& features) const {
        if (features->val.rows() < 1) throw std::invalid_argument("project_pool: empty input");
        Var h = psi.forward(nn::col_mean(features));
        if (h->val.norm() < 1e-12) {
            Mat e = Mat::Zero(1, h->val.cols());
            e(0, 0) = 1.0;
            return {nn::constant(std::move(e)), true};
        }
        Var norm = nn::sqrt_(nn::sum_all(nn::square(h)));
        return {nn::div_bcast(h, norm), false};
    }

    void params(nn::ParamMap& pm, const std::string& p) const { psi.params(pm, p + ".psi"); }
};

struct AlignmentConfig {
    Eigen::Index dim_visual = 64;
    Eigen::Index dim_acoustic = 64;
    Eigen::Index dim_fused = 64;
    Eigen::Index dim_latent = 64;
    int heads = 4;
    double tau = 0.07;
    bool symmetric_loss = true;
};

struct AlignmentModule {
    BidirectionalCrossAttention cross;
    ProjectionHead psi_visual, psi_acoustic;
    AlignmentConfig cfg;

    AlignmentModule() = default;
    AlignmentModule(Rng& rng, const AlignmentConfig& c)
        : cross(rng, CrossAttentionConfig{c.dim_visual, c.dim_acoustic, c.dim_fused, c.heads}),
          psi_visual(rng, c.dim_visual, c.dim_fused, c.dim_latent),
          psi_acoustic(rng, c.dim_acoustic, c.dim_fused, c.dim_latent),
          cfg(c) {}

    // F_align: resample the visual stream to the acoustic length, then fuse.
    Var fuse(const Var& f_v, const Var& f_a) const {
        return cross.forward(temporal_resample(f_v, f_a->val.rows()), f_a);
    }

    // Batch contrastive loss from per-sample feature sequences.
    Var contrastive_loss(const std::vector<Var>& f_v_batch, const std::vector<Var>& f_a_batch) const {
        if (f_v_batch.size() != f_a_batch.size() || f_v_batch.empty())
            throw std::invalid_argument("contrastive_loss: batch sizes differ or empty");
        Var zv = psi_visual.forward(f_v_batch[0]).z;
        Var za = psi_acoustic.forward(f_a_batch[0]).z;
        for (size_t i = 1; i < f_v_batch.size(); ++i) {
            zv = nn::concat_rows(zv, psi_visual.forward(f_v_batch[i]).z);
            za = nn::concat_rows(za, psi_acoustic.forward(f_a_batch[i]).z);
        }
        return info_nce(zv, za, cfg.tau, cfg.symmetric_loss);
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        cross.params(pm, p + ".cross");
        psi_visual.params(pm, p + ".psi_v");
        psi_acoustic.params(pm, p + ".psi_a");
    }
};

} // namespace evsp::model
