#pragma once

#include "eventspeech/event/types.hpp"
#include "eventspeech/nn/layers.hpp"

#include <array>
#include <string>
#include <vector>

namespace evsp::model {

using nn::Var;

struct EventEncoderConfig {
    int n_bins = 3;     // voxel channels in
    int base_channels = 8;
    int dim_hidden = 64; // D_h, BiGRU output (both directions concatenated)
    int dim_head = 16;   // D_k
    int dim_visual = 64; // D_v
    int dim_speaker = 8; // D_s
    int dim_emotion = 8; // D_e
    int n_speakers = 2;
    int n_emotions = 7;
    int d_lip = 4;
    int d_au = 4;
    int d_pose = 3;
};

// spatial texture extractor: three stride-2 conv blocks with channel
// doubling, each followed by GELU and layer normalization over the whole
// map (voxel slices are sparse, so per-position statistics degenerate),
// then a spatial mean-pool to one vector per time step
struct SpatialCnn {
    std::array<nn::Conv2d, 3> convs;
    std::array<nn::MapNorm, 3> norms;

    SpatialCnn() = default;
    SpatialCnn(Rng& rng, int in_channels, int base) {
        int cin = in_channels, cout = base;
        for (int i = 0; i < 3; ++i) {
            convs[i] = nn::Conv2d(rng, cin, cout, 3, 2, 1);
            norms[i] = nn::MapNorm(cout);
            cin = cout;
            cout *= 2;
        }
    }

    int out_channels() const { return convs[2].W->val.cols(); }

    // one voxel time step (H*W rows x C cols) -> pooled 1 x C_out
    Var forward(const Var& x, int H, int W) const {
        Var cur = x;
        int h = H, w = W;
        for (int i = 0; i < 3; ++i) {
            int ho = 0, wo = 0;
            cur = norms[i].forward(nn::gelu(convs[i].forward(cur, h, w, ho, wo)));
            h = ho;
            w = wo;
        }
        return nn::col_mean(cur);
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        for (int i = 0; i < 3; ++i) {
            convs[i].params(pm, p + ".conv" + std::to_string(i));
            norms[i].params(pm, p + ".norm" + std::to_string(i));
        }
    }
};

struct DisentangledHeads {
    Var lip, au, pose, rhythm, prosody;
};

// visual-side encoder: spatial CNN + BiGRU into H, five projection heads,
// hybrid supervision and the fused embedding F_v
struct EventEncoder {
    EventEncoderConfig cfg;
    SpatialCnn cnn;
    nn::BiGru temporal;
    nn::Mlp lip_head, au_head, pose_head, rhythm_head, prosody_head;
    nn::GruCell rhythm_cell, prosody_cell;
    nn::Linear lip_readout, au_readout, pose_readout;
    nn::Embedding speaker_table, emotion_table;
    nn::Mlp fuse_mlp;

    EventEncoder() = default;
    EventEncoder(Rng& rng, const EventEncoderConfig& c)
        : cfg(c), cnn(rng, c.n_bins, c.base_channels),
          temporal(rng, c.base_channels * 4, c.dim_hidden / 2),
          lip_head(rng, c.dim_hidden, c.dim_hidden, c.dim_head),
          au_head(rng, c.dim_hidden, c.dim_hidden, c.dim_head),
          pose_head(rng, c.dim_hidden, c.dim_hidden, c.dim_head),
          rhythm_head(rng, c.dim_hidden, c.dim_hidden, c.dim_head),
          prosody_head(rng, c.dim_hidden, c.dim_hidden, c.dim_head),
          rhythm_cell(rng, c.dim_head, c.dim_head),
          prosody_cell(rng, c.dim_head, c.dim_head),
          lip_readout(rng, c.dim_head, c.d_lip),
          au_readout(rng, c.dim_head, c.d_au),
          pose_readout(rng, c.dim_head, c.d_pose),
          speaker_table(rng, c.n_speakers, c.dim_speaker),
          emotion_table(rng, c.n_emotions, c.dim_emotion),
          fuse_mlp(rng, 5 * c.dim_head + c.dim_speaker + c.dim_emotion, c.dim_visual, c.dim_visual) {
        if (c.dim_hidden % 2 != 0) throw std::runtime_error("dim_hidden must be even");
    }

    Var encode(const event::VoxelGrid& grid) const {
        if (grid.t_prime < 1) throw std::runtime_error("voxel grid has no time steps");
        Var seq;
        for (int k = 0; k < grid.t_prime; ++k) {
            Var pooled = cnn.forward(nn::constant(grid.slice(k)), grid.height, grid.width);
            seq = k == 0 ? pooled : nn::concat_rows(seq, pooled);
        }
        return temporal.forward(seq);
    }

    DisentangledHeads heads(const Var& h) const {
        DisentangledHeads d;
        d.lip = lip_head.forward(h);
        d.au = au_head.forward(h);
        d.pose = pose_head.forward(h);
        d.rhythm = nn::gru_scan(rhythm_cell, rhythm_head.forward(h), cfg.dim_head);
        d.prosody = nn::gru_scan(prosody_cell, prosody_head.forward(h), cfg.dim_head);
        return d;
    }

    struct Readouts {
        Var lip, au, pose;
    };

    Readouts readouts(const DisentangledHeads& d) const {
        Readouts r;
        r.lip = lip_readout.forward(d.lip);
        r.au = nn::sigmoid(au_readout.forward(d.au));
        r.pose = pose_readout.forward(d.pose);
        return r;
    }

    Var fuse(const DisentangledHeads& d, Eigen::Index speaker_id, Eigen::Index emotion_id) const {
        using namespace nn;
        Var cat = concat_cols(concat_cols(concat_cols(d.lip, d.au), concat_cols(d.pose, d.rhythm)), d.prosody);
        const Eigen::Index T = cat->val.rows();
        cat = concat_cols(cat, broadcast_rows(speaker_table.lookup(speaker_id), T));
        cat = concat_cols(cat, broadcast_rows(emotion_table.lookup(emotion_id), T));
        return fuse_mlp.forward(cat);
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        cnn.params(pm, p + ".cnn");
        temporal.params(pm, p + ".bigru");
        lip_head.params(pm, p + ".lip");
        au_head.params(pm, p + ".au");
        pose_head.params(pm, p + ".pose");
        rhythm_head.params(pm, p + ".rhythm");
        prosody_head.params(pm, p + ".prosody");
        rhythm_cell.params(pm, p + ".rhythm_cell");
        prosody_cell.params(pm, p + ".prosody_cell");
        lip_readout.params(pm, p + ".lip_out");
        au_readout.params(pm, p + ".au_out");
        pose_readout.params(pm, p + ".pose_out");
        speaker_table.params(pm, p + ".speaker");
        emotion_table.params(pm, p + ".emotion");
        fuse_mlp.params(pm, p + ".fuse");
    }
};

// time-pool each head, L2-normalize, and sum cos^2 over every pair that
// involves rhythm or prosody (7 pairs); zero iff those pairs are orthogonal
inline Var orthogonality_penalty(const DisentangledHeads& d) {
    using namespace nn;
    auto pooled_unit = [](const Var& h) {
        Var m = col_mean(h);
        Var n = sqrt_(add_const(sum_all(square(m)), 1e-12));
        return div_bcast(m, n);
    };
    Var lip = pooled_unit(d.lip), au = pooled_unit(d.au), pose = pooled_unit(d.pose);
    Var rhythm = pooled_unit(d.rhythm), prosody = pooled_unit(d.prosody);
    auto cos2 = [](const Var& a, const Var& b) { return square(sum_all(mul(a, b))); };
    Var total = cos2(rhythm, lip);
    total = add(total, cos2(rhythm, au));
    total = add(total, cos2(rhythm, pose));
    total = add(total, cos2(prosody, lip));
    total = add(total, cos2(prosody, au));
    total = add(total, cos2(prosody, pose));
    total = add(total, cos2(rhythm, prosody));
    return total;
}

struct PseudoLabels {
    Mat lip;  // T' x d_lip
    Mat au;   // T' x d_au, in [0,1]
    Mat pose; // T' x 3
};

// summed per-branch MSE between readouts and pseudo-labels
inline Var pseudo_label_loss(const EventEncoder& enc, const DisentangledHeads& d,
                             const PseudoLabels& labels) {
    using namespace nn;
    const Eigen::Index T = d.lip->val.rows();
    if (labels.lip.rows() != T || labels.au.rows() != T || labels.pose.rows() != T)
        throw std::runtime_error("pseudo-label length mismatch");
    auto r = enc.readouts(d);
    Var loss = mean_all(square(sub(r.lip, constant(labels.lip))));
    loss = add(loss, mean_all(square(sub(r.au, constant(labels.au)))));
    return add(loss, mean_all(square(sub(r.pose, constant(labels.pose)))));
}

} // namespace evsp::model
