#pragma once

#include "eventspeech/model/alignment.hpp"
#include "eventspeech/nn/layers.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evsp::model {

// ---- text tokens ----

inline const std::string& text_vocab() {
    static const std::string v = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ '";
    return v;
}

inline Eigen::Index text_vocab_size() { return static_cast<Eigen::Index>(text_vocab().size()); }

inline std::vector<Eigen::Index> tokenize(const std::string& text) {
    std::vector<Eigen::Index> ids;
    ids.reserve(text.size());
    for (char ch : text) {
        const auto pos = text_vocab().find(ch);
        if (pos == std::string::npos)
            throw std::invalid_argument(std::string("tokenize: character '") + ch + "' not in vocabulary");
        ids.push_back(static_cast<Eigen::Index>(pos));
    }
    return ids;
}

struct TextEncoderConfig {
    Eigen::Index dim = 64;
    int blocks = 2;
    int heads = 4;
};

struct TextEncoder {
    nn::Embedding emb;
    struct Block {
        nn::MultiHeadAttention attn;
        nn::LayerNorm ln1;
        nn::Mlp mlp;
        nn::LayerNorm ln2;
    };
    std::vector<Block> blocks;
    TextEncoderConfig cfg;

    TextEncoder() = default;
    TextEncoder(Rng& rng, const TextEncoderConfig& c) : emb(rng, text_vocab_size(), c.dim), cfg(c) {
        for (int i = 0; i < c.blocks; ++i)
            blocks.push_back({nn::MultiHeadAttention(rng, c.dim, c.dim, c.dim, c.heads),
                              nn::LayerNorm(c.dim), nn::Mlp(rng, c.dim, c.dim, c.dim),
                              nn::LayerNorm(c.dim)});
    }

    Var forward(const std::vector<Eigen::Index>& tokens) const {
        if (tokens.empty()) throw std::invalid_argument("text_encode: empty token sequence");
        for (Eigen::Index id : tokens)
            if (id < 0 || id >= text_vocab_size())
                throw std::invalid_argument("text_encode: token id " + std::to_string(id) + " out of vocabulary");
        Var h = nn::add(emb.lookup(tokens),
                        nn::constant(nn::positional_encoding(static_cast<Eigen::Index>(tokens.size()), cfg.dim)));
        for (const auto& b : blocks) {
            h = b.ln1.forward(nn::add(h, b.attn.forward(h, h)));
            h = b.ln2.forward(nn::add(h, b.mlp.forward(h)));
        }
        return h;
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        emb.params(pm, p + ".emb");
        for (size_t i = 0; i < blocks.size(); ++i) {
            const std::string bp = p + ".block" + std::to_string(i);
            blocks[i].attn.params(pm, bp + ".attn");
            blocks[i].ln1.params(pm, bp + ".ln1");
            blocks[i].mlp.params(pm, bp + ".mlp");
            blocks[i].ln2.params(pm, bp + ".ln2");
        }
    }
};

// ---- condition bundle and latent distributions ----

struct ConditionBundle {
    Var f_t;      // L x dim_text
    Var emo;      // 1 x dim_emotion
    Var e_sty;    // 1 x dim_style
    Var f_align;  // T_a x dim_align when event-conditioned, null otherwise

    bool has_align() const { return static_cast<bool>(f_align); }
};

struct LatentDistribution {
    Var mu;         // T_a x dim_latent
    Var log_sigma;  // same shape, clamped to [-9, 2]
};

constexpr double kLogSigmaLo = -9.0;
constexpr double kLogSigmaHi = 2.0;

inline Var kl_loss(const LatentDistribution& post, const LatentDistribution& prior) {
    if (post.mu->val.rows() != prior.mu->val.rows() || post.mu->val.cols() != prior.mu->val.cols())
        throw std::invalid_argument("kl_loss: shape mismatch");
    Var var_q = nn::exp_(nn::scale(post.log_sigma, 2.0));
    Var inv_var_p = nn::exp_(nn::scale(prior.log_sigma, -2.0));
    Var dmu2 = nn::square(nn::sub(post.mu, prior.mu));
    Var per = nn::add_const(
        nn::add(nn::sub(prior.log_sigma, post.log_sigma),
                nn::scale(nn::mul(nn::add(var_q, dmu2), inv_var_p), 0.5)),
        -0.5);
    return nn::mean_all(per);
}

// ---- prior and posterior encoders ----

struct PriorEncoderConfig {
    Eigen::Index dim_text = 64;
    Eigen::Index dim_emotion = 8;
    Eigen::Index dim_style = 8;
    Eigen::Index dim_align = 64;
    Eigen::Index width = 64;
    Eigen::Index dim_latent = 16;
};

struct PriorEncoder {
    nn::Conv1d conv1, conv2;
    nn::LayerNorm ln1, ln2;
    nn::Linear mu_head, sigma_head;
    Var null_align;  // learned substitute when no visual stream is given
    PriorEncoderConfig cfg;

    PriorEncoder() = default;
    PriorEncoder(Rng& rng, const PriorEncoderConfig& c)
        : conv1(rng, c.dim_text + c.dim_emotion + c.dim_style + c.dim_align, c.width),
          conv2(rng, c.width, c.width),
          ln1(c.width), ln2(c.width),
          mu_head(rng, c.width, c.dim_latent),
          sigma_head(rng, c.width, c.dim_latent),
          null_align(nn::param(Mat::Zero(1, c.dim_align))),
          cfg(c) {}

    LatentDistribution forward(const ConditionBundle& cond, Eigen::Index t_a) const {
        if (t_a < 1) throw std::invalid_argument("prior_encode: target length must be >= 1");
        Var ft = temporal_resample(cond.f_t, t_a);
        Var emo = nn::broadcast_rows(cond.emo, t_a);
        Var sty = nn::broadcast_rows(cond.e_sty, t_a);
        Var al = cond.has_align()
                     ? (cond.f_align->val.rows() == t_a ? cond.f_align : temporal_resample(cond.f_align, t_a))
                     : nn::broadcast_rows(null_align, t_a);
        Var h = nn::concat_cols(nn::concat_cols(ft, emo), nn::concat_cols(sty, al));
        h = ln1.forward(nn::gelu(conv1.forward(h)));
        h = ln2.forward(nn::gelu(conv2.forward(h)));
        return {mu_head.forward(h), nn::clamp(sigma_head.forward(h), kLogSigmaLo, kLogSigmaHi)};
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        conv1.params(pm, p + ".conv1");
        conv2.params(pm, p + ".conv2");
        ln1.params(pm, p + ".ln1");
        ln2.params(pm, p + ".ln2");
        mu_head.params(pm, p + ".mu");
        sigma_head.params(pm, p + ".sigma");
        pm.add(p + ".null_align", null_align);
    }
};

struct PosteriorEncoderConfig {
    Eigen::Index n_mels = 80;
    Eigen::Index width = 64;
    Eigen::Index dim_latent = 16;
};

struct PosteriorEncoder {
    nn::Conv1d conv1, conv2;
    nn::LayerNorm ln1, ln2;
    nn::Linear mu_head, sigma_head;
    PosteriorEncoderConfig cfg;

    PosteriorEncoder() = default;
    PosteriorEncoder(Rng& rng, const PosteriorEncoderConfig& c)
        : conv1(rng, c.n_mels, c.width), conv2(rng, c.width, c.width),
          ln1(c.width), ln2(c.width),
          mu_head(rng, c.width, c.dim_latent), sigma_head(rng, c.width, c.dim_latent),
          cfg(c) {}

    LatentDistribution forward(const Mat& gt_mel) const {
        if (gt_mel.rows() < 1) throw std::invalid_argument("posterior_encode: empty mel");
        Var h = nn::constant(gt_mel);
        h = ln1.forward(nn::gelu(conv1.forward(h)));
        h = ln2.forward(nn::gelu(conv2.forward(h)));
        return {mu_head.forward(h), nn::clamp(sigma_head.forward(h), kLogSigmaLo, kLogSigmaHi)};
    }

    // reparameterized draw: z = mu + exp(log_sigma) * eps
    static Var sample(const LatentDistribution& dist, Rng& rng) {
        Mat eps(dist.mu->val.rows(), dist.mu->val.cols());
        for (Eigen::Index i = 0; i < eps.rows(); ++i)
            for (Eigen::Index j = 0; j < eps.cols(); ++j) eps(i, j) = normal(rng, 0.0, 1.0);
        return nn::add(dist.mu, nn::mul(nn::exp_(dist.log_sigma), nn::constant(eps)));
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        conv1.params(pm, p + ".conv1");
        conv2.params(pm, p + ".conv2");
        ln1.params(pm, p + ".ln1");
        ln2.params(pm, p + ".ln2");
        mu_head.params(pm, p + ".mu");
        sigma_head.params(pm, p + ".sigma");
    }
};

// ---- knowledge bridge ----

struct KnowledgeBridge {
    nn::Mlp mlp;

    KnowledgeBridge() = default;
    KnowledgeBridge(Rng& rng, Eigen::Index dim_latent, Eigen::Index dim_emotion, Eigen::Index dim_style,
                    Eigen::Index dim_bridge)
        : mlp(rng, dim_latent + dim_emotion + dim_style, dim_bridge, dim_bridge) {}

    Var forward(const Var& z, const ConditionBundle& cond) const {
        const Eigen::Index t = z->val.rows();
        Var h = nn::concat_cols(nn::concat_cols(z, nn::broadcast_rows(cond.emo, t)),
                                nn::broadcast_rows(cond.e_sty, t));
        return mlp.forward(h);
    }

    void params(nn::ParamMap& pm, const std::string& p) const { mlp.params(pm, p + ".mlp"); }
};

// ---- flow matching ----

// point on the straight noise-to-data path and its regression target
inline Mat flow_point(const Mat& x0, const Mat& x1, double t, double sigma_min) {
    return (1.0 - (1.0 - sigma_min) * t) * x0 + t * x1;
}

inline Mat flow_target(const Mat& x0, const Mat& x1, double sigma_min) {
    return x1 - (1.0 - sigma_min) * x0;
}

inline Mat gaussian_noise(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng, 0.0, 1.0);
    return m;
}

// flow-matching regression loss with an injectable vector field (x_t, t) -> Var
template <class Field>
Var cfm_loss_with(Field&& field, const Mat& x1, double sigma_min, Rng& rng) {
    const double t = uniform_real(rng, 0.0, 1.0);
    Mat x0 = gaussian_noise(rng, x1.rows(), x1.cols());
    Var v = field(nn::constant(flow_point(x0, x1, t, sigma_min)), t);
    return nn::mean_all(nn::square(nn::sub(v, nn::constant(flow_target(x0, x1, sigma_min)))));
}

// explicit Euler over the unit time interval; field maps (x, t) -> dx/dt
template <class Field>
Mat euler_integrate(Field&& field, Mat x, int steps) {
    if (steps < 1) throw std::invalid_argument("euler_integrate: steps must be >= 1");
    const double h = 1.0 / double(steps);
    for (int k = 0; k < steps; ++k) x += h * field(x, double(k) * h);
    return x;
}

struct FlowDecoderConfig {
    Eigen::Index n_mels = 80;
    Eigen::Index dim_cond = 64;
    Eigen::Index width = 64;
    Eigen::Index time_dim = 32;
    int blocks = 4;
    int heads = 4;
    double sigma_min = 1e-4;
};

// residual conv/attention vector field with sinusoidal time embedding
struct FlowDecoder {
    struct Block {
        nn::LayerNorm ln;
        nn::Conv1d conv;
        nn::Linear lin;
    };
    nn::Linear in_proj, out_proj;
    std::vector<Block> conv_blocks;
    nn::MultiHeadAttention attn;
    nn::LayerNorm attn_ln;
    FlowDecoderConfig cfg;

    FlowDecoder() = default;
    FlowDecoder(Rng& rng, const FlowDecoderConfig& c)
        : in_proj(rng, c.n_mels + c.dim_cond + c.time_dim, c.width),
          out_proj(rng, c.width, c.n_mels),
          attn(rng, c.width, c.width, c.width, c.heads),
          attn_ln(c.width),
          cfg(c) {
        for (int i = 0; i + 1 < c.blocks; ++i)
            conv_blocks.push_back({nn::LayerNorm(c.width), nn::Conv1d(rng, c.width, c.width), nn::Linear(rng, c.width, c.width)});
    }

    Var field(const Var& x, double t, const Var& c) const {
        if (x->val.rows() != c->val.rows()) throw std::invalid_argument("flow field: length mismatch");
        Var te = nn::broadcast_rows(nn::constant(nn::sinusoidal_embedding(t, cfg.time_dim)), x->val.rows());
        Var h = in_proj.forward(nn::concat_cols(nn::concat_cols(x, c), te));
        const size_t attn_at = conv_blocks.size() / 2;
        for (size_t i = 0; i < conv_blocks.size(); ++i) {
            if (i == attn_at) {
                Var n = attn_ln.forward(h);
                h = nn::add(h, attn.forward(n, n));
            }
            const auto& b = conv_blocks[i];
            h = nn::add(h, b.lin.forward(nn::gelu(b.conv.forward(b.ln.forward(h)))));
        }
        return out_proj.forward(nn::gelu(h));
    }

    Var cfm_loss(const Mat& x1, const Var& c, Rng& rng) const {
        return cfm_loss_with([&](const Var& x, double t) { return field(x, t, c); }, x1, cfg.sigma_min, rng);
    }

    Mat sample(const Var& c, int steps, std::uint64_t seed) const {
        Rng rng(seed);
        Mat x = gaussian_noise(rng, c->val.rows(), cfg.n_mels);
        return euler_integrate([&](const Mat& xx, double t) { return field(nn::constant(xx), t, c)->val; },
                               std::move(x), steps);
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        in_proj.params(pm, p + ".in");
        out_proj.params(pm, p + ".out");
        attn.params(pm, p + ".attn");
        attn_ln.params(pm, p + ".attn_ln");
        for (size_t i = 0; i < conv_blocks.size(); ++i) {
            const std::string bp = p + ".block" + std::to_string(i);
            conv_blocks[i].ln.params(pm, bp + ".ln");
            conv_blocks[i].conv.params(pm, bp + ".conv");
            conv_blocks[i].lin.params(pm, bp + ".lin");
        }
    }
};

// ---- full generator ----

struct GeneratorConfig {
    TextEncoderConfig text;
    Eigen::Index dim_emotion = 8;
    Eigen::Index dim_style = 8;
    Eigen::Index dim_align = 64;
    Eigen::Index dim_latent = 16;
    Eigen::Index dim_bridge = 64;
    Eigen::Index n_mels = 80;
    Eigen::Index width = 64;
    int n_emotions = 7;
    int decoder_blocks = 4;
    int decoder_heads = 4;
    Eigen::Index time_dim = 32;
    double sigma_min = 1e-4;
    int solver_steps = 20;
};

struct Generator {
    TextEncoder text;
    nn::Embedding emotion_table;
    PriorEncoder prior;
    PosteriorEncoder posterior;
    KnowledgeBridge bridge;
    FlowDecoder decoder;
    GeneratorConfig cfg;

    Generator() = default;
    Generator(Rng& rng, const GeneratorConfig& c)
        : text(rng, c.text),
          emotion_table(rng, c.n_emotions, c.dim_emotion),
          prior(rng, PriorEncoderConfig{c.text.dim, c.dim_emotion, c.dim_style, c.dim_align, c.width, c.dim_latent}),
          posterior(rng, PosteriorEncoderConfig{c.n_mels, c.width, c.dim_latent}),
          bridge(rng, c.dim_latent, c.dim_emotion, c.dim_style, c.dim_bridge),
          decoder(rng, FlowDecoderConfig{c.n_mels, c.dim_bridge, c.width, c.time_dim, c.decoder_blocks,
                                         c.decoder_heads, c.sigma_min}),
          cfg(c) {}

    ConditionBundle make_bundle(const std::vector<Eigen::Index>& tokens, int emotion_id, const Var& e_sty,
                                const Var& f_align = nullptr) const {
        if (emotion_id < 0 || emotion_id >= cfg.n_emotions)
            throw std::invalid_argument("emotion id " + std::to_string(emotion_id) + " outside the vocabulary");
        return {text.forward(tokens), emotion_table.lookup(emotion_id), e_sty, f_align};
    }

    // inference path: prior mean (or a seeded prior draw), bridged, then the ODE solve.
    // The posterior branch is never touched here.
    Mat infer_mel(const ConditionBundle& cond, Eigen::Index t_a, int steps, std::uint64_t seed,
                  bool sample_prior = false) const {
        LatentDistribution dist = prior.forward(cond, t_a);
        Var z = dist.mu;
        if (sample_prior) {
            Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
            z = PosteriorEncoder::sample(dist, rng);
        }
        return decoder.sample(bridge.forward(z, cond), steps, seed);
    }

    void params(nn::ParamMap& pm, const std::string& p) const {
        text.params(pm, p + ".text");
        emotion_table.params(pm, p + ".emotion");
        prior.params(pm, p + ".prior");
        posterior.params(pm, p + ".posterior");
        bridge.params(pm, p + ".bridge");
        decoder.params(pm, p + ".decoder");
    }
};

} // namespace evsp::model
