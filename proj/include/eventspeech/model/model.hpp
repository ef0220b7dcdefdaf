#pragma once

#include "eventspeech/event/voxel.hpp"
#include "eventspeech/model/alignment.hpp"
#include "eventspeech/model/audio_encoder.hpp"
#include "eventspeech/model/event_encoder.hpp"
#include "eventspeech/model/generator.hpp"

#include <string>
#include <vector>

namespace evsp::model {

struct ModelConfig {
    EventEncoderConfig event;
    AudioEncoderConfig audio;
    AlignmentConfig align;
    GeneratorConfig gen;
};

// log-mel conditioning constants for the flow target; speech log-mels here
// live roughly in [-11.5, -2], so this centers and scales them to O(1)
constexpr double kMelShift = -7.0;
constexpr double kMelScale = 3.5;

inline Mat normalize_mel(const Mat& mel) { return (mel.array() - kMelShift) / kMelScale; }
inline Mat denormalize_mel(const Mat& mel) { return (mel.array() * kMelScale + kMelShift); }

struct EventSpeechModel {
    ModelConfig cfg;
    EventEncoder event_enc;
    AudioEncoder audio_enc;
    AlignmentModule align;
    Generator gen;

    EventSpeechModel() = default;
    EventSpeechModel(Rng& rng, const ModelConfig& c)
        : cfg(c), event_enc(rng, c.event), audio_enc(rng, c.audio), align(rng, c.align), gen(rng, c.gen) {
        if (c.align.dim_visual != c.event.dim_visual) throw std::invalid_argument("visual dims disagree");
        if (c.align.dim_acoustic != c.audio.fuse.dim_out) throw std::invalid_argument("acoustic dims disagree");
        if (c.gen.dim_align != c.align.dim_fused) throw std::invalid_argument("alignment dims disagree");
        if (c.gen.dim_style != c.audio.fuse.dim_timbre) throw std::invalid_argument("style dims disagree");
        if (c.gen.n_emotions != c.event.n_emotions) throw std::invalid_argument("emotion counts disagree");
    }

    void params(nn::ParamMap& pm) const {
        event_enc.params(pm, "event");
        audio_enc.params(pm, "audio");
        align.params(pm, "align");
        gen.params(pm, "gen");
    }
};

// one precomputed training example; t_prime == 0 marks the text-only path
struct TrainItem {
    event::VoxelGrid grid;
    audio::AcousticFeatures feats;
    audio::AcousticFeatures ref_feats; // same-speaker conditioning source; empty falls back to feats
    PseudoLabels labels;
    std::vector<Eigen::Index> tokens;
    Eigen::Index speaker_id = 0;
    Eigen::Index emotion_id = 0;

    bool has_events() const { return grid.t_prime > 0; }
};

struct LossWeights {
    double cfm = 1.0;
    double kl = 0.1;
    double contrast = 0.1;
    double aux = 0.05;
};

struct LossTerms {
    nn::Var total, cfm, kl, contrast, aux;
};

inline LossTerms training_loss(const EventSpeechModel& m, const std::vector<TrainItem>& batch,
                               const LossWeights& w, Rng& rng) {
    using nn::Var;
    if (batch.empty()) throw std::invalid_argument("training_loss: empty batch");

    Var cfm_sum, kl_sum, aux_sum;
    std::vector<Var> fv_batch, fa_batch;
    for (const auto& it : batch) {
        // conditioning audio comes from a same-speaker reference utterance, matching
        // inference, so the generator never sees the acoustics it must produce
        const auto& rf = it.ref_feats.mel.rows() > 0 ? it.ref_feats : it.feats;
        auto ao = m.audio_enc.forward(rf, rf.mel);

        Var f_align;
        Var aux_i;
        if (it.has_events()) {
            Var h = m.event_enc.encode(it.grid);
            auto d = m.event_enc.heads(h);
            Var f_v = m.event_enc.fuse(d, it.speaker_id, it.emotion_id);
            f_align = m.align.fuse(f_v, ao.f_a);
            aux_i = nn::add(pseudo_label_loss(m.event_enc, d, it.labels), orthogonality_penalty(d));
            // the contrastive pair stays synchronous: this utterance's events
            // against its own acoustics
            auto ao_self = m.audio_enc.forward(it.feats, it.feats.mel);
            fv_batch.push_back(f_v);
            fa_batch.push_back(ao_self.f_a);
        }

        auto bundle = m.gen.make_bundle(it.tokens, static_cast<int>(it.emotion_id), ao.e_tmb, f_align);
        const Mat x1 = normalize_mel(it.feats.mel);
        const Eigen::Index t_a = x1.rows();

        auto prior = m.gen.prior.forward(bundle, t_a);
        auto post = m.gen.posterior.forward(x1);
        Var kl_i = kl_loss(post, prior);
        Var z = PosteriorEncoder::sample(post, rng);
        Var cond = m.gen.bridge.forward(z, bundle);
        Var cfm_i = m.gen.decoder.cfm_loss(x1, cond, rng);

        cfm_sum = cfm_sum ? nn::add(cfm_sum, cfm_i) : cfm_i;
        kl_sum = kl_sum ? nn::add(kl_sum, kl_i) : kl_i;
        if (aux_i) aux_sum = aux_sum ? nn::add(aux_sum, aux_i) : aux_i;
    }

    const double inv_n = 1.0 / double(batch.size());
    LossTerms out;
    out.cfm = nn::scale(cfm_sum, inv_n);
    out.kl = nn::scale(kl_sum, inv_n);
    out.aux = aux_sum ? nn::scale(aux_sum, inv_n) : nn::constant(Mat::Zero(1, 1));
    out.contrast = fv_batch.empty() ? nn::constant(Mat::Zero(1, 1))
                                    : m.align.contrastive_loss(fv_batch, fa_batch);
    out.total = nn::add(nn::add(nn::scale(out.cfm, w.cfm), nn::scale(out.kl, w.kl)),
                        nn::add(nn::scale(out.contrast, w.contrast), nn::scale(out.aux, w.aux)));
    return out;
}

// rough utterance length when no event stream fixes it: per-character
// syllable plus inter-word gap timing at a neutral speaking rate
inline double text_duration_heuristic(const std::string& text) {
    double seconds = 0.0;
    for (char ch : text) seconds += ch == ' ' ? 0.09 : 0.16;
    return std::max(seconds, 0.3);
}

struct InferenceRequest {
    std::string text;
    int emotion_id = 0;
    std::vector<double> ref_audio;          // timbre source, also the acoustic side of alignment
    const event::VoxelGrid* grid = nullptr; // optional event voxelization
    Eigen::Index speaker_id = 0;
    int solver_steps = 20;
    std::uint64_t seed = 0;
    bool sample_prior = false;
};

// text + reference audio (+ optional events) -> log-mel. The target frame
// count comes from the event span when events are given, otherwise from the
// text heuristic. Ground-truth audio of the utterance is never an input.
inline Mat infer_mel(const EventSpeechModel& m, const InferenceRequest& req, const audio::AudioConfig& acfg) {
    auto feats = audio::analyze_audio(req.ref_audio, acfg);
    auto ao = m.audio_enc.forward(feats, feats.mel);
    auto tokens = tokenize(req.text);

    nn::Var f_align;
    double seconds;
    if (req.grid && req.grid->t_prime > 0) {
        nn::Var h = m.event_enc.encode(*req.grid);
        auto d = m.event_enc.heads(h);
        nn::Var f_v = m.event_enc.fuse(d, req.speaker_id, req.emotion_id);
        f_align = m.align.fuse(f_v, ao.f_a);
        seconds = double(req.grid->t_prime + 1) * double(req.grid->frame_interval_us) * 1e-6;
    } else {
        seconds = text_duration_heuristic(req.text);
    }
    const auto n_samples = static_cast<size_t>(seconds * acfg.sample_rate);
    const Eigen::Index t_a = std::max<Eigen::Index>(2, dsp::num_frames(n_samples, acfg.n_fft, acfg.hop));

    auto bundle = m.gen.make_bundle(tokens, req.emotion_id, ao.e_tmb, f_align);
    return denormalize_mel(m.gen.infer_mel(bundle, t_a, req.solver_steps, req.seed, req.sample_prior));
}

} // namespace evsp::model
