#pragma once

#include "eventspeech/audio/griffin_lim.hpp"
#include "eventspeech/harness/checkpoint.hpp"
#include "eventspeech/harness/dataset.hpp"
#include "eventspeech/metrics/metrics.hpp"
#include "eventspeech/model/model.hpp"
#include "eventspeech/nn/optim.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace evsp::harness {

inline audio::AudioConfig audio_config(const Config& c) {
    audio::AudioConfig a;
    a.sample_rate = static_cast<int>(c.audio_sample_rate);
    a.n_fft = static_cast<int>(c.audio_n_fft);
    a.hop = static_cast<int>(c.audio_hop);
    a.n_mels = static_cast<int>(c.audio_n_mels);
    a.mel_floor = c.audio_mel_floor;
    a.f0_lo = c.audio_f0_lo;
    a.f0_hi = c.audio_f0_hi;
    a.yin_threshold = c.audio_yin_threshold;
    return a;
}

inline model::ModelConfig model_config(const Config& c) {
    model::ModelConfig mc;

    mc.event.n_bins = static_cast<int>(c.event_voxel_bins);
    mc.event.base_channels = static_cast<int>(c.model_base_channels);
    mc.event.dim_hidden = static_cast<int>(c.model_dim_hidden);
    mc.event.dim_head = static_cast<int>(c.model_dim_head);
    mc.event.dim_visual = static_cast<int>(c.model_dim_visual);
    mc.event.dim_speaker = static_cast<int>(c.model_dim_speaker);
    mc.event.dim_emotion = static_cast<int>(c.model_dim_emotion);
    mc.event.n_speakers = static_cast<int>(c.model_n_speakers);
    mc.event.n_emotions = static_cast<int>(c.model_n_emotions);

    mc.audio.prosody.n_mels = static_cast<int>(c.audio_n_mels);
    mc.audio.prosody.dim = static_cast<int>(c.model_dim_hidden);
    mc.audio.prosody.f0_lo = c.audio_f0_lo;
    mc.audio.prosody.f0_hi = c.audio_f0_hi;
    mc.audio.fuse.dim = static_cast<int>(c.model_dim_hidden);
    mc.audio.fuse.dim_out = static_cast<int>(c.model_dim_fused);
    mc.audio.fuse.dim_timbre = static_cast<int>(c.model_dim_style);
    mc.audio.ssm_layers = static_cast<int>(c.model_ssm_layers);
    mc.audio.hwc_levels = static_cast<int>(c.model_hwc_levels);
    mc.audio.wavelet = c.model_wavelet;

    mc.align.dim_visual = c.model_dim_visual;
    mc.align.dim_acoustic = c.model_dim_fused;
    mc.align.dim_fused = c.model_dim_fused;
    mc.align.dim_latent = c.model_dim_fused;
    mc.align.heads = static_cast<int>(c.model_heads);
    mc.align.tau = c.align_tau;
    mc.align.symmetric_loss = c.align_symmetric;

    mc.gen.text.dim = c.model_text_dim;
    mc.gen.text.blocks = static_cast<int>(c.model_text_blocks);
    mc.gen.text.heads = static_cast<int>(c.model_heads);
    mc.gen.dim_emotion = c.model_dim_emotion;
    mc.gen.dim_style = c.model_dim_style;
    mc.gen.dim_align = c.model_dim_fused;
    mc.gen.dim_latent = c.model_dim_latent;
    mc.gen.dim_bridge = c.model_dim_bridge;
    mc.gen.n_mels = c.audio_n_mels;
    mc.gen.width = c.flow_width;
    mc.gen.n_emotions = static_cast<int>(c.model_n_emotions);
    mc.gen.decoder_blocks = static_cast<int>(c.flow_decoder_blocks);
    mc.gen.decoder_heads = static_cast<int>(c.model_heads);
    mc.gen.time_dim = c.flow_time_dim;
    mc.gen.sigma_min = c.flow_sigma_min;
    mc.gen.solver_steps = static_cast<int>(c.flow_solver_steps);
    return mc;
}

inline model::LossWeights loss_weights(const Config& c) {
    return {c.loss_cfm, c.loss_kl, c.loss_align, c.loss_aux};
}

inline model::TrainItem prepare_item(const Sample& s, const event::EventStream* events, const Config& cfg,
                                     bool use_events) {
    model::TrainItem it;
    it.feats = audio::analyze_audio(s.waveform, audio_config(cfg));
    it.tokens = model::tokenize(s.text);
    it.labels = s.labels;
    it.speaker_id = s.speaker_id;
    it.emotion_id = s.emotion_id;
    if (use_events) {
        event::EventStream local;
        if (!events) {
            local = simulate_sample_events(s, cfg);
            events = &local;
        }
        const auto interval = static_cast<std::uint64_t>(std::llround(1e6 / double(s.fps)));
        it.grid = event::voxelize(*events, static_cast<int>(cfg.event_voxel_bins),
                                  static_cast<int>(s.frames.size()) - 1, interval);
    }
    return it;
}

struct TrainingSet {
    std::vector<model::TrainItem> items;
    std::vector<Sample> samples;
};

// deterministic timbre-reference pairing: the next corpus sample by the same
// speaker, so generation never conditions on the utterance it is scored on
inline size_t reference_index(const TrainingSet& set, size_t i) {
    const auto spk = set.items[i].speaker_id;
    for (size_t k = 1; k < set.items.size(); ++k) {
        const size_t j = (i + k) % set.items.size();
        if (set.items[j].speaker_id == spk) return j;
    }
    return i;
}

// training conditions on the same pairing evaluation uses
inline void assign_references(TrainingSet& set) {
    for (size_t i = 0; i < set.items.size(); ++i) {
        const size_t j = reference_index(set, i);
        if (j != i) set.items[i].ref_feats = set.items[j].feats;
    }
}

inline TrainingSet load_training_set(const Config& cfg, const std::string& data_dir, std::int64_t limit = -1) {
    namespace fs = std::filesystem;
    TrainingSet set;
    auto dirs = dataset_sample_dirs(data_dir);
    if (limit >= 0 && static_cast<std::int64_t>(dirs.size()) > limit) dirs.resize(static_cast<size_t>(limit));
    for (const auto& dir : dirs) {
        Sample s = load_sample(dir);
        const auto evt_path = (fs::path(dir) / "events.evt").string();
        if (cfg.train_use_events && fs::exists(evt_path)) {
            auto events = event::load_evt(evt_path);
            set.items.push_back(prepare_item(s, &events, cfg, true));
        } else {
            set.items.push_back(prepare_item(s, nullptr, cfg, cfg.train_use_events));
        }
        set.samples.push_back(std::move(s));
    }
    assign_references(set);
    return set;
}

inline void ensure_grads(nn::ParamMap& pm) {
    for (auto& [name, v] : pm.items)
        if (v->grad.size() == 0) v->grad = Mat::Zero(v->val.rows(), v->val.cols());
}

struct TrainSummary {
    long steps_run = 0;
    double first_total = 0.0;
    double final_total = 0.0;
    std::string final_checkpoint;
    std::vector<double> totals; // per executed step
};

inline TrainSummary run_training(const Config& cfg, const TrainingSet& set, const std::string& out_dir,
                                 const std::string& resume_path = "", bool force = false, bool verbose = false) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    if (set.items.empty()) throw std::runtime_error("training: empty dataset");

    Rng init_rng(static_cast<std::uint64_t>(cfg.train_seed));
    model::EventSpeechModel m(init_rng, model_config(cfg));
    nn::ParamMap pm;
    m.params(pm);

    nn::AdamW opt;
    opt.weight_decay = cfg.train_weight_decay;
    opt.init(pm);
    nn::OneCycle sched;
    sched.peak_lr = cfg.train_peak_lr;
    sched.warmup_frac = cfg.train_warmup;
    sched.total_steps = cfg.train_steps;

    Rng data_rng(mix_seed(static_cast<std::uint64_t>(cfg.train_seed), 0xDA7A));
    long start = 0;
    if (!resume_path.empty()) {
        Checkpoint ck = load_checkpoint(resume_path);
        check_config_hash(ck, cfg, force);
        restore_params(ck, pm);
        restore_optimizer(ck, opt);
        data_rng = deserialize_rng(ck.rng_state);
        start = ck.step;
    }

    const std::string log_path = (fs::path(out_dir) / "loss_log.csv").string();
    std::ofstream log(log_path, start == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("training: cannot write " + log_path);
    if (start == 0) log << "step,total,cfm,kl,contrast,aux,lr\n";

    const auto weights = loss_weights(cfg);
    TrainSummary summary;
    double last_cfm = 0.0, last_kl = 0.0, last_contrast = 0.0, last_aux = 0.0;
    for (long step = start + 1; step <= cfg.train_steps; ++step) {
        std::vector<model::TrainItem> batch;
        std::vector<std::int64_t> picked;
        for (std::int64_t b = 0; b < cfg.train_batch; ++b) {
            const auto idx = uniform_int(data_rng, 0, static_cast<std::int64_t>(set.items.size()) - 1);
            picked.push_back(idx);
            batch.push_back(set.items[static_cast<size_t>(idx)]);
        }

        auto losses = model::training_loss(m, batch, weights, data_rng);
        const double total = losses.total->val(0, 0);
        last_cfm = losses.cfm->val(0, 0);
        last_kl = losses.kl->val(0, 0);
        last_contrast = losses.contrast->val(0, 0);
        last_aux = losses.aux->val(0, 0);
        if (!std::isfinite(total)) {
            nlohmann::json dump;
            dump["step"] = step;
            dump["batch_indices"] = picked;
            dump["cfm"] = last_cfm;
            dump["kl"] = last_kl;
            dump["contrast"] = last_contrast;
            dump["aux"] = last_aux;
            std::ofstream d(fs::path(out_dir) / "nan_dump.json");
            d << dump.dump(2) << "\n";
            throw std::runtime_error("training: non-finite loss at step " + std::to_string(step) +
                                     "; diagnostics in " + out_dir + "/nan_dump.json");
        }

        pm.zero_grad();
        nn::backward(losses.total);
        ensure_grads(pm);
        nn::AdamW::clip_grad_norm(pm, cfg.train_clip_norm);
        const double lr = sched.lr_at(step - 1);
        opt.step(pm, lr);

        char row[256];
        std::snprintf(row, sizeof(row), "%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", step, total, last_cfm,
                      last_kl, last_contrast, last_aux, lr);
        log << row;
        log.flush();

        if (summary.totals.empty()) summary.first_total = total;
        summary.totals.push_back(total);
        summary.final_total = total;
        ++summary.steps_run;
        if (verbose && step % 50 == 0) std::fprintf(stderr, "step %ld total %.4f\n", step, total);

        if (cfg.train_checkpoint_every > 0 && step % cfg.train_checkpoint_every == 0 && step < cfg.train_steps) {
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt_%06ld.evck", step);
            nlohmann::json metrics;
            metrics["total"] = total;
            save_checkpoint((fs::path(out_dir) / name).string(),
                            snapshot(pm, &opt, config_hash(cfg), step, data_rng, metrics));
        }
    }

    nlohmann::json metrics;
    metrics["total"] = summary.final_total;
    metrics["cfm"] = last_cfm;
    metrics["kl"] = last_kl;
    metrics["contrast"] = last_contrast;
    metrics["aux"] = last_aux;
    summary.final_checkpoint = (fs::path(out_dir) / "final.evck").string();
    save_checkpoint(summary.final_checkpoint,
                    snapshot(pm, &opt, config_hash(cfg), cfg.train_steps, data_rng, metrics));
    return summary;
}

inline TrainSummary run_training(const Config& cfg, const std::string& data_dir, const std::string& out_dir,
                                 const std::string& resume_path = "", bool force = false, bool verbose = false) {
    TrainingSet set = load_training_set(cfg, data_dir);
    if (set.items.empty()) throw std::runtime_error("training: empty dataset at " + data_dir);
    return run_training(cfg, set, out_dir, resume_path, force, verbose);
}

// build a model and load checkpoint weights into it
inline model::EventSpeechModel load_model(const Config& cfg, const std::string& ckpt_path, bool force = false) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    check_config_hash(ck, cfg, force);
    Rng rng(static_cast<std::uint64_t>(cfg.train_seed));
    model::EventSpeechModel m(rng, model_config(cfg));
    nn::ParamMap pm;
    m.params(pm);
    restore_params(ck, pm);
    return m;
}

// encode the ground-truth mel through the posterior mean and decode it back;
// used to measure how much of the utterance the latent path can carry
inline Mat posterior_reconstruction(const model::EventSpeechModel& m, const model::TrainItem& it, int steps,
                                    std::uint64_t seed) {
    auto ao = m.audio_enc.forward(it.feats, it.feats.mel);
    nn::Var f_align;
    if (it.has_events()) {
        nn::Var h = m.event_enc.encode(it.grid);
        auto d = m.event_enc.heads(h);
        f_align = m.align.fuse(m.event_enc.fuse(d, it.speaker_id, it.emotion_id), ao.f_a);
    }
    auto bundle = m.gen.make_bundle(it.tokens, static_cast<int>(it.emotion_id), ao.e_tmb, f_align);
    auto post = m.gen.posterior.forward(model::normalize_mel(it.feats.mel));
    nn::Var cond = m.gen.bridge.forward(post.mu, bundle);
    return model::denormalize_mel(m.gen.decoder.sample(cond, steps, seed));
}

inline Mat mean_mel_frame(const std::vector<model::TrainItem>& items) {
    if (items.empty()) throw std::invalid_argument("mean_mel_frame: no items");
    Mat acc = Mat::Zero(1, items[0].feats.mel.cols());
    Eigen::Index total = 0;
    for (const auto& it : items) {
        acc += it.feats.mel.colwise().sum();
        total += it.feats.mel.rows();
    }
    return acc / double(total);
}

struct Evaluation {
    metrics::MetricReport report;
    std::vector<Mat> generated; // log-mels, same order as the evaluated items
};

inline Evaluation evaluate_corpus(const model::EventSpeechModel& m, const Config& cfg, const TrainingSet& set,
                                  int solver_steps, std::uint64_t seed, std::int64_t limit = -1) {
    const auto acfg = audio_config(cfg);
    const size_t n = limit >= 0 ? std::min<size_t>(static_cast<size_t>(limit), set.items.size())
                                : set.items.size();

    std::map<int, std::vector<Mat>> mels_by_speaker;
    for (size_t i = 0; i < n; ++i)
        mels_by_speaker[static_cast<int>(set.items[i].speaker_id)].push_back(set.items[i].feats.mel);
    std::map<int, metrics::SpeakerStats> stats;
    for (const auto& [spk, mels] : mels_by_speaker) stats[spk] = metrics::cepstral_stats(mels);

    Evaluation ev;
    metrics::ProsodyContours gen_contours, ref_contours;
    for (size_t i = 0; i < n; ++i) {
        const auto& it = set.items[i];
        model::InferenceRequest req;
        req.text = set.samples[i].text;
        req.emotion_id = static_cast<int>(it.emotion_id);
        req.speaker_id = it.speaker_id;
        req.ref_audio = set.samples[reference_index(set, i)].waveform;
        req.grid = it.has_events() ? &it.grid : nullptr;
        req.solver_steps = solver_steps;
        req.seed = mix_seed(seed, i);
        Mat gen_mel = model::infer_mel(m, req, acfg);
        ev.generated.push_back(gen_mel);

        auto gen_wav = audio::griffin_lim(gen_mel, acfg, 32, mix_seed(seed, 0xF00 + i));
        auto gen_feats = audio::analyze_audio(gen_wav, acfg);

        metrics::UtteranceMetrics row;
        row.id = sample_dir_name(static_cast<std::int64_t>(i));
        const Mat cep_ref = metrics::mel_cepstra(it.feats.mel);
        const Mat cep_gen = metrics::mel_cepstra(gen_mel);
        auto path = metrics::dtw_align(cep_ref, cep_gen);
        row.mcd = metrics::kMcdFactor * path.total / double(path.path.size());
        row.mcd_sl = metrics::mcd_sl(it.feats.mel, gen_mel, stats, static_cast<int>(it.speaker_id));

        std::vector<double> f0_ref(it.feats.f0.data(), it.feats.f0.data() + it.feats.f0.size());
        std::vector<double> f0_gen(gen_feats.f0.data(), gen_feats.f0.data() + gen_feats.f0.size());
        row.f0 = metrics::f0_rmse_aligned(f0_ref, f0_gen, path.path);
        ev.report.rows.push_back(row);

        gen_contours.add(gen_feats);
        ref_contours.add(it.feats);
    }
    ev.report.prosody_kl = metrics::prosody_kl(gen_contours, ref_contours);
    ev.report.finalize();
    return ev;
}

} // namespace evsp::harness
