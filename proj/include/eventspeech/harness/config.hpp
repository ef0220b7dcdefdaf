#pragma once

#include "eventspeech/common.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsp::harness {

// every tunable default in one place; keys are "section.name" in the config
// file and EVSP_SECTION_NAME in the environment
struct Config {
    // event simulation
    double event_theta_on = 0.2;
    double event_theta_off = 0.2;
    double event_log_eps = 1e-3;
    std::int64_t event_voxel_bins = 3;

    // synthetic video
    std::int64_t video_width = 32;
    std::int64_t video_height = 32;
    std::int64_t video_fps = 25;

    // audio analysis
    std::int64_t audio_sample_rate = 22050;
    std::int64_t audio_n_fft = 1024;
    std::int64_t audio_hop = 256;
    std::int64_t audio_n_mels = 80;
    double audio_mel_floor = 1e-5;
    double audio_f0_lo = 60.0;
    double audio_f0_hi = 400.0;
    double audio_yin_threshold = 0.15;

    // model dimensions
    std::int64_t model_base_channels = 8;
    std::int64_t model_dim_hidden = 64;
    std::int64_t model_dim_head = 16;
    std::int64_t model_dim_visual = 64;
    std::int64_t model_dim_speaker = 8;
    std::int64_t model_dim_emotion = 8;
    std::int64_t model_dim_fused = 64;
    std::int64_t model_dim_latent = 16;
    std::int64_t model_dim_bridge = 64;
    std::int64_t model_dim_style = 8;
    std::int64_t model_heads = 4;
    std::int64_t model_n_speakers = 2;
    std::int64_t model_n_emotions = 7;
    std::int64_t model_ssm_layers = 1;
    std::int64_t model_hwc_levels = 2;
    std::string model_wavelet = "haar";
    std::int64_t model_text_dim = 64;
    std::int64_t model_text_blocks = 2;

    // alignment
    double align_tau = 0.07;
    bool align_symmetric = true;

    // flow decoder
    double flow_sigma_min = 1e-4;
    std::int64_t flow_solver_steps = 20;
    std::int64_t flow_decoder_blocks = 4;
    std::int64_t flow_time_dim = 32;
    std::int64_t flow_width = 64;

    // loss weights
    double loss_cfm = 1.0;
    double loss_kl = 0.1;
    double loss_align = 0.1;
    double loss_aux = 0.05;

    // training
    std::int64_t train_steps = 2000;
    double train_peak_lr = 1e-3;
    double train_warmup = 0.1;
    double train_weight_decay = 1e-4;
    double train_clip_norm = 1.0;
    std::int64_t train_batch = 2;
    std::int64_t train_checkpoint_every = 500;
    std::int64_t train_seed = 1;
    bool train_use_events = true;

    // synthetic dataset
    std::int64_t data_size = 64;
    double data_min_seconds = 1.0;
    double data_max_seconds = 2.0;
    double data_aug_strength = 1.0;
    std::int64_t data_seed = 7;
};

namespace detail {

enum class FieldKind { Int, Real, Bool, Str };

struct FieldRef {
    const char* key;
    FieldKind kind;
    void* ptr;
};

inline std::vector<FieldRef> fields(Config& c) {
    return {
        {"event.theta_on", FieldKind::Real, &c.event_theta_on},
        {"event.theta_off", FieldKind::Real, &c.event_theta_off},
        {"event.log_eps", FieldKind::Real, &c.event_log_eps},
        {"event.voxel_bins", FieldKind::Int, &c.event_voxel_bins},
        {"video.width", FieldKind::Int, &c.video_width},
        {"video.height", FieldKind::Int, &c.video_height},
        {"video.fps", FieldKind::Int, &c.video_fps},
        {"audio.sample_rate", FieldKind::Int, &c.audio_sample_rate},
        {"audio.n_fft", FieldKind::Int, &c.audio_n_fft},
        {"audio.hop", FieldKind::Int, &c.audio_hop},
        {"audio.n_mels", FieldKind::Int, &c.audio_n_mels},
        {"audio.mel_floor", FieldKind::Real, &c.audio_mel_floor},
        {"audio.f0_lo", FieldKind::Real, &c.audio_f0_lo},
        {"audio.f0_hi", FieldKind::Real, &c.audio_f0_hi},
        {"audio.yin_threshold", FieldKind::Real, &c.audio_yin_threshold},
        {"model.base_channels", FieldKind::Int, &c.model_base_channels},
        {"model.dim_hidden", FieldKind::Int, &c.model_dim_hidden},
        {"model.dim_head", FieldKind::Int, &c.model_dim_head},
        {"model.dim_visual", FieldKind::Int, &c.model_dim_visual},
        {"model.dim_speaker", FieldKind::Int, &c.model_dim_speaker},
        {"model.dim_emotion", FieldKind::Int, &c.model_dim_emotion},
        {"model.dim_fused", FieldKind::Int, &c.model_dim_fused},
        {"model.dim_latent", FieldKind::Int, &c.model_dim_latent},
        {"model.dim_bridge", FieldKind::Int, &c.model_dim_bridge},
        {"model.dim_style", FieldKind::Int, &c.model_dim_style},
        {"model.heads", FieldKind::Int, &c.model_heads},
        {"model.n_speakers", FieldKind::Int, &c.model_n_speakers},
        {"model.n_emotions", FieldKind::Int, &c.model_n_emotions},
        {"model.ssm_layers", FieldKind::Int, &c.model_ssm_layers},
        {"model.hwc_levels", FieldKind::Int, &c.model_hwc_levels},
        {"model.wavelet", FieldKind::Str, &c.model_wavelet},
        {"model.text_dim", FieldKind::Int, &c.model_text_dim},
        {"model.text_blocks", FieldKind::Int, &c.model_text_blocks},
        {"align.tau", FieldKind::Real, &c.align_tau},
        {"align.symmetric", FieldKind::Bool, &c.align_symmetric},
        {"flow.sigma_min", FieldKind::Real, &c.flow_sigma_min},
        {"flow.solver_steps", FieldKind::Int, &c.flow_solver_steps},
        {"flow.decoder_blocks", FieldKind::Int, &c.flow_decoder_blocks},
        {"flow.time_dim", FieldKind::Int, &c.flow_time_dim},
        {"flow.width", FieldKind::Int, &c.flow_width},
        {"loss.cfm", FieldKind::Real, &c.loss_cfm},
        {"loss.kl", FieldKind::Real, &c.loss_kl},
        {"loss.align", FieldKind::Real, &c.loss_align},
        {"loss.aux", FieldKind::Real, &c.loss_aux},
        {"train.steps", FieldKind::Int, &c.train_steps},
        {"train.peak_lr", FieldKind::Real, &c.train_peak_lr},
        {"train.warmup", FieldKind::Real, &c.train_warmup},
        {"train.weight_decay", FieldKind::Real, &c.train_weight_decay},
        {"train.clip_norm", FieldKind::Real, &c.train_clip_norm},
        {"train.batch", FieldKind::Int, &c.train_batch},
        {"train.checkpoint_every", FieldKind::Int, &c.train_checkpoint_every},
        {"train.seed", FieldKind::Int, &c.train_seed},
        {"train.use_events", FieldKind::Bool, &c.train_use_events},
        {"data.size", FieldKind::Int, &c.data_size},
        {"data.min_seconds", FieldKind::Real, &c.data_min_seconds},
        {"data.max_seconds", FieldKind::Real, &c.data_max_seconds},
        {"data.aug_strength", FieldKind::Real, &c.data_aug_strength},
        {"data.seed", FieldKind::Int, &c.data_seed},
    };
}

inline std::string env_name(const std::string& key) {
    std::string out = "EVSP_";
    for (char ch : key) out += (ch == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

inline std::string render(const FieldRef& f) {
    char buf[64];
    switch (f.kind) {
        case FieldKind::Int: return std::to_string(*static_cast<std::int64_t*>(f.ptr));
        case FieldKind::Bool: return *static_cast<bool*>(f.ptr) ? "true" : "false";
        case FieldKind::Str: return *static_cast<std::string*>(f.ptr);
        case FieldKind::Real:
            std::snprintf(buf, sizeof(buf), "%.17g", *static_cast<double*>(f.ptr));
            return buf;
    }
    return {};
}

inline void assign(const FieldRef& f, const nlohmann::json& v) {
    switch (f.kind) {
        case FieldKind::Int:
            if (!v.is_number_integer()) throw std::runtime_error(std::string("config: ") + f.key + " must be an integer");
            *static_cast<std::int64_t*>(f.ptr) = v.get<std::int64_t>();
            break;
        case FieldKind::Real:
            if (!v.is_number()) throw std::runtime_error(std::string("config: ") + f.key + " must be a number");
            *static_cast<double*>(f.ptr) = v.get<double>();
            break;
        case FieldKind::Bool:
            if (!v.is_boolean()) throw std::runtime_error(std::string("config: ") + f.key + " must be a boolean");
            *static_cast<bool*>(f.ptr) = v.get<bool>();
            break;
        case FieldKind::Str:
            if (!v.is_string()) throw std::runtime_error(std::string("config: ") + f.key + " must be a string");
            *static_cast<std::string*>(f.ptr) = v.get<std::string>();
            break;
    }
}

inline void assign_text(const FieldRef& f, const std::string& text) {
    switch (f.kind) {
        case FieldKind::Int: *static_cast<std::int64_t*>(f.ptr) = std::stoll(text); break;
        case FieldKind::Real: *static_cast<double*>(f.ptr) = std::stod(text); break;
        case FieldKind::Bool: {
            if (text == "true" || text == "1") *static_cast<bool*>(f.ptr) = true;
            else if (text == "false" || text == "0") *static_cast<bool*>(f.ptr) = false;
            else throw std::runtime_error(std::string("config: bad boolean for ") + f.key + ": " + text);
            break;
        }
        case FieldKind::Str: *static_cast<std::string*>(f.ptr) = text; break;
    }
}

} // namespace detail

inline void apply_json(Config& c, const nlohmann::json& j) {
    auto refs = detail::fields(c);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_object())
            throw std::runtime_error("config: top-level entries must be sections, got key '" + it.key() + "'");
        for (auto kv = it.value().begin(); kv != it.value().end(); ++kv) {
            const std::string key = it.key() + "." + kv.key();
            bool matched = false;
            for (const auto& f : refs)
                if (key == f.key) {
                    detail::assign(f, kv.value());
                    matched = true;
                    break;
                }
            if (!matched) throw std::runtime_error("config: unknown key '" + key + "'");
        }
    }
}

// environment variables EVSP_<SECTION>_<NAME> override file values
inline void apply_env(Config& c) {
    for (const auto& f : detail::fields(c)) {
        const char* v = std::getenv(detail::env_name(f.key).c_str());
        if (v) detail::assign_text(f, v);
    }
}

inline Config load_config(const std::string& path, bool env_overrides = true) {
    Config c;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        nlohmann::json j;
        in >> j;
        apply_json(c, j);
    }
    if (env_overrides) apply_env(c);
    return c;
}

inline nlohmann::json to_json(const Config& config) {
    auto& c = const_cast<Config&>(config);
    nlohmann::json j;
    for (const auto& f : detail::fields(c)) {
        const std::string key = f.key;
        const auto dot = key.find('.');
        nlohmann::json& slot = j[key.substr(0, dot)][key.substr(dot + 1)];
        switch (f.kind) {
            case detail::FieldKind::Int: slot = *static_cast<std::int64_t*>(f.ptr); break;
            case detail::FieldKind::Real: slot = *static_cast<double*>(f.ptr); break;
            case detail::FieldKind::Bool: slot = *static_cast<bool*>(f.ptr); break;
            case detail::FieldKind::Str: slot = *static_cast<std::string*>(f.ptr); break;
        }
    }
    return j;
}

inline void save_config(const Config& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << to_json(c).dump(2) << "\n";
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// stable hash of the full canonical key=value listing, stored in checkpoints
inline std::uint64_t config_hash(const Config& config) {
    auto& c = const_cast<Config&>(config);
    std::string canon;
    for (const auto& f : detail::fields(c)) {
        canon += f.key;
        canon += '=';
        canon += detail::render(f);
        canon += ';';
    }
    return fnv1a(canon);
}

} // namespace evsp::harness
