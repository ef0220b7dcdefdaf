#pragma once

#include "eventspeech/audio/wav.hpp"
#include "eventspeech/event/codec.hpp"
#include "eventspeech/event/simulate.hpp"
#include "eventspeech/harness/config.hpp"
#include "eventspeech/harness/image.hpp"
#include "eventspeech/model/event_encoder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace evsp::harness {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// per-emotion voice settings; the f0 offset is the configured separation the
// corpus bakes into mean pitch (e.g. happy vs sad)
struct EmotionProfile {
    const char* name;
    double f0_offset;   // Hz, added to the speaker base
    double pitch_depth; // vibrato / contour depth as a fraction of f0
    double rate;        // syllable rate multiplier
    double smile;       // static mouth-corner spread in (0,1)
};

inline const std::array<EmotionProfile, 7>& emotion_profiles() {
    static const std::array<EmotionProfile, 7> table = {{
        {"neutral", 0.0, 0.05, 1.0, 0.50},
        {"happy", 45.0, 0.10, 1.15, 0.90},
        {"sad", -35.0, 0.03, 0.80, 0.15},
        {"angry", 25.0, 0.08, 1.25, 0.35},
        {"fear", 30.0, 0.12, 1.20, 0.30},
        {"surprise", 55.0, 0.14, 1.10, 0.75},
        {"disgust", -15.0, 0.04, 0.90, 0.20},
    }};
    return table;
}

struct SpeakerProfile {
    double f0_base;                  // Hz
    double tilt;                     // harmonic rolloff factor per harmonic
    std::array<std::uint8_t, 3> skin;
    std::uint64_t texture_seed;
};

inline SpeakerProfile speaker_profile(int id) {
    if (id < 0) throw std::invalid_argument("speaker id must be non-negative");
    SpeakerProfile s;
    s.f0_base = 130.0 + 75.0 * (id % 2) + 11.0 * (id / 2);
    s.tilt = id % 2 == 0 ? 0.68 : 0.82;
    s.skin = id % 2 == 0 ? std::array<std::uint8_t, 3>{202, 168, 147}
                         : std::array<std::uint8_t, 3>{168, 138, 118};
    s.texture_seed = 0xFACEull * 31 + static_cast<std::uint64_t>(id);
    return s;
}

struct SampleSpec {
    std::string text;
    int speaker_id = 0;
    int emotion_id = 0;
    double seconds = 1.2;
    std::uint64_t seed = 1;
};

struct Sample {
    std::vector<event::Frame> frames; // T frames
    std::vector<double> waveform;     // T * sample_rate / fps samples
    std::string text;
    int speaker_id = 0;
    int emotion_id = 0;
    model::PseudoLabels labels;       // T-1 rows each
    int fps = 25;
    int sample_rate = 22050;
    std::uint64_t seed = 0;
};

namespace detail {

struct VoiceUnit {
    bool voiced = false;
    double dur = 0.0;
    double loud = 0.0;
    double f0_mult = 1.0;
    double f1 = 500.0, f2 = 1500.0;
    double phase0 = 0.0, vib_phase = 0.0;
    std::vector<double> harmonics;
};

inline void char_formants(char ch, double& f1, double& f2) {
    const auto v = static_cast<unsigned>(std::tolower(static_cast<unsigned char>(ch)));
    f1 = 320.0 + 460.0 * (((v * 2654435761u) >> 8 & 0xffu) / 255.0);
    f2 = 950.0 + 1300.0 * (((v * 2246822519u) >> 8 & 0xffu) / 255.0);
}

inline double resonance(double hz, double f1, double f2) {
    const double b1 = (hz - f1) / 170.0, b2 = (hz - f2) / 260.0;
    return 1.0 + 5.0 * std::exp(-0.5 * b1 * b1) + 2.5 * std::exp(-0.5 * b2 * b2);
}

// the per-syllable excitation jitter drives loudness AND pitch together, so
// the visual envelope carries pitch information text alone does not
inline std::vector<VoiceUnit> plan_units(const SampleSpec& spec, Rng& rng) {
    const auto& emo = emotion_profiles()[static_cast<size_t>(spec.emotion_id)];
    std::vector<VoiceUnit> units;
    for (char ch : spec.text) {
        VoiceUnit u;
        if (ch == ' ') {
            u.voiced = false;
            u.dur = 0.09 / emo.rate;
        } else {
            u.voiced = true;
            const double ud = uniform_real(rng, -1.0, 1.0);
            const double ue = uniform_real(rng, -1.0, 1.0);
            u.dur = 0.16 / emo.rate * (1.0 + 0.2 * ud);
            u.loud = 0.22 * (1.0 + 0.3 * ue);
            u.f0_mult = 1.0 + 0.08 * ue;
            char_formants(ch, u.f1, u.f2);
            u.phase0 = uniform_real(rng, 0.0, 2.0 * M_PI);
            u.vib_phase = uniform_real(rng, 0.0, 2.0 * M_PI);
        }
        units.push_back(u);
    }
    return units;
}

inline double edge_envelope(double tau) {
    constexpr double attack = 0.2, release = 0.3;
    if (tau < attack) return 0.5 * (1.0 - std::cos(M_PI * tau / attack));
    if (tau > 1.0 - release) return 0.5 * (1.0 - std::cos(M_PI * (1.0 - tau) / release));
    return 1.0;
}

inline double soft_ellipse(double dx, double dy, double a, double b) {
    const double d = std::sqrt(dx * dx / (a * a) + dy * dy / (b * b));
    return std::clamp(0.5 + (1.0 - d) * std::min(a, b), 0.0, 1.0);
}

inline void blend(std::uint8_t* px, double r, double g, double b, double cov) {
    px[0] = static_cast<std::uint8_t>(std::lround(px[0] * (1.0 - cov) + r * cov));
    px[1] = static_cast<std::uint8_t>(std::lround(px[1] * (1.0 - cov) + g * cov));
    px[2] = static_cast<std::uint8_t>(std::lround(px[2] * (1.0 - cov) + b * cov));
}

inline double hash01(std::uint64_t seed, int y, int x, int ch) {
    return (mix_seed(seed, (static_cast<std::uint64_t>(y) << 24) ^ (static_cast<std::uint64_t>(x) << 4) ^
                               static_cast<std::uint64_t>(ch)) >>
            11) *
           (1.0 / 9007199254740992.0);
}

} // namespace detail

inline std::vector<double> synth_speech(const SampleSpec& spec, const Config& cfg, int n_frames) {
    const auto& emo = emotion_profiles()[static_cast<size_t>(spec.emotion_id)];
    const auto spk = speaker_profile(spec.speaker_id);
    const int sr = static_cast<int>(cfg.audio_sample_rate);
    const int fps = static_cast<int>(cfg.video_fps);
    if (sr % fps != 0) throw std::runtime_error("sample rate must be divisible by fps");
    const int spf = sr / fps;
    const std::size_t n_samples = static_cast<std::size_t>(n_frames) * spf;

    Rng rng(mix_seed(spec.seed, 0xA0D10));
    auto units = detail::plan_units(spec, rng);
    double natural = 0.0;
    for (const auto& u : units) natural += u.dur;
    const double scale = (double(n_samples) / sr) / natural;

    const double f0_center = spk.f0_base + emo.f0_offset;
    for (auto& u : units) {
        u.dur *= scale;
        if (!u.voiced) continue;
        u.harmonics.clear();
        double total = 0.0;
        const double f0u = f0_center * u.f0_mult;
        for (int h = 1; h <= 10; ++h) {
            const double hz = h * f0u;
            if (hz > 0.45 * sr) break;
            const double a = std::pow(spk.tilt, h - 1) * detail::resonance(hz, u.f1, u.f2);
            u.harmonics.push_back(a);
            total += a;
        }
        for (auto& a : u.harmonics) a /= total;
    }

    std::vector<double> wav(n_samples, 0.0);
    std::size_t cursor = 0;
    double carried = 0.0;
    for (std::size_t ui = 0; ui < units.size() && cursor < n_samples; ++ui) {
        const auto& u = units[ui];
        const double exact = u.dur * sr + carried;
        std::size_t len = static_cast<std::size_t>(std::llround(exact));
        carried = exact - double(len);
        if (ui + 1 == units.size()) len = n_samples - cursor;
        len = std::min(len, n_samples - cursor);
        if (!u.voiced) {
            for (std::size_t n = 0; n < len; ++n) wav[cursor + n] = 0.004 * normal(rng);
            cursor += len;
            continue;
        }
        double phase = u.phase0;
        for (std::size_t n = 0; n < len; ++n) {
            const double tau = len > 1 ? double(n) / double(len - 1) : 0.0;
            const double t_global = double(cursor + n) / sr;
            const double vib = 1.0 + emo.pitch_depth * std::sin(2.0 * M_PI * 5.2 * t_global + u.vib_phase);
            const double decl = 1.0 - 0.06 * double(cursor + n) / double(n_samples);
            const double f0 = f0_center * u.f0_mult * vib * decl;
            phase += 2.0 * M_PI * f0 / sr;
            double s = 0.0;
            for (std::size_t h = 0; h < u.harmonics.size(); ++h) s += u.harmonics[h] * std::sin(double(h + 1) * phase);
            wav[cursor + n] = u.loud * detail::edge_envelope(tau) * s;
        }
        cursor += len;
    }
    return wav;
}

// random gain within +-3 dB plus a mild spectral tilt; the tilt step is
// renormalized to the input RMS so the gain alone sets the level change
inline std::vector<double> spectral_perturb(const std::vector<double>& wav, std::uint64_t seed,
                                            double strength = 1.0) {
    if (strength == 0.0 || wav.empty()) return wav;
    Rng rng(mix_seed(seed, 0x5EC7));
    const double gain_db = uniform_real(rng, -3.0, 3.0) * strength;
    const double alpha = uniform_real(rng, -0.2, 0.2) * strength;

    std::vector<double> out(wav.size());
    out[0] = wav[0];
    for (std::size_t n = 1; n < wav.size(); ++n) out[n] = wav[n] - alpha * wav[n - 1];

    double rms_in = 0.0, rms_out = 0.0;
    for (std::size_t n = 0; n < wav.size(); ++n) {
        rms_in += wav[n] * wav[n];
        rms_out += out[n] * out[n];
    }
    const double renorm = rms_out > 0.0 ? std::sqrt(rms_in / rms_out) : 1.0;
    const double gain = std::pow(10.0, gain_db / 20.0) * renorm;
    for (auto& v : out) v *= gain;
    return out;
}

inline Sample generate_sample(const SampleSpec& spec, const Config& cfg = Config{}) {
    if (spec.text.empty()) throw std::invalid_argument("generate_sample: empty text");
    if (spec.emotion_id < 0 || spec.emotion_id >= static_cast<int>(emotion_profiles().size()))
        throw std::invalid_argument("generate_sample: emotion id out of range");
    if (spec.seconds <= 0.0) throw std::invalid_argument("generate_sample: non-positive duration");

    const int fps = static_cast<int>(cfg.video_fps);
    const int sr = static_cast<int>(cfg.audio_sample_rate);
    const int W = static_cast<int>(cfg.video_width), H = static_cast<int>(cfg.video_height);
    const int spf = sr / fps;
    const int T = std::max(3, static_cast<int>(std::lround(spec.seconds * fps)));

    Sample s;
    s.text = spec.text;
    s.speaker_id = spec.speaker_id;
    s.emotion_id = spec.emotion_id;
    s.fps = fps;
    s.sample_rate = sr;
    s.seed = spec.seed;
    s.waveform = synth_speech(spec, cfg, T);

    // frame-level articulation envelope from the audio itself
    Vec env(T);
    for (int k = 0; k < T; ++k) {
        const long long mid = static_cast<long long>(k) * spf;
        const long long lo = std::max(0ll, mid - spf / 2);
        const long long hi = std::min<long long>(static_cast<long long>(s.waveform.size()), mid + spf / 2);
        double sq = 0.0;
        for (long long n = lo; n < hi; ++n) sq += s.waveform[static_cast<size_t>(n)] * s.waveform[static_cast<size_t>(n)];
        env(k) = std::sqrt(sq / std::max(1ll, hi - lo));
    }
    const double peak = std::max(env.maxCoeff(), 1e-9);
    Vec aperture(T);
    for (int k = 0; k < T; ++k) {
        const double a = env(std::max(0, k - 1)), b = env(k), c = env(std::min(T - 1, k + 1));
        aperture(k) = std::clamp((0.25 * a + 0.5 * b + 0.25 * c) / peak, 0.0, 1.0);
    }

    const auto spk = speaker_profile(spec.speaker_id);
    const auto& emo = emotion_profiles()[static_cast<size_t>(spec.emotion_id)];
    Rng mrng(mix_seed(spec.seed, 0xFACE5));
    const double phi_yaw = uniform_real(mrng, 0.0, 2.0 * M_PI);
    const double phi_pitch = uniform_real(mrng, 0.0, 2.0 * M_PI);
    const double phi_roll = uniform_real(mrng, 0.0, 2.0 * M_PI);
    const double phi_brow = uniform_real(mrng, 0.0, 2.0 * M_PI);
    const double phi_squint = uniform_real(mrng, 0.0, 2.0 * M_PI);
    const double blink_period = 0.8 + 0.4 * uniform_real(mrng, 0.0, 1.0);

    const double cx = W / 2.0, cy = H * 0.47;
    Vec blink_v(T), brow_v(T), squint_v(T), yaw_v(T), pitch_v(T), roll_v(T), width_v(T), height_v(T);

    s.frames.resize(static_cast<size_t>(T));
    for (int k = 0; k < T; ++k) {
        const double t = double(k) / fps;
        const double yaw = 0.10 * std::sin(2.0 * M_PI * 0.33 * t + phi_yaw);
        const double pitch = 0.06 * std::sin(2.0 * M_PI * 0.21 * t + phi_pitch);
        const double roll = 0.04 * std::sin(2.0 * M_PI * 0.17 * t + phi_roll);
        const double tb = std::fmod(t, blink_period) - 0.5 * blink_period;
        const double blink = std::exp(-0.5 * tb * tb / (0.03 * 0.03));
        const double brow = 0.5 + 0.35 * std::sin(2.0 * M_PI * 0.5 * emo.rate * t + phi_brow);
        const double squint = 0.5 + 0.3 * std::sin(2.0 * M_PI * 0.27 * t + phi_squint);
        const double yaw_px = yaw * 22.0, pitch_px = pitch * 20.0;

        event::Frame& f = s.frames[static_cast<size_t>(k)];
        f.width = W;
        f.height = H;
        f.rgb.resize(static_cast<size_t>(W) * H * 3);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                std::uint8_t* px = &f.rgb[3 * (static_cast<size_t>(y) * W + x)];
                const double n0 = detail::hash01(spk.texture_seed, y, x, 0);
                px[0] = static_cast<std::uint8_t>(60 + 50 * n0);
                px[1] = static_cast<std::uint8_t>(62 + 46 * detail::hash01(spk.texture_seed, y, x, 1));
                px[2] = static_cast<std::uint8_t>(70 + 42 * detail::hash01(spk.texture_seed, y, x, 2));

                const double fcov = detail::soft_ellipse(x - (cx + yaw_px), y - (cy + pitch_px), W * 0.36, H * 0.42);
                if (fcov > 0.0) {
                    const double tex = 0.9 + 0.2 * detail::hash01(spk.texture_seed ^ 0x77, y, x, 0);
                    detail::blend(px, spk.skin[0] * tex, spk.skin[1] * tex, spk.skin[2] * tex, fcov);
                }
            }

        auto draw = [&](double ex, double ey, double a, double b, double r, double g, double bl) {
            const int x0 = std::max(0, static_cast<int>(ex - a - 2)), x1 = std::min(W - 1, static_cast<int>(ex + a + 2));
            const int y0 = std::max(0, static_cast<int>(ey - b - 2)), y1 = std::min(H - 1, static_cast<int>(ey + b + 2));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double cov = detail::soft_ellipse(x - ex, y - ey, a, b);
                    if (cov > 0.0) detail::blend(&f.rgb[3 * (static_cast<size_t>(y) * W + x)], r, g, bl, cov);
                }
        };

        const double eye_y = cy - H * 0.14 + pitch_px;
        const double eye_dx = W * 0.14;
        const double eye_h = std::max(0.25, 1.3 * (1.0 - blink) * (1.0 - 0.3 * squint));
        draw(cx - eye_dx + 0.8 * yaw_px, eye_y - roll * eye_dx * 20.0, 1.9, eye_h, 38, 38, 46);
        draw(cx + eye_dx + 0.8 * yaw_px, eye_y + roll * eye_dx * 20.0, 1.9, eye_h, 38, 38, 46);

        const double brow_y = eye_y - 2.4 - 1.8 * brow;
        draw(cx - eye_dx + 0.8 * yaw_px, brow_y, 2.2, 0.6, 52, 40, 34);
        draw(cx + eye_dx + 0.8 * yaw_px, brow_y, 2.2, 0.6, 52, 40, 34);

        const double ap = aperture(k);
        const double mouth_a = W * 0.13 * (1.0 + 0.18 * emo.smile);
        const double mouth_b = 0.5 + H * 0.10 * ap;
        const double mouth_y = cy + H * 0.22 + pitch_px;
        draw(cx + 1.2 * yaw_px, mouth_y, mouth_a, mouth_b, 96, 38, 42);
        if (ap > 0.15) draw(cx + 1.2 * yaw_px, mouth_y, mouth_a * 0.72, mouth_b * 0.62, 30, 12, 14);

        blink_v(k) = std::clamp(blink, 0.02, 0.98);
        brow_v(k) = std::clamp(brow, 0.02, 0.98);
        squint_v(k) = std::clamp(squint, 0.02, 0.98);
        yaw_v(k) = yaw;
        pitch_v(k) = pitch;
        roll_v(k) = roll;
        width_v(k) = mouth_a / W;
        height_v(k) = mouth_b / H;
    }

    const int Tp = T - 1;
    s.labels.lip = Mat(Tp, 4);
    s.labels.au = Mat(Tp, 4);
    s.labels.pose = Mat(Tp, 3);
    auto mid = [](const Vec& v, int k) { return 0.5 * (v(k) + v(k + 1)); };
    for (int k = 0; k < Tp; ++k) {
        s.labels.lip(k, 0) = mid(width_v, k);
        s.labels.lip(k, 1) = mid(height_v, k);
        s.labels.lip(k, 2) = mid(aperture, k);
        s.labels.lip(k, 3) = aperture(k + 1) - aperture(k);
        s.labels.au(k, 0) = mid(blink_v, k);
        s.labels.au(k, 1) = mid(brow_v, k);
        s.labels.au(k, 2) = std::clamp(emo.smile, 0.02, 0.98);
        s.labels.au(k, 3) = mid(squint_v, k);
        s.labels.pose(k, 0) = mid(yaw_v, k);
        s.labels.pose(k, 1) = mid(pitch_v, k);
        s.labels.pose(k, 2) = mid(roll_v, k);
    }
    return s;
}

inline event::EventStream simulate_sample_events(const Sample& s, const Config& cfg) {
    return event::frames_to_events(s.frames, double(s.fps),
                                   {cfg.event_theta_on, cfg.event_theta_off}, cfg.event_log_eps);
}

// ---- corpus on disk ----

inline const std::vector<std::string>& word_bank() {
    static const std::vector<std::string> words = {
        "time", "light", "sound", "river", "stone", "wind", "voice", "morning",
        "dream", "cloud", "paper", "field", "ocean", "story", "garden", "silver",
        "moment", "shadow", "music", "winter", "summer", "candle", "forest", "echo"};
    return words;
}

inline std::vector<SampleSpec> corpus_specs(const Config& cfg) {
    Rng rng(mix_seed(static_cast<std::uint64_t>(cfg.data_seed), 0xC0D));
    std::vector<SampleSpec> specs;
    for (std::int64_t i = 0; i < cfg.data_size; ++i) {
        SampleSpec sp;
        sp.speaker_id = static_cast<int>(i % cfg.model_n_speakers);
        sp.emotion_id = static_cast<int>((i / cfg.model_n_speakers) % cfg.model_n_emotions);
        sp.seconds = uniform_real(rng, cfg.data_min_seconds, cfg.data_max_seconds);
        sp.seed = mix_seed(static_cast<std::uint64_t>(cfg.data_seed), 0x5A0 + static_cast<std::uint64_t>(i));
        const double rate = emotion_profiles()[static_cast<size_t>(sp.emotion_id)].rate;
        double est = 0.0;
        while (est < sp.seconds) {
            const auto& w = word_bank()[static_cast<size_t>(
                uniform_int(rng, 0, static_cast<std::int64_t>(word_bank().size()) - 1))];
            if (!sp.text.empty()) {
                sp.text += ' ';
                est += 0.09 / rate;
            }
            sp.text += w;
            est += 0.16 / rate * double(w.size());
        }
        specs.push_back(std::move(sp));
    }
    return specs;
}

inline std::string sample_dir_name(std::int64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04lld", static_cast<long long>(index));
    return buf;
}

inline void write_sample(const Sample& s, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "frames");
    audio::write_wav((fs::path(dir) / "audio.wav").string(), s.waveform, s.sample_rate);
    for (size_t k = 0; k < s.frames.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.ppm", k);
        write_ppm(s.frames[k], (fs::path(dir) / "frames" / name).string());
    }
    auto mat_json = [](const Mat& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    nlohmann::json meta;
    meta["text"] = s.text;
    meta["speaker_id"] = s.speaker_id;
    meta["emotion_id"] = s.emotion_id;
    meta["fps"] = s.fps;
    meta["sample_rate"] = s.sample_rate;
    meta["n_frames"] = s.frames.size();
    meta["seed"] = s.seed;
    meta["labels"]["lip"] = mat_json(s.labels.lip);
    meta["labels"]["au"] = mat_json(s.labels.au);
    meta["labels"]["pose"] = mat_json(s.labels.pose);
    std::ofstream out(fs::path(dir) / "meta.json");
    out << meta.dump(1) << "\n";
}

inline Sample load_sample(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "meta.json");
    if (!in) throw std::runtime_error("load_sample: no meta.json in " + dir);
    nlohmann::json meta;
    in >> meta;

    Sample s;
    s.text = meta.at("text").get<std::string>();
    s.speaker_id = meta.at("speaker_id").get<int>();
    s.emotion_id = meta.at("emotion_id").get<int>();
    s.fps = meta.at("fps").get<int>();
    s.sample_rate = meta.at("sample_rate").get<int>();
    s.seed = meta.at("seed").get<std::uint64_t>();

    auto mat_from = [](const nlohmann::json& rows) {
        Mat m(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
        return m;
    };
    s.labels.lip = mat_from(meta.at("labels").at("lip"));
    s.labels.au = mat_from(meta.at("labels").at("au"));
    s.labels.pose = mat_from(meta.at("labels").at("pose"));

    auto wav = audio::read_wav((fs::path(dir) / "audio.wav").string());
    s.waveform = std::move(wav.samples);

    const auto n_frames = meta.at("n_frames").get<size_t>();
    s.frames.resize(n_frames);
    for (size_t k = 0; k < n_frames; ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.ppm", k);
        s.frames[k] = read_ppm((fs::path(dir) / "frames" / name).string());
    }
    return s;
}

inline void make_dataset(const Config& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    save_config(cfg, (fs::path(out_dir) / "config.json").string());
    auto specs = corpus_specs(cfg);
    nlohmann::json index = nlohmann::json::array();
    for (size_t i = 0; i < specs.size(); ++i) {
        const std::string dir = (fs::path(out_dir) / sample_dir_name(static_cast<std::int64_t>(i))).string();
        write_sample(generate_sample(specs[i], cfg), dir);
        nlohmann::json e;
        e["dir"] = sample_dir_name(static_cast<std::int64_t>(i));
        e["text"] = specs[i].text;
        e["speaker_id"] = specs[i].speaker_id;
        e["emotion_id"] = specs[i].emotion_id;
        e["seconds"] = specs[i].seconds;
        e["seed"] = specs[i].seed;
        index.push_back(std::move(e));
    }
    nlohmann::json corpus;
    corpus["seed"] = cfg.data_seed;
    corpus["samples"] = std::move(index);
    std::ofstream out(fs::path(out_dir) / "corpus.json");
    out << corpus.dump(1) << "\n";
}

inline std::vector<std::string> dataset_sample_dirs(const std::string& root) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(root) / "corpus.json");
    if (!in) throw std::runtime_error("dataset: no corpus.json in " + root);
    nlohmann::json corpus;
    in >> corpus;
    std::vector<std::string> dirs;
    for (const auto& e : corpus.at("samples")) dirs.push_back((fs::path(root) / e.at("dir").get<std::string>()).string());
    return dirs;
}

inline void simulate_dataset_events(const Config& cfg, const std::string& root) {
    for (const auto& dir : dataset_sample_dirs(root)) {
        Sample s = load_sample(dir);
        event::save_evt((std::filesystem::path(dir) / "events.evt").string(), simulate_sample_events(s, cfg));
    }
}

} // namespace evsp::harness
