#include "eventspeech/harness/plot.hpp"
#include "eventspeech/harness/training.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace evsp;

namespace {

harness::Config load_cfg(const std::string& path) { return harness::load_config(path); }

Mat load_mel_from(const std::string& path, const audio::AudioConfig& acfg) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".npy") return harness::read_npy(path);
    auto wav = audio::read_wav(path);
    return audio::analyze_audio(wav.samples, acfg).mel;
}

event::VoxelGrid voxelize_file(const std::string& evt_path, const harness::Config& cfg) {
    auto events = event::load_evt(evt_path);
    const auto interval = static_cast<std::uint64_t>(std::llround(1e6 / double(cfg.video_fps)));
    int t_prime = 1;
    if (!events.events.empty())
        t_prime = static_cast<int>(events.events.back().t_us / interval) + 1;
    return event::voxelize(events, static_cast<int>(cfg.event_voxel_bins), t_prime, interval);
}

void report_json(const metrics::MetricReport& r, std::ostream& out) {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json e;
        e["id"] = row.id;
        e["mcd"] = row.mcd;
        e["mcd_sl"] = row.mcd_sl;
        if (row.f0.defined)
            e["f0_rmse"] = row.f0.rmse;
        else
            e["f0_rmse"] = nullptr;
        e["f0_voiced_frames"] = row.f0.voiced;
        j["rows"].push_back(std::move(e));
    }
    j["mean_mcd"] = r.mean_mcd;
    j["mean_mcd_sl"] = r.mean_mcd_sl;
    j["mean_f0_rmse"] = r.mean_f0_rmse;
    j["f0_defined_rows"] = r.f0_defined_rows;
    j["prosody_kl"] = r.prosody_kl;
    out << j.dump(2) << "\n";
}

void report_csv(const metrics::MetricReport& r, std::ostream& out) {
    out << "id,mcd,mcd_sl,f0_rmse,f0_voiced_frames\n";
    char line[256];
    for (const auto& row : r.rows) {
        if (row.f0.defined)
            std::snprintf(line, sizeof(line), "%s,%.8g,%.8g,%.8g,%lld\n", row.id.c_str(), row.mcd, row.mcd_sl,
                          row.f0.rmse, static_cast<long long>(row.f0.voiced));
        else
            std::snprintf(line, sizeof(line), "%s,%.8g,%.8g,,0\n", row.id.c_str(), row.mcd, row.mcd_sl);
        out << line;
    }
    std::snprintf(line, sizeof(line), "mean,%.8g,%.8g,%.8g,%lld\n", r.mean_mcd, r.mean_mcd_sl, r.mean_f0_rmse,
                  static_cast<long long>(r.f0_defined_rows));
    out << line;
    std::snprintf(line, sizeof(line), "prosody_kl,%.8g,,,\n", r.prosody_kl);
    out << line;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-conditioned expressive speech synthesis"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_path, ckpt_path, resume_path;
    bool force = false;

    auto* mk = app.add_subcommand("make-dataset", "synthesize the audio-visual corpus");
    mk->add_option("--config", config_path, "config JSON");
    mk->add_option("--out", out_path, "output directory")->required();

    auto* sim = app.add_subcommand("simulate-events", "convert corpus frames to event streams");
    sim->add_option("--config", config_path, "config JSON");
    sim->add_option("--data", data_dir, "dataset directory")->required();

    auto* tr = app.add_subcommand("train", "run the training loop");
    bool verbose = false;
    tr->add_option("--config", config_path, "config JSON");
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--out", out_path, "run directory for checkpoints and logs")->required();
    tr->add_option("--resume", resume_path, "checkpoint to resume from");
    tr->add_flag("--force", force, "accept a checkpoint whose config hash differs");
    tr->add_flag("--verbose", verbose, "periodic loss printout");

    auto* inf = app.add_subcommand("infer", "generate speech from text, reference audio, optional events");
    std::string text, ref_audio, events_path, save_mel, plot_path;
    int emotion = 0, steps = 0;
    std::int64_t speaker = 0;
    std::uint64_t seed = 0;
    bool sample_prior = false;
    inf->add_option("--config", config_path, "config JSON");
    inf->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    inf->add_option("--text", text, "utterance text")->required();
    inf->add_option("--emotion", emotion, "emotion id")->required();
    inf->add_option("--ref-audio", ref_audio, "reference wav for timbre")->required();
    inf->add_option("--events", events_path, "event stream (.evt) to condition on");
    inf->add_option("--speaker", speaker, "speaker id for the visual pathway");
    inf->add_option("--out", out_path, "output wav")->required();
    inf->add_option("--save-mel", save_mel, "also write the mel array (.npy)");
    inf->add_option("--plot", plot_path, "also write a spectrogram image (.png)");
    inf->add_option("--steps", steps, "ODE solver steps (default from config)");
    inf->add_option("--seed", seed, "sampling seed");
    inf->add_flag("--sample-prior", sample_prior, "draw the latent from the prior instead of its mean");
    inf->add_flag("--force", force, "accept a checkpoint whose config hash differs");

    auto* ev = app.add_subcommand("evaluate", "score a checkpoint against a dataset");
    std::string report_format = "json";
    std::int64_t limit = -1;
    ev->add_option("--config", config_path, "config JSON");
    ev->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--report", report_format, "report format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    ev->add_option("--out", out_path, "report file (stdout when omitted)");
    ev->add_option("--limit", limit, "evaluate only the first N samples");
    ev->add_option("--steps", steps, "ODE solver steps (default from config)");
    ev->add_option("--seed", seed, "sampling seed");
    ev->add_flag("--force", force, "accept a checkpoint whose config hash differs");

    auto* pl = app.add_subcommand("plot-mel", "render spectrogram comparison image");
    std::string ref_path, gen_path;
    pl->add_option("--config", config_path, "config JSON");
    pl->add_option("--ref", ref_path, "reference wav or npy")->required();
    pl->add_option("--gen", gen_path, "generated wav or npy");
    pl->add_option("--out", out_path, "output png")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (mk->parsed()) {
            auto cfg = load_cfg(config_path);
            harness::make_dataset(cfg, out_path);
            std::printf("wrote %lld samples to %s\n", static_cast<long long>(cfg.data_size), out_path.c_str());
        } else if (sim->parsed()) {
            auto cfg = load_cfg(config_path);
            harness::simulate_dataset_events(cfg, data_dir);
            std::printf("event streams written under %s\n", data_dir.c_str());
        } else if (tr->parsed()) {
            auto cfg = load_cfg(config_path);
            auto summary = harness::run_training(cfg, data_dir, out_path, resume_path, force, verbose);
            std::printf("ran %ld steps, final loss %.6f, checkpoint %s\n", summary.steps_run,
                        summary.final_total, summary.final_checkpoint.c_str());
        } else if (inf->parsed()) {
            auto cfg = load_cfg(config_path);
            auto m = harness::load_model(cfg, ckpt_path, force);
            const auto acfg = harness::audio_config(cfg);

            model::InferenceRequest req;
            req.text = text;
            req.emotion_id = emotion;
            req.speaker_id = speaker;
            req.ref_audio = audio::read_wav(ref_audio).samples;
            req.solver_steps = steps > 0 ? steps : static_cast<int>(cfg.flow_solver_steps);
            req.seed = seed;
            req.sample_prior = sample_prior;
            event::VoxelGrid grid;
            if (!events_path.empty()) {
                grid = voxelize_file(events_path, cfg);
                req.grid = &grid;
            }
            Mat mel = model::infer_mel(m, req, acfg);
            auto wav = audio::griffin_lim(mel, acfg, 32, seed);
            audio::write_wav(out_path, wav, acfg.sample_rate);
            if (!save_mel.empty()) harness::write_npy(mel, save_mel);
            if (!plot_path.empty()) harness::plot_mel(mel, plot_path);
            std::printf("wrote %zu samples (%lld frames) to %s\n", wav.size(),
                        static_cast<long long>(mel.rows()), out_path.c_str());
        } else if (ev->parsed()) {
            auto cfg = load_cfg(config_path);
            auto m = harness::load_model(cfg, ckpt_path, force);
            auto set = harness::load_training_set(cfg, data_dir);
            auto result = harness::evaluate_corpus(
                m, cfg, set, steps > 0 ? steps : static_cast<int>(cfg.flow_solver_steps), seed, limit);
            if (out_path.empty()) {
                report_format == "json" ? report_json(result.report, std::cout)
                                        : report_csv(result.report, std::cout);
            } else {
                std::ofstream out(out_path);
                if (!out) throw std::runtime_error("cannot write " + out_path);
                report_format == "json" ? report_json(result.report, out) : report_csv(result.report, out);
                std::printf("report written to %s\n", out_path.c_str());
            }
        } else if (pl->parsed()) {
            auto cfg = load_cfg(config_path);
            const auto acfg = harness::audio_config(cfg);
            Mat ref = load_mel_from(ref_path, acfg);
            if (gen_path.empty()) {
                harness::plot_mel(ref, out_path);
            } else {
                harness::plot_mel_pair(ref, load_mel_from(gen_path, acfg), out_path);
            }
            std::printf("wrote %s\n", out_path.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
