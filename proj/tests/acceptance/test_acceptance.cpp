#include "catch2/catch_amalgamated.hpp"

#include "eventspeech/dsp/wavelet.hpp"
#include "eventspeech/event/codec.hpp"
#include "eventspeech/event/simulate.hpp"
#include "eventspeech/harness/plot.hpp"
#include "eventspeech/harness/training.hpp"
#include "unit/gradcheck.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

using namespace evsp;
using harness::Config;
using nn::Var;
using evsp::test::gradcheck;
using evsp::test::random_mat;

namespace {

namespace fs = std::filesystem;

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

fs::path work_root() {
    if (const char* env = std::getenv("EVSP_ACCEPT_DIR")) return fs::path(env);
    return fs::path("acceptance_work");
}

fs::path criterion_dir(const std::string& name) {
    fs::path p = work_root() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// every criterion reports exactly one line, printed whether it passes or not
void report(const char* id, bool pass, const std::string& detail) {
    std::printf("[%s] %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

struct Check {
    bool ok = true;
    std::ostringstream detail;

    Check& add(const std::string& label, bool cond) {
        ok = ok && cond;
        detail << label << (cond ? "" : "(FAIL)") << "  ";
        return *this;
    }
    std::string str() const { return detail.str(); }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

// ---- shared corpus fixtures ------------------------------------------------

Config corpus64_config() {
    Config c;
    c.data_size = 64;
    c.data_min_seconds = 1.0;
    c.data_max_seconds = 1.5;
    c.train_checkpoint_every = 1000000;
    return c;
}

const std::string& corpus64_dir() {
    static std::string dir = [] {
        fs::path p = work_root() / "corpus64";
        Config c = corpus64_config();
        if (!fs::exists(p / "corpus.json")) {
            fs::remove_all(p);
            harness::make_dataset(c, p.string());
            harness::simulate_dataset_events(c, p.string());
        }
        return p.string();
    }();
    return dir;
}

struct RawCorpus {
    std::vector<harness::Sample> samples;
    std::vector<event::EventStream> streams;
};

const RawCorpus& corpus64_raw() {
    static RawCorpus raw = [] {
        RawCorpus r;
        for (const auto& d : harness::dataset_sample_dirs(corpus64_dir())) {
            r.samples.push_back(harness::load_sample(d));
            r.streams.push_back(event::load_evt((fs::path(d) / "events.evt").string()));
        }
        return r;
    }();
    return raw;
}

harness::TrainingSet corpus64_set(const Config& cfg, bool with_events) {
    const auto& raw = corpus64_raw();
    harness::TrainingSet set;
    set.samples = raw.samples;
    for (size_t i = 0; i < raw.samples.size(); ++i)
        set.items.push_back(harness::prepare_item(raw.samples[i], &raw.streams[i], cfg, with_events));
    harness::assign_references(set);
    return set;
}

// ---- independent reference implementations ----------------------------------

// scalar per-pixel reference simulator tracking its own threshold level
std::vector<std::pair<std::uint64_t, int>> pixel_oracle(const std::vector<double>& gray, double fps,
                                                        double theta_pos, double theta_neg, double eps) {
    std::vector<std::pair<std::uint64_t, int>> out;
    const double interval = 1e6 / fps;
    double ref = std::log(gray[0] + eps);
    for (size_t k = 0; k + 1 < gray.size(); ++k) {
        const double target = std::log(gray[k + 1] + eps);
        const double d = target - ref;
        if (d >= 0.0) {
            const long m = static_cast<long>(std::floor(d / theta_pos));
            for (long j = 0; j < m; ++j)
                out.emplace_back(static_cast<std::uint64_t>(std::llround(
                                     double(k) * interval + (double(j) + 0.5) / double(m) * interval)),
                                 +1);
            ref += double(m) * theta_pos;
        } else {
            const long m = static_cast<long>(std::floor(-d / theta_neg));
            for (long j = 0; j < m; ++j)
                out.emplace_back(static_cast<std::uint64_t>(std::llround(
                                     double(k) * interval + (double(j) + 0.5) / double(m) * interval)),
                                 -1);
            ref -= double(m) * theta_neg;
        }
    }
    return out;
}

struct BruteForceDtw {
    const Mat& cost;
    double best_total = 0.0;
    int best_nodes = 0;
    bool found = false;

    explicit BruteForceDtw(const Mat& c) : cost(c) { walk(0, 0, 0.0, 0); }

    void walk(Eigen::Index i, Eigen::Index j, double total, int nodes) {
        total += cost(i, j);
        ++nodes;
        if (i == cost.rows() - 1 && j == cost.cols() - 1) {
            if (!found || total < best_total || (total == best_total && nodes < best_nodes)) {
                best_total = total;
                best_nodes = nodes;
                found = true;
            }
            return;
        }
        if (i + 1 < cost.rows() && j + 1 < cost.cols()) walk(i + 1, j + 1, total, nodes);
        if (i + 1 < cost.rows()) walk(i + 1, j, total, nodes);
        if (j + 1 < cost.cols()) walk(i, j + 1, total, nodes);
    }
};

double log_sum_exp(const std::vector<double>& xs) {
    const double m = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

double nce_oracle(const Mat& zq, const Mat& zk, double tau) {
    const Eigen::Index n = zq.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> row;
        for (Eigen::Index j = 0; j < n; ++j) row.push_back(zq.row(i).dot(zk.row(j)) / tau);
        total += log_sum_exp(row) - row[static_cast<size_t>(i)];
    }
    return total / double(n);
}

Mat random_unit_rows(Rng& rng, Eigen::Index n, Eigen::Index d) {
    Mat z(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        do {
            for (Eigen::Index j = 0; j < d; ++j) z(i, j) = normal(rng, 0.0, 1.0);
        } while (z.row(i).norm() < 1e-6);
        z.row(i) /= z.row(i).norm();
    }
    return z;
}

model::LatentDistribution dist_of(double mu, double sigma) {
    Mat m(1, 1), ls(1, 1);
    m(0, 0) = mu;
    ls(0, 0) = std::log(sigma);
    return {nn::param(m), nn::param(ls)};
}

int run_cli(const std::string& args) {
#ifdef EVSP_CLI_PATH
    const std::string cmd = std::string(EVSP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
#else
    const std::string cmd = std::string("./eventspeech ") + args + " > /dev/null 2>&1";
#endif
    return std::system(cmd.c_str());
}

bool all_finite(const nlohmann::json& j) {
    if (j.is_number()) return std::isfinite(j.get<double>());
    if (j.is_object() || j.is_array()) {
        for (const auto& v : j)
            if (!all_finite(v)) return false;
        return true;
    }
    return !j.is_null();
}

} // namespace

// =============================================================================

TEST_CASE("A1 overfit reconstruction") {
    const double t0 = now_s();
    const fs::path dir = criterion_dir("a1");

    Config cfg;
    cfg.data_size = 4;
    cfg.data_min_seconds = 0.8;
    cfg.data_max_seconds = 1.2;
    cfg.train_steps = 5000;
    cfg.train_batch = 4;
    cfg.train_peak_lr = 2e-3;
    cfg.train_checkpoint_every = 1000000;

    const std::string data = (dir / "data").string();
    harness::make_dataset(cfg, data);
    harness::simulate_dataset_events(cfg, data);
    auto set = harness::load_training_set(cfg, data);

    Rng prng(1);
    model::EventSpeechModel probe(prng, harness::model_config(cfg));
    nn::ParamMap pm;
    probe.params(pm);
    const std::size_t n_params = pm.count();

    auto sum = harness::run_training(cfg, set, (dir / "run").string());
    auto m = harness::load_model(cfg, sum.final_checkpoint);

    const Mat mean_frame = harness::mean_mel_frame(set.items);
    double recon = 0.0, base = 0.0;
    for (size_t i = 0; i < set.items.size(); ++i) {
        const auto& it = set.items[i];
        Mat rec = harness::posterior_reconstruction(m, it, 20, 77 + static_cast<std::uint64_t>(i));
        Mat flat = mean_frame.replicate(it.feats.mel.rows(), 1);
        recon += metrics::dtw_mcd(it.feats.mel, rec);
        base += metrics::dtw_mcd(it.feats.mel, flat);
    }
    recon /= double(set.items.size());
    base /= double(set.items.size());

    const double step10 = sum.totals.at(9);
    const double wall = now_s() - t0;

    Check c;
    c.add("params=" + std::to_string(n_params) + "<=1M", n_params <= 1000000)
        .add("steps=" + std::to_string(sum.steps_run) + "<=5000", sum.steps_run <= 5000)
        .add("recon_mcd=" + fmt("%.2f", recon) + "<=0.5*" + fmt("%.2f", base), recon <= 0.5 * base)
        .add("loss " + fmt("%.3f", step10) + "->" + fmt("%.3f", sum.final_total) + " drop>=90%",
             sum.final_total <= 0.1 * step10)
        .add("wall=" + fmt("%.0f", wall) + "s<=1800s", wall <= 1800.0);
    report("A1", c.ok, c.str());
    REQUIRE(c.ok);
}

TEST_CASE("A2 event conditioning beats text-only") {
    const fs::path dir = criterion_dir("a2");
    Config base = corpus64_config();
    base.train_steps = 2000;

    int event_wins = 0;
    std::ostringstream seeds_detail;
    for (long seed = 1; seed <= 3; ++seed) {
        double mcd[2], f0[2];
        for (int variant = 0; variant < 2; ++variant) {
            Config cfg = base;
            cfg.train_seed = seed;
            cfg.train_use_events = variant == 0;
            auto set = corpus64_set(cfg, variant == 0);
            const std::string run =
                (dir / ("s" + std::to_string(seed) + (variant == 0 ? "_ev" : "_tx"))).string();
            auto sum = harness::run_training(cfg, set, run);
            auto m = harness::load_model(cfg, sum.final_checkpoint);
            auto ev = harness::evaluate_corpus(m, cfg, set, 10, 500);
            mcd[variant] = ev.report.mean_mcd;
            f0[variant] = ev.report.mean_f0_rmse;
        }
        const bool win = mcd[0] < mcd[1] && f0[0] < f0[1];
        event_wins += win ? 1 : 0;
        seeds_detail << "s" << seed << ":mcd " << fmt("%.2f", mcd[0]) << (mcd[0] < mcd[1] ? "<" : ">=")
                     << fmt("%.2f", mcd[1]) << ",f0 " << fmt("%.3f", f0[0]) << (f0[0] < f0[1] ? "<" : ">=")
                     << fmt("%.3f", f0[1]) << (win ? " win" : " loss") << "  ";
    }

    Check c;
    c.add(seeds_detail.str() + "wins=" + std::to_string(event_wins) + "/3>=2", event_wins >= 2);
    report("A2", c.ok, c.str());
    REQUIRE(c.ok);
}

TEST_CASE("A3 voxel bin cost and quality trend") {
    const double t0 = now_s();
    const fs::path dir = criterion_dir("a3");
    Config base = corpus64_config();

    // per-step cost: identical workload, only the bin count changing; the
    // minimum over repeats suppresses scheduler noise
    std::map<int, double> per_step;
    for (int rep = 0; rep < 3; ++rep) {
        for (int bins : {1, 3, 6}) {
            Config cfg = base;
            cfg.event_voxel_bins = bins;
            cfg.train_steps = 30;
            auto set = corpus64_set(cfg, true);
            const std::string run = (dir / ("time_b" + std::to_string(bins))).string();
            fs::remove_all(run);
            const double s0 = now_s();
            auto sum = harness::run_training(cfg, set, run);
            const double ms = 1000.0 * (now_s() - s0) / double(sum.steps_run);
            auto it = per_step.find(bins);
            if (it == per_step.end() || ms < it->second) per_step[bins] = ms;
        }
    }

    int n3_wins = 0;
    std::ostringstream quality;
    for (long seed = 1; seed <= 3; ++seed) {
        double mcd[2];
        int k = 0;
        for (int bins : {1, 3}) {
            Config cfg = base;
            cfg.event_voxel_bins = bins;
            cfg.train_steps = 600;
            cfg.train_seed = seed;
            auto set = corpus64_set(cfg, true);
            const std::string run = (dir / ("q_s" + std::to_string(seed) + "_b" + std::to_string(bins))).string();
            auto sum = harness::run_training(cfg, set, run);
            auto m = harness::load_model(cfg, sum.final_checkpoint);
            auto ev = harness::evaluate_corpus(m, cfg, set, 10, 640);
            mcd[k++] = ev.report.mean_mcd;
        }
        n3_wins += mcd[1] <= mcd[0] ? 1 : 0;
        quality << "s" << seed << ":" << fmt("%.2f", mcd[1]) << (mcd[1] <= mcd[0] ? "<=" : ">")
                << fmt("%.2f", mcd[0]) << "  ";
    }
    const double wall = now_s() - t0;

    Check c;
    c.add("ms/step " + fmt("%.0f", per_step[1]) + "<" + fmt("%.0f", per_step[3]) + "<" + fmt("%.0f", per_step[6]),
          per_step[1] < per_step[3] && per_step[3] < per_step[6])
        .add(quality.str() + "n3_wins=" + std::to_string(n3_wins) + "/3>=2", n3_wins >= 2)
        .add("wall=" + fmt("%.0f", wall) + "s<=2700s", wall <= 2700.0);
    report("A3", c.ok, c.str());
    REQUIRE(c.ok);
}

TEST_CASE("A4 reference oracles") {
    Check c;

    {
        Rng rng(4001);
        bool sim_ok = true;
        for (int trial = 0; trial < 200 && sim_ok; ++trial) {
            const int T = 2 + int(uniform_int(rng, 0, 4));
            const int H = 8, W = 8;
            std::vector<std::vector<double>> gray(T, std::vector<double>(size_t(H) * W));
            for (auto& f : gray)
                for (auto& p : f) p = double(uniform_int(rng, 0, 255));
            const double tp = 0.1 + 0.2 * uniform_real(rng, 0.0, 1.0);
            const double tn = 0.1 + 0.2 * uniform_real(rng, 0.0, 1.0);
            auto s = event::gray_frames_to_events(gray, H, W, 25.0, event::Thresholds{tp, tn}, 1e-3);

            std::vector<event::Event> expected;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    std::vector<double> px(static_cast<size_t>(T));
                    for (int k = 0; k < T; ++k) px[size_t(k)] = gray[size_t(k)][size_t(y) * W + x];
                    for (const auto& [t, pol] : pixel_oracle(px, 25.0, tp, tn, 1e-3)) {
                        event::Event e;
                        e.t_us = t;
                        e.x = static_cast<std::uint16_t>(x);
                        e.y = static_cast<std::uint16_t>(y);
                        e.polarity = static_cast<std::int8_t>(pol);
                        expected.push_back(e);
                    }
                }
            std::sort(expected.begin(), expected.end(), event::event_order);
            sim_ok = s.events == expected;
        }
        c.add("event_sim 200 cases exact", sim_ok);
    }

    {
        Rng rng(4002);
        const int t_prime = 4, N = 3, H = 4, W = 4;
        const std::uint64_t I = 40000;
        event::EventStream s;
        s.width = W;
        s.height = H;
        for (int i = 0; i < 500; ++i) {
            event::Event e;
            e.t_us = static_cast<std::uint64_t>(uniform_int(rng, 0, std::int64_t(I) * t_prime));
            e.x = static_cast<std::uint16_t>(uniform_int(rng, 0, W - 1));
            e.y = static_cast<std::uint16_t>(uniform_int(rng, 0, H - 1));
            e.polarity = uniform_int(rng, 0, 1) ? 1 : -1;
            s.events.push_back(e);
        }
        std::sort(s.events.begin(), s.events.end(), event::event_order);
        auto g = event::voxelize(s, N, t_prime, I);

        std::map<std::tuple<int, int, int, int>, double> expected;
        bool vox_ok = true;
        for (const auto& e : s.events) {
            int k = -1, b = -1;
            if (e.t_us == I * t_prime) {
                k = t_prime - 1;
                b = N - 1;
            } else {
                for (int kk = 0; kk < t_prime; ++kk)
                    if (e.t_us >= I * std::uint64_t(kk) && e.t_us < I * std::uint64_t(kk + 1)) { k = kk; break; }
                const std::uint64_t r = e.t_us - I * std::uint64_t(k);
                for (int bb = 0; bb < N; ++bb)
                    if (r * N >= I * std::uint64_t(bb) && r * N < I * std::uint64_t(bb + 1)) { b = bb; break; }
            }
            expected[{k, b, e.y, e.x}] += double(e.polarity);
        }
        for (int k = 0; k < t_prime && vox_ok; ++k)
            for (int b = 0; b < N && vox_ok; ++b)
                for (int y = 0; y < H && vox_ok; ++y)
                    for (int x = 0; x < W && vox_ok; ++x) {
                        auto it = expected.find({k, b, y, x});
                        vox_ok = g.at(k, b, y, x) == (it == expected.end() ? 0.0 : it->second);
                    }
        c.add("voxelizer exact", vox_ok);
    }

    {
        Rng rng(4003);
        bool dtw_ok = true;
        const std::pair<int, int> shapes[] = {{5, 7}, {7, 5}, {4, 4}, {6, 3}, {1, 5}, {7, 7}, {2, 2}};
        for (auto [n, m] : shapes) {
            Mat ca = random_mat(rng, n, 13);
            Mat cb = random_mat(rng, m, 13);
            Mat cost(n, m);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) cost(i, j) = (ca.row(i) - cb.row(j)).norm();
            BruteForceDtw bf(cost);
            metrics::DtwPath p = metrics::dtw_align(ca, cb);
            dtw_ok = dtw_ok && std::abs(p.total - bf.best_total) < 1e-12 &&
                     static_cast<int>(p.path.size()) == bf.best_nodes;
        }
        c.add("dtw exact<=7", dtw_ok);
    }

    {
        Rng rng(4004);
        const int D = 6;
        model::SsmLayer layer(rng, D);
        layer.a_log = nn::param(random_mat(rng, 1, D, 0.3));
        layer.d_skip = nn::param(random_mat(rng, 1, D));
        double worst = 0.0;
        for (Eigen::Index T : {1, 2, 5, 16, 64}) {
            Mat x = random_mat(rng, T, D, 0.5);
            Var y = layer.scan(nn::constant(x));
            Mat A = (-layer.a_log->val.array().exp()).matrix();
            Mat expected(T, D);
            Vec h = Vec::Zero(D);
            for (Eigen::Index t = 0; t < T; ++t) {
                Mat xt = x.row(t);
                Mat dt_lin = xt * layer.dt_proj.W->val + layer.dt_proj.b->val;
                Mat bt = xt * layer.b_proj.W->val + layer.b_proj.b->val;
                Mat ct = xt * layer.c_proj.W->val + layer.c_proj.b->val;
                for (int i = 0; i < D; ++i) {
                    const double dt = std::log1p(std::exp(dt_lin(0, i)));
                    h(i) = std::exp(dt * A(0, i)) * h(i) + dt * bt(0, i) * x(t, i);
                    expected(t, i) = ct(0, i) * h(i) + layer.d_skip->val(0, i) * x(t, i);
                }
            }
            worst = std::max(worst, (y->val - expected).cwiseAbs().maxCoeff());
        }
        c.add("ssm_scan<=1e-6", worst <= 1e-6);
    }

    {
        Rng rng(4005);
        double worst = 0.0;
        for (auto w : {dsp::Wavelet::haar, dsp::Wavelet::db4})
            for (Eigen::Index T : {8, 16, 64, 512})
                for (int levels : {1, 2}) {
                    Mat x = random_mat(rng, T, 3);
                    auto bands = dsp::dwt(nn::constant(x), levels, w);
                    Mat back = dsp::idwt(bands, w)->val;
                    worst = std::max(worst, (back - x).cwiseAbs().maxCoeff());
                }
        c.add("wavelet_recon<=1e-6", worst <= 1e-6);
    }

    {
        Rng rng(4006);
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::Index n = 1 + uniform_int(rng, 0, 7);
            const Eigen::Index d = 2 + uniform_int(rng, 0, 14);
            const double tau = uniform_real(rng, 0.05, 2.0);
            Mat zv = random_unit_rows(rng, n, d);
            Mat za = random_unit_rows(rng, n, d);
            const double one_way = model::info_nce(nn::param(zv), nn::param(za), tau, false)->val(0, 0);
            const double sym = model::info_nce(nn::param(zv), nn::param(za), tau, true)->val(0, 0);
            worst = std::max(worst, std::abs(one_way - nce_oracle(zv, za, tau)));
            worst = std::max(worst, std::abs(sym - 0.5 * (nce_oracle(zv, za, tau) + nce_oracle(za, zv, tau))));
        }
        const double hand =
            model::info_nce(nn::param(Mat(Mat::Identity(2, 2))), nn::param(Mat(Mat::Identity(2, 2))), 1.0)->val(0, 0);
        c.add("info_nce_lse<=1e-6", worst <= 1e-6);
        c.add("hand=" + fmt("%.5f", hand), std::abs(hand - 0.31326) <= 1e-4);
    }

    report("A4", c.ok, c.str());
    REQUIRE(c.ok);
}

TEST_CASE("A5 gradient checks") {
    const double t0 = now_s();
    Check c;

    {
        Rng rng(5001);
        model::FlowDecoderConfig fc{4, 4, 8, 4, 3, 2, 1e-4};
        model::FlowDecoder dec(rng, fc);
        Var cond = nn::param(random_mat(rng, 2, 4));
        Mat x1 = random_mat(rng, 2, 4);
        const double err = gradcheck(
            [&](const std::vector<Var>&) {
                Rng r(5);
                return dec.cfm_loss(x1, cond, r);
            },
            {dec.in_proj.W, dec.out_proj.W, dec.conv_blocks[0].conv.taps[1], dec.attn.q_proj.W, cond});
        c.add("cfm=" + fmt("%.1e", err), err < 1e-4);
    }

    {
        Rng rng(5002);
        auto mu_q = nn::param(random_mat(rng, 3, 2));
        auto ls_q = nn::param(random_mat(rng, 3, 2, 0.3));
        auto mu_p = nn::param(random_mat(rng, 3, 2));
        auto ls_p = nn::param(random_mat(rng, 3, 2, 0.3));
        const double err = gradcheck(
            [&](const std::vector<Var>& v) {
                return model::kl_loss({v[0], v[1]}, {v[2], v[3]});
            },
            {mu_q, ls_q, mu_p, ls_p});
        c.add("kl=" + fmt("%.1e", err), err < 1e-4);
    }

    {
        Rng rng(5003);
        auto zv = nn::param(random_mat(rng, 4, 5));
        auto za = nn::param(random_mat(rng, 4, 5));
        const double err = gradcheck(
            [&](const std::vector<Var>& v) { return model::info_nce(v[0], v[1], 0.5, true); }, {zv, za});
        c.add("info_nce=" + fmt("%.1e", err), err < 1e-4);
    }

    {
        Rng rng(5004);
        std::vector<Var> heads;
        for (int i = 0; i < 5; ++i) heads.push_back(nn::param(random_mat(rng, 6, 3)));
        const double err = gradcheck(
            [&](const std::vector<Var>& v) {
                return model::orthogonality_penalty({v[0], v[1], v[2], v[3], v[4]});
            },
            heads);
        c.add("orthogonality=" + fmt("%.1e", err), err < 1e-4);
    }

    {
        Rng rng(5005);
        model::FuseConfig fc;
        fc.dim = 3;
        fc.dim_out = 3;
        fc.dim_timbre = 2;
        model::DualPathFuse fuse(rng, fc);
        auto f_p = nn::param(random_mat(rng, 4, 3));
        auto f_t = nn::param(random_mat(rng, 4, 3));
        auto tmb = nn::param(random_mat(rng, 1, 2));
        nn::ParamMap pm;
        fuse.params(pm, "fuse");
        std::vector<Var> leaves = {f_p, f_t, tmb};
        for (auto& it : pm.items) leaves.push_back(it.second);
        const double err = gradcheck(
            [&](const std::vector<Var>& v) {
                model::DualPathFuse f;
                f.cfg = fc;
                f.tau_branch.k = 3;
                f.tau_branch.taps = {v[3], v[4], v[5]};
                f.tau_branch.b = v[6];
                f.omega_branch.W = v[7];
                f.omega_branch.b = v[8];
                f.gate_logit = v[9];
                f.w_f.W = v[10];
                f.w_f.b = v[11];
                return nn::sum_all(nn::square(f.forward(v[0], v[1], v[2])));
            },
            leaves);
        c.add("fusion=" + fmt("%.1e", err), err < 1e-4);
    }

    const double wall = now_s() - t0;
    c.add("wall=" + fmt("%.1f", wall) + "s<=120s", wall <= 120.0);
    report("A5", c.ok, c.str());
    REQUIRE(c.ok);
}

TEST_CASE("A6 numerical closed forms") {
    Check c;

    {
        const double zero = model::kl_loss(dist_of(0.7, 1.3), dist_of(0.7, 1.3))->val(0, 0);
        const double half = model::kl_loss(dist_of(1.0, 1.0), dist_of(0.0, 1.0))->val(0, 0);
        c.add("kl_identical=" + fmt("%.1e", std::abs(zero)), std::abs(zero) <= 1e-9);
        c.add("kl_unit_shift-0.5=" + fmt("%.1e", std::abs(half - 0.5)), std::abs(half - 0.5) <= 1e-9);
    }

    {
        const double mu_q = 0.8, s_q = 1.4, mu_p = -0.3, s_p = 0.7;
        const double closed = model::kl_loss(dist_of(mu_q, s_q), dist_of(mu_p, s_p))->val(0, 0);
        Rng rng(6001);
        double acc = 0.0;
        const int n = 400000;
        for (int i = 0; i < n; ++i) {
            const double z = mu_q + s_q * normal(rng, 0.0, 1.0);
            const double lq = -0.5 * std::pow((z - mu_q) / s_q, 2) - std::log(s_q);
            const double lp = -0.5 * std::pow((z - mu_p) / s_p, 2) - std::log(s_p);
            acc += lq - lp;
        }
        const double mc = acc / double(n);
        c.add("kl_mc rel=" + fmt("%.4f", std::abs(mc - closed) / closed),
              std::abs(mc - closed) <= 0.02 * closed);
    }

    {
        Rng rng(6002);
        Mat x0 = random_mat(rng, 2, 3);
        Mat a(2, 3);
        a << 0.9, -0.6, 0.4, 0.7, -0.8, 0.5;
        Mat exact = (x0.array() * a.array().exp()).matrix();
        auto field = [&](const Mat& x, double) { return Mat((x.array() * a.array()).matrix()); };
        std::vector<double> errs;
        for (int steps : {10, 20, 40})
            errs.push_back((model::euler_integrate(field, x0, steps) - exact).norm());
        bool halves = true;
        std::ostringstream r;
        for (size_t i = 0; i + 1 < errs.size(); ++i) {
            const double ratio = errs[i + 1] / errs[i];
            r << fmt("%.3f", ratio) << " ";
            halves = halves && ratio >= 0.4 && ratio <= 0.6;
        }
        c.add("euler_ratios=" + r.str(), halves);
    }

    {
        Rng rng(6003);
        bool flat_ok = true;
        for (Eigen::Index n : {2, 5, 8}) {
            const double loss =
                model::info_nce(nn::param(random_unit_rows(rng, n, 6)), nn::param(random_unit_rows(rng, n, 6)), 1e6)
                    ->val(0, 0);
            flat_ok = flat_ok && std::abs(loss - std::log(double(n))) < 1e-3;
        }
        c.add("info_nce->logN", flat_ok);
    }

    report("A6", c.ok, c.str());
    REQUIRE(c.ok);
}

TEST_CASE("A7 codec and persistence") {
    const fs::path dir = criterion_dir("a7");
    Check c;

    {
        Rng rng(7001);
        bool codec_ok = true;
        const std::string path = (dir / "probe.evt").string();
        for (int i = 0; i < 1000 && codec_ok; ++i) {
            event::EventStream s;
            s.width = static_cast<std::uint16_t>(1 + uniform_int(rng, 0, 63));
            s.height = static_cast<std::uint16_t>(1 + uniform_int(rng, 0, 63));
            const auto n = uniform_int(rng, 0, 200);
            std::uint64_t t = 0;
            for (std::int64_t k = 0; k < n; ++k) {
                event::Event e;
                t += static_cast<std::uint64_t>(uniform_int(rng, 0, 5000));
                e.t_us = t;
                e.x = static_cast<std::uint16_t>(uniform_int(rng, 0, s.width - 1));
                e.y = static_cast<std::uint16_t>(uniform_int(rng, 0, s.height - 1));
                e.polarity = uniform_int(rng, 0, 1) ? 1 : -1;
                s.events.push_back(e);
            }
            std::sort(s.events.begin(), s.events.end(), event::event_order);
            event::save_evt(path, s);
            codec_ok = event::load_evt(path) == s;
        }
        c.add("evt 1000 round-trips exact", codec_ok);
    }

    Config cfg;
    cfg.data_size = 2;
    cfg.data_min_seconds = 0.5;
    cfg.data_max_seconds = 0.7;
    cfg.model_dim_hidden = 32;
    cfg.model_dim_head = 8;
    cfg.model_dim_visual = 32;
    cfg.model_dim_fused = 32;
    cfg.model_dim_bridge = 32;
    cfg.model_text_dim = 32;
    cfg.model_text_blocks = 1;
    cfg.model_base_channels = 4;
    cfg.model_heads = 2;
    cfg.flow_width = 32;
    cfg.flow_decoder_blocks = 2;
    cfg.flow_time_dim = 16;
    cfg.train_steps = 6;
    cfg.train_checkpoint_every = 3;

    {
        Rng rng(7002);
        model::EventSpeechModel m(rng, harness::model_config(cfg));
        nn::ParamMap pm;
        m.params(pm);
        const std::string path = (dir / "probe.evck").string();
        harness::save_checkpoint(path, harness::snapshot(pm, nullptr, harness::config_hash(cfg), 0, Rng(1)));

        auto probe = [&](const model::EventSpeechModel& mm) {
            auto tokens = model::tokenize("persistence probe");
            Rng srng(2);
            Mat sty = random_mat(srng, 1, cfg.model_dim_style);
            auto bundle = mm.gen.make_bundle(tokens, 2, nn::constant(sty));
            return mm.gen.infer_mel(bundle, 14, 4, 99);
        };
        const Mat before = probe(m);
        auto m2 = harness::load_model(cfg, path);
        const Mat after = probe(m2);
        c.add("checkpoint probe identical",
              before.rows() == after.rows() && (before - after).cwiseAbs().maxCoeff() == 0.0);
    }

    {
        const std::string data = (dir / "data").string();
        harness::make_dataset(cfg, data);
        auto set = harness::load_training_set(cfg, data);
        auto full = harness::run_training(cfg, set, (dir / "full").string());
        auto resumed = harness::run_training(cfg, set, (dir / "resumed").string(),
                                             (dir / "full" / "ckpt_000003.evck").string());
        const double gap = std::abs(full.final_total - resumed.final_total);
        c.add("resume gap=" + fmt("%.1e", gap) + "<=1e-5", gap <= 1e-5);
    }

    report("A7", c.ok, c.str());
    REQUIRE(c.ok);
}

TEST_CASE("A8 end-to-end pipeline") {
    const fs::path dir = criterion_dir("a8");
    Check c;

    Config cfg = corpus64_config();
    cfg.train_steps = 100;
    cfg.train_checkpoint_every = 1000000;
    cfg.flow_solver_steps = 10;
    const std::string cfg_path = (dir / "config.json").string();
    harness::save_config(cfg, cfg_path);

    const std::string data = (dir / "data").string();
    const std::string run = (dir / "run").string();
    c.add("make-dataset", run_cli("make-dataset --config " + cfg_path + " --out " + data) == 0);
    c.add("simulate-events", run_cli("simulate-events --config " + cfg_path + " --data " + data) == 0);
    c.add("train", run_cli("train --config " + cfg_path + " --data " + data + " --out " + run) == 0);

    const std::string wav = (dir / "gen.wav").string();
    const std::string mel = (dir / "gen.npy").string();
    c.add("infer",
          run_cli("infer --config " + cfg_path + " --ckpt " + run + "/final.evck --text \"silver morning river\"" +
                  " --emotion 1 --ref-audio " + data + "/sample_0000/audio.wav --events " + data +
                  "/sample_0000/events.evt --out " + wav + " --save-mel " + mel + " --steps 10 --seed 3") == 0);

    const std::string png = (dir / "cmp.png").string();
    c.add("plot",
          run_cli("plot-mel --ref " + data + "/sample_0000/audio.wav --gen " + mel + " --out " + png +
                  " --config " + cfg_path) == 0);

    const std::string report_json = (dir / "report.json").string();
    const std::string report_csv = (dir / "report.csv").string();
    c.add("evaluate json", run_cli("evaluate --config " + cfg_path + " --ckpt " + run + "/final.evck --data " +
                                   data + " --report json --out " + report_json + " --steps 10") == 0);
    c.add("evaluate csv", run_cli("evaluate --config " + cfg_path + " --ckpt " + run + "/final.evck --data " +
                                  data + " --report csv --out " + report_csv + " --steps 10 --limit 4") == 0);

    auto wav_data = audio::read_wav(wav);
    c.add("wav nonempty", wav_data.samples.size() > 1000);
    Mat gen_mel = harness::read_npy(mel);
    c.add("mel finite", gen_mel.size() > 0 && gen_mel.allFinite());
    c.add("png exists", fs::exists(png) && fs::file_size(png) > 100);

    std::ifstream jr(report_json);
    c.add("report readable", jr.good());
    if (jr.good()) {
        nlohmann::json rep = nlohmann::json::parse(jr);
        c.add("report fields finite",
              rep.contains("utterances") && rep["utterances"].size() == 64 && all_finite(rep));
    }
    std::ifstream cr(report_csv);
    std::string csv_text((std::istreambuf_iterator<char>(cr)), std::istreambuf_iterator<char>());
    c.add("csv has rows", csv_text.find("mean,") != std::string::npos &&
                              csv_text.find("nan") == std::string::npos &&
                              csv_text.find("inf") == std::string::npos);

    report("A8", c.ok, c.str());
    REQUIRE(c.ok);
}
