#pragma once

#include "eventspeech/audio/features.hpp"
#include "eventspeech/common.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evsp::metrics {

inline const double kMcdFactor = (10.0 / std::log(10.0)) * std::sqrt(2.0);

// type-II DCT of log-mel rows, orthonormal basis, coefficients 1..n_coef (c0 dropped)
inline Mat mel_cepstra(const Mat& log_mel, int n_coef = 13) {
    const Eigen::Index n = log_mel.cols();
    if (log_mel.rows() == 0 || n == 0) throw std::invalid_argument("mel_cepstra: empty input");
    if (n_coef < 1 || n_coef >= n) throw std::invalid_argument("mel_cepstra: bad coefficient count");
    Mat basis(n, n_coef);
    const double scale = std::sqrt(2.0 / double(n));
    for (Eigen::Index k = 1; k <= n_coef; ++k)
        for (Eigen::Index j = 0; j < n; ++j)
            basis(j, k - 1) = scale * std::cos(M_PI * (double(j) + 0.5) * double(k) / double(n));
    return log_mel * basis;
}

struct DtwPath {
    double total = 0.0;  // accumulated local cost along the best path
    std::vector<std::pair<Eigen::Index, Eigen::Index>> path;
};

// monotone warping with steps {(1,0),(0,1),(1,1)}; ties on total cost are
// broken toward fewer path nodes so the optimum is unique and matches the
// brute-force enumeration
inline DtwPath dtw_align(const Mat& a, const Mat& b) {
    const Eigen::Index n = a.rows(), m = b.rows();
    if (n == 0 || m == 0) throw std::invalid_argument("dtw: empty input");
    if (a.cols() != b.cols()) throw std::invalid_argument("dtw: dimension mismatch");
    Mat d(n, m);
    Eigen::MatrixXi nodes(n, m);
    Eigen::MatrixXi from(n, m);  // 0 start, 1 diag, 2 up (i-1), 3 left (j-1)
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            const double cost = (a.row(i) - b.row(j)).norm();
            if (i == 0 && j == 0) {
                d(i, j) = cost;
                nodes(i, j) = 1;
                from(i, j) = 0;
                continue;
            }
            double best = 0.0;
            int best_nodes = 0, step = -1;
            auto consider = [&](Eigen::Index pi, Eigen::Index pj, int s) {
                if (pi < 0 || pj < 0) return;
                const double t = d(pi, pj);
                const int k = nodes(pi, pj);
                if (step < 0 || t < best || (t == best && k < best_nodes)) {
                    best = t;
                    best_nodes = k;
                    step = s;
                }
            };
            consider(i - 1, j - 1, 1);
            consider(i - 1, j, 2);
            consider(i, j - 1, 3);
            d(i, j) = best + cost;
            nodes(i, j) = best_nodes + 1;
            from(i, j) = step;
        }
    DtwPath out;
    out.total = d(n - 1, m - 1);
    Eigen::Index i = n - 1, j = m - 1;
    while (true) {
        out.path.emplace_back(i, j);
        const int s = from(i, j);
        if (s == 0) break;
        if (s == 1) { --i; --j; }
        else if (s == 2) --i;
        else --j;
    }
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

inline double dtw_mcd_cepstra(const Mat& ca, const Mat& cb) {
    DtwPath p = dtw_align(ca, cb);
    return kMcdFactor * p.total / double(p.path.size());
}

inline double dtw_mcd(const Mat& log_mel_ref, const Mat& log_mel_gen, int n_coef = 13) {
    return dtw_mcd_cepstra(mel_cepstra(log_mel_ref, n_coef), mel_cepstra(log_mel_gen, n_coef));
}

// ---- speaker-level normalization ----

struct SpeakerStats {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd std;
};

inline SpeakerStats cepstral_stats(const std::vector<Mat>& ref_log_mels, int n_coef = 13) {
    Eigen::Index total = 0;
    for (const Mat& m : ref_log_mels) total += m.rows();
    if (total < 2) throw std::invalid_argument("cepstral_stats: need at least two frames");
    Mat stacked(total, n_coef);
    Eigen::Index at = 0;
    for (const Mat& m : ref_log_mels) {
        stacked.middleRows(at, m.rows()) = mel_cepstra(m, n_coef);
        at += m.rows();
    }
    SpeakerStats s;
    s.mean = stacked.colwise().mean();
    Mat centered = stacked.rowwise() - s.mean;
    s.std = (centered.array().square().colwise().mean()).sqrt().matrix();
    return s;
}

inline Mat znorm_cepstra(const Mat& cep, const SpeakerStats& stats) {
    Eigen::RowVectorXd safe = stats.std.cwiseMax(1e-8);
    Mat out = cep.rowwise() - stats.mean;
    out.array().rowwise() /= safe.array();
    return out;
}

inline double mcd_sl(const Mat& log_mel_ref, const Mat& log_mel_gen,
                     const std::map<int, SpeakerStats>& stats, int speaker_id, int n_coef = 13) {
    auto it = stats.find(speaker_id);
    if (it == stats.end())
        throw std::invalid_argument("mcd_sl: unknown speaker id " + std::to_string(speaker_id));
    return dtw_mcd_cepstra(znorm_cepstra(mel_cepstra(log_mel_ref, n_coef), it->second),
                           znorm_cepstra(mel_cepstra(log_mel_gen, n_coef), it->second));
}

// ---- pitch accuracy ----

struct F0RmseResult {
    double rmse = 0.0;
    Eigen::Index voiced = 0;  // jointly voiced frames the estimate used
    bool defined = false;
};

inline F0RmseResult f0_rmse(const std::vector<double>& f0_ref, const std::vector<double>& f0_gen) {
    if (f0_ref.size() != f0_gen.size()) throw std::invalid_argument("f0_rmse: length mismatch");
    F0RmseResult r;
    double acc = 0.0;
    for (size_t i = 0; i < f0_ref.size(); ++i)
        if (f0_ref[i] > 0.0 && f0_gen[i] > 0.0) {
            const double d = std::log(f0_ref[i]) - std::log(f0_gen[i]);
            acc += d * d;
            ++r.voiced;
        }
    if (r.voiced == 0) return r;
    r.rmse = std::sqrt(acc / double(r.voiced));
    r.defined = true;
    return r;
}

// same statistic evaluated along a warping path from dtw_align
inline F0RmseResult f0_rmse_aligned(const std::vector<double>& f0_ref, const std::vector<double>& f0_gen,
                                    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& path) {
    F0RmseResult r;
    double acc = 0.0;
    for (const auto& [i, j] : path) {
        const double fr = f0_ref[static_cast<size_t>(i)];
        const double fg = f0_gen[static_cast<size_t>(j)];
        if (fr > 0.0 && fg > 0.0) {
            const double d = std::log(fr) - std::log(fg);
            acc += d * d;
            ++r.voiced;
        }
    }
    if (r.voiced == 0) return r;
    r.rmse = std::sqrt(acc / double(r.voiced));
    r.defined = true;
    return r;
}

// ---- prosodic distribution divergence ----

struct ProsodyContours {
    std::vector<double> log_f0;  // voiced frames only
    std::vector<double> energy;
    std::vector<double> duration;

    void add(const audio::AcousticFeatures& f) {
        for (size_t i = 0; i < f.f0.size(); ++i) {
            if (f.f0[i] > 0.0) log_f0.push_back(std::log(f.f0[i]));
            energy.push_back(f.energy[i]);
            duration.push_back(f.duration[i]);
        }
    }
};

inline double gaussian_kl_1d(double mu_q, double var_q, double mu_p, double var_p) {
    var_q = std::max(var_q, 1e-6);
    var_p = std::max(var_p, 1e-6);
    return 0.5 * std::log(var_p / var_q) + (var_q + (mu_q - mu_p) * (mu_q - mu_p)) / (2.0 * var_p) - 0.5;
}

namespace detail {
inline std::pair<double, double> fit_gaussian(const std::vector<double>& xs) {
    double mu = 0.0;
    for (double x : xs) mu += x;
    mu /= double(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mu) * (x - mu);
    var /= double(xs.size());
    return {mu, var};
}
} // namespace detail

// KL(gen || ref) summed over the prosodic dimensions; a dimension with fewer
// than two samples on either side is skipped
inline double prosody_kl(const ProsodyContours& gen, const ProsodyContours& ref) {
    double total = 0.0;
    const std::vector<double>* gs[] = {&gen.log_f0, &gen.energy, &gen.duration};
    const std::vector<double>* rs[] = {&ref.log_f0, &ref.energy, &ref.duration};
    for (int d = 0; d < 3; ++d) {
        if (gs[d]->size() < 2 || rs[d]->size() < 2) continue;
        auto [mq, vq] = detail::fit_gaussian(*gs[d]);
        auto [mp, vp] = detail::fit_gaussian(*rs[d]);
        total += gaussian_kl_1d(mq, vq, mp, vp);
    }
    return total;
}

// ---- report assembly ----

struct UtteranceMetrics {
    std::string id;
    double mcd = 0.0;
    double mcd_sl = 0.0;
    F0RmseResult f0;
};

struct MetricReport {
    std::vector<UtteranceMetrics> rows;
    double mean_mcd = 0.0;
    double mean_mcd_sl = 0.0;
    double mean_f0_rmse = 0.0;
    Eigen::Index f0_defined_rows = 0;
    double prosody_kl = 0.0;

    void finalize() {
        mean_mcd = mean_mcd_sl = mean_f0_rmse = 0.0;
        f0_defined_rows = 0;
        for (const auto& r : rows) {
            mean_mcd += r.mcd;
            mean_mcd_sl += r.mcd_sl;
            if (r.f0.defined) {
                mean_f0_rmse += r.f0.rmse;
                ++f0_defined_rows;
            }
        }
        if (!rows.empty()) {
            mean_mcd /= double(rows.size());
            mean_mcd_sl /= double(rows.size());
        }
        if (f0_defined_rows > 0) mean_f0_rmse /= double(f0_defined_rows);
    }
};

// hook for external utterance-level scorers (sync/intelligibility models etc.);
// none are bundled
using UtteranceScorer = std::function<double(const std::vector<double>& waveform, const std::string& id)>;

} // namespace evsp::metrics
