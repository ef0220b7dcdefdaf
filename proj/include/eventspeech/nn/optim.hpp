#pragma once

#include "eventspeech/nn/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace evsp::nn {

// one-cycle learning-rate schedule: linear warmup to peak_lr over
// warmup_frac of total steps, then cosine decay to peak_lr/final_div
struct OneCycle {
    double peak_lr = 1e-3;
    double warmup_frac = 0.1;
    double final_div = 25.0;
    long total_steps = 1000;

    double lr_at(long step) const {
        if (total_steps <= 0) return peak_lr;
        const double s = std::min<double>(double(step), double(total_steps));
        const double warm = warmup_frac * double(total_steps);
        if (warm > 0.0 && s < warm) {
            const double start = peak_lr / final_div;
            return start + (peak_lr - start) * (s / warm);
        }
        const double denom = std::max(1.0, double(total_steps) - warm);
        const double t = (s - warm) / denom;
        const double floor_lr = peak_lr / final_div;
        return floor_lr + 0.5 * (peak_lr - floor_lr) * (1.0 + std::cos(M_PI * t));
    }
};

struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 1e-4;
    long t = 0;
    std::vector<Mat> m, v;

    void init(const ParamMap& pm) {
        m.clear();
        v.clear();
        for (const auto& it : pm.items) {
            m.push_back(Mat::Zero(it.second->val.rows(), it.second->val.cols()));
            v.push_back(Mat::Zero(it.second->val.rows(), it.second->val.cols()));
        }
        t = 0;
    }

    // clips the global gradient norm in place; returns the pre-clip norm
    static double clip_grad_norm(ParamMap& pm, double max_norm) {
        double sq = 0.0;
        for (auto& it : pm.items) sq += it.second->grad.squaredNorm();
        const double norm = std::sqrt(sq);
        if (max_norm > 0.0 && norm > max_norm) {
            const double s = max_norm / (norm + 1e-12);
            for (auto& it : pm.items) it.second->grad *= s;
        }
        return norm;
    }

    void step(ParamMap& pm, double lr) {
        if (m.size() != pm.items.size()) throw std::runtime_error("optimizer not initialized for this parameter set");
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, double(t));
        const double bc2 = 1.0 - std::pow(beta2, double(t));
        for (size_t i = 0; i < pm.items.size(); ++i) {
            auto& p = pm.items[i].second;
            m[i] = beta1 * m[i] + (1.0 - beta1) * p->grad;
            v[i] = beta2 * v[i] + (1.0 - beta2) * p->grad.cwiseProduct(p->grad);
            const Mat mhat = m[i] / bc1;
            const Mat vhat = v[i] / bc2;
            p->val -= lr * weight_decay * p->val;
            p->val -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
        }
    }
};

} // namespace evsp::nn
