#pragma once

// Reverse-mode autodiff over Eigen matrices. Graphs are built per forward
// pass; parameters are long-lived leaf nodes reused across graphs. The
// convention throughout the library is rows = time, cols = channels.

#include "eventspeech/common.hpp"

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

namespace evsp::nn {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Mat val;
    Mat grad; // lazily sized on first accumulation
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backfn;

    explicit Node(Mat v) : val(std::move(v)) {}
};

inline Var constant(Mat v) { return std::make_shared<Node>(std::move(v)); }

inline Var param(Mat v) {
    auto n = std::make_shared<Node>(std::move(v));
    n->requires_grad = true;
    return n;
}

inline void accum(Node& n, const Mat& g) {
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    n.grad += g;
}

namespace detail {

inline Var make(Mat v, std::vector<Var> parents, std::function<void(Node&)> backfn) {
    auto n = std::make_shared<Node>(std::move(v));
    for (const auto& p : parents)
        if (p->requires_grad) { n->requires_grad = true; break; }
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backfn = std::move(backfn);
    }
    return n;
}

} // namespace detail

// ---- arithmetic ----

inline Var add(const Var& a, const Var& b) {
    return detail::make(a->val + b->val, {a, b}, [a, b](Node& self) {
        if (a->requires_grad) accum(*a, self.grad);
        if (b->requires_grad) accum(*b, self.grad);
    });
}

inline Var sub(const Var& a, const Var& b) {
    return detail::make(a->val - b->val, {a, b}, [a, b](Node& self) {
        if (a->requires_grad) accum(*a, self.grad);
        if (b->requires_grad) accum(*b, -self.grad);
    });
}

inline Var mul(const Var& a, const Var& b) {
    return detail::make(a->val.cwiseProduct(b->val), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.cwiseProduct(b->val));
        if (b->requires_grad) accum(*b, self.grad.cwiseProduct(a->val));
    });
}

inline Var scale(const Var& a, double s) {
    return detail::make(a->val * s, {a}, [a, s](Node& self) {
        if (a->requires_grad) accum(*a, self.grad * s);
    });
}

inline Var add_const(const Var& a, double c) {
    return detail::make(a->val.array() + c, {a}, [a](Node& self) {
        if (a->requires_grad) accum(*a, self.grad);
    });
}

// broadcast a 1xD row vector over all rows of a
inline Var add_rowvec(const Var& a, const Var& r) {
    Mat v = a->val;
    v.rowwise() += Eigen::RowVectorXd(r->val.row(0));
    return detail::make(std::move(v), {a, r}, [a, r](Node& self) {
        if (a->requires_grad) accum(*a, self.grad);
        if (r->requires_grad) accum(*r, self.grad.colwise().sum());
    });
}

inline Var mul_rowvec(const Var& a, const Var& r) {
    Mat v = a->val.array().rowwise() * r->val.row(0).array();
    return detail::make(std::move(v), {a, r}, [a, r](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.array().rowwise() * r->val.row(0).array());
        if (r->requires_grad) accum(*r, (self.grad.array() * a->val.array()).colwise().sum());
    });
}

// scale each row i of a by c(i); c is Tx1
inline Var mul_colvec(const Var& a, const Var& c) {
    Mat v = a->val.array().colwise() * c->val.col(0).array();
    return detail::make(std::move(v), {a, c}, [a, c](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.array().colwise() * c->val.col(0).array());
        if (c->requires_grad) accum(*c, (self.grad.array() * a->val.array()).rowwise().sum());
    });
}

// multiply / divide by a 1x1 scalar node, broadcast to all elements
inline Var mul_bcast(const Var& a, const Var& s) {
    const double sv = s->val(0, 0);
    return detail::make(a->val * sv, {a, s}, [a, s, sv](Node& self) {
        if (a->requires_grad) accum(*a, self.grad * sv);
        if (s->requires_grad) {
            Mat g(1, 1);
            g(0, 0) = (self.grad.array() * a->val.array()).sum();
            accum(*s, g);
        }
    });
}

inline Var div_bcast(const Var& a, const Var& s) {
    const double sv = s->val(0, 0);
    return detail::make(a->val / sv, {a, s}, [a, s, sv](Node& self) {
        if (a->requires_grad) accum(*a, self.grad / sv);
        if (s->requires_grad) {
            Mat g(1, 1);
            g(0, 0) = -(self.grad.array() * a->val.array()).sum() / (sv * sv);
            accum(*s, g);
        }
    });
}

// ---- matrix products ----

inline Var mm(const Var& a, const Var& b) {
    Mat v(a->val.rows(), b->val.cols());
    v.noalias() = a->val * b->val;
    return detail::make(std::move(v), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) accum(*a, self.grad * b->val.transpose());
        if (b->requires_grad) accum(*b, a->val.transpose() * self.grad);
    });
}

// a * b^T
inline Var mm_nt(const Var& a, const Var& b) {
    Mat v(a->val.rows(), b->val.rows());
    v.noalias() = a->val * b->val.transpose();
    return detail::make(std::move(v), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) accum(*a, self.grad * b->val);
        if (b->requires_grad) accum(*b, self.grad.transpose() * a->val);
    });
}

// ---- elementwise nonlinearities ----

inline Var sigmoid(const Var& a) {
    Mat v = a->val.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return detail::make(v, {a}, [a, v](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.array() * v.array() * (1.0 - v.array()));
    });
}

inline Var tanh_(const Var& a) {
    Mat v = a->val.array().tanh();
    return detail::make(v, {a}, [a, v](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.array() * (1.0 - v.array().square()));
    });
}

inline Var gelu(const Var& a) {
    Mat v = a->val.unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476)); });
    return detail::make(std::move(v), {a}, [a](Node& self) {
        if (!a->requires_grad) return;
        Mat d = a->val.unaryExpr([](double x) {
            const double phi = std::exp(-0.5 * x * x) * 0.3989422804014327;
            const double Phi = 0.5 * (1.0 + std::erf(x * 0.7071067811865476));
            return Phi + x * phi;
        });
        accum(*a, self.grad.cwiseProduct(d));
    });
}

inline Var exp_(const Var& a) {
    Mat v = a->val.array().exp();
    return detail::make(v, {a}, [a, v](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.cwiseProduct(v));
    });
}

inline Var log_(const Var& a) {
    return detail::make(a->val.array().log(), {a}, [a](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.cwiseQuotient(a->val));
    });
}

inline Var softplus(const Var& a) {
    Mat v = a->val.unaryExpr([](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); });
    return detail::make(std::move(v), {a}, [a](Node& self) {
        if (!a->requires_grad) return;
        Mat d = a->val.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
        accum(*a, self.grad.cwiseProduct(d));
    });
}

inline Var square(const Var& a) {
    return detail::make(a->val.array().square(), {a}, [a](Node& self) {
        if (a->requires_grad) accum(*a, 2.0 * self.grad.cwiseProduct(a->val));
    });
}

inline Var sqrt_(const Var& a) {
    Mat v = a->val.array().sqrt();
    return detail::make(v, {a}, [a, v](Node& self) {
        if (a->requires_grad) accum(*a, (self.grad.array() * 0.5 / v.array()).matrix());
    });
}

// subgradient clamp: gradient passes through strictly inside [lo, hi]
inline Var clamp(const Var& a, double lo, double hi) {
    Mat v = a->val.array().max(lo).min(hi);
    return detail::make(std::move(v), {a, }, [a, lo, hi](Node& self) {
        if (!a->requires_grad) return;
        Mat mask = a->val.unaryExpr([lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
        accum(*a, self.grad.cwiseProduct(mask));
    });
}

// ---- reductions ----

inline Var sum_all(const Var& a) {
    Mat v(1, 1);
    v(0, 0) = a->val.sum();
    return detail::make(std::move(v), {a}, [a](Node& self) {
        if (a->requires_grad) accum(*a, Mat::Constant(a->val.rows(), a->val.cols(), self.grad(0, 0)));
    });
}

inline Var mean_all(const Var& a) {
    const double n = static_cast<double>(a->val.size());
    Mat v(1, 1);
    v(0, 0) = a->val.sum() / n;
    return detail::make(std::move(v), {a}, [a, n](Node& self) {
        if (a->requires_grad) accum(*a, Mat::Constant(a->val.rows(), a->val.cols(), self.grad(0, 0) / n));
    });
}

// mean over rows -> 1xD
inline Var col_mean(const Var& a) {
    const double n = static_cast<double>(a->val.rows());
    Mat v = a->val.colwise().sum() / n;
    return detail::make(std::move(v), {a}, [a, n](Node& self) {
        if (a->requires_grad) {
            Mat g = (self.grad / n).replicate(a->val.rows(), 1);
            accum(*a, g);
        }
    });
}

// ---- shape ops ----

inline Var concat_cols(const Var& a, const Var& b) {
    Mat v(a->val.rows(), a->val.cols() + b->val.cols());
    v << a->val, b->val;
    return detail::make(std::move(v), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.leftCols(a->val.cols()));
        if (b->requires_grad) accum(*b, self.grad.rightCols(b->val.cols()));
    });
}

inline Var concat_rows(const Var& a, const Var& b) {
    Mat v(a->val.rows() + b->val.rows(), a->val.cols());
    v << a->val, b->val;
    return detail::make(std::move(v), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.topRows(a->val.rows()));
        if (b->requires_grad) accum(*b, self.grad.bottomRows(b->val.rows()));
    });
}

inline Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index len) {
    return detail::make(a->val.middleRows(start, len), {a}, [a, start, len](Node& self) {
        if (!a->requires_grad) return;
        Mat g = Mat::Zero(a->val.rows(), a->val.cols());
        g.middleRows(start, len) = self.grad;
        accum(*a, g);
    });
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len) {
    return detail::make(a->val.middleCols(start, len), {a}, [a, start, len](Node& self) {
        if (!a->requires_grad) return;
        Mat g = Mat::Zero(a->val.rows(), a->val.cols());
        g.middleCols(start, len) = self.grad;
        accum(*a, g);
    });
}

inline Var pad_rows(const Var& a, Eigen::Index before, Eigen::Index after) {
    Mat v = Mat::Zero(a->val.rows() + before + after, a->val.cols());
    v.middleRows(before, a->val.rows()) = a->val;
    return detail::make(std::move(v), {a}, [a, before](Node& self) {
        if (a->requires_grad) accum(*a, self.grad.middleRows(before, a->val.rows()));
    });
}

// rows of the output are rows of the input selected by idx; idx < 0 yields a zero row
inline Var gather_rows(const Var& a, std::vector<Eigen::Index> idx) {
    Mat v(static_cast<Eigen::Index>(idx.size()), a->val.cols());
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        if (idx[i] < 0)
            v.row(i).setZero();
        else
            v.row(i) = a->val.row(idx[i]);
    return detail::make(std::move(v), {a}, [a, idx = std::move(idx)](Node& self) {
        if (!a->requires_grad) return;
        Mat g = Mat::Zero(a->val.rows(), a->val.cols());
        for (Eigen::Index i = 0; i < self.grad.rows(); ++i)
            if (idx[i] >= 0) g.row(idx[i]) += self.grad.row(i);
        accum(*a, g);
    });
}

// repeat a 1xD row n times
inline Var broadcast_rows(const Var& r, Eigen::Index n) {
    return detail::make(r->val.replicate(n, 1), {r}, [r](Node& self) {
        if (r->requires_grad) accum(*r, self.grad.colwise().sum());
    });
}

// ---- row-wise softmax / layer norm ----

inline Var softmax_rows(const Var& a) {
    Mat v = a->val;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double m = v.row(i).maxCoeff();
        v.row(i) = (v.row(i).array() - m).exp();
        v.row(i) /= v.row(i).sum();
    }
    return detail::make(v, {a}, [a, v](Node& self) {
        if (!a->requires_grad) return;
        Mat g(v.rows(), v.cols());
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            const double dot = self.grad.row(i).dot(v.row(i));
            g.row(i) = (self.grad.row(i).array() - dot) * v.row(i).array();
        }
        accum(*a, g);
    });
}

inline Var layer_norm_rows(const Var& a, double eps = 1e-5) {
    const Eigen::Index D = a->val.cols();
    Mat xhat(a->val.rows(), D);
    Vec inv_std(a->val.rows());
    for (Eigen::Index i = 0; i < a->val.rows(); ++i) {
        const double mu = a->val.row(i).mean();
        const double var = (a->val.row(i).array() - mu).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (a->val.row(i).array() - mu) * inv_std(i);
    }
    return detail::make(xhat, {a}, [a, xhat, inv_std](Node& self) {
        if (!a->requires_grad) return;
        const double D = static_cast<double>(a->val.cols());
        Mat g(xhat.rows(), xhat.cols());
        for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
            const double mg = self.grad.row(i).mean();
            const double mgx = self.grad.row(i).dot(xhat.row(i)) / D;
            g.row(i) = inv_std(i) * (self.grad.row(i).array() - mg - xhat.row(i).array() * mgx);
        }
        accum(*a, g);
    });
}

// normalizes over every entry of the matrix jointly; the larger eps floor
// keeps the backward pass bounded when the whole map is nearly constant
// (sparse inputs produce many such maps)
inline Var layer_norm_all(const Var& a, double eps = 1e-3) {
    const double mu = a->val.mean();
    const double var = (a->val.array() - mu).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + eps);
    Mat xhat = (a->val.array() - mu) * inv_std;
    return detail::make(std::move(xhat), {a}, [a, inv_std](Node& self) {
        if (!a->requires_grad) return;
        const Mat& xh = self.val;
        const double n = static_cast<double>(xh.size());
        const double mg = self.grad.mean();
        const double mgx = (self.grad.array() * xh.array()).sum() / n;
        accum(*a, (inv_std * (self.grad.array() - mg - xh.array() * mgx)).matrix());
    });
}

// im2col for 2D convolution; input layout is (H*W) rows x C cols, row index = y*W + x.
// Output is (Ho*Wo) rows x (kh*kw*C) cols; out-of-bounds taps read as zero.
inline Var im2col(const Var& a, int H, int W, int kh, int kw, int stride, int pad) {
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    const Eigen::Index C = a->val.cols();
    std::vector<Eigen::Index> idx(static_cast<size_t>(Ho) * Wo * kh * kw);
    size_t p = 0;
    for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox)
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                    const int iy = oy * stride - pad + ky;
                    const int ix = ox * stride - pad + kx;
                    idx[p++] = (iy < 0 || iy >= H || ix < 0 || ix >= W) ? -1 : static_cast<Eigen::Index>(iy) * W + ix;
                }
    Mat v(static_cast<Eigen::Index>(Ho) * Wo, static_cast<Eigen::Index>(kh) * kw * C);
    p = 0;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
        for (int t = 0; t < kh * kw; ++t, ++p)
            if (idx[p] < 0)
                v.block(r, t * C, 1, C).setZero();
            else
                v.block(r, t * C, 1, C) = a->val.row(idx[p]);
    return detail::make(std::move(v), {a}, [a, idx = std::move(idx), kh, kw, C](Node& self) {
        if (!a->requires_grad) return;
        Mat g = Mat::Zero(a->val.rows(), C);
        size_t p = 0;
        for (Eigen::Index r = 0; r < self.grad.rows(); ++r)
            for (int t = 0; t < kh * kw; ++t, ++p)
                if (idx[p] >= 0) g.row(idx[p]) += self.grad.block(r, t * C, 1, C);
        accum(*a, g);
    });
}

// ---- backward ----

inline void backward(const Var& root) {
    if (root->val.size() != 1)
        throw std::runtime_error("backward: root must be scalar");
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(n);
            stack.pop_back();
        }
    }
    root->grad = Mat::Ones(1, 1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->backfn && n->grad.size() != 0) n->backfn(*n);
    }
}

// ---- parameter registry ----

struct ParamMap {
    std::vector<std::pair<std::string, Var>> items;

    void add(const std::string& name, const Var& v) { items.emplace_back(name, v); }

    Var find(const std::string& name) const {
        for (const auto& [n, v] : items)
            if (n == name) return v;
        throw std::runtime_error("parameter not found: " + name);
    }

    void zero_grad() {
        for (auto& [n, v] : items) v->grad.resize(0, 0);
    }

    std::size_t count() const {
        std::size_t c = 0;
        for (const auto& [n, v] : items) c += static_cast<std::size_t>(v->val.size());
        return c;
    }
};

} // namespace evsp::nn
