#include "catch2/catch_amalgamated.hpp"

#include "eventspeech/event/simulate.hpp"
#include "eventspeech/event/voxel.hpp"
#include "eventspeech/model/event_encoder.hpp"
#include "gradcheck.hpp"

#include <cmath>

using namespace evsp;
using namespace evsp::model;
using evsp::test::gradcheck;
using evsp::test::random_mat;

namespace {

EventEncoderConfig small_cfg() {
    EventEncoderConfig c;
    c.n_bins = 2;
    c.base_channels = 2;
    c.dim_hidden = 8;
    c.dim_head = 4;
    c.dim_visual = 6;
    c.dim_speaker = 3;
    c.dim_emotion = 3;
    return c;
}

event::VoxelGrid random_grid(Rng& rng, int t_prime, int n_bins, int H, int W) {
    event::VoxelGrid g;
    g.t_prime = t_prime;
    g.n_bins = n_bins;
    g.height = H;
    g.width = W;
    g.frame_interval_us = 40000;
    g.data.resize(static_cast<size_t>(t_prime) * n_bins * H * W);
    for (auto& v : g.data) v = double(uniform_int(rng, -3, 3));
    return g;
}

Var unit_rows(Eigen::Index T, int dim, int axis) {
    Mat m = Mat::Zero(T, dim);
    m.col(axis).setOnes();
    return nn::constant(m);
}

} // namespace

TEST_CASE("event encoding has the contract shape and is finite", "[event_encoder]") {
    Rng rng(301);
    auto cfg = small_cfg();
    EventEncoder enc(rng, cfg);
    auto grid = random_grid(rng, 9, cfg.n_bins, 8, 8);
    Var h = enc.encode(grid);
    REQUIRE(h->val.rows() == 9);
    REQUIRE(h->val.cols() == cfg.dim_hidden);
    REQUIRE(h->val.allFinite());

    event::VoxelGrid zeros = grid;
    std::fill(zeros.data.begin(), zeros.data.end(), 0.0);
    Var hz = enc.encode(zeros);
    REQUIRE(hz->val.allFinite());

    event::VoxelGrid empty = grid;
    empty.t_prime = 0;
    REQUIRE_THROWS(enc.encode(empty));
}

TEST_CASE("encoding two grids is order-independent", "[event_encoder]") {
    Rng rng(303);
    auto cfg = small_cfg();
    EventEncoder enc(rng, cfg);
    auto a = random_grid(rng, 5, cfg.n_bins, 8, 8);
    auto b = random_grid(rng, 5, cfg.n_bins, 8, 8);

    Mat a_first = enc.encode(a)->val;
    Mat b_first = enc.encode(b)->val;
    REQUIRE(enc.encode(b)->val == b_first);
    REQUIRE(enc.encode(a)->val == a_first);
    REQUIRE_FALSE(a_first.isApprox(b_first));
}

TEST_CASE("head projections are independent and length-preserving", "[event_encoder]") {
    Rng rng(307);
    auto cfg = small_cfg();
    EventEncoder enc(rng, cfg);
    auto h = nn::constant(random_mat(rng, 7, cfg.dim_hidden));
    auto d = enc.heads(h);
    for (const Var* v : {&d.lip, &d.au, &d.pose, &d.rhythm, &d.prosody}) {
        REQUIRE((*v)->val.rows() == 7);
        REQUIRE((*v)->val.cols() == cfg.dim_head);
    }
    REQUIRE_FALSE(d.lip->val.isApprox(d.au->val));
    REQUIRE_FALSE(d.rhythm->val.isApprox(d.prosody->val));

    auto dz = enc.heads(nn::constant(Mat::Zero(4, cfg.dim_hidden)));
    REQUIRE(dz.lip->val.isZero(0.0));
    REQUIRE(dz.au->val.isZero(0.0));
    REQUIRE(dz.pose->val.isZero(0.0));
    // the recurrent cells keep zero state on zero input
    REQUIRE(dz.rhythm->val.isZero(1e-15));
    REQUIRE(dz.prosody->val.isZero(1e-15));
}

TEST_CASE("orthogonal pooled heads have zero penalty", "[event_encoder]") {
    DisentangledHeads d;
    d.lip = unit_rows(6, 5, 0);
    d.au = unit_rows(6, 5, 1);
    d.pose = unit_rows(6, 5, 2);
    d.rhythm = unit_rows(6, 5, 3);
    d.prosody = unit_rows(6, 5, 4);
    REQUIRE(orthogonality_penalty(d)->val(0, 0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("identical rhythm and prosody contribute exactly one", "[event_encoder]") {
    DisentangledHeads d;
    d.lip = unit_rows(6, 5, 0);
    d.au = unit_rows(6, 5, 1);
    d.pose = unit_rows(6, 5, 2);
    d.rhythm = unit_rows(6, 5, 3);
    d.prosody = unit_rows(6, 5, 3);
    REQUIRE(orthogonality_penalty(d)->val(0, 0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("penalty equals the pairwise cosine-squared oracle and is bounded", "[event_encoder]") {
    Rng rng(311);
    for (int trial = 0; trial < 10; ++trial) {
        DisentangledHeads d;
        d.lip = nn::constant(random_mat(rng, 5, 4));
        d.au = nn::constant(random_mat(rng, 5, 4));
        d.pose = nn::constant(random_mat(rng, 5, 4));
        d.rhythm = nn::constant(random_mat(rng, 5, 4));
        d.prosody = nn::constant(random_mat(rng, 5, 4));
        const double got = orthogonality_penalty(d)->val(0, 0);

        auto pooled = [](const Var& v) {
            Vec m = v->val.colwise().mean();
            return Vec(m / std::sqrt(m.squaredNorm() + 1e-12));
        };
        Vec vs[5] = {pooled(d.lip), pooled(d.au), pooled(d.pose), pooled(d.rhythm), pooled(d.prosody)};
        // every pair that involves index 3 (rhythm) or 4 (prosody)
        double expected = 0.0;
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                if (i < 3 && j < 3) continue;
                const double c = vs[i].dot(vs[j]);
                expected += c * c;
            }
        REQUIRE(got == Catch::Approx(expected).margin(1e-10));
        REQUIRE(got >= 0.0);
        REQUIRE(got <= 7.0);
    }
}

TEST_CASE("penalty gradient matches finite differences", "[event_encoder]") {
    Rng rng(313);
    auto lip = nn::param(random_mat(rng, 4, 3));
    auto au = nn::param(random_mat(rng, 4, 3));
    auto pose = nn::param(random_mat(rng, 4, 3));
    auto rhythm = nn::param(random_mat(rng, 4, 3));
    auto prosody = nn::param(random_mat(rng, 4, 3));
    const double err = gradcheck([](const std::vector<Var>& v) {
        DisentangledHeads d;
        d.lip = v[0];
        d.au = v[1];
        d.pose = v[2];
        d.rhythm = v[3];
        d.prosody = v[4];
        return orthogonality_penalty(d);
    }, {lip, au, pose, rhythm, prosody}, 1e-3);
    REQUIRE(err < 1e-4);
}

TEST_CASE("pseudo-label loss is zero at the readouts and shifts by c squared", "[event_encoder]") {
    Rng rng(317);
    auto cfg = small_cfg();
    EventEncoder enc(rng, cfg);
    auto d = enc.heads(nn::constant(random_mat(rng, 6, cfg.dim_hidden)));
    auto r = enc.readouts(d);

    PseudoLabels labels;
    labels.lip = r.lip->val;
    labels.au = r.au->val;
    labels.pose = r.pose->val;
    REQUIRE(pseudo_label_loss(enc, d, labels)->val(0, 0) == Catch::Approx(0.0).margin(1e-12));

    PseudoLabels shifted = labels;
    shifted.pose.array() += 0.3;
    REQUIRE(pseudo_label_loss(enc, d, shifted)->val(0, 0) == Catch::Approx(0.09).margin(1e-12));

    PseudoLabels wrong = labels;
    wrong.au = Mat::Zero(5, cfg.d_au);
    REQUIRE_THROWS_WITH(pseudo_label_loss(enc, d, wrong),
                        Catch::Matchers::ContainsSubstring("length mismatch"));
}

TEST_CASE("pseudo-label loss matches a scalar oracle", "[event_encoder]") {
    Rng rng(319);
    auto cfg = small_cfg();
    EventEncoder enc(rng, cfg);
    auto d = enc.heads(nn::constant(random_mat(rng, 5, cfg.dim_hidden)));
    auto r = enc.readouts(d);
    PseudoLabels labels;
    labels.lip = random_mat(rng, 5, cfg.d_lip);
    labels.au = (random_mat(rng, 5, cfg.d_au).array().tanh() * 0.5 + 0.5).matrix();
    labels.pose = random_mat(rng, 5, cfg.d_pose);

    double expected = 0.0;
    const Mat* outs[3] = {&r.lip->val, &r.au->val, &r.pose->val};
    const Mat* labs[3] = {&labels.lip, &labels.au, &labels.pose};
    for (int k = 0; k < 3; ++k) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < outs[k]->rows(); ++i)
            for (Eigen::Index j = 0; j < outs[k]->cols(); ++j) {
                const double diff = (*outs[k])(i, j) - (*labs[k])(i, j);
                s += diff * diff;
            }
        expected += s / double(outs[k]->size());
    }
    REQUIRE(pseudo_label_loss(enc, d, labels)->val(0, 0) == Catch::Approx(expected).margin(1e-10));
    // au readout is squashed into (0,1)
    REQUIRE(r.au->val.minCoeff() > 0.0);
    REQUIRE(r.au->val.maxCoeff() < 1.0);
}

TEST_CASE("visual fusion reacts to speaker identity and is pure", "[event_encoder]") {
    Rng rng(323);
    auto cfg = small_cfg();
    EventEncoder enc(rng, cfg);
    auto d = enc.heads(nn::constant(random_mat(rng, 6, cfg.dim_hidden)));
    Var fv0 = enc.fuse(d, 0, 1);
    REQUIRE(fv0->val.rows() == 6);
    REQUIRE(fv0->val.cols() == cfg.dim_visual);
    REQUIRE(enc.fuse(d, 0, 1)->val == fv0->val);
    REQUIRE_FALSE(enc.fuse(d, 1, 1)->val.isApprox(fv0->val));
    REQUIRE_FALSE(enc.fuse(d, 0, 2)->val.isApprox(fv0->val));
}

TEST_CASE("the full event path is deterministic end to end", "[event_encoder]") {
    Rng rng(331);
    auto cfg = small_cfg();
    EventEncoder enc(rng, cfg);
    auto grid = random_grid(rng, 4, cfg.n_bins, 8, 8);
    auto run = [&]() {
        auto d = enc.heads(enc.encode(grid));
        return enc.fuse(d, 1, 3)->val;
    };
    Mat first = run();
    REQUIRE(run() == first);
    REQUIRE(first.allFinite());
}

TEST_CASE("gradients flow from fusion back to the cnn", "[event_encoder]") {
    Rng rng(337);
    auto cfg = small_cfg();
    EventEncoder enc(rng, cfg);
    auto grid = random_grid(rng, 4, cfg.n_bins, 8, 8);
    nn::ParamMap pm;
    enc.params(pm, "enc");
    pm.zero_grad();
    auto d = enc.heads(enc.encode(grid));
    Var loss = nn::mean_all(nn::square(enc.fuse(d, 0, 0)));
    loss = nn::add(loss, orthogonality_penalty(d));
    nn::backward(loss);
    REQUIRE(enc.cnn.convs[0].W->grad.size() > 0);
    REQUIRE(enc.cnn.convs[0].W->grad.cwiseAbs().maxCoeff() > 0.0);
    REQUIRE(enc.speaker_table.table->grad.cwiseAbs().maxCoeff() > 0.0);
}
