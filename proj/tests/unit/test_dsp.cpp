#include "catch2/catch_amalgamated.hpp"

#include "eventspeech/audio/features.hpp"
#include "eventspeech/audio/griffin_lim.hpp"
#include "eventspeech/audio/wav.hpp"
#include "eventspeech/dsp/wavelet.hpp"
#include "gradcheck.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace evsp;
using namespace evsp::audio;
using evsp::test::gradcheck;
using evsp::test::random_mat;

namespace {

std::vector<double> sine(double freq, double seconds, int sr, double amp = 0.5) {
    std::vector<double> x(static_cast<size_t>(seconds * sr));
    for (size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2.0 * M_PI * freq * double(i) / sr);
    return x;
}

// plain non-differentiable reference DWT, coded directly from the
// two-scale relations
std::pair<std::vector<double>, std::vector<double>> ref_dwt(const std::vector<double>& x,
                                                            const std::vector<double>& h,
                                                            const std::vector<double>& g) {
    const size_t half = x.size() / 2;
    std::vector<double> a(half, 0.0), d(half, 0.0);
    for (size_t t = 0; t < half; ++t)
        for (size_t k = 0; k < h.size(); ++k) {
            const double v = x[(2 * t + k) % x.size()];
            a[t] += h[k] * v;
            d[t] += g[k] * v;
        }
    return {a, d};
}

} // namespace

TEST_CASE("framing arithmetic is center-off", "[dsp]") {
    REQUIRE(dsp::num_frames(1024, 1024, 256) == 1);
    REQUIRE(dsp::num_frames(1024 + 256, 1024, 256) == 2);
    REQUIRE(dsp::num_frames(22050, 1024, 256) == 1 + (22050 - 1024) / 256);
    REQUIRE_THROWS(dsp::num_frames(1023, 1024, 256));
}

TEST_CASE("stft peaks at the tone bin and istft reconstructs", "[dsp]") {
    const int sr = 22050, n_fft = 1024, hop = 256;
    auto x = sine(22050.0 * 32 / 1024, 0.5, sr); // exactly bin 32
    auto spec = dsp::stft(x, n_fft, hop);
    Eigen::Index peak = 0;
    spec.cwiseAbs().row(5).maxCoeff(&peak);
    REQUIRE(peak == 32);

    auto back = dsp::istft(spec, n_fft, hop);
    double err = 0.0, ref = 0.0;
    // interior samples, away from boundary taper
    for (size_t i = n_fft; i + 2 * n_fft < x.size(); ++i) {
        err += (back[i] - x[i]) * (back[i] - x[i]);
        ref += x[i] * x[i];
    }
    REQUIRE(err / ref < 1e-10);
}

TEST_CASE("mel filterbank covers the band with triangular peaks", "[dsp]") {
    Mat fb = dsp::mel_filterbank(22050, 1024, 80);
    REQUIRE(fb.rows() == 80);
    REQUIRE(fb.cols() == 513);
    REQUIRE(fb.minCoeff() >= 0.0);
    REQUIRE(fb.maxCoeff() <= 1.0 + 1e-12);
    for (int m = 0; m < 80; ++m) REQUIRE(fb.row(m).maxCoeff() > 0.0);
    // mid filters rise then fall
    Eigen::Index peak = 0;
    fb.row(40).maxCoeff(&peak);
    REQUIRE(fb(40, peak) > fb(40, 0));
}

TEST_CASE("log-mel clamps at the floor", "[dsp]") {
    Mat mag = Mat::Zero(3, 513);
    Mat lm = dsp::log_mel(mag, dsp::mel_filterbank(22050, 1024, 80), 1e-5);
    REQUIRE(lm.rows() == 3);
    REQUIRE(lm.cols() == 80);
    REQUIRE(lm.isApproxToConstant(std::log(1e-5), 1e-12));
}

TEST_CASE("yin finds the pitch of a pure tone", "[dsp]") {
    const int sr = 22050;
    for (double f : {110.0, 220.0, 330.0}) {
        auto x = sine(f, 0.2, sr);
        const double got = dsp::yin_pitch(x.data(), 1024, sr);
        REQUIRE(std::abs(got - f) < 3.0);
    }
}

TEST_CASE("yin reports silence and noise as unvoiced", "[dsp]") {
    std::vector<double> silence(1024, 0.0);
    REQUIRE(dsp::yin_pitch(silence.data(), 1024, 22050) == 0.0);
    Rng rng(7);
    std::vector<double> noise(1024);
    for (auto& v : noise) v = normal(rng, 0.0, 0.3);
    REQUIRE(dsp::yin_pitch(noise.data(), 1024, 22050) == 0.0);
}

TEST_CASE("analyze_audio ties voicing, duration, and energy together", "[dsp]") {
    const int sr = 22050;
    auto tone = sine(220.0, 1.0, sr);
    auto f = analyze_audio(tone);
    REQUIRE(f.frames() == 1 + (tone.size() - 1024) / 256);
    REQUIRE(f.mel.rows() == f.frames());
    REQUIRE(f.f0.size() == f.frames());

    Eigen::Index voiced = 0, close = 0;
    for (Eigen::Index t = 0; t < f.frames(); ++t) {
        if (f.f0(t) > 0.0) {
            ++voiced;
            if (std::abs(f.f0(t) - 220.0) < 5.0) ++close;
        }
        REQUIRE(f.energy(t) >= 0.0);
        REQUIRE(((f.duration(t) > 0.0) == (f.f0(t) > 0.0)));
    }
    REQUIRE(voiced > 0);
    REQUIRE(double(close) / double(voiced) >= 0.9);
    // steady tone: one voiced run spanning nearly everything
    REQUIRE(f.duration.maxCoeff() >= double(f.frames()) * 0.9);
}

TEST_CASE("analyze_audio on silence yields zeros", "[dsp]") {
    std::vector<double> x(22050, 0.0);
    auto f = analyze_audio(x);
    REQUIRE(f.f0.isZero());
    REQUIRE(f.duration.isZero());
    REQUIRE(f.energy.maxCoeff() == 0.0);
    REQUIRE_THROWS_WITH(analyze_audio({}), Catch::Matchers::ContainsSubstring("empty waveform"));
}

TEST_CASE("wav io round-trips within quantization error", "[dsp]") {
    auto x = sine(220.0, 0.1, 22050, 0.8);
    const auto path = std::filesystem::temp_directory_path() / "evsp_wav_test.wav";
    write_wav(path.string(), x, 22050);
    auto back = read_wav(path.string());
    REQUIRE(back.sample_rate == 22050);
    REQUIRE(back.samples.size() == x.size());
    for (size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(back.samples[i] - x[i]) < 1.0 / 32768.0);
    std::filesystem::remove(path);
}

TEST_CASE("haar details vanish on constant signals", "[dsp]") {
    Mat m = Mat::Ones(4, 1);
    auto [a, d] = dsp::dwt_level(nn::constant(m), dsp::Wavelet::haar);
    REQUIRE(d->val.isZero(1e-14));
    REQUIRE(a->val.isApproxToConstant(std::sqrt(2.0), 1e-14));
}

TEST_CASE("wavelets reconstruct perfectly", "[dsp]") {
    Rng rng(11);
    for (auto w : {dsp::Wavelet::haar, dsp::Wavelet::db4}) {
        for (int T : {8, 16, 64, 512}) {
            Mat x = random_mat(rng, T, 3);
            for (int levels : {1, 2}) {
                auto bands = dsp::dwt(nn::constant(x), levels, w);
                Mat back = dsp::idwt(bands, w)->val;
                REQUIRE((back - x).cwiseAbs().maxCoeff() <= 1e-6);
            }
        }
    }
}

TEST_CASE("dwt matches the plain reference implementation", "[dsp]") {
    Rng rng(13);
    Mat x = random_mat(rng, 16, 2);
    const double s = 1.0 / std::sqrt(2.0);

    SECTION("haar") {
        auto [a, d] = dsp::dwt_level(nn::constant(x), dsp::Wavelet::haar);
        for (int c = 0; c < 2; ++c) {
            std::vector<double> col(16);
            for (int i = 0; i < 16; ++i) col[i] = x(i, c);
            auto [ra, rd] = ref_dwt(col, {s, s}, {s, -s});
            for (int i = 0; i < 8; ++i) {
                REQUIRE(a->val(i, c) == Catch::Approx(ra[i]).margin(1e-12));
                REQUIRE(d->val(i, c) == Catch::Approx(rd[i]).margin(1e-12));
            }
        }
    }
    SECTION("db4") {
        auto [a, d] = dsp::dwt_level(nn::constant(x), dsp::Wavelet::db4);
        std::vector<double> h(dsp::detail::db4_h, dsp::detail::db4_h + 4);
        std::vector<double> g(dsp::detail::db4_g, dsp::detail::db4_g + 4);
        for (int c = 0; c < 2; ++c) {
            std::vector<double> col(16);
            for (int i = 0; i < 16; ++i) col[i] = x(i, c);
            auto [ra, rd] = ref_dwt(col, h, g);
            for (int i = 0; i < 8; ++i) {
                REQUIRE(a->val(i, c) == Catch::Approx(ra[i]).margin(1e-12));
                REQUIRE(d->val(i, c) == Catch::Approx(rd[i]).margin(1e-12));
            }
        }
    }
}

TEST_CASE("wavelet transforms are differentiable", "[dsp]") {
    Rng rng(17);
    auto x = nn::param(random_mat(rng, 8, 2));
    for (auto w : {dsp::Wavelet::haar, dsp::Wavelet::db4}) {
        REQUIRE(gradcheck([w](const std::vector<nn::Var>& v) {
            auto bands = dsp::dwt(v[0], 2, w);
            nn::Var y = dsp::idwt(bands, w);
            // mix reconstruction and raw band energies so every path is exercised
            return nn::add(nn::sum_all(nn::square(y)),
                           nn::add(nn::sum_all(nn::square(bands.approx)),
                                   nn::scale(nn::sum_all(nn::square(bands.details[1])), 0.5)));
        }, {x}) < 1e-7);
    }
}

TEST_CASE("padded length targets a multiple of the level unit", "[dsp]") {
    REQUIRE(dsp::padded_length(7, 2, dsp::Wavelet::haar) == 8);
    REQUIRE(dsp::padded_length(8, 2, dsp::Wavelet::haar) == 8);
    REQUIRE(dsp::padded_length(4, 2, dsp::Wavelet::haar) == 4);
    REQUIRE(dsp::padded_length(4, 2, dsp::Wavelet::db4) == 16);
    REQUIRE(dsp::padded_length(30, 1, dsp::Wavelet::db4) == 30);
}

TEST_CASE("griffin-lim inverts a mel spectrogram of a tone", "[dsp]") {
    AudioConfig cfg;
    auto x = sine(220.0, 0.6, cfg.sample_rate);
    auto f = analyze_audio(x, cfg);
    auto wav = griffin_lim(f.mel, cfg, 32, 1);
    REQUIRE(wav.size() >= x.size() - cfg.n_fft);
    // the reconstruction should be voiced near 220 Hz in its interior
    auto f2 = analyze_audio(wav, cfg);
    Eigen::Index hits = 0, total = 0;
    for (Eigen::Index t = 5; t < f2.frames() - 5; ++t) {
        ++total;
        if (std::abs(f2.f0(t) - 220.0) < 10.0) ++hits;
    }
    REQUIRE(double(hits) / double(total) > 0.8);
}
