#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "cavsense/cavity_sim.hpp"
#include "cavsense/errors.hpp"
#include "cavsense/preprocess.hpp"
#include "cavsense/rng.hpp"

using namespace cavsense;

namespace {

LabeledSample sample_with(double fraction, SParameterMatrix m, std::size_t n = 16) {
    return {SParameterRecord(uniform_grid(n, 1e9, 2e9), std::vector<SParameterMatrix>(n, m)), fraction,
            Provenance::measured, std::nullopt, std::nullopt, std::nullopt};
}

// Every channel follows its own polynomial in the sample index.
SParameterRecord polynomial_record(std::size_t n, int degree) {
    std::vector<SParameterMatrix> m(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) - 20.0;
        auto p = [&](double a, double b, double c, double d) {
            double v = a;
            if (degree >= 1) v += b * x;
            if (degree >= 2) v += c * x * x;
            if (degree >= 3) v += d * x * x * x;
            return v;
        };
        m[i] = {{p(0.3, 0.01, 0.001, 1e-5), p(-0.2, 0.02, -0.002, 2e-5)},
                {p(0.1, -0.01, 0.0005, 0.0), p(0.0, 0.003, 0.0001, -1e-5)},
                {p(0.5, 0.0, -0.0007, 3e-6), p(0.2, 0.01, 0.0, 0.0)},
                {p(-0.4, 0.02, 0.0003, 0.0), p(0.9, -0.01, 0.0002, 1e-6)}};
    }
    return SParameterRecord(uniform_grid(n, 1e9, 2e9), m);
}

// Independent least-squares oracle for the center smoothing weights.
std::vector<double> savgol_oracle(int window, int order) {
    const int half = window / 2;
    Eigen::MatrixXd a(window, order + 1);
    for (int i = 0; i < window; ++i) {
        for (int j = 0; j <= order; ++j) a(i, j) = std::pow(i - half, j);
    }
    const Eigen::MatrixXd pinv = (a.transpose() * a).inverse() * a.transpose();
    std::vector<double> c(window);
    for (int i = 0; i < window; ++i) c[i] = pinv(0, i);
    return c;
}

double component(const SParameterMatrix& m, int k) {
    const cplx v[4] = {m.s11, m.s12, m.s21, m.s22};
    return k % 2 == 0 ? v[k / 2].real() : v[k / 2].imag();
}

}  // namespace

TEST(AugmentLinear, TwentyOneBecomeOneHundredOne) {
    std::vector<LabeledSample> in;
    for (int i = 0; i <= 20; ++i) in.push_back(sample_with(i * 0.05, {i * 0.01, 0.5, 0.5, 0.0}));
    const auto out = augment_linear(in, 4);
    ASSERT_EQ(out.size(), 101u);
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_NEAR(out[i].fraction, i * 0.01, 1e-12);
        if (i % 5 == 0) {
            EXPECT_EQ(out[i].provenance, Provenance::measured);
            EXPECT_TRUE(out[i].record == in[i / 5].record);
        } else {
            EXPECT_EQ(out[i].provenance, Provenance::augmented);
            ASSERT_TRUE(out[i].parent_lo && out[i].parent_hi);
            EXPECT_EQ(*out[i].parent_lo, in[i / 5].fraction);
            EXPECT_EQ(*out[i].parent_hi, in[i / 5 + 1].fraction);
        }
    }
}

TEST(AugmentLinear, MidpointIsAverage) {
    const auto out = augment_linear(std::vector{sample_with(0.0, {0.0, 0.0, 0.0, 0.0}),
                                                sample_with(1.0, {{1.0, 1.0}, 0.0, 0.0, 0.0})},
                                    1);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[1].fraction, 0.5);
    for (const auto& m : out[1].record.matrices()) EXPECT_EQ(m.s11, cplx(0.5, 0.5));
}

TEST(AugmentLinear, IdenticalParentsGiveCopies) {
    const SParameterMatrix m{{0.3, -0.1}, 0.2, 0.2, {0.1, 0.7}};
    const auto out = augment_linear(std::vector{sample_with(0.2, m), sample_with(0.4, m)}, 4);
    for (const auto& s : out) {
        for (const auto& x : s.record.matrices()) EXPECT_EQ(x, m);
    }
}

TEST(AugmentLinear, Preconditions) {
    const SParameterMatrix m{0.1, 0.1, 0.1, 0.1};
    EXPECT_THROW(augment_linear(std::vector{sample_with(0.2, m)}), validation_error);
    EXPECT_THROW(augment_linear(std::vector{sample_with(0.4, m), sample_with(0.2, m)}), validation_error);
    EXPECT_THROW(augment_linear(std::vector{sample_with(0.2, m), sample_with(0.4, m, 17)}), validation_error);
}

TEST(SavGolCoefficients, KnownKernels) {
    const auto c5 = savgol_coefficients({5, 2});
    const double ref5[5] = {-3, 12, 17, 12, -3};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(c5[i], ref5[i] / 35.0, 1e-12);

    const auto c3 = savgol_coefficients({3, 2});
    EXPECT_NEAR(c3[0], 0.0, 1e-12);
    EXPECT_NEAR(c3[1], 1.0, 1e-12);
    EXPECT_NEAR(c3[2], 0.0, 1e-12);

    const auto c7 = savgol_coefficients({7, 2});
    const double ref7[7] = {-2, 3, 6, 7, 6, 3, -2};
    for (int i = 0; i < 7; ++i) EXPECT_NEAR(c7[i], ref7[i] / 21.0, 1e-12);
}

TEST(SavGolCoefficients, MatchNormalEquationOracleAndSumToOne) {
    for (int w : {3, 5, 7, 9, 11, 15, 21}) {
        for (int o = 0; o < std::min(w, 5); ++o) {
            const auto c = savgol_coefficients({w, o});
            const auto ref = savgol_oracle(w, o);
            ASSERT_EQ(c.size(), static_cast<std::size_t>(w));
            for (int i = 0; i < w; ++i) EXPECT_NEAR(c[i], ref[i], 1e-10) << w << "/" << o;
            EXPECT_NEAR(std::accumulate(c.begin(), c.end(), 0.0), 1.0, 1e-12);
        }
    }
    EXPECT_THROW(savgol_coefficients({4, 2}), validation_error);
    EXPECT_THROW(savgol_coefficients({5, 5}), validation_error);
    EXPECT_THROW(savgol_coefficients({1, 0}), validation_error);
}

TEST(SavGolFilter, PolynomialsPassThroughInterior) {
    for (auto [w, o] : {std::pair{7, 2}, {5, 2}, {9, 3}, {11, 4}}) {
        const auto rec = polynomial_record(41, o);
        const auto out = savgol_filter(rec, {w, o});
        for (std::size_t i = w / 2; i + w / 2 < rec.size(); ++i) {
            for (int k = 0; k < 8; ++k) {
                EXPECT_NEAR(component(out.matrices()[i], k), component(rec.matrices()[i], k), 1e-9);
            }
        }
    }
}

TEST(SavGolFilter, ConstantUnchangedEverywhere) {
    const auto rec = sample_with(0.0, {{0.3, -0.2}, 0.1, 0.1, {0.5, 0.5}}, 30).record;
    const auto out = savgol_filter(rec, {11, 3});
    for (const auto& m : out.matrices()) {
        EXPECT_NEAR(std::abs(m.s11 - cplx(0.3, -0.2)), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(m.s22 - cplx(0.5, 0.5)), 0.0, 1e-12);
    }
    EXPECT_TRUE(out.same_grid(rec));
}

TEST(SavGolFilter, WhiteNoiseVarianceDrops) {
    SplitMix64 rng(8);
    const std::size_t n = 4000;
    std::vector<SParameterMatrix> m(n);
    for (auto& s : m) {
        auto z = [&] {
            const auto [a, b] = rng.normal_pair();
            return cplx(a, b);
        };
        s = {z(), z(), z(), z()};
    }
    const SParameterRecord rec(uniform_grid(n, 1e9, 2e9), m);
    const auto out = savgol_filter(rec, {11, 2});
    const auto c = savgol_coefficients({11, 2});
    const double factor = std::inner_product(c.begin(), c.end(), c.begin(), 0.0);
    ASSERT_LT(factor, 1.0);
    double vin = 0.0;
    double vout = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        vin += std::norm(rec.matrices()[i].s11);
        vout += std::norm(out.matrices()[i].s11);
    }
    EXPECT_LT(vout, vin);
    EXPECT_NEAR(vout / vin, factor, 0.2 * factor);
}

TEST(SavGolFilter, WindowLongerThanRecord) {
    EXPECT_THROW(savgol_filter(polynomial_record(5, 1), {7, 2}), validation_error);
}

TEST(SavGolOptimize, ExactFitBeatsUnderfit) {
    const auto rec = polynomial_record(60, 2);
    const std::vector<SavGolParams> c{{5, 2}, {5, 1}};
    EXPECT_EQ(savgol_optimize(rec, c), (SavGolParams{5, 2}));
    EXPECT_NEAR(savgol_loo_score(rec, {5, 2}), 0.0, 1e-20);
    EXPECT_GT(savgol_loo_score(rec, {5, 1}), 1e-10);
    EXPECT_TRUE(std::isinf(savgol_loo_score(rec, {5, 4})));
}

TEST(SavGolOptimize, TiesGoToSmallerWindow) {
    const auto rec = polynomial_record(60, 1);
    const std::vector<SavGolParams> c{{9, 2}, {7, 2}, {5, 2}};
    EXPECT_EQ(savgol_optimize(rec, c), (SavGolParams{5, 2}));
}

TEST(SavGolOptimize, SingleCandidateAndEmpty) {
    const auto rec = polynomial_record(60, 3);
    const std::vector<SavGolParams> one{{15, 4}};
    EXPECT_EQ(savgol_optimize(rec, one), (SavGolParams{15, 4}));
    EXPECT_THROW(savgol_optimize(rec, std::vector<SavGolParams>{}), validation_error);
}

TEST(SavGolOptimize, DefaultGrid) {
    const auto c = default_savgol_candidates();
    EXPECT_EQ(c.size(), 18u);
    for (const auto& p : c) EXPECT_NO_THROW(p.validate());
}

TEST(Scenarios, NamesRoundTrip) {
    const char* names[] = {"raw", "raw_aug", "raw_aug_filt", "deemb", "deemb_aug", "deemb_aug_filt"};
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(to_string(kAllScenarios[i]), names[i]);
        EXPECT_EQ(scenario_from_string(names[i]), kAllScenarios[i]);
    }
    EXPECT_THROW(scenario_from_string("filtered"), validation_error);
    EXPECT_TRUE(uses_deembedding(Scenario::deemb_aug));
    EXPECT_FALSE(uses_augmentation(Scenario::deemb));
    EXPECT_TRUE(uses_filtering(Scenario::raw_aug_filt));
}

TEST(Scenarios, BuildSizesAndFixtureRequirement) {
    SimConfig cfg;
    cfg.grid = {200, 1e9, 20e9};
    cfg.noise_sigma = 0.01;
    cfg.fixture = synth_fixture_pair(cfg.grid.points());
    auto raw = generate_dataset(cfg, linspace(0.0, 1.0, 21));
    for (auto& s : raw) s.provenance = Provenance::measured;

    ScenarioOptions opt;
    opt.savgol_candidates = {{5, 2}, {7, 2}};
    EXPECT_EQ(build_scenario(Scenario::raw, raw, std::nullopt).samples.size(), 21u);
    EXPECT_EQ(build_scenario(Scenario::raw_aug, raw, std::nullopt).samples.size(), 101u);
    const auto filt = build_scenario(Scenario::raw_aug_filt, raw, std::nullopt, opt);
    EXPECT_EQ(filt.samples.size(), 101u);
    ASSERT_TRUE(filt.filter.has_value());
    EXPECT_THROW(build_scenario(Scenario::deemb, raw, std::nullopt), config_error);

    // With a noiseless dataset de-embedding recovers the bare-cavity response.
    SimConfig clean = cfg;
    clean.noise_sigma = 0.0;
    const auto embedded = generate_dataset(clean, linspace(0.0, 1.0, 3));
    clean.fixture.reset();
    const auto bare = generate_dataset(clean, linspace(0.0, 1.0, 3));
    const auto de = build_scenario(Scenario::deemb, embedded, cfg.fixture);
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < 200; ++i) {
            EXPECT_LT(std::abs(de.samples[s].record.matrices()[i].s21 - bare[s].record.matrices()[i].s21), 1e-10);
        }
    }
}
