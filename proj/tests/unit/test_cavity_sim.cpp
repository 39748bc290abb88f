#include <gtest/gtest.h>

#include <cmath>

#include "cavsense/cavity_sim.hpp"
#include "cavsense/errors.hpp"
#include "cavsense/mixture.hpp"

using namespace cavsense;

namespace {

double te_oracle(const CavityGeometry& g, double eps, int m, int n, int l) {
    const double c = 299792458.0;
    return c / (2.0 * std::sqrt(eps)) * std::hypot(m / g.a, n / g.b, l / g.h);
}

}  // namespace

TEST(ResonantFrequencies, TE101InAirFilledCavity) {
    const CavityGeometry g{0.040, 0.020, 0.040};
    const auto modes = resonant_frequencies(g, 1.0, 20e9);
    ASSERT_FALSE(modes.empty());
    EXPECT_EQ(modes[0].m, 1);
    EXPECT_EQ(modes[0].n, 0);
    EXPECT_EQ(modes[0].l, 1);
    EXPECT_NEAR(modes[0].frequency, te_oracle(g, 1.0, 1, 0, 1), 1e-3);
    EXPECT_NEAR(modes[0].frequency / 1e9, 5.2996, 1e-4);
}

TEST(ResonantFrequencies, PermittivityFourHalvesEveryMode) {
    const CavityGeometry g;
    const auto air = resonant_frequencies(g, 1.0, 20e9);
    const auto filled = resonant_frequencies(g, 4.0, 10e9);
    ASSERT_EQ(air.size(), filled.size());
    for (std::size_t i = 0; i < air.size(); ++i) {
        EXPECT_NEAR(filled[i].frequency, air[i].frequency / 2.0, 1e-6);
    }
}

TEST(ResonantFrequencies, SortedAndIndexRules) {
    const CavityGeometry g;
    const auto modes = resonant_frequencies(g, 2.5, 20e9);
    ASSERT_GT(modes.size(), 5u);
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const auto& md = modes[i];
        EXPECT_LE(md.frequency, 20e9);
        EXPECT_LE((md.m == 0) + (md.n == 0) + (md.l == 0), 1);
        EXPECT_NEAR(md.frequency, te_oracle(g, 2.5, md.m, md.n, md.l), 1e-3);
        if (i > 0) {
            EXPECT_GE(md.frequency, modes[i - 1].frequency);
        }
    }
}

TEST(ResonantFrequencies, BelowLowestModeIsEmpty) {
    EXPECT_TRUE(resonant_frequencies(CavityGeometry{}, 1.0, 5e9).empty());
}

TEST(SynthSparams, UnitTransmissionAtIsolatedResonance) {
    const CavityGeometry g;
    const double f0 = te_oracle(g, 1.0, 1, 0, 1);
    SimConfig cfg;
    cfg.eps_host = 1.0;
    cfg.eps_incl = 1.0;
    cfg.coupling = 1.0;
    cfg.q_factor = 1e6;
    cfg.grid = {3, f0 - 1e6, f0 + 1e6};
    const auto s = synth_sparams(cfg, 0.0);
    ASSERT_NEAR(s.record.frequencies()[1], f0, 1e-3);
    EXPECT_NEAR(std::abs(s.record.matrices()[1].s21), 1.0, 1e-4);
}

TEST(SynthSparams, EndpointModeRatio) {
    const CavityGeometry g;
    const auto lo = resonant_frequencies(g, bruggeman_eff({2.5, 5.9, 0.0}), 20e9);
    const auto hi = resonant_frequencies(g, bruggeman_eff({2.5, 5.9, 1.0}), 20e9);
    // Lower frequencies at f=1 bring more modes under fmax.
    ASSERT_LE(lo.size(), hi.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
        EXPECT_NEAR(hi[i].frequency / lo[i].frequency, std::sqrt(2.5 / 5.9), 1e-12);
    }
}

TEST(SynthSparams, DeterministicForFixedSeed) {
    SimConfig cfg;
    cfg.noise_sigma = 0.01;
    cfg.rng_seed = 77;
    const auto a = synth_sparams(cfg, 0.4);
    const auto b = synth_sparams(cfg, 0.4);
    EXPECT_TRUE(a.record == b.record);
    cfg.rng_seed = 78;
    EXPECT_FALSE(synth_sparams(cfg, 0.4).record == a.record);
}

TEST(SynthSparams, NoiselessResponseIsPassiveAndReciprocal) {
    SimConfig cfg;
    for (double q : {5.0, 50.0, 500.0}) {
        cfg.q_factor = q;
        for (double f : {0.0, 0.3, 0.71, 1.0}) {
            const auto s = synth_sparams(cfg, f);
            EXPECT_EQ(s.fraction, f);
            EXPECT_EQ(s.provenance, Provenance::synthetic);
            for (const auto& m : s.record.matrices()) {
                EXPECT_LE(std::abs(m.s21), 1.0 + 1e-12);
                EXPECT_LE(std::abs(m.s11), 1.0 + 1e-12);
                EXPECT_EQ(m.s12, m.s21);
                EXPECT_EQ(m.s22, m.s11);
                EXPECT_NEAR(std::abs(m.s11 + m.s21 - 1.0), 0.0, 1e-15);
            }
        }
    }
}

TEST(SynthSparams, NoisePowerMatchesSigma) {
    SimConfig clean;
    SimConfig noisy = clean;
    noisy.noise_sigma = 0.02;
    noisy.rng_seed = 5;
    const auto a = synth_sparams(clean, 0.5);
    const auto b = synth_sparams(noisy, 0.5);
    double power = 0.0;
    double mean_re = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.record.size(); ++i) {
        const auto& x = a.record.matrices()[i];
        const auto& y = b.record.matrices()[i];
        for (cplx d : {y.s11 - x.s11, y.s12 - x.s12, y.s21 - x.s21, y.s22 - x.s22}) {
            power += std::norm(d);
            mean_re += d.real();
            ++n;
        }
    }
    EXPECT_NEAR(power / n, 0.02 * 0.02, 0.1 * 0.02 * 0.02);
    EXPECT_NEAR(mean_re / n, 0.0, 5.0 * 0.02 / std::sqrt(2.0 * n));
}

TEST(SynthSparams, RejectsBadInputs) {
    SimConfig cfg;
    EXPECT_THROW(synth_sparams(cfg, -0.1), validation_error);
    EXPECT_THROW(synth_sparams(cfg, 1.01), validation_error);
    cfg.q_factor = 0.0;
    EXPECT_THROW(synth_sparams(cfg, 0.5), validation_error);
    cfg = {};
    cfg.noise_sigma = -1.0;
    EXPECT_THROW(synth_sparams(cfg, 0.5), validation_error);
    cfg = {};
    cfg.grid.n_points = 0;
    EXPECT_THROW(synth_sparams(cfg, 0.5), validation_error);
}

TEST(GenerateDataset, CountsSeedsAndOrder) {
    SimConfig cfg;
    cfg.noise_sigma = 0.01;
    cfg.rng_seed = 100;
    const auto fr = linspace(0.0, 1.0, 21);
    const auto ds = generate_dataset(cfg, fr);
    ASSERT_EQ(ds.size(), 21u);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(ds[i].fraction, fr[i]);
        ASSERT_TRUE(ds[i].seed.has_value());
        EXPECT_EQ(*ds[i].seed, 100u + i);
    }
    SimConfig one = cfg;
    one.rng_seed = 107;
    EXPECT_TRUE(synth_sparams(one, fr[7]).record == ds[7].record);
    EXPECT_EQ(generate_dataset(cfg, linspace(0.0, 1.0, 100)).size(), 100u);
    EXPECT_THROW(generate_dataset(cfg, {}), validation_error);
}

TEST(Linspace, EndpointsExact) {
    const auto v = linspace(0.0, 1.0, 21);
    EXPECT_EQ(v.front(), 0.0);
    EXPECT_EQ(v.back(), 1.0);
    EXPECT_NEAR(v[1], 0.05, 1e-15);
}

TEST(ProvenanceNames, RoundTrip) {
    for (auto p : {Provenance::synthetic, Provenance::measured, Provenance::augmented}) {
        EXPECT_EQ(provenance_from_string(to_string(p)), p);
    }
    EXPECT_THROW(provenance_from_string("bogus"), validation_error);
}
