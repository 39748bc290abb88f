#include <gtest/gtest.h>

#include <cmath>

#include "cavsense/errors.hpp"
#include "cavsense/mixture.hpp"
#include "cavsense/rng.hpp"

using namespace cavsense;

namespace {

// Positive root of 2x^2 + b x - eh ei = 0 for real permittivities.
double quadratic_oracle(double eh, double ei, double f) {
    const double b = eh + ei - 3.0 * (f * ei + (1.0 - f) * eh);
    return (-b + std::sqrt(b * b + 8.0 * eh * ei)) / 4.0;
}

}  // namespace

TEST(Bruggeman, EndpointsAreExact) {
    EXPECT_EQ(bruggeman_eff({2.5, 5.9, 0.0}), cplx(2.5));
    EXPECT_EQ(bruggeman_eff({2.5, 5.9, 1.0}), cplx(5.9));
    const cplx eh{3.0, -0.2};
    const cplx ei{10.0, -1.5};
    EXPECT_EQ(bruggeman_eff({eh, ei, 0.0}), eh);
    EXPECT_EQ(bruggeman_eff({eh, ei, 1.0}), ei);
}

TEST(Bruggeman, HalfAndHalfMatchesClosedForm) {
    const cplx e = bruggeman_eff({1.0, 3.0, 0.5});
    EXPECT_NEAR(e.real(), (1.0 + std::sqrt(7.0)) / 2.0, 1e-9);
    EXPECT_NEAR(e.imag(), 0.0, 1e-15);
}

TEST(Bruggeman, DegenerateMixture) {
    for (double f : {0.0, 0.1, 0.5, 0.77, 1.0}) EXPECT_EQ(bruggeman_eff({4.0, 4.0, f}), cplx(4.0));
}

TEST(Bruggeman, MatchesQuadraticOracleOnRealInputs) {
    SplitMix64 rng(21);
    for (int i = 0; i < 500; ++i) {
        const double eh = rng.uniform(1.0, 20.0);
        const double ei = rng.uniform(1.0, 80.0);
        const double f = rng.uniform();
        const cplx e = bruggeman_eff({eh, ei, f});
        EXPECT_NEAR(e.real(), quadratic_oracle(eh, ei, f), 1e-10 * std::max(eh, ei));
    }
}

TEST(Bruggeman, ResidualVanishesOnRandomLossySpecs) {
    SplitMix64 rng(4);
    for (int i = 0; i < 1000; ++i) {
        const MixtureSpec spec{{rng.uniform(1.0, 20.0), -rng.uniform(0.0, 5.0)},
                               {rng.uniform(1.0, 80.0), -rng.uniform(0.0, 20.0)},
                               rng.uniform()};
        const cplx e = bruggeman_eff(spec);
        EXPECT_GT(e.real(), 0.0);
        EXPECT_LE(e.imag(), 1e-12);
        EXPECT_LT(std::abs(bruggeman_residual(spec, e)), 1e-12);
    }
}

TEST(Bruggeman, MonotoneAndBoundedOnSweep) {
    double prev = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double f = i / 100.0;
        const double e = bruggeman_eff({2.5, 5.9, f}).real();
        EXPECT_GE(e, 2.5);
        EXPECT_LE(e, 5.9);
        // Bruggeman lies between the series (harmonic) and parallel (arithmetic) bounds.
        EXPECT_LE(e, f * 5.9 + (1.0 - f) * 2.5 + 1e-12);
        EXPECT_GE(e, 1.0 / (f / 5.9 + (1.0 - f) / 2.5) - 1e-12);
        if (i > 0) {
            EXPECT_GT(e, prev);
        }
        prev = e;
    }
}

TEST(Bruggeman, SwappingPhasesMirrorsTheFraction) {
    for (int i = 0; i <= 100; ++i) {
        const double f = i / 100.0;
        const cplx a = bruggeman_eff({{2.5, -0.1}, {5.9, -0.4}, f});
        const cplx b = bruggeman_eff({{5.9, -0.4}, {2.5, -0.1}, 1.0 - f});
        EXPECT_NEAR(std::abs(a - b), 0.0, 1e-12);
    }
}

TEST(Bruggeman, RejectsOutOfDomainSpecs) {
    EXPECT_THROW(bruggeman_eff({2.5, 5.9, -0.1}), validation_error);
    EXPECT_THROW(bruggeman_eff({2.5, 5.9, 1.1}), validation_error);
    EXPECT_THROW(bruggeman_eff({-1.0, 5.9, 0.5}), validation_error);
    EXPECT_THROW(bruggeman_eff({2.5, {5.9, 1.0}, 0.5}), validation_error);
    EXPECT_THROW(bruggeman_eff({2.5, 5.9, std::nan("")}), validation_error);
}

TEST(ComplementFraction, Examples) {
    EXPECT_EQ(complement_fraction(0.0), 1.0);
    EXPECT_EQ(complement_fraction(1.0), 0.0);
    EXPECT_NEAR(complement_fraction(0.35), 0.65, 1e-15);
    EXPECT_THROW(complement_fraction(-0.01), validation_error);
    EXPECT_THROW(complement_fraction(1.5), validation_error);
}
