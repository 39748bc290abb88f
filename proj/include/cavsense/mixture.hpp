#pragma once

#include "cavsense/sparams.hpp"

namespace cavsense {

// Two-phase dielectric mixture. Permittivities are relative and use the
// e^{+jwt} convention, so losses appear as Im(eps) <= 0.
struct MixtureSpec {
    cplx eps_host{2.5};
    cplx eps_incl{5.9};
    double fraction = 0.0;  // inclusion volume fraction

    // Throws validation_error when a field is out of its domain.
    void validate() const;
};

// Plumbing defaults for the salt/sand scenario, not measured values.
inline constexpr double kDefaultEpsSand = 2.5;
inline constexpr double kDefaultEpsSalt = 5.9;

// Effective permittivity from Bruggeman's symmetric mixing rule
//
//   f (ei - e) / (ei + 2e) + (1 - f) (eh - e) / (eh + 2e) = 0.
//
// Clearing denominators gives 2e^2 + e (eh + ei - 3(f ei + (1-f) eh)) - eh ei = 0.
// Both quadratic roots are formed and the one with positive real part is
// returned. When that is ambiguous the root is traced by continuation in f
// from the host permittivity at f = 0. Endpoints and the degenerate eh == ei
// case return the input permittivity exactly.
cplx bruggeman_eff(const MixtureSpec& spec);

// Left-hand side of the mixing rule evaluated at eps.
cplx bruggeman_residual(const MixtureSpec& spec, cplx eps);

// 1 - f, with f validated to lie in [0, 1].
double complement_fraction(double f);

}  // namespace cavsense
