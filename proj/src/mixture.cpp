#include "cavsense/mixture.hpp"

#include <cmath>
#include <sstream>

#include "cavsense/errors.hpp"

namespace cavsense {

namespace {

struct Quadratic {
    cplx a, b, c;
    cplx operator()(cplx x) const { return (a * x + b) * x + c; }
    cplx derivative(cplx x) const { return 2.0 * a * x + b; }
};

Quadratic mixing_quadratic(const MixtureSpec& s) {
    const double f = s.fraction;
    const cplx linear = f * s.eps_incl + (1.0 - f) * s.eps_host;
    return Quadratic{2.0, s.eps_host + s.eps_incl - 3.0 * linear, -s.eps_host * s.eps_incl};
}

cplx polish(const Quadratic& q, cplx x) {
    for (int i = 0; i < 3; ++i) {
        const cplx d = q.derivative(x);
        if (d == cplx{}) break;
        const cplx step = q(x) / d;
        x -= step;
        if (std::abs(step) <= 1e-17 * std::abs(x)) break;
    }
    return x;
}

// Newton on the quadratic starting at `seed`; nullopt-style failure via NaN.
cplx newton(const Quadratic& q, cplx x) {
    for (int i = 0; i < 100; ++i) {
        const cplx d = q.derivative(x);
        if (d == cplx{}) return {NAN, NAN};
        const cplx step = q(x) / d;
        x -= step;
        if (std::abs(step) <= 1e-15 * std::abs(x)) return x;
    }
    return {NAN, NAN};
}

std::string fmt(cplx z) {
    std::ostringstream os;
    os.precision(17);
    os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "j";
    return os.str();
}

}  // namespace

void MixtureSpec::validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw validation_error("volume fraction must lie in [0, 1]");
    }
    if (!(eps_host.real() >= 1.0) || !(eps_incl.real() >= 1.0)) {
        throw validation_error("relative permittivities need Re(eps) >= 1");
    }
    if (eps_host.imag() > 0.0 || eps_incl.imag() > 0.0) {
        throw validation_error("permittivity imaginary parts must be <= 0 (e^{+jwt} loss convention)");
    }
}

cplx bruggeman_residual(const MixtureSpec& s, cplx eps) {
    const double f = s.fraction;
    return f * (s.eps_incl - eps) / (s.eps_incl + 2.0 * eps) +
           (1.0 - f) * (s.eps_host - eps) / (s.eps_host + 2.0 * eps);
}

cplx bruggeman_eff(const MixtureSpec& spec) {
    spec.validate();
    if (spec.fraction == 0.0 || spec.eps_host == spec.eps_incl) return spec.eps_host;
    if (spec.fraction == 1.0) return spec.eps_incl;

    const Quadratic q = mixing_quadratic(spec);
    // Numerically stable pair: r1 = t / a, r2 = c / t.
    const cplx disc = std::sqrt(q.b * q.b - 4.0 * q.a * q.c);
    const cplx t = std::real(std::conj(q.b) * disc) >= 0.0 ? -0.5 * (q.b + disc) : -0.5 * (q.b - disc);
    const cplx r1 = polish(q, t / q.a);
    const cplx r2 = polish(q, q.c / t);

    const bool r1_ok = r1.real() > 0.0;
    const bool r2_ok = r2.real() > 0.0;
    if (r1_ok != r2_ok) return r1_ok ? r1 : r2;

    // Ambiguous: continue the physical branch from eps_host at f = 0.
    constexpr int steps = 64;
    cplx x = spec.eps_host;
    for (int i = 1; i <= steps; ++i) {
        MixtureSpec partial = spec;
        partial.fraction = spec.fraction * i / steps;
        x = newton(mixing_quadratic(partial), x);
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) break;
    }
    if (std::isfinite(x.real()) && std::isfinite(x.imag())) {
        return std::abs(x - r1) <= std::abs(x - r2) ? r1 : r2;
    }
    throw numeric_error("no physical Bruggeman root; candidates " + fmt(r1) + " and " + fmt(r2));
}

double complement_fraction(double f) {
    if (!(f >= 0.0 && f <= 1.0)) throw validation_error("fraction must lie in [0, 1]");
    return 1.0 - f;
}

}  // namespace cavsense
