#include "cavsense/cavity_sim.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "cavsense/errors.hpp"
#include "cavsense/rng.hpp"

namespace cavsense {

void SimConfig::validate() const {
    if (!(geometry.a > 0.0 && geometry.b > 0.0 && geometry.h > 0.0)) {
        throw validation_error("cavity dimensions must be positive");
    }
    if (grid.n_points < 2 || !(grid.fmin > 0.0) || !(grid.fmin < grid.fmax)) {
        throw validation_error("frequency grid needs n >= 2 and 0 < fmin < fmax");
    }
    if (!(q_factor > 0.0)) throw validation_error("q_factor must be positive");
    if (!(coupling > 0.0 && coupling <= 1.0)) throw validation_error("coupling must lie in (0, 1]");
    if (!(noise_sigma >= 0.0)) throw validation_error("noise_sigma must be >= 0");
    MixtureSpec{eps_host, eps_incl, 0.0}.validate();
}

std::string_view to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::synthetic: return "synthetic";
        case Provenance::measured: return "measured";
        case Provenance::augmented: return "augmented";
    }
    return "synthetic";
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "synthetic") return Provenance::synthetic;
    if (s == "measured") return Provenance::measured;
    if (s == "augmented") return Provenance::augmented;
    throw validation_error("unknown provenance '" + std::string(s) + "'");
}

void LabeledSample::validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw validation_error("sample fraction outside [0, 1]");
    if (provenance == Provenance::augmented && (!parent_lo || !parent_hi)) {
        throw validation_error("augmented sample must record both parent fractions");
    }
}

std::vector<CavityMode> resonant_frequencies(const CavityGeometry& geom, cplx eps_eff, double fmax) {
    const double scale = kSpeedOfLight / (2.0 * std::sqrt(eps_eff.real()));
    // Each index alone is bounded by f <= fmax.
    const int m_max = static_cast<int>(std::floor(fmax / scale * geom.a));
    const int n_max = static_cast<int>(std::floor(fmax / scale * geom.b));
    const int l_max = static_cast<int>(std::floor(fmax / scale * geom.h));

    std::vector<CavityMode> modes;
    for (int m = 0; m <= m_max; ++m) {
        for (int n = 0; n <= n_max; ++n) {
            for (int l = 0; l <= l_max; ++l) {
                if ((m == 0) + (n == 0) + (l == 0) > 1) continue;
                const double km = m / geom.a;
                const double kn = n / geom.b;
                const double kl = l / geom.h;
                const double f = scale * std::sqrt(km * km + kn * kn + kl * kl);
                if (f <= fmax) modes.push_back({m, n, l, f});
            }
        }
    }
    std::ranges::sort(modes, [](const CavityMode& x, const CavityMode& y) {
        return std::tie(x.frequency, x.m, x.n, x.l) < std::tie(y.frequency, y.m, y.n, y.l);
    });
    return modes;
}

namespace {

// Largest scale in (0, 1] keeping s inside |s| <= 1 and |1 - s| <= 1.
// Every Lorentzian term has positive real part, so Re(s) > 0 here.
cplx clamp_passive(cplx s) {
    const double mag2 = std::norm(s);
    if (mag2 == 0.0) return s;
    double scale = 1.0;
    scale = std::min(scale, 1.0 / std::sqrt(mag2));
    scale = std::min(scale, 2.0 * s.real() / mag2);
    return scale < 1.0 ? s * scale : s;
}

}  // namespace

LabeledSample synth_sparams(const SimConfig& cfg, double fraction) {
    cfg.validate();
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw validation_error("fraction must lie in [0, 1]");

    const cplx eps_eff = bruggeman_eff(MixtureSpec{cfg.eps_host, cfg.eps_incl, fraction});
    const auto modes = resonant_frequencies(cfg.geometry, eps_eff, cfg.grid.fmax);
    std::vector<double> freqs = cfg.grid.points();

    SplitMix64 rng(cfg.rng_seed);
    const double component_sigma = cfg.noise_sigma / std::sqrt(2.0);
    auto noisy = [&](cplx z) {
        if (cfg.noise_sigma == 0.0) return z;
        const auto [re, im] = rng.normal_pair();
        return z + cplx{component_sigma * re, component_sigma * im};
    };

    std::vector<SParameterMatrix> mats(freqs.size());
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const double f = freqs[i];
        cplx s21{};
        for (const auto& mode : modes) {
            const double detune = f / mode.frequency - mode.frequency / f;
            s21 += cfg.coupling / cplx{1.0, cfg.q_factor * detune};
        }
        s21 = clamp_passive(s21);
        const cplx s11 = 1.0 - s21;
        SParameterMatrix m{s11, s21, s21, s11};
        m.s11 = noisy(m.s11);
        m.s12 = noisy(m.s12);
        m.s21 = noisy(m.s21);
        m.s22 = noisy(m.s22);
        mats[i] = m;
    }

    SParameterRecord record(std::move(freqs), std::move(mats), "synthetic");
    if (cfg.fixture) record = embed_fixture(record, *cfg.fixture);

    LabeledSample sample{std::move(record), fraction, Provenance::synthetic, {}, {}, cfg.rng_seed};
    return sample;
}

std::vector<LabeledSample> generate_dataset(const SimConfig& cfg, std::span<const double> fractions) {
    if (fractions.empty()) throw validation_error("fraction list is empty");
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw validation_error("fraction outside [0, 1] in dataset request");
    }
    std::vector<LabeledSample> samples;
    samples.reserve(fractions.size());
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        SimConfig per_sample = cfg;
        per_sample.rng_seed = cfg.rng_seed + i;
        samples.push_back(synth_sparams(per_sample, fractions[i]));
    }
    return samples;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
    if (count == 0) return {};
    if (count == 1) return {lo};
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    out.back() = hi;
    return out;
}

}  // namespace cavsense
