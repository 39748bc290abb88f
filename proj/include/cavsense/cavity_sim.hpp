#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cavsense/fixture.hpp"
#include "cavsense/mixture.hpp"
#include "cavsense/sparams.hpp"

namespace cavsense {

inline constexpr double kSpeedOfLight = 299792458.0;

// Inner dimensions in metres: width a, height b, depth h.
struct CavityGeometry {
    double a = 0.040;
    double b = 0.020;
    double h = 0.040;
};

struct FrequencyGrid {
    std::size_t n_points = kDefaultPoints;
    double fmin = kDefaultFminHz;
    double fmax = kDefaultFmaxHz;

    std::vector<double> points() const { return uniform_grid(n_points, fmin, fmax); }
};

struct SimConfig {
    CavityGeometry geometry;
    FrequencyGrid grid;
    cplx eps_host{kDefaultEpsSand};
    cplx eps_incl{kDefaultEpsSalt};
    double coupling = 0.8;
    double q_factor = 50.0;
    double noise_sigma = 0.0;
    std::optional<FixturePair> fixture;
    std::uint64_t rng_seed = 0;

    // Throws validation_error on any out-of-domain field.
    void validate() const;
};

enum class Provenance { synthetic, measured, augmented };

std::string_view to_string(Provenance p) noexcept;
Provenance provenance_from_string(std::string_view s);

struct LabeledSample {
    SParameterRecord record;
    double fraction = 0.0;
    Provenance provenance = Provenance::synthetic;
    // Set only for augmented samples: fractions of the two parents.
    std::optional<double> parent_lo;
    std::optional<double> parent_hi;
    std::optional<std::uint64_t> seed;

    void validate() const;
};

struct CavityMode {
    int m = 0;
    int n = 0;
    int l = 0;
    double frequency = 0.0;  // Hz
};

// TE_mnl resonances of a rectangular cavity filled with eps_eff,
//   f = c / (2 sqrt(Re eps)) * sqrt((m/a)^2 + (n/b)^2 + (l/h)^2),
// for all index triples with at most one zero index and f <= fmax, sorted by
// frequency (ties by (m, n, l)).
std::vector<CavityMode> resonant_frequencies(const CavityGeometry& geom, cplx eps_eff, double fmax);

// One synthetic sweep at the given inclusion fraction:
//   s21(f) = sum_k coupling / (1 + j Q (f/f_k - f_k/f)),  s11 = 1 - s21,
//   s12 = s21, s22 = s11.
// Where overlapping modes would push the response outside the passive region
// (|s21| > 1 or |1 - s21| > 1) the sum is scaled back onto its boundary.
// Circular complex Gaussian noise with E|n|^2 = noise_sigma^2 is added to each
// entry, then the optional fixture is cascaded on both sides.
LabeledSample synth_sparams(const SimConfig& cfg, double fraction);

// One sample per fraction; sample i uses seed cfg.rng_seed + i.
std::vector<LabeledSample> generate_dataset(const SimConfig& cfg, std::span<const double> fractions);

// Evenly spaced fractions lo..hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t count);

}  // namespace cavsense
