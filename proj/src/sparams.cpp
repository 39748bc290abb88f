#include "cavsense/sparams.hpp"

#include <algorithm>
#include <cmath>

#include "cavsense/errors.hpp"

namespace cavsense {

namespace {

bool finite(cplx z) noexcept { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

bool SParameterMatrix::is_finite() const noexcept {
    return finite(s11) && finite(s12) && finite(s21) && finite(s22);
}

TMatrix operator*(const TMatrix& x, const TMatrix& y) noexcept {
    return TMatrix{x.t11 * y.t11 + x.t12 * y.t21, x.t11 * y.t12 + x.t12 * y.t22,
                   x.t21 * y.t11 + x.t22 * y.t21, x.t21 * y.t12 + x.t22 * y.t22};
}

TMatrix s_to_t(const SParameterMatrix& m) {
    if (m.s21 == cplx{}) throw singularity_error("s21");
    const cplx inv = 1.0 / m.s21;
    return TMatrix{(m.s12 * m.s21 - m.s11 * m.s22) * inv, m.s11 * inv, -m.s22 * inv, inv};
}

SParameterMatrix t_to_s(const TMatrix& t) {
    if (t.t22 == cplx{}) throw singularity_error("t22");
    const cplx inv = 1.0 / t.t22;
    return SParameterMatrix{t.t12 * inv, t.determinant() * inv, inv, -t.t21 * inv};
}

SParameterRecord::SParameterRecord(std::vector<double> frequencies,
                                   std::vector<SParameterMatrix> matrices, std::string metadata)
    : frequencies_(std::move(frequencies)),
      matrices_(std::move(matrices)),
      metadata_(std::move(metadata)) {
    if (frequencies_.empty()) throw validation_error("S-parameter record has no frequency points");
    if (frequencies_.size() != matrices_.size()) {
        throw validation_error("S-parameter record has " + std::to_string(frequencies_.size()) +
                               " frequencies but " + std::to_string(matrices_.size()) + " matrices");
    }
    for (std::size_t i = 0; i < frequencies_.size(); ++i) {
        const double f = frequencies_[i];
        if (!std::isfinite(f) || f <= 0.0) {
            throw validation_error("frequency at index " + std::to_string(i) + " is not positive");
        }
        if (i > 0 && !(f > frequencies_[i - 1])) {
            throw validation_error("frequencies not strictly increasing at index " + std::to_string(i));
        }
        if (!matrices_[i].is_finite()) {
            throw validation_error("non-finite S-parameter at index " + std::to_string(i));
        }
    }
}

SParameterRecord SParameterRecord::with_metadata(std::string metadata) const {
    SParameterRecord copy = *this;
    copy.metadata_ = std::move(metadata);
    return copy;
}

bool SParameterRecord::same_grid(const SParameterRecord& other) const noexcept {
    return std::ranges::equal(frequencies_, other.frequencies_);
}

std::vector<double> uniform_grid(std::size_t n, double fmin, double fmax) {
    if (n < 2) throw validation_error("uniform grid needs at least 2 points");
    if (!(fmin < fmax)) throw validation_error("uniform grid needs fmin < fmax");
    std::vector<double> grid(n);
    const double step = (fmax - fmin) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) grid[i] = fmin + static_cast<double>(i) * step;
    grid.back() = fmax;
    return grid;
}

SParameterRecord resample_uniform(const SParameterRecord& record, std::size_t n, double fmin,
                                  double fmax) {
    const auto src_f = record.frequencies();
    const auto src_m = record.matrices();
    if (fmin < src_f.front() || fmax > src_f.back()) {
        throw range_error("resample range [" + std::to_string(fmin) + ", " + std::to_string(fmax) +
                          "] Hz extends beyond the record's [" + std::to_string(src_f.front()) +
                          ", " + std::to_string(src_f.back()) + "] Hz");
    }
    std::vector<double> grid = uniform_grid(n, fmin, fmax);
    std::vector<SParameterMatrix> out(n);
    auto lerp = [](cplx a, cplx b, double t) {
        return cplx{a.real() + t * (b.real() - a.real()), a.imag() + t * (b.imag() - a.imag())};
    };
    for (std::size_t i = 0; i < n; ++i) {
        const double f = grid[i];
        // First node >= f; exact hits copy the node unchanged.
        auto it = std::lower_bound(src_f.begin(), src_f.end(), f);
        const auto hi = static_cast<std::size_t>(it - src_f.begin());
        if (src_f[hi] == f) {
            out[i] = src_m[hi];
            continue;
        }
        const std::size_t lo = hi - 1;
        const double t = (f - src_f[lo]) / (src_f[hi] - src_f[lo]);
        const auto& a = src_m[lo];
        const auto& b = src_m[hi];
        out[i] = SParameterMatrix{lerp(a.s11, b.s11, t), lerp(a.s12, b.s12, t),
                                  lerp(a.s21, b.s21, t), lerp(a.s22, b.s22, t)};
    }
    return SParameterRecord(std::move(grid), std::move(out), record.metadata());
}

FeatureTensor to_feature_tensor(const SParameterRecord& record, std::size_t expected_length) {
    if (record.size() != expected_length) {
        throw shape_error("feature tensor needs " + std::to_string(expected_length) +
                          " frequency points, record has " + std::to_string(record.size()));
    }
    FeatureTensor x;
    x.length = expected_length;
    x.values.resize(kFeatureChannels * expected_length);
    const auto m = record.matrices();
    for (std::size_t i = 0; i < expected_length; ++i) {
        const std::array<cplx, 4> entries{m[i].s11, m[i].s12, m[i].s21, m[i].s22};
        for (std::size_t e = 0; e < 4; ++e) {
            x.values[(2 * e) * expected_length + i] = entries[e].real();
            x.values[(2 * e + 1) * expected_length + i] = entries[e].imag();
        }
    }
    return x;
}

}  // namespace cavsense
