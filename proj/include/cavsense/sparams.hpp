#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cavsense {

using cplx = std::complex<double>;

// Two-port scattering matrix at one frequency:
//   [b1 b2]^T = [[s11 s12] [s21 s22]] [a1 a2]^T
struct SParameterMatrix {
    cplx s11{};
    cplx s12{};
    cplx s21{};
    cplx s22{};

    bool is_finite() const noexcept;
    friend bool operator==(const SParameterMatrix&, const SParameterMatrix&) = default;
};

// Cascade matrix with [b1 a1]^T = T [a2 b2]^T, so networks chained port 2 to
// port 1 compose as T_total = T_first * T_second.
struct TMatrix {
    cplx t11{1.0};
    cplx t12{};
    cplx t21{};
    cplx t22{1.0};

    cplx determinant() const noexcept { return t11 * t22 - t12 * t21; }
    friend bool operator==(const TMatrix&, const TMatrix&) = default;
};

TMatrix operator*(const TMatrix& x, const TMatrix& y) noexcept;

// Throws singularity_error("s21") when s21 == 0.
TMatrix s_to_t(const SParameterMatrix& m);
// Throws singularity_error("t22") when t22 == 0.
SParameterMatrix t_to_s(const TMatrix& t);

// Frequency sweep of two-port S-parameters. Internally always Hz, RI, 50 ohm.
// Immutable once constructed; the constructor enforces the invariants
// (non-empty, equal lengths, frequencies > 0 and strictly increasing, finite
// entries) and throws validation_error otherwise.
class SParameterRecord {
public:
    SParameterRecord(std::vector<double> frequencies, std::vector<SParameterMatrix> matrices,
                     std::string metadata = {});

    std::span<const double> frequencies() const noexcept { return frequencies_; }
    std::span<const SParameterMatrix> matrices() const noexcept { return matrices_; }
    std::size_t size() const noexcept { return frequencies_.size(); }
    const std::string& metadata() const noexcept { return metadata_; }

    SParameterRecord with_metadata(std::string metadata) const;
    bool same_grid(const SParameterRecord& other) const noexcept;

    friend bool operator==(const SParameterRecord&, const SParameterRecord&) = default;

private:
    std::vector<double> frequencies_;
    std::vector<SParameterMatrix> matrices_;
    std::string metadata_;
};

// n points evenly spaced on [fmin, fmax]; the last point is exactly fmax.
std::vector<double> uniform_grid(std::size_t n, double fmin, double fmax);

// Linear interpolation of Re and Im separately onto uniform_grid(n, fmin, fmax).
// Throws range_error if [fmin, fmax] is not inside the record's span.
SParameterRecord resample_uniform(const SParameterRecord& record, std::size_t n, double fmin,
                                  double fmax);

inline constexpr std::size_t kFeatureChannels = 8;
inline constexpr std::size_t kDefaultPoints = 1002;
inline constexpr double kDefaultFminHz = 0.01e9;
inline constexpr double kDefaultFmaxHz = 20e9;

// Network input: 8 channels stored channel-major,
// [Re s11, Im s11, Re s12, Im s12, Re s21, Im s21, Re s22, Im s22].
struct FeatureTensor {
    std::size_t length = 0;
    std::vector<double> values;  // kFeatureChannels * length

    double at(std::size_t channel, std::size_t index) const { return values[channel * length + index]; }
    std::span<const double> channel(std::size_t c) const {
        return std::span<const double>(values).subspan(c * length, length);
    }
};

// Throws shape_error unless record.size() == expected_length.
FeatureTensor to_feature_tensor(const SParameterRecord& record,
                                std::size_t expected_length = kDefaultPoints);

}  // namespace cavsense
