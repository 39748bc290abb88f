#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cavsense/cavity_sim.hpp"
#include "cavsense/fixture.hpp"

namespace cavsense {

// Interpolates n_intermediate synthetic sweeps between each adjacent pair of
// samples: for t = k/(n+1), s = s_lo + t (s_hi - s_lo) entrywise and
// fraction = f_lo + t (f_hi - f_lo). Originals pass through unchanged and the
// output stays sorted by fraction.
//
// Requires >= 2 samples sorted by fraction on one frequency grid.
std::vector<LabeledSample> augment_linear(std::span<const LabeledSample> samples,
                                          std::size_t n_intermediate = 4);

struct SavGolParams {
    int window = 5;
    int order = 2;

    void validate() const;
    friend bool operator==(const SavGolParams&, const SavGolParams&) = default;
};

// Center-point smoothing kernel from a least-squares polynomial fit over the
// centered window. Reproduces polynomials of degree <= order; sums to 1.
std::vector<double> savgol_coefficients(const SavGolParams& p);

// Smooths Re and Im of every S-entry with mirror padding (x[-k] = x[k]).
SParameterRecord savgol_filter(const SParameterRecord& record, const SavGolParams& p);
LabeledSample savgol_filter(const LabeledSample& sample, const SavGolParams& p);

// Leave-one-out residual: for every point with a full window, predict it from
// the other window points with a polynomial of the given order and average
// the squared prediction error over all 8 real channels. Infinity when the
// fit without the center is underdetermined (order >= window - 1).
double savgol_loo_score(const SParameterRecord& record, const SavGolParams& p);

// Lowest score wins; near-ties go to the smaller window, then smaller order.
SavGolParams savgol_optimize(const SParameterRecord& noisy, std::span<const SavGolParams> candidates);
SavGolParams savgol_optimize(std::span<const SParameterRecord> records,
                             std::span<const SavGolParams> candidates);

// window in {5,7,9,11,15,21} x order in {2,3,4}.
std::vector<SavGolParams> default_savgol_candidates();

enum class Scenario { raw, raw_aug, raw_aug_filt, deemb, deemb_aug, deemb_aug_filt };

inline constexpr std::array<Scenario, 6> kAllScenarios{Scenario::raw,   Scenario::raw_aug,
                                                       Scenario::raw_aug_filt, Scenario::deemb,
                                                       Scenario::deemb_aug, Scenario::deemb_aug_filt};

std::string_view to_string(Scenario s) noexcept;
Scenario scenario_from_string(std::string_view name);

bool uses_deembedding(Scenario s) noexcept;
bool uses_augmentation(Scenario s) noexcept;
bool uses_filtering(Scenario s) noexcept;

struct ScenarioOptions {
    std::size_t n_intermediate = 4;
    std::vector<SavGolParams> savgol_candidates = default_savgol_candidates();
};

struct ScenarioDataset {
    Scenario scenario = Scenario::raw;
    std::vector<LabeledSample> samples;
    std::optional<SavGolParams> filter;  // chosen Savitzky-Golay parameters
};

// Builds one of the six preprocessing variants from raw (fixture-embedded)
// samples: optional de-embedding, then augmentation, then filtering with
// parameters picked by savgol_optimize over the non-augmented records.
// Throws config_error when a de-embedding scenario has no fixtures.
ScenarioDataset build_scenario(Scenario scenario, std::span<const LabeledSample> raw,
                               const std::optional<FixturePair>& fixtures,
                               const ScenarioOptions& options = {});

}  // namespace cavsense
