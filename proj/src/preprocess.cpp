#include "cavsense/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "cavsense/errors.hpp"

namespace cavsense {

std::vector<LabeledSample> augment_linear(std::span<const LabeledSample> samples, std::size_t n_intermediate) {
    if (samples.size() < 2) throw validation_error("augmentation needs at least 2 samples");
    if (n_intermediate < 1) throw validation_error("augmentation needs n_intermediate >= 1");
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].fraction < samples[i - 1].fraction) {
            throw validation_error("augmentation input must be sorted by fraction");
        }
        if (!samples[i].record.same_grid(samples[0].record)) {
            throw validation_error("augmentation input must share one frequency grid");
        }
    }

    auto lerp = [](cplx a, cplx b, double t) { return a + t * (b - a); };
    std::vector<LabeledSample> out;
    out.reserve(samples.size() + (samples.size() - 1) * n_intermediate);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out.push_back(samples[i]);
        if (i + 1 == samples.size()) break;
        const auto& lo = samples[i];
        const auto& hi = samples[i + 1];
        const auto mlo = lo.record.matrices();
        const auto mhi = hi.record.matrices();
        for (std::size_t k = 1; k <= n_intermediate; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(n_intermediate + 1);
            std::vector<SParameterMatrix> mats(mlo.size());
            for (std::size_t j = 0; j < mlo.size(); ++j) {
                mats[j] = SParameterMatrix{lerp(mlo[j].s11, mhi[j].s11, t), lerp(mlo[j].s12, mhi[j].s12, t),
                                           lerp(mlo[j].s21, mhi[j].s21, t), lerp(mlo[j].s22, mhi[j].s22, t)};
            }
            LabeledSample aug{
                SParameterRecord({lo.record.frequencies().begin(), lo.record.frequencies().end()},
                                 std::move(mats), "augmented"),
                lo.fraction + t * (hi.fraction - lo.fraction),
                Provenance::augmented,
                lo.fraction,
                hi.fraction,
                std::nullopt};
            out.push_back(std::move(aug));
        }
    }
    return out;
}

void SavGolParams::validate() const {
    if (window < 3 || window % 2 == 0) throw validation_error("Savitzky-Golay window must be odd and >= 3");
    if (order < 0 || order >= window) throw validation_error("Savitzky-Golay order must satisfy 0 <= order < window");
}

namespace {

// Weights w (one per row of `offsets`) such that sum_k w_k y_k is the value at
// 0 of the least-squares polynomial of the given order through (offsets, y).
// Offsets are scaled to [-1, 1] for conditioning; the weights do not change.
Eigen::VectorXd center_value_weights(const std::vector<int>& offsets, int order, int half) {
    const auto rows = static_cast<Eigen::Index>(offsets.size());
    Eigen::MatrixXd vander(rows, order + 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double x = static_cast<double>(offsets[r]) / half;
        double p = 1.0;
        for (int c = 0; c <= order; ++c) {
            vander(r, c) = p;
            p *= x;
        }
    }
    // Row 0 of the pseudo-inverse maps samples to the constant coefficient.
    const Eigen::MatrixXd pinv = vander.completeOrthogonalDecomposition().pseudoInverse();
    return pinv.row(0).transpose();
}

std::array<std::vector<double>, 8> split_channels(const SParameterRecord& record) {
    std::array<std::vector<double>, 8> ch;
    for (auto& c : ch) c.resize(record.size());
    const auto m = record.matrices();
    for (std::size_t i = 0; i < record.size(); ++i) {
        const std::array<cplx, 4> e{m[i].s11, m[i].s12, m[i].s21, m[i].s22};
        for (std::size_t k = 0; k < 4; ++k) {
            ch[2 * k][i] = e[k].real();
            ch[2 * k + 1][i] = e[k].imag();
        }
    }
    return ch;
}

std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    if (i < 0) i = -i;
    if (i > last) i = 2 * last - i;
    return static_cast<std::size_t>(i);
}

}  // namespace

std::vector<double> savgol_coefficients(const SavGolParams& p) {
    p.validate();
    const int half = p.window / 2;
    std::vector<int> offsets(p.window);
    for (int k = 0; k < p.window; ++k) offsets[k] = k - half;
    const Eigen::VectorXd w = center_value_weights(offsets, p.order, half);
    return {w.data(), w.data() + w.size()};
}

SParameterRecord savgol_filter(const SParameterRecord& record, const SavGolParams& p) {
    p.validate();
    const std::size_t n = record.size();
    if (static_cast<std::size_t>(p.window) > n) {
        throw validation_error("Savitzky-Golay window " + std::to_string(p.window) + " exceeds record length " +
                               std::to_string(n));
    }
    const auto kernel = savgol_coefficients(p);
    const int half = p.window / 2;
    const auto ch = split_channels(record);
    std::array<std::vector<double>, 8> smooth;
    for (std::size_t c = 0; c < 8; ++c) {
        smooth[c].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = 0; k < p.window; ++k) {
                acc += kernel[k] * ch[c][mirror_index(static_cast<std::ptrdiff_t>(i) + k - half, n)];
            }
            smooth[c][i] = acc;
        }
    }
    std::vector<SParameterMatrix> mats(n);
    for (std::size_t i = 0; i < n; ++i) {
        mats[i] = SParameterMatrix{{smooth[0][i], smooth[1][i]},
                                   {smooth[2][i], smooth[3][i]},
                                   {smooth[4][i], smooth[5][i]},
                                   {smooth[6][i], smooth[7][i]}};
    }
    return SParameterRecord({record.frequencies().begin(), record.frequencies().end()}, std::move(mats),
                            record.metadata());
}

LabeledSample savgol_filter(const LabeledSample& sample, const SavGolParams& p) {
    LabeledSample out = sample;
    out.record = savgol_filter(sample.record, p);
    return out;
}

double savgol_loo_score(const SParameterRecord& record, const SavGolParams& p) {
    p.validate();
    if (p.order >= p.window - 1) return std::numeric_limits<double>::infinity();
    const std::size_t n = record.size();
    const int half = p.window / 2;
    if (static_cast<std::size_t>(p.window) > n) return std::numeric_limits<double>::infinity();

    std::vector<int> offsets;
    for (int k = -half; k <= half; ++k) {
        if (k != 0) offsets.push_back(k);
    }
    const Eigen::VectorXd w = center_value_weights(offsets, p.order, half);

    const auto ch = split_channels(record);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& x : ch) {
        for (std::size_t i = half; i + half < n; ++i) {
            double pred = 0.0;
            for (std::size_t k = 0; k < offsets.size(); ++k) {
                pred += w[static_cast<Eigen::Index>(k)] * x[i + offsets[k]];
            }
            const double r = x[i] - pred;
            total += r * r;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

namespace {

bool near_tie(double a, double b) {
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)) + 1e-24;
}

SavGolParams pick_best(std::span<const SavGolParams> candidates, const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto& b = candidates[best];
        if (near_tie(scores[i], scores[best])) {
            if (std::tie(c.window, c.order) < std::tie(b.window, b.order)) best = i;
        } else if (scores[i] < scores[best]) {
            best = i;
        }
    }
    return candidates[best];
}

}  // namespace

SavGolParams savgol_optimize(const SParameterRecord& noisy, std::span<const SavGolParams> candidates) {
    return savgol_optimize(std::span<const SParameterRecord>(&noisy, 1), candidates);
}

SavGolParams savgol_optimize(std::span<const SParameterRecord> records, std::span<const SavGolParams> candidates) {
    if (candidates.empty()) throw validation_error("Savitzky-Golay optimizer needs at least one candidate");
    if (candidates.size() == 1) return candidates.front();
    std::vector<double> scores(candidates.size(), 0.0);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (const auto& r : records) scores[i] += savgol_loo_score(r, candidates[i]);
    }
    return pick_best(candidates, scores);
}

std::vector<SavGolParams> default_savgol_candidates() {
    std::vector<SavGolParams> out;
    for (int w : {5, 7, 9, 11, 15, 21}) {
        for (int o : {2, 3, 4}) out.push_back({w, o});
    }
    return out;
}

std::string_view to_string(Scenario s) noexcept {
    switch (s) {
        case Scenario::raw: return "raw";
        case Scenario::raw_aug: return "raw_aug";
        case Scenario::raw_aug_filt: return "raw_aug_filt";
        case Scenario::deemb: return "deemb";
        case Scenario::deemb_aug: return "deemb_aug";
        case Scenario::deemb_aug_filt: return "deemb_aug_filt";
    }
    return "raw";
}

Scenario scenario_from_string(std::string_view name) {
    for (Scenario s : kAllScenarios) {
        if (to_string(s) == name) return s;
    }
    throw validation_error("unknown scenario '" + std::string(name) + "'");
}

bool uses_deembedding(Scenario s) noexcept {
    return s == Scenario::deemb || s == Scenario::deemb_aug || s == Scenario::deemb_aug_filt;
}

bool uses_augmentation(Scenario s) noexcept {
    return s == Scenario::raw_aug || s == Scenario::raw_aug_filt || s == Scenario::deemb_aug ||
           s == Scenario::deemb_aug_filt;
}

bool uses_filtering(Scenario s) noexcept { return s == Scenario::raw_aug_filt || s == Scenario::deemb_aug_filt; }

ScenarioDataset build_scenario(Scenario scenario, std::span<const LabeledSample> raw,
                               const std::optional<FixturePair>& fixtures, const ScenarioOptions& options) {
    ScenarioDataset out;
    out.scenario = scenario;
    std::vector<LabeledSample> base(raw.begin(), raw.end());
    std::ranges::stable_sort(base, {}, &LabeledSample::fraction);

    if (uses_deembedding(scenario)) {
        if (!fixtures) throw config_error("scenario " + std::string(to_string(scenario)) + " needs fixture files");
        for (auto& s : base) s.record = deembed(s.record, *fixtures);
    }
    if (uses_augmentation(scenario)) base = augment_linear(base, options.n_intermediate);
    if (uses_filtering(scenario)) {
        std::vector<SParameterRecord> originals;
        for (const auto& s : base) {
            if (s.provenance != Provenance::augmented) originals.push_back(s.record);
        }
        const SavGolParams best = savgol_optimize(originals, options.savgol_candidates);
        for (auto& s : base) s = savgol_filter(s, best);
        out.filter = best;
    }
    out.samples = std::move(base);
    return out;
}

}  // namespace cavsense
