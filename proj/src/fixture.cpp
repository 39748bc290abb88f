#include "cavsense/fixture.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "cavsense/errors.hpp"

namespace cavsense {

namespace {

void check_grids(const SParameterRecord& data, const FixturePair& fx) {
    if (!data.same_grid(fx.left) || !data.same_grid(fx.right)) {
        throw validation_error("fixture and data frequency grids differ");
    }
}

TMatrix to_t_at(const SParameterMatrix& m, std::size_t index) {
    try {
        return s_to_t(m);
    } catch (const singularity_error& e) {
        throw singularity_error(e.entry(), index);
    }
}

SParameterMatrix to_s_at(const TMatrix& t, std::size_t index) {
    try {
        return t_to_s(t);
    } catch (const singularity_error& e) {
        throw singularity_error(e.entry(), index);
    }
}

TMatrix inverse_checked(const TMatrix& t, const char* side, std::size_t index) {
    const cplx det = t.determinant();
    const double rcond = 1.0 / condition_number(t);
    if (!(std::abs(det) >= kMinFixtureConditioning) || !(rcond >= kMinFixtureConditioning)) {
        throw conditioning_error(std::string(side) + " fixture T-matrix is numerically singular at frequency index " +
                                 std::to_string(index) + " (|det| = " + std::to_string(std::abs(det)) +
                                 ", 1/cond = " + std::to_string(rcond) + ")");
    }
    return TMatrix{t.t22 / det, -t.t12 / det, -t.t21 / det, t.t11 / det};
}

}  // namespace

double condition_number(const TMatrix& t) {
    // Singular values of a 2x2 matrix from the Frobenius norm and |det|.
    const double fro2 = std::norm(t.t11) + std::norm(t.t12) + std::norm(t.t21) + std::norm(t.t22);
    const double det = std::abs(t.determinant());
    if (det == 0.0) return std::numeric_limits<double>::infinity();
    const double gap = std::sqrt(std::max(0.0, fro2 * fro2 - 4.0 * det * det));
    const double smax2 = 0.5 * (fro2 + gap);
    // smin^2 = det^2 / smax^2 avoids cancellation in (fro2 - gap).
    return smax2 / det;
}

SParameterRecord embed_fixture(const SParameterRecord& dut, const FixturePair& fx) {
    check_grids(dut, fx);
    const auto d = dut.matrices();
    const auto l = fx.left.matrices();
    const auto r = fx.right.matrices();
    std::vector<SParameterMatrix> out(dut.size());
    for (std::size_t i = 0; i < dut.size(); ++i) {
        const TMatrix total = to_t_at(l[i], i) * to_t_at(d[i], i) * to_t_at(r[i], i);
        out[i] = to_s_at(total, i);
    }
    return SParameterRecord({dut.frequencies().begin(), dut.frequencies().end()}, std::move(out),
                            dut.metadata());
}

SParameterRecord deembed(const SParameterRecord& measured, const FixturePair& fx) {
    check_grids(measured, fx);
    const auto m = measured.matrices();
    const auto l = fx.left.matrices();
    const auto r = fx.right.matrices();
    std::vector<SParameterMatrix> out(measured.size());
    for (std::size_t i = 0; i < measured.size(); ++i) {
        const TMatrix left_inv = inverse_checked(to_t_at(l[i], i), "left", i);
        const TMatrix right_inv = inverse_checked(to_t_at(r[i], i), "right", i);
        out[i] = to_s_at(left_inv * to_t_at(m[i], i) * right_inv, i);
    }
    return SParameterRecord({measured.frequencies().begin(), measured.frequencies().end()},
                            std::move(out), measured.metadata());
}

FixtureDiagnostics fixture_diagnostics(const FixturePair& fx) {
    FixtureDiagnostics diag;
    diag.min_abs_s21 = std::numeric_limits<double>::infinity();
    for (const auto* rec : {&fx.left, &fx.right}) {
        for (const auto& m : rec->matrices()) {
            diag.min_abs_s21 = std::min(diag.min_abs_s21, std::abs(m.s21));
            const double cond = m.s21 == cplx{} ? std::numeric_limits<double>::infinity()
                                                : condition_number(s_to_t(m));
            diag.max_condition_number = std::max(diag.max_condition_number, cond);
        }
    }
    return diag;
}

SParameterRecord synth_fixture_line(const FixtureLineModel& model, std::span<const double> frequencies) {
    constexpr double c0 = 299792458.0;
    constexpr double np_per_db = std::numbers::ln10 / 20.0;
    std::vector<SParameterMatrix> mats(frequencies.size());
    for (std::size_t i = 0; i < frequencies.size(); ++i) {
        const double f = frequencies[i];
        const double alpha = model.loss_db_per_m_at_10ghz * np_per_db * std::sqrt(f / 10e9);
        const double beta = 2.0 * std::numbers::pi * f / (model.velocity_factor * c0);
        const cplx thru = std::exp(cplx{-alpha * model.length_m, -beta * model.length_m});
        const cplx refl = model.reflection * std::exp(cplx{0.0, -2.0 * beta * model.length_m});
        mats[i] = SParameterMatrix{refl, thru, thru, refl};
    }
    return SParameterRecord({frequencies.begin(), frequencies.end()}, std::move(mats), "fixture-line");
}

FixturePair synth_fixture_pair(std::span<const double> frequencies, const FixtureLineModel& model) {
    FixtureLineModel right = model;
    right.length_m *= 1.2;
    return FixturePair{synth_fixture_line(model, frequencies).with_metadata("fixture-left"),
                       synth_fixture_line(right, frequencies).with_metadata("fixture-right")};
}

}  // namespace cavsense
