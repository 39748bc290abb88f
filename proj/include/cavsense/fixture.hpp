#pragma once

#include <cstdint>

#include "cavsense/sparams.hpp"

namespace cavsense {

// Two-port networks on either side of the device: measured = left . dut . right.
struct FixturePair {
    SParameterRecord left;
    SParameterRecord right;
};

// T_meas = T_left * T_dut * T_right per frequency. Throws validation_error on
// grid mismatch and singularity_error (with frequency index) when a matrix has
// s21 == 0.
SParameterRecord embed_fixture(const SParameterRecord& dut, const FixturePair& fx);

// T_dut = T_left^-1 * T_meas * T_right^-1. A fixture T-matrix with |det| or
// reciprocal condition number below kMinFixtureConditioning throws
// conditioning_error.
SParameterRecord deembed(const SParameterRecord& measured, const FixturePair& fx);

inline constexpr double kMinFixtureConditioning = 1e-15;

struct FixtureDiagnostics {
    double min_abs_s21 = 0.0;
    double max_condition_number = 0.0;  // 2-norm condition of the fixture T-matrices
};

FixtureDiagnostics fixture_diagnostics(const FixturePair& fx);

// 2-norm condition number of a 2x2 complex matrix (infinity if singular).
double condition_number(const TMatrix& t);

// Lossy, slightly mismatched transmission-line section used to emulate the
// connector/feed path of a raw measurement: s21 = s12 = exp(-(alpha + j beta) l),
// s11 = s22 = reflection * exp(-2 j beta l), with beta proportional to f.
struct FixtureLineModel {
    double length_m = 0.015;
    double loss_db_per_m_at_10ghz = 20.0;  // scales with sqrt(f)
    double reflection = 0.05;
    double velocity_factor = 0.7;
};

SParameterRecord synth_fixture_line(const FixtureLineModel& model, std::span<const double> frequencies);
FixturePair synth_fixture_pair(std::span<const double> frequencies, const FixtureLineModel& model = {});

}  // namespace cavsense
