#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cavsense/cavity_sim.hpp"
#include "cavsense/neuralnet.hpp"
#include "cavsense/preprocess.hpp"

namespace cavsense {

// Fold index of every sample. Augmented samples carry kTrainOnly and are
// never validated.
struct FoldPlan {
    static constexpr int kTrainOnly = -1;

    std::size_t k = 0;
    std::vector<int> assignments;
    // Per fold: sample indices used for training / validation, ascending.
    std::vector<std::vector<std::size_t>> training;
    std::vector<std::vector<std::size_t>> validation;

    std::size_t validation_size(std::size_t fold) const { return validation.at(fold).size(); }
};

// Non-augmented samples are shuffled with the seed and dealt round-robin into
// k folds. Unless allow_leakage is set, an augmented sample is dropped from a
// fold's training set when either of its parents sits in that fold's
// validation set.
FoldPlan kfold_split(std::span<const LabeledSample> samples, std::size_t k, std::uint64_t seed,
                     bool allow_leakage = false);

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    // Empty when the targets have zero variance.
    std::optional<double> r2;
};

Metrics compute_metrics(std::span<const double> pred, std::span<const double> target);

// 1 - SS_res / SS_tot; numeric_error when all targets are identical.
double r_squared(std::span<const double> pred, std::span<const double> target);

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t k = 5;
    std::uint64_t seed = 0;
    // lr 1e-3 drives every fc1 unit dead within the first steps on raw
    // S-parameter inputs; 1e-4 trains reliably.
    AdamHyper adam{.lr = 1e-4};
    Architecture arch;
    std::size_t batch_size = 16;
    // Training sets up to this size use one full batch per epoch.
    std::size_t full_batch_max = 32;
    bool allow_leakage = false;
    // Folds trained concurrently; 0 picks the hardware concurrency.
    std::size_t threads = 0;

    void validate() const;
};

struct EpochRecord {
    double train_loss = 0.0;  // mean per-sample loss seen during the epoch
    double val_loss = 0.0;    // after the epoch's last update
    double train_mae = 0.0;
    double val_mae = 0.0;
};

struct FoldReport {
    std::size_t fold = 0;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    std::vector<EpochRecord> curve;
    Metrics metrics;  // on the validation fold with the final parameters
    std::vector<double> val_predictions;
    std::vector<double> val_targets;
    ModelParams params;
    bool failed = false;
    std::string failure;
};

struct TrainingReport {
    std::string scenario;
    TrainConfig config;
    std::vector<FoldReport> folds;
    std::size_t best_fold = 0;  // argmin of final validation MSE over folds that did not fail
    std::vector<EpochRecord> mean_curve;
    Metrics mean_metrics;

    const FoldReport& best() const { return folds.at(best_fold); }
};

// Cross-validated training. Samples must share one frequency grid of
// cfg.arch.input_length points. Folds that hit a numeric_error are marked
// failed and the rest continue; if every fold fails numeric_error is thrown.
TrainingReport train_model(std::span<const LabeledSample> samples, const TrainConfig& cfg, std::string scenario = "");

struct ScenarioReport {
    Scenario scenario;
    std::optional<SavGolParams> filter;
    std::size_t n_samples = 0;
    TrainingReport report;
};

ScenarioReport run_scenario(Scenario scenario, std::span<const LabeledSample> measured,
                            const std::optional<FixturePair>& fixtures, const TrainConfig& cfg,
                            const ScenarioOptions& options = {});

std::vector<ScenarioReport> run_scenarios(std::span<const LabeledSample> measured,
                                          const std::optional<FixturePair>& fixtures, const TrainConfig& cfg,
                                          std::span<const Scenario> scenarios = kAllScenarios,
                                          const ScenarioOptions& options = {});

// report.csv: scenario,fold,mse,mae,r2 with one row per fold followed by
// "best" and "mean" rows.
std::string report_csv(std::span<const TrainingReport> reports);
// epoch,train_loss,val_loss,train_mae,val_mae
std::string curve_csv(std::span<const EpochRecord> curve);

// Writes report.csv plus curves_<scenario>_fold<i>.csv and
// curves_<scenario>_mean.csv for every report.
void write_reports(const std::filesystem::path& dir, std::span<const TrainingReport> reports);

}  // namespace cavsense
