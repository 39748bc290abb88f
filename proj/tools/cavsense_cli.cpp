// cavsense: dataset generation, preprocessing, training and prediction for
// the resonant-cavity volume-fraction regressor.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cavsense/checkpoint.hpp"
#include "cavsense/dataset_io.hpp"
#include "cavsense/errors.hpp"
#include "cavsense/run_config.hpp"
#include "cavsense/text.hpp"
#include "cavsense/touchstone.hpp"
#include "verify.hpp"

namespace fs = std::filesystem;
using namespace cavsense;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitIo = 2;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string in;
    std::optional<std::string> fractions;
    std::optional<std::string> scenario;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> k;
    bool allow_leakage = false;
};

RunConfig resolve_config(const CommonOptions& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.seed) cfg.set_seed(*o.seed);
    if (o.fractions) apply_setting(cfg, "fractions", *o.fractions);
    if (o.scenario) apply_setting(cfg, "scenario", *o.scenario);
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.k) cfg.train.k = *o.k;
    if (o.allow_leakage) cfg.train.allow_leakage = true;
    cfg.validate();
    return cfg;
}

void prepare_out(const fs::path& out, const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw io_error("cannot create " + out.string() + ": " + ec.message());
    write_text_file(out / "run_config.txt", to_text(cfg));
}

FrequencyGrid grid_of(const SParameterRecord& r) {
    const auto f = r.frequencies();
    return {r.size(), f.front(), f.back()};
}

int cmd_generate(const CommonOptions& o) {
    RunConfig cfg = resolve_config(o);
    const fs::path out(o.out);
    prepare_out(out, cfg);
    if (cfg.fixture) cfg.sim.fixture = synth_fixture_pair(cfg.sim.grid.points(), cfg.fixture_model);
    const auto fractions = parse_fraction_spec(cfg.fractions);
    const auto samples = generate_dataset(cfg.sim, fractions);
    write_dataset(out, samples, cfg.sim.fixture);
    std::printf("wrote %zu samples to %s\n", samples.size(), out.string().c_str());
    return kExitOk;
}

void copy_verbatim(const fs::path& in, const fs::path& out, const Dataset& ds) {
    std::vector<std::string> names = ds.filenames;
    names.emplace_back(kManifestName);
    if (ds.fixtures) {
        names.emplace_back(kFixtureLeftName);
        names.emplace_back(kFixtureRightName);
    }
    for (const auto& n : names) {
        std::error_code ec;
        fs::copy_file(in / n, out / n, fs::copy_options::overwrite_existing, ec);
        if (ec) throw io_error("cannot copy " + (in / n).string() + ": " + ec.message());
    }
}

int cmd_preprocess(const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path in(o.in);
    const fs::path out(o.out);
    const Dataset ds = read_dataset(in);
    prepare_out(out, cfg);
    if (cfg.scenario == Scenario::raw) {
        copy_verbatim(in, out, ds);
        std::printf("scenario raw: copied %zu samples\n", ds.samples.size());
        return kExitOk;
    }
    const ScenarioDataset sd = build_scenario(cfg.scenario, ds.samples, ds.fixtures, cfg.scenario_options);
    write_dataset(out, sd.samples, uses_deembedding(cfg.scenario) ? std::nullopt : ds.fixtures);
    std::printf("scenario %s: %zu samples", std::string(to_string(cfg.scenario)).c_str(), sd.samples.size());
    if (sd.filter) std::printf(", savgol window=%d order=%d", sd.filter->window, sd.filter->order);
    std::printf("\n");
    return kExitOk;
}

Checkpoint best_checkpoint(const TrainingReport& report, std::span<const LabeledSample> samples) {
    const FoldReport& best = report.best();
    // Probe with the first sample of the best fold's validation set.
    const FoldPlan plan = kfold_split(samples, report.config.k, report.config.seed, report.config.allow_leakage);
    const LabeledSample& probe = samples[plan.validation[best.fold].front()];
    return make_checkpoint(best.params, report.config.seed + best.fold, grid_of(probe.record),
                           to_feature_tensor(probe.record, report.config.arch.input_length));
}

std::string r2_text(const Metrics& m) {
    return m.r2 ? format_double(*m.r2) : "nan";
}

void print_summary(const TrainingReport& r) {
    const auto& m = r.best().metrics;
    std::printf("%-16s best fold %zu: mse=%.6g mae=%.6g r2=%s\n", r.scenario.c_str(), r.best_fold, m.mse, m.mae,
                r2_text(m).c_str());
    for (const auto& f : r.folds) {
        if (f.failed) std::fprintf(stderr, "fold %zu failed: %s\n", f.fold, f.failure.c_str());
    }
}

int cmd_train(const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path out(o.out);
    const Dataset ds = read_dataset(o.in);
    prepare_out(out, cfg);
    const TrainingReport report = train_model(ds.samples, cfg.train, "train");
    write_reports(out, std::span(&report, 1));
    save_checkpoint(out / "model.ckpt", best_checkpoint(report, ds.samples));
    print_summary(report);
    return kExitOk;
}

int cmd_scenarios(const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path out(o.out);
    const Dataset ds = read_dataset(o.in);
    prepare_out(out, cfg);

    std::vector<Scenario> which(kAllScenarios.begin(), kAllScenarios.end());
    if (o.scenario) which = {cfg.scenario};

    std::vector<TrainingReport> reports;
    std::string summary = "scenario,n_samples,savgol_window,savgol_order,mse,mae,r2\n";
    for (Scenario s : which) {
        const ScenarioDataset sd = build_scenario(s, ds.samples, ds.fixtures, cfg.scenario_options);
        TrainingReport r = train_model(sd.samples, cfg.train, std::string(to_string(s)));
        save_checkpoint(out / ("model_" + r.scenario + ".ckpt"), best_checkpoint(r, sd.samples));
        const auto& m = r.best().metrics;
        summary += r.scenario + "," + std::to_string(sd.samples.size()) + "," +
                   (sd.filter ? std::to_string(sd.filter->window) : "") + "," +
                   (sd.filter ? std::to_string(sd.filter->order) : "") + "," + format_double(m.mse) + "," +
                   format_double(m.mae) + "," + r2_text(m) + "\n";
        print_summary(r);
        reports.push_back(std::move(r));
    }
    write_reports(out, reports);
    write_text_file(out / "summary.csv", summary);
    return kExitOk;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& s2p_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const SParameterRecord record = read_touchstone_file(s2p_path);
    const SParameterRecord on_grid = resample_uniform(record, ckpt.grid.n_points, ckpt.grid.fmin, ckpt.grid.fmax);
    const double y = predict(to_feature_tensor(on_grid, ckpt.params.arch.input_length), ckpt.params);
    std::printf("fraction=%.6f complement=%.6f\n", y, 1.0 - y);
    return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_in, bool with_training) {
    cmd->add_option("--config", o.config, "key = value run configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "base random seed");
    cmd->add_option("--out", o.out, "output directory")->required();
    if (with_in) cmd->add_option("--in", o.in, "input dataset directory")->required();
    if (with_training) {
        cmd->add_option("--epochs", o.epochs, "training epochs");
        cmd->add_option("--k", o.k, "cross-validation folds");
        cmd->add_flag("--allow-leakage", o.allow_leakage,
                      "keep augmented samples whose parent is in the validation fold");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volume-fraction estimation from cavity S-parameters"};
    app.require_subcommand(1);

    CommonOptions gen_opts;
    auto* gen = app.add_subcommand("generate", "synthesize a labelled .s2p dataset");
    add_common(gen, gen_opts, false, false);
    gen->add_option("--fractions", gen_opts.fractions, "linspace:lo:hi:n or steps:d");

    CommonOptions pre_opts;
    auto* pre = app.add_subcommand("preprocess", "apply one scenario's preprocessing to a dataset");
    add_common(pre, pre_opts, true, false);
    pre->add_option("--scenario", pre_opts.scenario, "raw, raw_aug, raw_aug_filt, deemb, deemb_aug, deemb_aug_filt");

    CommonOptions train_opts;
    auto* train = app.add_subcommand("train", "k-fold training on a dataset; writes reports and checkpoint");
    add_common(train, train_opts, true, true);

    CommonOptions sc_opts;
    auto* sc = app.add_subcommand("scenarios", "preprocess and train all six scenarios");
    add_common(sc, sc_opts, true, true);
    sc->add_option("--scenario", sc_opts.scenario, "run only this scenario");

    std::string ckpt_path;
    std::string s2p_path;
    auto* pred = app.add_subcommand("predict", "predict the inclusion fraction of one .s2p file");
    pred->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    pred->add_option("file", s2p_path, ".s2p file")->required();

    bool corrupt_gradient = false;
    auto* ver = app.add_subcommand("verify", "run the fast invariant checks");
    ver->add_flag("--corrupt-gradient", corrupt_gradient)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFailure;
    }

    try {
        if (*gen) return cmd_generate(gen_opts);
        if (*pre) return cmd_preprocess(pre_opts);
        if (*train) return cmd_train(train_opts);
        if (*sc) return cmd_scenarios(sc_opts);
        if (*pred) return cmd_predict(ckpt_path, s2p_path);
        if (*ver) return run_verify(std::cout, {.corrupt_gradient = corrupt_gradient}) ? kExitOk : kExitFailure;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
