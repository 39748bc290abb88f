#include "cavsense/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numeric>
#include <thread>

#include "cavsense/dataset_io.hpp"
#include "cavsense/errors.hpp"
#include "cavsense/text.hpp"
#include "cavsense/rng.hpp"

namespace cavsense {

namespace {

constexpr double kParentTolerance = 1e-12;
// Caches are large (about 0.6 MB per sample), so inference runs in chunks.
constexpr std::size_t kEvalChunk = 32;

bool is_augmented(const LabeledSample& s) { return s.provenance == Provenance::augmented; }

bool near(double a, double b) { return std::abs(a - b) <= kParentTolerance; }

}  // namespace

FoldPlan kfold_split(std::span<const LabeledSample> samples, std::size_t k, std::uint64_t seed, bool allow_leakage) {
    if (k < 2) throw validation_error("k must be at least 2");
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!is_augmented(samples[i])) eligible.push_back(i);
    }
    if (eligible.size() < k) {
        throw validation_error("k=" + std::to_string(k) + " exceeds the " + std::to_string(eligible.size()) +
                               " non-augmented samples");
    }

    SplitMix64 rng(seed);
    for (std::size_t i = eligible.size(); i > 1; --i) {
        std::swap(eligible[i - 1], eligible[rng.below(i)]);
    }

    FoldPlan plan;
    plan.k = k;
    plan.assignments.assign(samples.size(), FoldPlan::kTrainOnly);
    for (std::size_t r = 0; r < eligible.size(); ++r) plan.assignments[eligible[r]] = static_cast<int>(r % k);

    plan.training.resize(k);
    plan.validation.resize(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<double> held_out;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (plan.assignments[i] == static_cast<int>(f)) {
                plan.validation[f].push_back(i);
                held_out.push_back(samples[i].fraction);
            }
        }
        auto leaks = [&](const LabeledSample& s) {
            for (double v : held_out) {
                if ((s.parent_lo && near(*s.parent_lo, v)) || (s.parent_hi && near(*s.parent_hi, v))) return true;
            }
            return false;
        };
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const int a = plan.assignments[i];
            if (a == static_cast<int>(f)) continue;
            if (a == FoldPlan::kTrainOnly && !allow_leakage && leaks(samples[i])) continue;
            plan.training[f].push_back(i);
        }
    }
    return plan;
}

double r_squared(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw validation_error("r_squared needs equal, non-zero lengths");
    }
    const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(target.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ss_res += (target[i] - pred[i]) * (target[i] - pred[i]);
        ss_tot += (target[i] - mean) * (target[i] - mean);
    }
    if (!(ss_tot > 0.0)) throw numeric_error("R^2 undefined: targets have zero variance");
    return 1.0 - ss_res / ss_tot;
}

Metrics compute_metrics(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw validation_error("compute_metrics: " + std::to_string(pred.size()) + " predictions vs " +
                               std::to_string(target.size()) + " targets");
    }
    Metrics m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        m.mse += e * e;
        m.mae += std::abs(e);
    }
    m.mse /= static_cast<double>(pred.size());
    m.mae /= static_cast<double>(pred.size());
    try {
        m.r2 = r_squared(pred, target);
    } catch (const numeric_error&) {
        m.r2.reset();
    }
    return m;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw validation_error("epochs must be at least 1");
    if (k < 2) throw validation_error("k must be at least 2");
    if (batch_size < 1) throw validation_error("batch_size must be at least 1");
    if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
        !(adam.eps > 0.0)) {
        throw validation_error("Adam hyperparameters out of range");
    }
    arch.validate();
}

namespace {

struct Evaluation {
    std::vector<double> pred;
    double loss = 0.0;
    double mae = 0.0;
};

Evaluation evaluate(const std::vector<FeatureTensor>& features, std::span<const double> targets,
                    std::span<const std::size_t> idx, const ModelParams& p) {
    Evaluation ev;
    ev.pred.reserve(idx.size());
    std::vector<const FeatureTensor*> chunk;
    for (std::size_t start = 0; start < idx.size(); start += kEvalChunk) {
        chunk.clear();
        for (std::size_t i = start; i < std::min(idx.size(), start + kEvalChunk); ++i) chunk.push_back(&features[idx[i]]);
        for (const auto& r : batch_forward(chunk, p)) ev.pred.push_back(r.prediction);
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double e = ev.pred[i] - targets[idx[i]];
        ev.loss += e * e;
        ev.mae += std::abs(e);
    }
    if (!idx.empty()) {
        ev.loss /= static_cast<double>(idx.size());
        ev.mae /= static_cast<double>(idx.size());
    }
    return ev;
}

FoldReport train_fold(std::size_t fold, const FoldPlan& plan, const std::vector<FeatureTensor>& features,
                      std::span<const double> targets, const TrainConfig& cfg) {
    FoldReport rep;
    rep.fold = fold;
    const auto& train = plan.training[fold];
    const auto& val = plan.validation[fold];
    rep.n_train = train.size();
    rep.n_validation = val.size();
    rep.params = init_params(cfg.seed + fold, cfg.arch);

    try {
        if (train.empty()) throw validation_error("fold " + std::to_string(fold) + " has no training samples");
        AdamState state(rep.params, cfg.adam);
        ModelParams grads(cfg.arch);
        const std::size_t batch = train.size() <= cfg.full_batch_max ? train.size() : cfg.batch_size;
        std::vector<std::size_t> order(train.begin(), train.end());
        std::vector<const FeatureTensor*> xs;
        std::vector<const ForwardCache*> caches;
        std::vector<double> d;

        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            if (batch < train.size()) {
                SplitMix64 rng(derive_seed(cfg.seed, fold, epoch));
                std::copy(train.begin(), train.end(), order.begin());
                for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
            }
            EpochRecord rec;
            for (std::size_t start = 0; start < order.size(); start += batch) {
                const std::size_t stop = std::min(order.size(), start + batch);
                const double n = static_cast<double>(stop - start);
                xs.clear();
                for (std::size_t i = start; i < stop; ++i) xs.push_back(&features[order[i]]);
                const auto fwd = batch_forward(xs, rep.params);
                caches.clear();
                d.clear();
                for (std::size_t i = start; i < stop; ++i) {
                    const double e = fwd[i - start].prediction - targets[order[i]];
                    rec.train_loss += e * e;
                    rec.train_mae += std::abs(e);
                    caches.push_back(&fwd[i - start].cache);
                    d.push_back(2.0 * e / n);
                }
                grads.set_zero();
                batch_accumulate_backward(caches, rep.params, d, grads);
                adam_step(rep.params, grads, state);
            }
            rec.train_loss /= static_cast<double>(order.size());
            rec.train_mae /= static_cast<double>(order.size());

            const Evaluation ev = evaluate(features, targets, val, rep.params);
            rec.val_loss = ev.loss;
            rec.val_mae = ev.mae;
            if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
                throw numeric_error("non-finite loss at epoch " + std::to_string(epoch));
            }
            rep.curve.push_back(rec);
            if (epoch + 1 == cfg.epochs) {
                rep.val_predictions = ev.pred;
                for (std::size_t i : val) rep.val_targets.push_back(targets[i]);
                rep.metrics = compute_metrics(rep.val_predictions, rep.val_targets);
            }
        }
    } catch (const numeric_error& e) {
        rep.failed = true;
        rep.failure = e.what();
    }
    return rep;
}

}  // namespace

TrainingReport train_model(std::span<const LabeledSample> samples, const TrainConfig& cfg, std::string scenario) {
    cfg.validate();
    if (samples.empty()) throw validation_error("no samples to train on");
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!samples[i].record.same_grid(samples[0].record)) {
            throw validation_error("sample " + std::to_string(i) + " is on a different frequency grid");
        }
    }

    std::vector<FeatureTensor> features;
    std::vector<double> targets;
    features.reserve(samples.size());
    for (const auto& s : samples) {
        features.push_back(to_feature_tensor(s.record, cfg.arch.input_length));
        targets.push_back(s.fraction);
    }
    const FoldPlan plan = kfold_split(samples, cfg.k, cfg.seed, cfg.allow_leakage);

    TrainingReport report;
    report.scenario = std::move(scenario);
    report.config = cfg;
    report.folds.resize(cfg.k);

    std::size_t workers = cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads;
    workers = std::clamp<std::size_t>(workers, 1, cfg.k);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t f = next++; f < cfg.k; f = next++) {
            report.folds[f] = train_fold(f, plan, features, targets, cfg);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::future<void>> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.push_back(std::async(std::launch::async, work));
        for (auto& fut : pool) fut.get();
    }

    std::optional<std::size_t> best;
    std::size_t ok = 0;
    report.mean_curve.assign(cfg.epochs, EpochRecord{});
    std::size_t with_r2 = 0;
    double r2_sum = 0.0;
    for (const auto& f : report.folds) {
        if (f.failed) continue;
        ++ok;
        if (!best || f.metrics.mse < report.folds[*best].metrics.mse) best = f.fold;
        for (std::size_t e = 0; e < cfg.epochs; ++e) {
            report.mean_curve[e].train_loss += f.curve[e].train_loss;
            report.mean_curve[e].val_loss += f.curve[e].val_loss;
            report.mean_curve[e].train_mae += f.curve[e].train_mae;
            report.mean_curve[e].val_mae += f.curve[e].val_mae;
        }
        report.mean_metrics.mse += f.metrics.mse;
        report.mean_metrics.mae += f.metrics.mae;
        if (f.metrics.r2) {
            r2_sum += *f.metrics.r2;
            ++with_r2;
        }
    }
    if (!best) throw numeric_error("training failed in every fold: " + report.folds.front().failure);
    const double n = static_cast<double>(ok);
    for (auto& e : report.mean_curve) {
        e.train_loss /= n;
        e.val_loss /= n;
        e.train_mae /= n;
        e.val_mae /= n;
    }
    report.mean_metrics.mse /= n;
    report.mean_metrics.mae /= n;
    if (with_r2 > 0) report.mean_metrics.r2 = r2_sum / static_cast<double>(with_r2);
    report.best_fold = *best;
    return report;
}

ScenarioReport run_scenario(Scenario scenario, std::span<const LabeledSample> measured,
                            const std::optional<FixturePair>& fixtures, const TrainConfig& cfg,
                            const ScenarioOptions& options) {
    ScenarioDataset data = build_scenario(scenario, measured, fixtures, options);
    ScenarioReport out{scenario, data.filter, data.samples.size(), {}};
    out.report = train_model(data.samples, cfg, std::string(to_string(scenario)));
    return out;
}

std::vector<ScenarioReport> run_scenarios(std::span<const LabeledSample> measured,
                                          const std::optional<FixturePair>& fixtures, const TrainConfig& cfg,
                                          std::span<const Scenario> scenarios, const ScenarioOptions& options) {
    std::vector<ScenarioReport> out;
    for (Scenario s : scenarios) out.push_back(run_scenario(s, measured, fixtures, cfg, options));
    return out;
}

namespace {

std::string metrics_row(const std::string& scenario, const std::string& fold, const Metrics& m) {
    return scenario + "," + fold + "," + format_double(m.mse) + "," + format_double(m.mae) + "," + (m.r2 ? format_double(*m.r2) : "nan") + "\n";
}

std::string label(const TrainingReport& r) { return r.scenario.empty() ? "default" : r.scenario; }

}  // namespace

std::string report_csv(std::span<const TrainingReport> reports) {
    std::string out = "scenario,fold,mse,mae,r2\n";
    for (const auto& r : reports) {
        const std::string name = label(r);
        for (const auto& f : r.folds) {
            if (f.failed) {
                out += name + "," + std::to_string(f.fold) + ",nan,nan,nan\n";
            } else {
                out += metrics_row(name, std::to_string(f.fold), f.metrics);
            }
        }
        out += metrics_row(name, "best", r.best().metrics);
        out += metrics_row(name, "mean", r.mean_metrics);
    }
    return out;
}

std::string curve_csv(std::span<const EpochRecord> curve) {
    std::string out = "epoch,train_loss,val_loss,train_mae,val_mae\n";
    for (std::size_t e = 0; e < curve.size(); ++e) {
        const auto& c = curve[e];
        out += std::to_string(e + 1) + "," + format_double(c.train_loss) + "," + format_double(c.val_loss) + "," + format_double(c.train_mae) + "," +
               format_double(c.val_mae) + "\n";
    }
    return out;
}

void write_reports(const std::filesystem::path& dir, std::span<const TrainingReport> reports) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
    write_text_file(dir / "report.csv", report_csv(reports));
    for (const auto& r : reports) {
        const std::string name = label(r);
        for (const auto& f : r.folds) {
            write_text_file(dir / ("curves_" + name + "_fold" + std::to_string(f.fold) + ".csv"), curve_csv(f.curve));
        }
        write_text_file(dir / ("curves_" + name + "_mean.csv"), curve_csv(r.mean_curve));
    }
}

}  // namespace cavsense
