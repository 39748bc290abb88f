#include "verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "cavsense/cavity_sim.hpp"
#include "cavsense/fixture.hpp"
#include "cavsense/mixture.hpp"
#include "cavsense/neuralnet.hpp"
#include "cavsense/preprocess.hpp"
#include "cavsense/rng.hpp"
#include "cavsense/touchstone.hpp"
#include "cavsense/training.hpp"

namespace cavsense {

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

cplx random_entry(SplitMix64& rng, double max_mag) {
    return std::polar(rng.uniform(0.05, max_mag), rng.uniform(-std::numbers::pi, std::numbers::pi));
}

SParameterRecord random_record(SplitMix64& rng, std::size_t n, double max_mag) {
    std::vector<double> f = uniform_grid(n, 1e9, 5e9);
    std::vector<SParameterMatrix> m(n);
    for (auto& s : m) {
        s = {random_entry(rng, max_mag), random_entry(rng, max_mag), random_entry(rng, max_mag),
             random_entry(rng, max_mag)};
    }
    return SParameterRecord(std::move(f), std::move(m));
}

Outcome check_gradient(bool corrupt) {
    GradientCheckOptions opts;
    if (corrupt) opts.conv2_gradient_scale = 2.0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        SplitMix64 rng(derive_seed(seed, 0x67c));
        SimConfig cfg;
        const FeatureTensor x = to_feature_tensor(synth_sparams(cfg, rng.uniform()).record);
        const auto r = gradient_check(init_params(seed), x, rng.uniform(), 1e-5, opts);
        worst = std::max(worst, r.max_relative_error);
    }
    return {worst < 1e-4, "max relative error " + sci(worst) + " over 3 seeds"};
}

Outcome check_bruggeman() {
    double worst = 0.0;
    SplitMix64 rng(0xb566);
    for (int i = 0; i < 1000; ++i) {
        const MixtureSpec s{{rng.uniform(1.0, 10.0), -rng.uniform(0.0, 1.0)},
                            {rng.uniform(1.0, 10.0), -rng.uniform(0.0, 1.0)},
                            rng.uniform()};
        worst = std::max(worst, std::abs(bruggeman_residual(s, bruggeman_eff(s))));
    }
    const double mid = std::abs(bruggeman_eff({1.0, 3.0, 0.5}) - (1.0 + std::sqrt(7.0)) / 2.0);
    const bool ends = bruggeman_eff({2.5, 5.9, 0.0}) == cplx(2.5) && bruggeman_eff({2.5, 5.9, 1.0}) == cplx(5.9);
    return {worst < 1e-12 && mid < 1e-9 && ends,
            "max residual " + sci(worst) + ", (1,3,0.5) error " + sci(mid) + (ends ? "" : ", endpoints wrong")};
}

std::string as_text(const SParameterRecord& r, TouchstoneFormat fmt) {
    std::string out = fmt == TouchstoneFormat::MA ? "# GHz S MA R 50\n" : "# MHz S DB R 50\n";
    char buf[64];
    for (std::size_t i = 0; i < r.size(); ++i) {
        const auto& m = r.matrices()[i];
        std::snprintf(buf, sizeof buf, "%.15e", r.frequencies()[i] / (fmt == TouchstoneFormat::MA ? 1e9 : 1e6));
        out += buf;
        for (cplx z : {m.s11, m.s21, m.s12, m.s22}) {
            const double mag = fmt == TouchstoneFormat::MA ? std::abs(z) : 20.0 * std::log10(std::abs(z));
            std::snprintf(buf, sizeof buf, " %.15e %.15e", mag, std::arg(z) * 180.0 / std::numbers::pi);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

double max_diff(const SParameterRecord& a, const SParameterRecord& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.matrices()[i];
        const auto& y = b.matrices()[i];
        d = std::max({d, std::abs(x.s11 - y.s11), std::abs(x.s12 - y.s12), std::abs(x.s21 - y.s21),
                      std::abs(x.s22 - y.s22), std::abs(a.frequencies()[i] - b.frequencies()[i]) / a.frequencies()[i]});
    }
    return d;
}

Outcome check_touchstone() {
    SplitMix64 rng(0x7005);
    const SParameterRecord rec = random_record(rng, 64, 1.0);
    double worst = 0.0;
    for (const std::string& text :
         {write_touchstone(rec), as_text(rec, TouchstoneFormat::MA), as_text(rec, TouchstoneFormat::DB)}) {
        const SParameterRecord first = parse_touchstone(text);
        const SParameterRecord again = parse_touchstone(write_touchstone(first));
        worst = std::max(worst, max_diff(first, again));
    }
    return {worst <= 1e-9, "RI/MA/DB parse(write) max deviation " + sci(worst)};
}

Outcome check_deembed() {
    SplitMix64 rng(0xdeeb);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const SParameterRecord dut = random_record(rng, 16, 0.9);
        const FixturePair fx{random_record(rng, 16, 0.9), random_record(rng, 16, 0.9)};
        worst = std::max(worst, max_diff(deembed(embed_fixture(dut, fx), fx), dut));
    }
    return {worst <= 1e-10, "deembed(embed) max deviation " + sci(worst) + " over 20 pairs"};
}

Outcome check_savgol() {
    const auto c = savgol_coefficients({5, 2});
    const double ref[] = {-3.0 / 35, 12.0 / 35, 17.0 / 35, 12.0 / 35, -3.0 / 35};
    double worst = 0.0;
    for (std::size_t i = 0; i < 5; ++i) worst = std::max(worst, std::abs(c[i] - ref[i]));
    return {worst <= 1e-12, "window 5 order 2 kernel deviation " + sci(worst)};
}

Outcome check_folds() {
    std::vector<LabeledSample> samples;
    SimConfig cfg;
    cfg.grid.n_points = 8;
    for (int i = 0; i <= 20; ++i) samples.push_back(synth_sparams(cfg, i * 0.05));
    const FoldPlan plan = kfold_split(samples, 5, 0);
    std::vector<std::size_t> sizes;
    for (std::size_t f = 0; f < 5; ++f) sizes.push_back(plan.validation_size(f));
    const bool ok = sizes == std::vector<std::size_t>{5, 4, 4, 4, 4};
    std::string detail = "21 samples, k=5 -> sizes";
    for (std::size_t s : sizes) detail += " " + std::to_string(s);
    return {ok, detail};
}

}  // namespace

bool run_verify(std::ostream& out, const VerifyOptions& options) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
        {"gradient_check", [&] { return check_gradient(options.corrupt_gradient); }},
        {"bruggeman", check_bruggeman},
        {"touchstone_roundtrip", check_touchstone},
        {"deembed_roundtrip", check_deembed},
        {"savgol_kernel", check_savgol},
        {"fold_plan", check_folds},
    };
    bool all = true;
    for (const auto& [name, run] : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char line[512];
        std::snprintf(line, sizeof line, "%-22s %-4s %6.2fs  %s\n", name, o.pass ? "PASS" : "FAIL", secs,
                      o.detail.c_str());
        out << line;
        all = all && o.pass;
    }
    out << (all ? "all checks passed" : "some checks FAILED") << "\n";
    return all;
}

}  // namespace cavsense
