#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cavsense/cavity_sim.hpp"
#include "cavsense/fixture.hpp"
#include "cavsense/preprocess.hpp"
#include "cavsense/training.hpp"

namespace cavsense {

// Everything a CLI run can be configured with. Loaded from a flat
// `key = value` file; `#` starts a comment. Every key is optional.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string fractions = "linspace:0:1:100";
    SimConfig sim;
    // Embed a synthetic fixture pair into generated samples.
    bool fixture = false;
    FixtureLineModel fixture_model;
    TrainConfig train;
    Scenario scenario = Scenario::raw;
    ScenarioOptions scenario_options;

    // sim.rng_seed and train.seed follow `seed`.
    void set_seed(std::uint64_t s);
    void validate() const;
};

// Throws config_error naming the line for unknown keys or unparsable values.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies one key; config_error on unknown key or bad value.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

// Every key with its resolved value, in a fixed order; parse_run_config of the
// result reproduces cfg.
std::string to_text(const RunConfig& cfg);

// Names of all recognised keys.
std::vector<std::string_view> run_config_keys();

// "linspace:lo:hi:n" (n >= 1, endpoints inclusive) or "steps:d" (0, d, ..., 1;
// 1/d must be an integer within 1e-9). Throws config_error.
std::vector<double> parse_fraction_spec(std::string_view spec);

}  // namespace cavsense
