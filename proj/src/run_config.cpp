#include "cavsense/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "cavsense/dataset_io.hpp"
#include "cavsense/errors.hpp"
#include "cavsense/text.hpp"

namespace cavsense {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
        throw config_error("not a number: '" + std::string(v) + "'");
    }
    return out;
}

std::uint64_t to_u64(std::string_view v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
        throw config_error("not a non-negative integer: '" + std::string(v) + "'");
    }
    return out;
}

std::size_t to_size(std::string_view v) { return static_cast<std::size_t>(to_u64(v)); }

bool to_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("not a boolean: '" + std::string(v) + "'");
}

std::vector<int> to_int_list(std::string_view v) {
    std::vector<int> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = v.find(',', start);
        const std::uint64_t x = to_u64(trim(v.substr(start, pos - start)));
        if (x > 1000000) throw config_error("value too large: " + std::to_string(x));
        out.push_back(static_cast<int>(x));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

std::string join(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

// Savitzky-Golay candidates are configured as the cross product of windows
// and orders.
std::vector<int> windows_of(const ScenarioOptions& o) {
    std::vector<int> out;
    for (const auto& c : o.savgol_candidates) {
        if (std::find(out.begin(), out.end(), c.window) == out.end()) out.push_back(c.window);
    }
    return out;
}

std::vector<int> orders_of(const ScenarioOptions& o) {
    std::vector<int> out;
    for (const auto& c : o.savgol_candidates) {
        if (std::find(out.begin(), out.end(), c.order) == out.end()) out.push_back(c.order);
    }
    return out;
}

void set_candidates(ScenarioOptions& o, const std::vector<int>& windows, const std::vector<int>& orders) {
    o.savgol_candidates.clear();
    for (int w : windows) {
        for (int ord : orders) o.savgol_candidates.push_back({w, ord});
    }
}

struct Key {
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

using KeyTable = std::vector<std::pair<std::string_view, Key>>;

const KeyTable& keys() {
    static const KeyTable table = [] {
        KeyTable t;
        auto real = [&t](std::string_view name, auto member) {
            t.push_back({name, {[member](RunConfig& c, std::string_view v) { member(c) = to_double(v); },
                                [member](const RunConfig& c) { return format_double(member(c)); }}});
        };
        auto count = [&t](std::string_view name, auto member) {
            t.push_back({name, {[member](RunConfig& c, std::string_view v) { member(c) = to_size(v); },
                                [member](const RunConfig& c) {
                                    return std::to_string(member(c));
                                }}});
        };
        auto flag = [&t](std::string_view name, auto member) {
            t.push_back({name, {[member](RunConfig& c, std::string_view v) { member(c) = to_bool(v); },
                                [member](const RunConfig& c) {
                                    return std::string(member(c) ? "true" : "false");
                                }}});
        };

        t.push_back({"seed", {[](RunConfig& c, std::string_view v) { c.set_seed(to_u64(v)); },
                              [](const RunConfig& c) { return std::to_string(c.seed); }}});
        t.push_back({"fractions", {[](RunConfig& c, std::string_view v) {
                                       parse_fraction_spec(v);
                                       c.fractions = std::string(v);
                                   },
                                   [](const RunConfig& c) { return c.fractions; }}});
        // The network input length follows the grid.
        t.push_back({"n_points", {[](RunConfig& c, std::string_view v) {
                                      c.sim.grid.n_points = to_size(v);
                                      c.train.arch.input_length = c.sim.grid.n_points;
                                  },
                                  [](const RunConfig& c) { return std::to_string(c.sim.grid.n_points); }}});
        real("fmin_hz", [](auto& c) -> auto& { return c.sim.grid.fmin; });
        real("fmax_hz", [](auto& c) -> auto& { return c.sim.grid.fmax; });
        real("cavity_a_m", [](auto& c) -> auto& { return c.sim.geometry.a; });
        real("cavity_b_m", [](auto& c) -> auto& { return c.sim.geometry.b; });
        real("cavity_h_m", [](auto& c) -> auto& { return c.sim.geometry.h; });
        auto part = [&t](std::string_view name, auto member, bool imag) {
            t.push_back({name, {[member, imag](RunConfig& c, std::string_view v) {
                                    cplx& z = member(c);
                                    z = imag ? cplx(z.real(), to_double(v)) : cplx(to_double(v), z.imag());
                                },
                                [member, imag](const RunConfig& c) {
                                    const cplx z = member(c);
                                    return format_double(imag ? z.imag() : z.real());
                                }}});
        };
        auto host = [](auto& c) -> auto& { return c.sim.eps_host; };
        auto incl = [](auto& c) -> auto& { return c.sim.eps_incl; };
        part("eps_host", host, false);
        part("eps_host_imag", host, true);
        part("eps_incl", incl, false);
        part("eps_incl_imag", incl, true);
        real("coupling", [](auto& c) -> auto& { return c.sim.coupling; });
        real("q_factor", [](auto& c) -> auto& { return c.sim.q_factor; });
        real("noise_sigma", [](auto& c) -> auto& { return c.sim.noise_sigma; });
        flag("fixture", [](auto& c) -> auto& { return c.fixture; });
        real("fixture_length_m", [](auto& c) -> auto& { return c.fixture_model.length_m; });
        real("fixture_loss_db_per_m", [](auto& c) -> auto& { return c.fixture_model.loss_db_per_m_at_10ghz; });
        real("fixture_reflection", [](auto& c) -> auto& { return c.fixture_model.reflection; });
        real("fixture_velocity_factor", [](auto& c) -> auto& { return c.fixture_model.velocity_factor; });
        count("epochs", [](auto& c) -> auto& { return c.train.epochs; });
        count("k", [](auto& c) -> auto& { return c.train.k; });
        real("lr", [](auto& c) -> auto& { return c.train.adam.lr; });
        real("beta1", [](auto& c) -> auto& { return c.train.adam.beta1; });
        real("beta2", [](auto& c) -> auto& { return c.train.adam.beta2; });
        real("adam_eps", [](auto& c) -> auto& { return c.train.adam.eps; });
        count("batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
        count("full_batch_max", [](auto& c) -> auto& { return c.train.full_batch_max; });
        flag("allow_leakage", [](auto& c) -> auto& { return c.train.allow_leakage; });
        count("threads", [](auto& c) -> auto& { return c.train.threads; });
        count("conv1_channels", [](auto& c) -> auto& { return c.train.arch.conv1_channels; });
        count("conv1_kernel", [](auto& c) -> auto& { return c.train.arch.conv1_kernel; });
        count("conv2_channels", [](auto& c) -> auto& { return c.train.arch.conv2_channels; });
        count("conv2_kernel", [](auto& c) -> auto& { return c.train.arch.conv2_kernel; });
        count("stride", [](auto& c) -> auto& { return c.train.arch.stride; });
        count("pool", [](auto& c) -> auto& { return c.train.arch.pool; });
        count("fc_hidden", [](auto& c) -> auto& { return c.train.arch.fc_hidden; });
        t.push_back({"scenario", {[](RunConfig& c, std::string_view v) {
                                      try {
                                          c.scenario = scenario_from_string(v);
                                      } catch (const error& e) {
                                          throw config_error(e.what());
                                      }
                                  },
                                  [](const RunConfig& c) { return std::string(to_string(c.scenario)); }}});
        count("n_intermediate", [](auto& c) -> auto& { return c.scenario_options.n_intermediate; });
        t.push_back({"savgol_windows", {[](RunConfig& c, std::string_view v) {
                                            set_candidates(c.scenario_options, to_int_list(v),
                                                           orders_of(c.scenario_options));
                                        },
                                        [](const RunConfig& c) { return join(windows_of(c.scenario_options)); }}});
        t.push_back({"savgol_orders", {[](RunConfig& c, std::string_view v) {
                                           set_candidates(c.scenario_options, windows_of(c.scenario_options),
                                                          to_int_list(v));
                                       },
                                       [](const RunConfig& c) { return join(orders_of(c.scenario_options)); }}});
        return t;
    }();
    return table;
}

const Key* find_key(std::string_view name) {
    for (const auto& [k, v] : keys()) {
        if (k == name) return &v;
    }
    return nullptr;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
    seed = s;
    sim.rng_seed = s;
    train.seed = s;
}

void RunConfig::validate() const {
    parse_fraction_spec(fractions);
    try {
        sim.validate();
        train.validate();
        if (train.arch.input_length != sim.grid.n_points) {
            throw validation_error("n_points must equal the network input length " +
                                   std::to_string(train.arch.input_length));
        }
        for (const auto& c : scenario_options.savgol_candidates) c.validate();
    } catch (const validation_error& e) {
        throw config_error(e.what());
    } catch (const shape_error& e) {
        throw config_error(e.what());
    }
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    const Key* k = find_key(key);
    if (!k) throw config_error("unknown key '" + std::string(key) + "'");
    try {
        k->set(cfg, value);
    } catch (const config_error& e) {
        throw config_error(std::string(key) + ": " + e.what());
    }
}

RunConfig parse_run_config(std::string_view text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw config_error("line " + std::to_string(line_no) + ": expected key = value");
        }
        try {
            apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const config_error& e) {
            throw config_error("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_text_file(path)); }

std::string to_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [name, key] : keys()) out += std::string(name) + " = " + key.get(cfg) + "\n";
    return out;
}

std::vector<std::string_view> run_config_keys() {
    std::vector<std::string_view> out;
    for (const auto& [name, key] : keys()) out.push_back(name);
    return out;
}

std::vector<double> parse_fraction_spec(std::string_view spec) {
    auto fields = [&] {
        std::vector<std::string_view> out;
        std::size_t start = 0;
        for (;;) {
            const auto pos = spec.find(':', start);
            out.push_back(spec.substr(start, pos - start));
            if (pos == std::string_view::npos) return out;
            start = pos + 1;
        }
    }();
    try {
        if (fields[0] == "linspace" && fields.size() == 4) {
            const double lo = to_double(fields[1]);
            const double hi = to_double(fields[2]);
            const std::size_t n = to_size(fields[3]);
            if (n == 0 || lo < 0.0 || hi > 1.0 || lo > hi || (n > 1 && lo == hi)) {
                throw config_error("linspace needs 0 <= lo < hi <= 1 and n >= 1");
            }
            return linspace(lo, hi, n);
        }
        if (fields[0] == "steps" && fields.size() == 2) {
            const double d = to_double(fields[1]);
            if (!(d > 0.0 && d <= 1.0)) throw config_error("step must lie in (0, 1]");
            const double intervals = 1.0 / d;
            const double rounded = std::round(intervals);
            if (std::abs(intervals - rounded) > 1e-9 * rounded) throw config_error("1/step must be an integer");
            return linspace(0.0, 1.0, static_cast<std::size_t>(rounded) + 1);
        }
    } catch (const config_error& e) {
        throw config_error("fraction spec '" + std::string(spec) + "': " + e.what());
    }
    throw config_error("fraction spec '" + std::string(spec) + "' must be linspace:lo:hi:n or steps:d");
}

}  // namespace cavsense
