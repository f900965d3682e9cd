// Copyright 2026 macdmt contributors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "macdmt/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

#include "macdmt/rng.hpp"
#include "macdmt/version.hpp"

namespace macdmt {

namespace {

std::string fmt_double(double value, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, value);
    return buf;
}

std::string g17(double value) { return fmt_double(value, "%.17g"); }
std::string g12(double value) { return fmt_double(value, "%.12g"); }

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

template <typename T, typename Fn>
std::vector<T> parse_list(const std::string& value, const std::string& key, Fn fn) {
    std::vector<T> out;
    for (const std::string& item : split_list(value)) {
        try {
            out.push_back(fn(item));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad value '" + item + "' for key " + key);
        }
    }
    return out;
}

template <typename T>
std::string emit_list(const std::vector<T>& items) {
    std::ostringstream out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out << ',';
        if constexpr (std::is_same_v<T, double>)
            out << g17(items[i]);
        else
            out << items[i];
    }
    return out.str();
}

std::string iso_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

bool is_infinite_token(std::string token) {
    for (char& c : token) c = static_cast<char>(std::tolower(c));
    return token == "inf" || token == "infinity";
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << body;
}

} // namespace

SystemConfig ExperimentConfig::system_config(int k) const {
    SystemConfig cfg;
    cfg.tx_antennas = m;
    cfg.rx_antennas = n;
    cfg.users = users;
    cfg.feedback_levels = k;
    cfg.feedback_decay = y;
    cfg.perfect_feedback = y_infinite;
    return cfg;
}

std::string emit_experiment(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "m=" << cfg.m << '\n';
    out << "n=" << cfg.n << '\n';
    out << "users=" << cfg.users << '\n';
    out << "k_levels=" << emit_list(cfg.k_levels) << '\n';
    out << "y=" << (cfg.y_infinite ? std::string("inf") : g17(cfg.y)) << '\n';
    out << "r=" << emit_list(cfg.r) << '\n';
    out << "sweep=" << cfg.sweep << '\n';
    out << "resolution=" << cfg.resolution << '\n';
    out << "snr_db=" << emit_list(cfg.snr_db) << '\n';
    out << "trials=" << cfg.trials << '\n';
    out << "cal_trials=" << cfg.cal_trials << '\n';
    out << "seed=" << cfg.seed << '\n';
    out << "out=" << cfg.out << '\n';
    out << "format=" << cfg.format << '\n';
    return out.str();
}

ExperimentConfig parse_experiment(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        " is not key=value: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "m") cfg.m = std::stoi(value);
            else if (key == "n") cfg.n = std::stoi(value);
            else if (key == "users") cfg.users = std::stoi(value);
            else if (key == "k_levels")
                cfg.k_levels = parse_list<int>(value, key,
                                               [](const std::string& s) { return std::stoi(s); });
            else if (key == "y") {
                cfg.y_infinite = is_infinite_token(value);
                cfg.y = cfg.y_infinite ? 0.0 : std::stod(value);
            } else if (key == "r")
                cfg.r = parse_list<double>(value, key,
                                           [](const std::string& s) { return std::stod(s); });
            else if (key == "sweep") cfg.sweep = std::stoi(value);
            else if (key == "resolution") cfg.resolution = std::stoi(value);
            else if (key == "snr_db")
                cfg.snr_db = parse_list<double>(value, key,
                                                [](const std::string& s) { return std::stod(s); });
            else if (key == "trials") cfg.trials = std::stoull(value);
            else if (key == "cal_trials") cfg.cal_trials = std::stoull(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "out") cfg.out = value;
            else if (key == "format") cfg.format = value;
            else throw std::invalid_argument("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("bad value for key " + key + ": " + value);
        }
    }
    if (cfg.format != "csv" && cfg.format != "json" && cfg.format != "both")
        throw std::invalid_argument("format must be csv, json or both");
    return cfg;
}

ExperimentConfig load_experiment_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read config file: " + path);
    std::ostringstream body;
    body << in.rdbuf();
    return parse_experiment(body.str());
}

AnalyticSummary analytic_summary(const SystemConfig& cfg,
                                 const std::vector<double>& gains) {
    AnalyticSummary summary;
    summary.no_feedback = d_exponent(cfg, gains, 1.0);
    summary.c_1 = c_recursion(cfg, gains, 1);
    summary.cbar_k = cbar_recursion(cfg, gains, cfg.feedback_levels);
    summary.d_opt_value = d_opt(cfg, gains);
    return summary;
}

std::string tradeoff_branch(const SystemConfig& cfg,
                            const std::vector<double>& gains) {
    if (cfg.feedback_levels == 1) return "no_feedback";
    if (cfg.perfect_feedback) return "recursion";
    const double cbar = cbar_recursion(cfg, gains, cfg.feedback_levels);
    const double floor_term = cfg.feedback_decay + c_recursion(cfg, gains, 1);
    if (std::abs(cbar - floor_term) <= 1e-9) return "tie";
    return cbar < floor_term ? "recursion" : "error_limited";
}

std::string tradeoff_csv(const std::vector<DmtCurve>& curves) {
    std::ostringstream out;
    out << "r,d,k_levels,branch\n";
    for (const DmtCurve& curve : curves) {
        std::vector<double> gains = curve.fixed_gains;
        for (const auto& [r, d] : curve.samples) {
            gains[static_cast<std::size_t>(curve.swept_user)] = r;
            out << g12(r) << ',' << g12(d) << ',' << curve.config.feedback_levels
                << ',' << tradeoff_branch(curve.config, gains) << '\n';
        }
    }
    return out.str();
}

nlohmann::json tradeoff_json(const ExperimentConfig& cfg,
                             const std::vector<DmtCurve>& curves) {
    nlohmann::json root;
    root["tool_version"] = kToolVersion;
    root["timestamp"] = iso_timestamp();
    root["config"] = {
        {"m", cfg.m},
        {"n", cfg.n},
        {"users", cfg.users},
        {"y", cfg.y_infinite ? nlohmann::json("inf") : nlohmann::json(cfg.y)},
        {"resolution", cfg.resolution},
    };
    nlohmann::json series = nlohmann::json::array();
    for (const DmtCurve& curve : curves) {
        nlohmann::json entry;
        entry["k_levels"] = curve.config.feedback_levels;
        entry["swept_user"] = curve.swept_user + 1;
        entry["fixed_r"] = curve.fixed_gains;
        nlohmann::json samples = nlohmann::json::array();
        for (const auto& [r, d] : curve.samples) samples.push_back({r, d});
        entry["samples"] = std::move(samples);
        entry["breakpoints"] = curve.breakpoints;
        series.push_back(std::move(entry));
    }
    root["series"] = std::move(series);
    return root;
}

int run_tradeoff(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.k_levels.empty())
        throw std::invalid_argument("tradeoff needs at least one k_levels value");
    std::vector<double> fixed = cfg.r;
    if (fixed.empty()) fixed.assign(static_cast<std::size_t>(cfg.users), 0.0);
    if (fixed.size() != static_cast<std::size_t>(cfg.users))
        throw std::invalid_argument("r must list one gain per user");
    SweepSpec sweep;
    sweep.user = (cfg.sweep > 0 ? cfg.sweep : 1) - 1;
    sweep.fixed_gains = fixed;

    std::vector<DmtCurve> curves;
    for (const int k : cfg.k_levels)
        curves.push_back(sample_curve(cfg.system_config(k), sweep, cfg.resolution));

    if (cfg.format != "json") write_file(cfg.out + ".csv", tradeoff_csv(curves));
    if (cfg.format != "csv")
        write_file(cfg.out + ".json", tradeoff_json(cfg, curves).dump(2) + "\n");
    log << "tradeoff: wrote " << curves.size() << " series to " << cfg.out
        << ".{csv,json}\n";
    return kExitOk;
}

OutageRun simulate_run(const ExperimentConfig& cfg) {
    if (cfg.k_levels.size() != 1)
        throw std::invalid_argument("simulate takes exactly one k_levels value");
    const SystemConfig sys = cfg.system_config(cfg.k_levels.front());
    std::vector<double> gains = cfg.r;
    if (gains.empty()) gains.assign(static_cast<std::size_t>(cfg.users), 0.0);
    check_feasible(sys, gains);
    if (cfg.snr_db.empty())
        throw std::invalid_argument("simulate needs a non-empty snr_db grid");

    OutageRun run;
    run.config = sys;
    run.gains = gains;
    run.snr_grid_db = cfg.snr_db;
    run.seed = cfg.seed;
    for (std::size_t q = 0; q < cfg.snr_db.size(); ++q) {
        const double snr = std::pow(10.0, cfg.snr_db[q] / 10.0);
        const std::uint64_t point_seed = derive_stream(cfg.seed, q + 1);
        PowerSchedule schedule = calibrate_schedule(
            sys, gains, snr, cfg.cal_trials, derive_stream(point_seed, 11));
        OutageEstimate estimate = estimate_outage(
            sys, gains, schedule, cfg.trials, derive_stream(point_seed, 22));
        run.schedules.push_back(std::move(schedule));
        run.estimates.push_back(std::move(estimate));
    }
    return run;
}

std::string simulate_csv(const OutageRun& run) {
    std::ostringstream out;
    out << "snr_db,snr,epsilon,trials,outage_count,outage_prob,ci_low,ci_high,"
           "reliable\n";
    for (std::size_t i = 0; i < run.estimates.size(); ++i) {
        const OutageEstimate& est = run.estimates[i];
        const bool usable = est.reliable && !run.schedules[i].flagged;
        out << g12(run.snr_grid_db[i]) << ',' << g12(est.snr) << ','
            << g12(est.epsilon) << ',' << est.trials << ',' << est.outage_count
            << ',' << g12(est.probability) << ',' << g12(est.ci_low) << ','
            << g12(est.ci_high) << ',' << (usable ? 1 : 0) << '\n';
    }
    return out.str();
}

nlohmann::json simulate_json(const ExperimentConfig& cfg, const OutageRun& run) {
    nlohmann::json root;
    root["tool_version"] = kToolVersion;
    root["timestamp"] = iso_timestamp();
    root["experiment"] = {
        {"m", cfg.m},
        {"n", cfg.n},
        {"users", cfg.users},
        {"k_levels", cfg.k_levels},
        {"y", cfg.y_infinite ? nlohmann::json("inf") : nlohmann::json(cfg.y)},
        {"r", run.gains},
        {"sweep", cfg.sweep},
        {"snr_db", cfg.snr_db},
        {"trials", cfg.trials},
        {"cal_trials", cfg.cal_trials},
        {"seed", cfg.seed},
        {"out", cfg.out},
        {"format", cfg.format},
    };

    const AnalyticSummary summary = analytic_summary(run.config, run.gains);
    root["analytic"] = {
        {"no_feedback", summary.no_feedback},
        {"c_1", summary.c_1},
        {"cbar_k", summary.cbar_k},
        {"d_opt", summary.d_opt_value},
    };

    bool flagged = false;
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t i = 0; i < run.estimates.size(); ++i) {
        const OutageEstimate& est = run.estimates[i];
        const PowerSchedule& sched = run.schedules[i];
        flagged = flagged || sched.flagged || !est.reliable;
        nlohmann::json point;
        point["snr_db"] = run.snr_grid_db[i];
        point["snr"] = est.snr;
        point["epsilon"] = est.epsilon;
        point["epsilon_clamped"] = est.epsilon_clamped;
        point["schedule"] = {
            {"levels", sched.levels},
            {"exponents", sched.exponents},
            {"calibration_outage", sched.calibration_outage},
            {"calibration_events", sched.calibration_events},
            {"calibration_trials", sched.calibration_trials},
            {"flagged", sched.flagged},
        };
        point["trials"] = est.trials;
        point["outage_count"] = est.outage_count;
        point["outage_prob"] = est.probability;
        point["ci95"] = {est.ci_low, est.ci_high};
        point["reliable"] = est.reliable;
        point["level_outage"] = est.level_outage;
        point["index_prob"] = est.index_prob;
        point["mixed_power_evals"] = est.mixed_power_evals;
        points.push_back(std::move(point));
    }

    nlohmann::json simulated;
    simulated["points"] = std::move(points);
    simulated["flagged"] = flagged;
    try {
        const SlopeFit fit = fit_diversity_slope(run);
        simulated["slope"] = {
            {"diversity", fit.diversity},
            {"std_error", fit.std_error},
            {"points_used", fit.points_used},
        };
    } catch (const std::runtime_error&) {
        simulated["slope"] = nullptr;
    }
    root["simulated"] = std::move(simulated);
    return root;
}

int run_simulate(const ExperimentConfig& cfg, std::ostream& log) {
    const OutageRun run = simulate_run(cfg);
    const nlohmann::json record = simulate_json(cfg, run);
    if (cfg.format != "json") write_file(cfg.out + ".csv", simulate_csv(run));
    if (cfg.format != "csv") write_file(cfg.out + ".json", record.dump(2) + "\n");

    bool unreliable = false;
    for (std::size_t i = 0; i < run.estimates.size(); ++i)
        unreliable = unreliable || run.schedules[i].flagged ||
                     !run.estimates[i].reliable;
    if (!record["simulated"]["slope"].is_null()) {
        log << "simulate: fitted diversity "
            << record["simulated"]["slope"]["diversity"].get<double>()
            << " (analytic d_opt " << record["analytic"]["d_opt"].get<double>()
            << ")\n";
    }
    log << "simulate: wrote " << run.estimates.size() << " points to " << cfg.out
        << (unreliable ? " [unreliable]" : "") << '\n';
    return unreliable ? kExitUnreliable : kExitOk;
}

namespace {

struct VerifyRow {
    std::string name;
    bool pass;
    std::string detail;
};

// Feasible test grid: L=1 gets an even scan of (0, min(m,n)); L=2 a product
// grid filtered by the strict sum condition.
std::vector<std::vector<double>> gain_grid(const SystemConfig& cfg, int target) {
    std::vector<std::vector<double>> grid;
    if (cfg.users == 1) {
        const double hi = std::min(cfg.tx_antennas, cfg.rx_antennas);
        for (int i = 0; i < target; ++i)
            grid.push_back({hi * (i + 0.5) / target});
        return grid;
    }
    const double hi = std::min(cfg.tx_antennas, cfg.rx_antennas);
    const int side = static_cast<int>(std::ceil(std::sqrt(2.0 * target)));
    SystemConfig probe = cfg;
    for (int i = 0; i < side && static_cast<int>(grid.size()) < target; ++i)
        for (int j = 0; j < side && static_cast<int>(grid.size()) < target; ++j) {
            std::vector<double> gains = {hi * (i + 0.5) / side, hi * (j + 0.5) / side};
            gains.resize(static_cast<std::size_t>(cfg.users), 0.0);
            if (is_feasible(probe, gains)) grid.push_back(std::move(gains));
        }
    return grid;
}

} // namespace

int run_verify(const VerifyOptions& options, std::ostream& log) {
    std::vector<VerifyRow> rows;

    auto antenna_range = [](std::optional<int> fixed) {
        return fixed ? std::vector<int>{*fixed} : std::vector<int>{1, 2, 3, 4};
    };

    for (const int m : antenna_range(options.m)) {
        for (const int n : antenna_range(options.n)) {
            const double mn = static_cast<double>(m) * n;
            for (int k = 1; k <= options.k_max; ++k) {
                SystemConfig cfg;
                cfg.tx_antennas = m;
                cfg.rx_antennas = n;
                cfg.users = 1;
                cfg.feedback_levels = k;
                cfg.feedback_decay = mn;

                const ClosedFormReport report = verify_closed_forms(cfg);
                for (const IdentityCheck& chk : report.checks) {
                    std::ostringstream name;
                    name << "closed-form m=" << m << " n=" << n << " K=" << k << ": "
                         << chk.name;
                    rows.push_back({name.str(), chk.pass,
                                    "value " + g12(chk.actual) + " diff " +
                                        g12(chk.difference)});
                }

                const double doubling = d_opt(cfg, {0.0});
                const double expected = (k == 1) ? mn : 2.0 * mn;
                std::ostringstream name;
                name << "doubling m=" << m << " n=" << n << " K=" << k
                     << ": d_opt(0) == " << (k == 1 ? "mn" : "2mn");
                rows.push_back({name.str(), std::abs(doubling - expected) <= 1e-9,
                                "value " + g12(doubling)});
            }
        }
    }

    struct Tuple { int m, n, users; };
    const std::vector<Tuple> tuples = {{1, 1, 1}, {2, 2, 1}, {3, 4, 1}, {3, 4, 2}};
    for (const Tuple& t : tuples) {
        if (options.m && *options.m != t.m) continue;
        if (options.n && *options.n != t.n) continue;
        SystemConfig cfg;
        cfg.tx_antennas = t.m;
        cfg.rx_antennas = t.n;
        cfg.users = t.users;
        const double mn = static_cast<double>(t.m) * t.n;
        cfg.feedback_decay = mn;

        const auto grid = gain_grid(cfg, 1000);
        double worst_gap = 0.0;  // power-offset inequality margin (>= -tol)
        double worst_diff = 0.0; // branch-form equality
        std::string worst_at;
        bool ok = true;
        for (const auto& gains : grid) {
            const double lhs = d_exponent(cfg, gains, 1.0 + mn);
            const double rhs = mn + d_exponent(cfg, gains, 1.0);
            worst_gap = std::min(worst_gap, lhs - rhs);
            if (lhs - rhs < -1e-9) ok = false;
            for (int j = 1; j <= options.k_max; ++j) {
                SystemConfig with_k = cfg;
                with_k.feedback_levels = j;
                const double direct = d_opt(with_k, gains);
                const double reduced = d_opt_piecewise_ymn(cfg, gains, j);
                const double diff = std::abs(direct - reduced);
                if (diff > worst_diff) {
                    worst_diff = diff;
                    std::ostringstream at;
                    at << "j=" << j << " r=" << emit_list(gains);
                    worst_at = at.str();
                }
                if (diff > 1e-9) ok = false;
            }
        }
        std::ostringstream name;
        name << "grid m=" << t.m << " n=" << t.n << " L=" << t.users << " ("
             << grid.size() << " points): power-offset bound and branch form";
        rows.push_back({name.str(), ok,
                        "min margin " + g12(worst_gap) + ", max |diff| " +
                            g12(worst_diff) +
                            (worst_at.empty() ? "" : " at " + worst_at)});
    }

    bool all_pass = true;
    for (const VerifyRow& row : rows) {
        log << (row.pass ? "PASS" : "FAIL") << "  " << row.name << "  ["
            << row.detail << "]\n";
        all_pass = all_pass && row.pass;
    }
    log << (all_pass ? "verify: all identities hold\n"
                     : "verify: FAILURES detected\n");
    return all_pass ? kExitOk : kExitVerifyFailed;
}

} // namespace macdmt
