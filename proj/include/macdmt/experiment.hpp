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

#ifndef MACDMT_EXPERIMENT_HPP
#define MACDMT_EXPERIMENT_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "macdmt/simulation.hpp"
#include "macdmt/tradeoff.hpp"
#include "macdmt/types.hpp"

namespace macdmt {

// Exit codes shared by the CLI and the runner functions.
enum ExitCode : int {
    kExitOk = 0,
    kExitVerifyFailed = 1,
    kExitInvalidConfig = 2,
    kExitUnreliable = 3,
};

// Flat experiment description; round-trips losslessly through the key=value
// on-disk format (emit_experiment / parse_experiment).
struct ExperimentConfig {
    int m = 1;
    int n = 1;
    int users = 1;
    std::vector<int> k_levels = {1}; // tradeoff: one series per entry
    double y = 0.0;
    bool y_infinite = false;
    std::vector<double> r;   // per-user gains; swept coordinate ignored
    int sweep = 0;           // 1-based swept user, 0 = none
    int resolution = 300;
    std::vector<double> snr_db;
    std::uint64_t trials = 0;
    std::uint64_t cal_trials = 0;
    std::uint64_t seed = 1;
    std::string out = "results";
    std::string format = "both"; // csv | json | both

    bool operator==(const ExperimentConfig&) const = default;

    SystemConfig system_config(int k) const;
};

std::string emit_experiment(const ExperimentConfig& cfg);
ExperimentConfig parse_experiment(const std::string& text);
ExperimentConfig load_experiment_file(const std::string& path);

// Analytic exponents for one configuration, echoed into simulate records.
struct AnalyticSummary {
    double no_feedback = 0.0; // D(r, 1)
    double c_1 = 0.0;
    double cbar_k = 0.0;
    double d_opt_value = 0.0;
};
AnalyticSummary analytic_summary(const SystemConfig& cfg,
                                 const std::vector<double>& gains);

// ---- tradeoff -------------------------------------------------------------

// Which side of min(Cbar_K, y + C_1) decides the sample.
std::string tradeoff_branch(const SystemConfig& cfg,
                            const std::vector<double>& gains);

std::string tradeoff_csv(const std::vector<DmtCurve>& curves);
nlohmann::json tradeoff_json(const ExperimentConfig& cfg,
                             const std::vector<DmtCurve>& curves);

// Samples one curve per requested K and writes <out>.csv / <out>.json.
int run_tradeoff(const ExperimentConfig& cfg, std::ostream& log);

// ---- simulate -------------------------------------------------------------

// Calibrates and estimates outage at each SNR grid point. Deterministic for
// a fixed config + seed.
OutageRun simulate_run(const ExperimentConfig& cfg);

std::string simulate_csv(const OutageRun& run);
nlohmann::json simulate_json(const ExperimentConfig& cfg, const OutageRun& run);

// Runs the experiment, writes the record, exits 0 (clean) or 3 (unreliable).
int run_simulate(const ExperimentConfig& cfg, std::ostream& log);

// ---- verify ---------------------------------------------------------------

struct VerifyOptions {
    std::optional<int> m; // restrict the antenna grid
    std::optional<int> n;
    int k_max = 6;
};

// Identity table: closed forms, doubling, the power-offset inequality and
// the three-branch simplification, over the standard grid. Exits 0/1.
int run_verify(const VerifyOptions& options, std::ostream& log);

// Full command-line entry point (subcommands: tradeoff, simulate, verify).
int cli_main(int argc, const char* const* argv);

} // namespace macdmt

#endif
