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

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "macdmt/experiment.hpp"
#include "macdmt/version.hpp"

namespace macdmt {

namespace {

// Shared flag set; every flag overrides the same-named config-file key.
struct CliArgs {
    std::string config_file;
    std::string m, n, users, k_levels, y, r, sweep, resolution;
    std::string snr_db, trials, cal_trials, seed, out, format;
};

void add_common_flags(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--config", args.config_file, "key=value config file");
    cmd->add_option("--m", args.m, "transmit antennas per user");
    cmd->add_option("--n", args.n, "receive antennas");
    cmd->add_option("--users", args.users, "number of users");
    cmd->add_option("--k-levels", args.k_levels,
                    "feedback cardinality (comma list for tradeoff)");
    cmd->add_option("--y", args.y, "feedback error decay exponent, or 'inf'");
    cmd->add_option("--r", args.r, "multiplexing gains, comma list");
    cmd->add_option("--sweep", args.sweep, "1-based user index to sweep");
    cmd->add_option("--resolution", args.resolution, "sweep sample count");
    cmd->add_option("--snr-db", args.snr_db, "SNR grid in dB, comma list");
    cmd->add_option("--trials", args.trials, "Monte-Carlo trials per SNR point");
    cmd->add_option("--cal-trials", args.cal_trials,
                    "calibration trials per power level");
    cmd->add_option("--seed", args.seed, "64-bit RNG seed");
    cmd->add_option("--out", args.out, "output path prefix");
    cmd->add_option("--format", args.format, "csv, json or both");
}

// Overlay CLI flags on top of the config file by re-feeding them through the
// key=value parser, so both sources obey identical syntax.
ExperimentConfig merge_config(const CliArgs& args) {
    std::ostringstream text;
    if (!args.config_file.empty())
        text << emit_experiment(load_experiment_file(args.config_file));
    if (!args.m.empty()) text << "m=" << args.m << '\n';
    if (!args.n.empty()) text << "n=" << args.n << '\n';
    if (!args.users.empty()) text << "users=" << args.users << '\n';
    if (!args.k_levels.empty()) text << "k_levels=" << args.k_levels << '\n';
    if (!args.y.empty()) text << "y=" << args.y << '\n';
    if (!args.r.empty()) text << "r=" << args.r << '\n';
    if (!args.sweep.empty()) text << "sweep=" << args.sweep << '\n';
    if (!args.resolution.empty()) text << "resolution=" << args.resolution << '\n';
    if (!args.snr_db.empty()) text << "snr_db=" << args.snr_db << '\n';
    if (!args.trials.empty()) text << "trials=" << args.trials << '\n';
    if (!args.cal_trials.empty()) text << "cal_trials=" << args.cal_trials << '\n';
    if (!args.seed.empty()) text << "seed=" << args.seed << '\n';
    if (!args.out.empty()) text << "out=" << args.out << '\n';
    if (!args.format.empty()) text << "format=" << args.format << '\n';
    return parse_experiment(text.str());
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"macdmt: diversity-multiplexing tradeoff engine for MIMO "
                 "multiple-access channels with quantized noisy feedback"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    CliArgs tradeoff_args, simulate_args, verify_args;
    CLI::App* tradeoff =
        app.add_subcommand("tradeoff", "emit analytic tradeoff curve data");
    add_common_flags(tradeoff, tradeoff_args);
    CLI::App* simulate =
        app.add_subcommand("simulate", "Monte-Carlo outage vs SNR with slope fit");
    add_common_flags(simulate, simulate_args);
    CLI::App* verify =
        app.add_subcommand("verify", "check the analytic identity suite");
    add_common_flags(verify, verify_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalidConfig;
    }

    try {
        if (tradeoff->parsed()) return run_tradeoff(merge_config(tradeoff_args), std::cout);
        if (simulate->parsed()) return run_simulate(merge_config(simulate_args), std::cout);
        if (verify->parsed()) {
            VerifyOptions options;
            if (!verify_args.m.empty()) options.m = std::stoi(verify_args.m);
            if (!verify_args.n.empty()) options.n = std::stoi(verify_args.n);
            return run_verify(options, std::cout);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalidConfig;
    }
    return kExitInvalidConfig;
}

} // namespace macdmt
