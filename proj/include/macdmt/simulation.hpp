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

#ifndef MACDMT_SIMULATION_HPP
#define MACDMT_SIMULATION_HPP

#include <cstdint>
#include <vector>

#include "macdmt/channel.hpp"
#include "macdmt/types.hpp"

namespace macdmt {

// Per-index transmit powers at one SNR point, shared by all users.
// levels[i] is the power used on received index i+1; non-decreasing.
struct PowerSchedule {
    double snr = 0.0;
    std::vector<double> levels;
    std::vector<double> exponents;            // log(level) / log(snr)
    std::vector<double> calibration_outage;   // outage estimate at level i
    std::vector<std::uint64_t> calibration_events;
    std::uint64_t calibration_trials = 0;
    bool flagged = false;                     // a stage had too few outage events
};

// Rates R_s = r_s * log2(snr), in bits.
std::vector<double> rates_bits(const std::vector<double>& gains, double snr);

// Index sent by the receiver: the cheapest level that avoids outage, or 1
// when even the top level is in outage.
int feedback_index(const FadingDraw& draw, const std::vector<double>& rates,
                   const PowerSchedule& schedule);

// Builds the power ladder bottom-up: level 1 is SNR/K; level i is placed
// from a Monte-Carlo estimate of the outage probability at level i-1 through
// the received-index marginal, so the long-term power constraint holds by
// construction. A stage with fewer than min_events outage events flags the
// schedule (slope fits refuse flagged schedules).
PowerSchedule calibrate_schedule(const SystemConfig& cfg,
                                 const std::vector<double>& gains, double snr,
                                 std::uint64_t trials, std::uint64_t seed,
                                 std::uint64_t min_events = 50);

struct OutageEstimate {
    double snr = 0.0;
    double snr_db = 0.0;
    double epsilon = 0.0;
    bool epsilon_clamped = false;
    std::uint64_t trials = 0;
    std::uint64_t outage_count = 0;
    double probability = 0.0;
    double ci_low = 0.0;   // 95% normal-approximation interval
    double ci_high = 0.0;
    bool reliable = false;
    std::vector<double> level_outage; // same-draw estimate of outage at each level
    std::vector<double> index_prob;   // empirical distribution of the sent index
    std::uint64_t mixed_power_evals = 0;
    std::uint64_t seed = 0;
};

// Full-protocol outage estimate: draw fading, quantize, corrupt each user's
// copy independently, transmit at the received-index powers, test outage.
OutageEstimate estimate_outage(const SystemConfig& cfg,
                               const std::vector<double>& gains,
                               const PowerSchedule& schedule,
                               std::uint64_t trials, std::uint64_t seed,
                               std::uint64_t min_events = 50,
                               std::uint64_t batch_size = 1u << 16);

struct UserAudit {
    std::vector<double> received_prob; // empirical received-index distribution
    std::vector<double> formula_prob;  // eps/(K-1) + (1 - eps*K/(K-1)) * P(I=i)
    double max_sigma_gap = 0.0;        // worst |empirical-formula| in sigma units
    double average_power = 0.0;        // empirical E[P^received]
    double average_power_se = 0.0;
    bool marginal_ok = false;
    bool power_ok = false;             // average_power <= snr + 3 se
};

struct PowerAudit {
    double snr = 0.0;
    double epsilon = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<double> index_prob;    // empirical distribution of the sent index
    std::vector<UserAudit> users;
    bool pass = false;
};

// Checks the received-index marginal against the mixture formula and the
// empirical average power against the SNR budget, per user, at 3 sigma.
PowerAudit verify_power_constraint(const SystemConfig& cfg,
                                   const std::vector<double>& gains,
                                   const PowerSchedule& schedule,
                                   std::uint64_t trials, std::uint64_t seed);

struct OutageRun {
    SystemConfig config;
    std::vector<double> gains;
    std::vector<double> snr_grid_db;
    std::vector<PowerSchedule> schedules;
    std::vector<OutageEstimate> estimates;
    std::uint64_t seed = 0;
};

struct SlopeFit {
    double diversity = 0.0; // negated log10-log10 OLS slope
    double std_error = 0.0;
    int points_used = 0;
};

// Ordinary least squares of log10(outage) on log10(SNR) over the reliable,
// unflagged points; throws if fewer than 3 qualify.
SlopeFit fit_diversity_slope(const OutageRun& run);

} // namespace macdmt

#endif
