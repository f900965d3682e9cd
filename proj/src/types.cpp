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

#include "macdmt/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace macdmt {

void validate(const SystemConfig& cfg) {
    if (cfg.tx_antennas < 1)
        throw std::invalid_argument("tx_antennas must be >= 1");
    if (cfg.rx_antennas < 1)
        throw std::invalid_argument("rx_antennas must be >= 1");
    if (cfg.users < 1)
        throw std::invalid_argument("users must be >= 1");
    if (cfg.users > 20)
        throw std::invalid_argument("users > 20 not supported (subset enumeration)");
    if (cfg.feedback_levels < 1)
        throw std::invalid_argument("feedback_levels must be >= 1");
    if (!cfg.perfect_feedback &&
        (!(cfg.feedback_decay >= 0.0) || std::isnan(cfg.feedback_decay)))
        throw std::invalid_argument("feedback_decay must be >= 0");
}

std::string subset_to_string(std::uint32_t mask) {
    std::ostringstream out;
    out << '{';
    bool first = true;
    for (int i = 0; mask != 0; ++i, mask >>= 1) {
        if (mask & 1u) {
            if (!first) out << ',';
            out << (i + 1); // 1-based user labels
            first = false;
        }
    }
    out << '}';
    return out.str();
}

namespace {

// Returns 0 if feasible, otherwise the first violating subset mask.
std::uint32_t find_violation(const SystemConfig& cfg,
                             const std::vector<double>& gains) {
    const int L = cfg.users;
    for (std::uint32_t mask = 1; mask < (1u << L); ++mask) {
        double sum = 0.0;
        int size = 0;
        for (int i = 0; i < L; ++i) {
            if (mask & (1u << i)) {
                sum += gains[static_cast<std::size_t>(i)];
                ++size;
            }
        }
        const double bound =
            std::min<double>(static_cast<double>(size) * cfg.tx_antennas,
                             static_cast<double>(cfg.rx_antennas));
        if (!(sum < bound)) return mask;
    }
    return 0;
}

} // namespace

void check_feasible(const SystemConfig& cfg, const std::vector<double>& gains) {
    validate(cfg);
    if (gains.size() != static_cast<std::size_t>(cfg.users))
        throw std::invalid_argument("multiplexing vector must have one gain per user");
    for (std::size_t i = 0; i < gains.size(); ++i) {
        if (!(gains[i] >= 0.0) || std::isnan(gains[i])) {
            std::ostringstream out;
            out << "multiplexing gain r_" << (i + 1) << " must be >= 0";
            throw std::invalid_argument(out.str());
        }
    }
    if (const std::uint32_t mask = find_violation(cfg, gains)) {
        double sum = 0.0;
        int size = 0;
        for (int i = 0; i < cfg.users; ++i) {
            if (mask & (1u << i)) {
                sum += gains[static_cast<std::size_t>(i)];
                ++size;
            }
        }
        const double bound =
            std::min<double>(static_cast<double>(size) * cfg.tx_antennas,
                             static_cast<double>(cfg.rx_antennas));
        std::ostringstream out;
        out << "infeasible multiplexing gains: subset " << subset_to_string(mask)
            << " has rate sum " << sum << " but requires < " << bound;
        throw FeasibilityError(out.str(), mask);
    }
}

bool is_feasible(const SystemConfig& cfg, const std::vector<double>& gains) {
    if (gains.size() != static_cast<std::size_t>(cfg.users)) return false;
    for (const double g : gains)
        if (!(g >= 0.0) || std::isnan(g)) return false;
    return find_violation(cfg, gains) == 0;
}

} // namespace macdmt
