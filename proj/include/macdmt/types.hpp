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

#ifndef MACDMT_TYPES_HPP
#define MACDMT_TYPES_HPP

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace macdmt {

// One multiple-access link: `users` transmitters with `tx_antennas` each,
// a single receiver with `rx_antennas`, and a K-level quantized feedback
// channel whose error probability decays as SNR^(-feedback_decay).
// perfect_feedback marks an error-free feedback link (decay -> infinity).
struct SystemConfig {
    int tx_antennas = 1;     // m
    int rx_antennas = 1;     // n
    int users = 1;           // L
    int feedback_levels = 1; // K
    double feedback_decay = 0.0; // y
    bool perfect_feedback = false;

    double effective_decay() const {
        return perfect_feedback ? std::numeric_limits<double>::infinity()
                                : feedback_decay;
    }
    int antenna_product() const { return tx_antennas * rx_antennas; }
};

void validate(const SystemConfig& cfg);

// Thrown when a multiplexing-gain vector violates the strict per-subset
// rate condition: sum_{i in S} r_i < min(|S|*m, n) for every non-empty S.
class FeasibilityError : public std::invalid_argument {
public:
    FeasibilityError(std::string message, std::uint32_t subset_mask)
        : std::invalid_argument(std::move(message)), subset_mask_(subset_mask) {}
    std::uint32_t subset_mask() const { return subset_mask_; }

private:
    std::uint32_t subset_mask_;
};

// Checks the strict subset-rate condition; throws FeasibilityError naming
// the first violating subset. Gains must be nonnegative and of size L.
void check_feasible(const SystemConfig& cfg, const std::vector<double>& gains);

bool is_feasible(const SystemConfig& cfg, const std::vector<double>& gains);

std::string subset_to_string(std::uint32_t mask);

} // namespace macdmt

#endif
