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

#ifndef MACDMT_CHANNEL_HPP
#define MACDMT_CHANNEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "macdmt/rng.hpp"
#include "macdmt/types.hpp"

namespace macdmt {

// One block-fading realization: per user an n x m matrix of i.i.d. CN(0,1)
// entries.
struct FadingDraw {
    std::vector<Eigen::MatrixXcd> channels;

    int users() const { return static_cast<int>(channels.size()); }
    int rx_antennas() const { return static_cast<int>(channels.front().rows()); }
    int tx_antennas() const { return static_cast<int>(channels.front().cols()); }
};

// Allocates the right shape once; refill per trial with fill_fading.
FadingDraw make_fading(const SystemConfig& cfg);

void fill_fading(FadingDraw& draw, SplitMix64& rng);

// Conditional mutual information of the users in `subset_mask` (bit i set =
// user i transmits), the rest treated as known and cancelled:
//   log2 det(I_n + sum_{s in S} (P_s / m) H_s H_s^dagger)   [bits]
double mutual_info_subset(const FadingDraw& draw,
                          const std::vector<double>& powers,
                          std::uint32_t subset_mask);

// Union-of-subsets outage: 1 iff some non-empty subset S has
// mutual_info_subset below its rate sum.
bool outage_indicator(const FadingDraw& draw, const std::vector<double>& rates,
                      const std::vector<double>& powers);

// K-level feedback link at one SNR point; the error probability is
// min(SNR^-y, (K-1)/K) so the received-index marginal stays a mixture.
struct FeedbackChannel {
    int levels = 1;
    double epsilon = 0.0;
    double decay = 0.0;
    bool clamped = false;
};

FeedbackChannel make_feedback_channel(const SystemConfig& cfg, double snr);

// Receiver-side index corruption: returns `index` with probability
// 1 - epsilon, otherwise uniform over the K-1 other indices. Consumes
// exactly one draw.
int corrupt_index(int index, const FeedbackChannel& channel, SplitMix64& rng);

} // namespace macdmt

#endif
