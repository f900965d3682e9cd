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

#include "macdmt/channel.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace macdmt {

FadingDraw make_fading(const SystemConfig& cfg) {
    validate(cfg);
    FadingDraw draw;
    draw.channels.assign(static_cast<std::size_t>(cfg.users),
                         Eigen::MatrixXcd(cfg.rx_antennas, cfg.tx_antennas));
    return draw;
}

void fill_fading(FadingDraw& draw, SplitMix64& rng) {
    for (auto& H : draw.channels) {
        auto* data = H.data();
        const Eigen::Index count = H.size();
        for (Eigen::Index i = 0; i < count; ++i) data[i] = complex_gaussian(rng);
    }
}

double mutual_info_subset(const FadingDraw& draw,
                          const std::vector<double>& powers,
                          std::uint32_t subset_mask) {
    if (subset_mask == 0) throw std::invalid_argument("subset must be non-empty");
    const int L = draw.users();
    if (powers.size() != static_cast<std::size_t>(L))
        throw std::invalid_argument("one power per user required");
    if (subset_mask >= (1u << L)) throw std::invalid_argument("subset mask out of range");
    for (const double p : powers)
        if (!(p > 0.0)) throw std::invalid_argument("powers must be positive");

    const int n = draw.rx_antennas();
    const int m = draw.tx_antennas();

    if (n == 1) {
        double acc = 1.0;
        for (int s = 0; s < L; ++s)
            if (subset_mask & (1u << s))
                acc += powers[static_cast<std::size_t>(s)] / m *
                       draw.channels[static_cast<std::size_t>(s)].squaredNorm();
        return std::log2(acc);
    }

    Eigen::MatrixXcd gram = Eigen::MatrixXcd::Identity(n, n);
    for (int s = 0; s < L; ++s)
        if (subset_mask & (1u << s))
            gram.selfadjointView<Eigen::Lower>().rankUpdate(
                draw.channels[static_cast<std::size_t>(s)],
                powers[static_cast<std::size_t>(s)] / m);

    const Eigen::LLT<Eigen::MatrixXcd> llt(gram);
    double log2det = 0.0;
    for (int i = 0; i < n; ++i)
        log2det += 2.0 * std::log2(llt.matrixLLT()(i, i).real());
    return log2det;
}

bool outage_indicator(const FadingDraw& draw, const std::vector<double>& rates,
                      const std::vector<double>& powers) {
    const int L = draw.users();
    if (rates.size() != static_cast<std::size_t>(L))
        throw std::invalid_argument("one rate per user required");
    for (const double r : rates)
        if (!(r >= 0.0)) throw std::invalid_argument("rates must be >= 0");

    for (std::uint32_t mask = 1; mask < (1u << L); ++mask) {
        double rate_sum = 0.0;
        for (int s = 0; s < L; ++s)
            if (mask & (1u << s)) rate_sum += rates[static_cast<std::size_t>(s)];
        if (mutual_info_subset(draw, powers, mask) < rate_sum) return true;
    }
    return false;
}

FeedbackChannel make_feedback_channel(const SystemConfig& cfg, double snr) {
    validate(cfg);
    if (!(snr > 0.0)) throw std::invalid_argument("snr must be positive");
    FeedbackChannel channel;
    channel.levels = cfg.feedback_levels;
    channel.decay = cfg.effective_decay();
    if (cfg.feedback_levels == 1 || cfg.perfect_feedback) {
        channel.epsilon = 0.0;
        return channel;
    }
    const double raw = std::pow(snr, -cfg.feedback_decay);
    const double cap = (cfg.feedback_levels - 1.0) / cfg.feedback_levels;
    channel.epsilon = std::min(raw, cap);
    channel.clamped = raw > cap;
    return channel;
}

int corrupt_index(int index, const FeedbackChannel& channel, SplitMix64& rng) {
    const int K = channel.levels;
    if (index < 1 || index > K) throw std::invalid_argument("index out of range");
    const double u = rng.next_double();
    if (K == 1 || u < 1.0 - channel.epsilon) return index;
    int other = static_cast<int>((u - (1.0 - channel.epsilon)) /
                                 (channel.epsilon / (K - 1)));
    if (other > K - 2) other = K - 2;
    return other < index - 1 ? other + 1 : other + 2;
}

} // namespace macdmt
