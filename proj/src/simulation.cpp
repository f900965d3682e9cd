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

#include "macdmt/simulation.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace macdmt {

std::vector<double> rates_bits(const std::vector<double>& gains, double snr) {
    if (!(snr > 1.0))
        throw std::invalid_argument("snr must exceed 1 (0 dB) for rate scaling");
    std::vector<double> rates(gains.size());
    const double log2_snr = std::log2(snr);
    for (std::size_t i = 0; i < gains.size(); ++i) rates[i] = gains[i] * log2_snr;
    return rates;
}

namespace {

void check_schedule(const SystemConfig& cfg, const PowerSchedule& schedule) {
    if (schedule.levels.size() != static_cast<std::size_t>(cfg.feedback_levels))
        throw std::invalid_argument("schedule has wrong number of levels");
    if (!(schedule.snr > 1.0))
        throw std::invalid_argument("schedule snr must exceed 1");
    double prev = 0.0;
    for (const double level : schedule.levels) {
        if (!(level > 0.0) || !std::isfinite(level))
            throw std::invalid_argument("schedule levels must be positive finite");
        if (level < prev)
            throw std::invalid_argument("schedule levels must be non-decreasing");
        prev = level;
    }
}

// Per-trial evaluation workspace. Keeps the fading draw, the per-subset rate
// thresholds and the Cholesky scratch out of the hot loop. For a single
// receive antenna each subset test is a scalar compare against 2^rate.
class TrialEvaluator {
public:
    TrialEvaluator(const SystemConfig& cfg, const std::vector<double>& rates)
        : users_(cfg.users),
          tx_(cfg.tx_antennas),
          rx_(cfg.rx_antennas),
          draw_(make_fading(cfg)),
          power_buf_(static_cast<std::size_t>(cfg.users), 0.0) {
        const std::uint32_t masks = 1u << users_;
        subset_rate_.assign(masks, 0.0);
        subset_threshold_.assign(masks, 0.0);
        for (std::uint32_t mask = 1; mask < masks; ++mask) {
            double sum = 0.0;
            for (int s = 0; s < users_; ++s)
                if (mask & (1u << s)) sum += rates[static_cast<std::size_t>(s)];
            subset_rate_[mask] = sum;
            subset_threshold_[mask] = std::exp2(sum);
        }
        if (rx_ > 1) gram_.resize(rx_, rx_);
        user_gain_.assign(static_cast<std::size_t>(users_), 0.0);
    }

    void draw(SplitMix64& rng) {
        fill_fading(draw_, rng);
        if (rx_ == 1)
            for (int s = 0; s < users_; ++s)
                user_gain_[static_cast<std::size_t>(s)] =
                    draw_.channels[static_cast<std::size_t>(s)].squaredNorm() / tx_;
    }

    const FadingDraw& fading() const { return draw_; }

    bool outage_mixed(const std::vector<double>& powers) {
        const std::uint32_t masks = 1u << users_;
        for (std::uint32_t mask = 1; mask < masks; ++mask) {
            if (rx_ == 1) {
                double acc = 1.0;
                for (int s = 0; s < users_; ++s)
                    if (mask & (1u << s))
                        acc += powers[static_cast<std::size_t>(s)] *
                               user_gain_[static_cast<std::size_t>(s)];
                if (acc < subset_threshold_[mask]) return true;
            } else {
                gram_.setIdentity();
                for (int s = 0; s < users_; ++s)
                    if (mask & (1u << s))
                        gram_.template selfadjointView<Eigen::Lower>().rankUpdate(
                            draw_.channels[static_cast<std::size_t>(s)],
                            powers[static_cast<std::size_t>(s)] / tx_);
                llt_.compute(gram_);
                double log2det = 0.0;
                for (int i = 0; i < rx_; ++i)
                    log2det += 2.0 * std::log2(llt_.matrixLLT()(i, i).real());
                if (log2det < subset_rate_[mask]) return true;
            }
        }
        return false;
    }

    bool outage_common(double level) {
        std::fill(power_buf_.begin(), power_buf_.end(), level);
        return outage_mixed(power_buf_);
    }

    // First level that clears outage when everyone uses it; K+1 when even
    // the top level is in outage. U is monotone in the level, so U(P_k) = 1
    // exactly for k < J.
    int first_clear_level(const std::vector<double>& levels) {
        const int K = static_cast<int>(levels.size());
        for (int k = 1; k <= K; ++k)
            if (!outage_common(levels[static_cast<std::size_t>(k - 1)])) return k;
        return K + 1;
    }

private:
    int users_, tx_, rx_;
    FadingDraw draw_;
    std::vector<double> power_buf_;
    std::vector<double> subset_rate_;
    std::vector<double> subset_threshold_;
    std::vector<double> user_gain_;
    Eigen::MatrixXcd gram_;
    Eigen::LLT<Eigen::MatrixXcd> llt_;
};

} // namespace

int feedback_index(const FadingDraw& draw, const std::vector<double>& rates,
                   const PowerSchedule& schedule) {
    const int K = static_cast<int>(schedule.levels.size());
    std::vector<double> powers(static_cast<std::size_t>(draw.users()));
    for (int k = 1; k <= K; ++k) {
        std::fill(powers.begin(), powers.end(),
                  schedule.levels[static_cast<std::size_t>(k - 1)]);
        if (!outage_indicator(draw, rates, powers)) return k;
    }
    return 1; // outage unavoidable: send the bottom index
}

PowerSchedule calibrate_schedule(const SystemConfig& cfg,
                                 const std::vector<double>& gains, double snr,
                                 std::uint64_t trials, std::uint64_t seed,
                                 std::uint64_t min_events) {
    check_feasible(cfg, gains);
    if (!(snr > 1.0))
        throw std::invalid_argument("snr must exceed 1 (0 dB)");

    const int K = cfg.feedback_levels;
    const FeedbackChannel fb = make_feedback_channel(cfg, snr);

    PowerSchedule schedule;
    schedule.snr = snr;
    schedule.levels.assign(static_cast<std::size_t>(K), 0.0);
    schedule.calibration_outage.assign(static_cast<std::size_t>(K), 0.0);
    schedule.calibration_events.assign(static_cast<std::size_t>(K), 0);
    schedule.calibration_trials = trials;
    schedule.levels[0] = snr / K;

    const std::vector<double> rates = rates_bits(gains, snr);
    TrialEvaluator eval(cfg, rates);

    for (int i = 1; i < K; ++i) {
        const double probe_level = schedule.levels[static_cast<std::size_t>(i - 1)];
        const std::uint64_t stage_seed =
            derive_stream(seed, 1000 + static_cast<std::uint64_t>(i));
        std::uint64_t events = 0;
        for (std::uint64_t t = 0; t < trials; ++t) {
            SplitMix64 rng(derive_stream(stage_seed, t));
            eval.draw(rng);
            if (eval.outage_common(probe_level)) ++events;
        }
        const double phat =
            trials ? static_cast<double>(events) / static_cast<double>(trials) : 0.0;
        schedule.calibration_outage[static_cast<std::size_t>(i - 1)] = phat;
        schedule.calibration_events[static_cast<std::size_t>(i - 1)] = events;
        if (events < min_events) schedule.flagged = true;

        const double mixture =
            (K > 1 && fb.epsilon > 0.0)
                ? fb.epsilon / (K - 1) + (1.0 - fb.epsilon * K / (K - 1)) * phat
                : phat;
        double level;
        if (mixture > 0.0) {
            level = snr / (K * mixture);
        } else {
            schedule.flagged = true;
            level = schedule.levels[static_cast<std::size_t>(i - 1)];
        }
        schedule.levels[static_cast<std::size_t>(i)] =
            std::max(level, schedule.levels[static_cast<std::size_t>(i - 1)]);
    }

    schedule.exponents.resize(static_cast<std::size_t>(K));
    const double log_snr = std::log(snr);
    for (int i = 0; i < K; ++i)
        schedule.exponents[static_cast<std::size_t>(i)] =
            std::log(schedule.levels[static_cast<std::size_t>(i)]) / log_snr;
    return schedule;
}

OutageEstimate estimate_outage(const SystemConfig& cfg,
                               const std::vector<double>& gains,
                               const PowerSchedule& schedule,
                               std::uint64_t trials, std::uint64_t seed,
                               std::uint64_t min_events,
                               std::uint64_t batch_size) {
    check_feasible(cfg, gains);
    check_schedule(cfg, schedule);
    if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");

    const int K = cfg.feedback_levels;
    const int L = cfg.users;
    const FeedbackChannel fb = make_feedback_channel(cfg, schedule.snr);
    const std::vector<double> rates = rates_bits(gains, schedule.snr);
    TrialEvaluator eval(cfg, rates);

    std::vector<std::uint64_t> clear_hist(static_cast<std::size_t>(K) + 2, 0);
    std::vector<int> received(static_cast<std::size_t>(L), 0);
    std::vector<double> mixed_powers(static_cast<std::size_t>(L), 0.0);
    std::uint64_t outages = 0;
    std::uint64_t mixed_evals = 0;

    std::uint64_t done = 0;
    while (done < trials) {
        const std::uint64_t end = std::min(trials, done + batch_size);
        for (std::uint64_t t = done; t < end; ++t) {
            SplitMix64 rng(derive_stream(seed, t));
            eval.draw(rng);
            const int first_clear = eval.first_clear_level(schedule.levels);
            ++clear_hist[static_cast<std::size_t>(first_clear)];
            const int sent = (first_clear == K + 1) ? 1 : first_clear;

            bool same = true;
            for (int s = 0; s < L; ++s) {
                received[static_cast<std::size_t>(s)] = corrupt_index(sent, fb, rng);
                same = same && received[static_cast<std::size_t>(s)] ==
                                   received[0];
            }
            bool out;
            if (same) {
                out = received[0] < first_clear;
            } else {
                for (int s = 0; s < L; ++s)
                    mixed_powers[static_cast<std::size_t>(s)] =
                        schedule.levels[static_cast<std::size_t>(
                            received[static_cast<std::size_t>(s)] - 1)];
                out = eval.outage_mixed(mixed_powers);
                ++mixed_evals;
            }
            if (out) ++outages;
        }
        done = end;
    }

    OutageEstimate est;
    est.snr = schedule.snr;
    est.snr_db = 10.0 * std::log10(schedule.snr);
    est.epsilon = fb.epsilon;
    est.epsilon_clamped = fb.clamped;
    est.trials = trials;
    est.outage_count = outages;
    est.seed = seed;
    est.mixed_power_evals = mixed_evals;
    est.probability =
        trials ? static_cast<double>(outages) / static_cast<double>(trials) : 0.0;
    if (trials > 0) {
        const double half =
            1.96 * std::sqrt(est.probability * (1.0 - est.probability) /
                             static_cast<double>(trials));
        est.ci_low = std::max(0.0, est.probability - half);
        est.ci_high = std::min(1.0, est.probability + half);
    }
    est.reliable = trials > 0 && outages >= min_events;

    est.level_outage.assign(static_cast<std::size_t>(K), 0.0);
    if (trials > 0) {
        // outage at level k <=> first clear level above k
        std::uint64_t above = clear_hist[static_cast<std::size_t>(K) + 1];
        for (int k = K; k >= 1; --k) {
            est.level_outage[static_cast<std::size_t>(k - 1)] =
                static_cast<double>(above) / static_cast<double>(trials);
            above += clear_hist[static_cast<std::size_t>(k)];
        }
    }
    est.index_prob.assign(static_cast<std::size_t>(K), 0.0);
    if (trials > 0) {
        for (int k = 1; k <= K; ++k)
            est.index_prob[static_cast<std::size_t>(k - 1)] =
                static_cast<double>(clear_hist[static_cast<std::size_t>(k)]) /
                static_cast<double>(trials);
        est.index_prob[0] +=
            static_cast<double>(clear_hist[static_cast<std::size_t>(K) + 1]) /
            static_cast<double>(trials);
    }
    return est;
}

PowerAudit verify_power_constraint(const SystemConfig& cfg,
                                   const std::vector<double>& gains,
                                   const PowerSchedule& schedule,
                                   std::uint64_t trials, std::uint64_t seed) {
    check_feasible(cfg, gains);
    check_schedule(cfg, schedule);
    if (trials == 0) throw std::invalid_argument("audit needs trials > 0");

    const int K = cfg.feedback_levels;
    const int L = cfg.users;
    const FeedbackChannel fb = make_feedback_channel(cfg, schedule.snr);
    const std::vector<double> rates = rates_bits(gains, schedule.snr);
    TrialEvaluator eval(cfg, rates);

    std::vector<std::uint64_t> sent_hist(static_cast<std::size_t>(K), 0);
    std::vector<std::vector<std::uint64_t>> recv_hist(
        static_cast<std::size_t>(L),
        std::vector<std::uint64_t>(static_cast<std::size_t>(K), 0));
    std::vector<double> power_sum(static_cast<std::size_t>(L), 0.0);
    std::vector<double> power_sumsq(static_cast<std::size_t>(L), 0.0);

    for (std::uint64_t t = 0; t < trials; ++t) {
        SplitMix64 rng(derive_stream(seed, t));
        eval.draw(rng);
        const int first_clear = eval.first_clear_level(schedule.levels);
        const int sent = (first_clear == K + 1) ? 1 : first_clear;
        ++sent_hist[static_cast<std::size_t>(sent - 1)];
        for (int s = 0; s < L; ++s) {
            const int got = corrupt_index(sent, fb, rng);
            ++recv_hist[static_cast<std::size_t>(s)][static_cast<std::size_t>(got - 1)];
            const double power =
                schedule.levels[static_cast<std::size_t>(got - 1)];
            power_sum[static_cast<std::size_t>(s)] += power;
            power_sumsq[static_cast<std::size_t>(s)] += power * power;
        }
    }

    PowerAudit audit;
    audit.snr = schedule.snr;
    audit.epsilon = fb.epsilon;
    audit.trials = trials;
    audit.seed = seed;
    audit.index_prob.resize(static_cast<std::size_t>(K));
    const double N = static_cast<double>(trials);
    for (int k = 0; k < K; ++k)
        audit.index_prob[static_cast<std::size_t>(k)] =
            static_cast<double>(sent_hist[static_cast<std::size_t>(k)]) / N;

    audit.pass = true;
    for (int s = 0; s < L; ++s) {
        UserAudit user;
        user.received_prob.resize(static_cast<std::size_t>(K));
        user.formula_prob.resize(static_cast<std::size_t>(K));
        user.marginal_ok = true;
        for (int k = 0; k < K; ++k) {
            const double emp =
                static_cast<double>(
                    recv_hist[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]) /
                N;
            double formula = audit.index_prob[static_cast<std::size_t>(k)];
            if (K > 1)
                formula = fb.epsilon / (K - 1) +
                          (1.0 - fb.epsilon * K / (K - 1)) *
                              audit.index_prob[static_cast<std::size_t>(k)];
            user.received_prob[static_cast<std::size_t>(k)] = emp;
            user.formula_prob[static_cast<std::size_t>(k)] = formula;
            const double sigma =
                std::sqrt(std::max(formula * (1.0 - formula), 0.0) / N) + 1.0 / N;
            user.max_sigma_gap =
                std::max(user.max_sigma_gap, std::abs(emp - formula) / sigma);
            if (std::abs(emp - formula) > 3.0 * sigma) user.marginal_ok = false;
        }
        user.average_power = power_sum[static_cast<std::size_t>(s)] / N;
        const double var =
            std::max(0.0, power_sumsq[static_cast<std::size_t>(s)] / N -
                              user.average_power * user.average_power);
        user.average_power_se = std::sqrt(var / N);
        user.power_ok =
            user.average_power <= audit.snr + 3.0 * user.average_power_se;
        audit.pass = audit.pass && user.marginal_ok && user.power_ok;
        audit.users.push_back(std::move(user));
    }
    return audit;
}

SlopeFit fit_diversity_slope(const OutageRun& run) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < run.estimates.size(); ++i) {
        const OutageEstimate& est = run.estimates[i];
        const bool flagged =
            i < run.schedules.size() && run.schedules[i].flagged;
        if (!est.reliable || flagged || !(est.probability > 0.0)) continue;
        xs.push_back(std::log10(est.snr));
        ys.push_back(std::log10(est.probability));
    }
    const int n = static_cast<int>(xs.size());
    if (n < 3)
        throw std::runtime_error(
            "fit_diversity_slope: need at least 3 reliable SNR points");

    double mean_x = 0.0, mean_y = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_x += xs[static_cast<std::size_t>(i)];
        mean_y += ys[static_cast<std::size_t>(i)];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = xs[static_cast<std::size_t>(i)] - mean_x;
        sxx += dx * dx;
        sxy += dx * (ys[static_cast<std::size_t>(i)] - mean_y);
    }
    if (!(sxx > 0.0))
        throw std::runtime_error("fit_diversity_slope: degenerate SNR grid");
    const double slope = sxy / sxx;
    double ss_resid = 0.0;
    for (int i = 0; i < n; ++i) {
        const double fitted =
            mean_y + slope * (xs[static_cast<std::size_t>(i)] - mean_x);
        const double e = ys[static_cast<std::size_t>(i)] - fitted;
        ss_resid += e * e;
    }
    SlopeFit fit;
    fit.diversity = -slope;
    fit.points_used = n;
    fit.std_error = (n > 2) ? std::sqrt(ss_resid / (n - 2) / sxx) : 0.0;
    return fit;
}

} // namespace macdmt
