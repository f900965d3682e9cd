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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "macdmt/simulation.hpp"
#include "oracles.hpp"

using namespace macdmt;

namespace {

SystemConfig make_cfg(int m, int n, int users, int k, double y,
                      bool perfect = false) {
    SystemConfig cfg;
    cfg.tx_antennas = m;
    cfg.rx_antennas = n;
    cfg.users = users;
    cfg.feedback_levels = k;
    cfg.feedback_decay = y;
    cfg.perfect_feedback = perfect;
    return cfg;
}

PowerSchedule manual_schedule(double snr, std::vector<double> levels) {
    PowerSchedule schedule;
    schedule.snr = snr;
    schedule.levels = std::move(levels);
    const double log_snr = std::log(snr);
    for (const double level : schedule.levels)
        schedule.exponents.push_back(std::log(level) / log_snr);
    return schedule;
}

} // namespace

TEST_CASE("rates scale as r log2 snr") {
    const auto rates = rates_bits({0.5, 0.2}, 100.0);
    CHECK(rates[0] == doctest::Approx(0.5 * std::log2(100.0)).epsilon(1e-12));
    CHECK(rates[1] == doctest::Approx(0.2 * std::log2(100.0)).epsilon(1e-12));
    CHECK_THROWS_AS(rates_bits({0.5}, 0.9), std::invalid_argument);
}

TEST_CASE("feedback_index follows the minimum-power rule") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 1.0);
    FadingDraw draw = make_fading(cfg);
    const PowerSchedule schedule = manual_schedule(100.0, {10.0, 100.0});
    const std::vector<double> rates = {4.0}; // outage iff |h|^2 < 15 / P

    draw.channels[0](0, 0) = std::sqrt(2.0); // clears level 1 (2 > 1.5)
    CHECK(feedback_index(draw, rates, schedule) == 1);
    draw.channels[0](0, 0) = std::sqrt(0.5); // between 0.15 and 1.5
    CHECK(feedback_index(draw, rates, schedule) == 2);
    draw.channels[0](0, 0) = std::sqrt(0.05); // outage even at the top level
    CHECK(feedback_index(draw, rates, schedule) == 1);
}

TEST_CASE("feedback_index is consistent with the outage indicator") {
    const SystemConfig cfg = make_cfg(2, 2, 2, 3, 1.0);
    FadingDraw draw = make_fading(cfg);
    const PowerSchedule schedule = manual_schedule(100.0, {5.0, 40.0, 400.0});
    const std::vector<double> rates = rates_bits({0.4, 0.6}, 100.0);
    SplitMix64 rng(2718);
    auto common = [&](int k) {
        return std::vector<double>(2, schedule.levels[static_cast<std::size_t>(k - 1)]);
    };
    for (int rep = 0; rep < 500; ++rep) {
        fill_fading(draw, rng);
        const int k = feedback_index(draw, rates, schedule);
        if (k > 1) {
            CHECK(outage_indicator(draw, rates, common(k - 1)));
            CHECK_FALSE(outage_indicator(draw, rates, common(k)));
        } else {
            const bool bottom_clear = !outage_indicator(draw, rates, common(1));
            const bool top_blocked = outage_indicator(draw, rates, common(3));
            CHECK((bottom_clear || top_blocked));
        }
    }
}

TEST_CASE("calibrate_schedule with one level is the SNR itself") {
    const PowerSchedule schedule =
        calibrate_schedule(make_cfg(1, 1, 1, 1, 1.0), {0.3}, 250.0, 1000, 1);
    REQUIRE(schedule.levels.size() == 1);
    CHECK(schedule.levels[0] == 250.0);
    CHECK(schedule.exponents[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(schedule.flagged);
}

TEST_CASE("calibrate_schedule matches the scalar closed form") {
    // one noisy bit at 20 dB: the second level is SNR over K times the
    // received-index mixture built from the level-1 outage
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 1.0);
    const double snr = 100.0;
    const double eps = 0.01;
    const PowerSchedule schedule =
        calibrate_schedule(cfg, {0.3}, snr, 200'000, 99);
    REQUIRE(schedule.levels.size() == 2);
    CHECK(schedule.levels[0] == 50.0);
    CHECK_FALSE(schedule.flagged);
    CHECK(schedule.calibration_events[0] > 50);

    const double rate = 0.3 * std::log2(snr);
    const double outage1 = testing::siso_outage_closed_form(rate, 50.0);
    const double expected = snr / (2.0 * (eps + (1.0 - 2.0 * eps) * outage1));
    // calibration noise: 3 sigma on the level-1 outage estimate
    const double sigma = testing::binomial_sigma(outage1, 200'000);
    const double slack = expected * 3.0 * sigma / outage1;
    CHECK(schedule.levels[1] == doctest::Approx(expected).epsilon(slack / expected));
    CHECK(schedule.levels[1] >= schedule.levels[0]);
}

TEST_CASE("calibrated exponent approaches 1 + min(y, cbar_1)") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 1.0);
    const double snr = 1000.0; // 30 dB
    const PowerSchedule schedule =
        calibrate_schedule(cfg, {0.05}, snr, 1'000'000, 7);
    REQUIRE_FALSE(schedule.flagged);

    // exact finite-SNR prediction from the closed-form outage
    const double rate = 0.05 * std::log2(snr);
    const double outage1 = testing::siso_outage_closed_form(rate, 500.0);
    const double eps = 1e-3;
    const double predicted =
        std::log(snr / (2.0 * (eps + (1.0 - 2.0 * eps) * outage1))) /
        std::log(snr);
    CHECK(schedule.exponents[1] == doctest::Approx(predicted).epsilon(0.01));
    // asymptotic target 1 + min(y, cbar_1) = 1 + min(1, 0.95), finite-SNR drift
    CHECK(std::abs(schedule.exponents[1] - 1.95) < 0.2);
}

TEST_CASE("calibrate_schedule flags a rate-starved stage") {
    // zero gains give zero outage at level 1; with epsilon > 0 the formula
    // still places a finite level but the stage is flagged
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 1.0);
    const PowerSchedule schedule = calibrate_schedule(cfg, {0.0}, 100.0, 5000, 3);
    CHECK(schedule.flagged);
    CHECK(schedule.levels[1] >= schedule.levels[0]);
    CHECK(std::isfinite(schedule.levels[1]));
}

TEST_CASE("estimate_outage matches the scalar closed form without feedback") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 1, 1.0);
    const double snr = 100.0;
    const PowerSchedule schedule = manual_schedule(snr, {snr});
    const std::uint64_t trials = 200'000;
    const OutageEstimate est = estimate_outage(cfg, {0.5}, schedule, trials, 11);

    const double rate = 0.5 * std::log2(snr);
    const double expected = testing::siso_outage_closed_form(rate, snr);
    const double sigma = testing::binomial_sigma(expected, trials);
    CHECK(std::abs(est.probability - expected) < 3.0 * sigma);
    CHECK(est.reliable);
    CHECK(est.ci_low <= est.probability);
    CHECK(est.ci_high >= est.probability);
}

TEST_CASE("perfect feedback reduces to the top-level outage") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 0.0, true);
    const double snr = 100.0;
    const PowerSchedule schedule = manual_schedule(snr, {50.0, 2000.0});
    const OutageEstimate est = estimate_outage(cfg, {0.4}, schedule, 100'000, 5);
    // with no corruption the union event is exactly "top level in outage"
    CHECK(est.probability == est.level_outage[1]);
    CHECK(est.mixed_power_evals == 0);

    const double rate = 0.4 * std::log2(snr);
    const double expected = testing::siso_outage_closed_form(rate, 2000.0);
    const double sigma = testing::binomial_sigma(expected, est.trials);
    CHECK(std::abs(est.probability - expected) < 3.0 * sigma);
}

TEST_CASE("single-user outage decomposes over the received index") {
    // single-user split: (1-eps) * outage(P_K) + eps/(K-1) * sum outage(P_i)
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 0.5);
    const double snr = 100.0;
    const double eps = 0.1;
    const PowerSchedule schedule = manual_schedule(snr, {50.0, 900.0});
    const std::uint64_t trials = 200'000;
    const OutageEstimate est = estimate_outage(cfg, {0.3}, schedule, trials, 21);
    CHECK(est.epsilon == doctest::Approx(eps).epsilon(1e-12));

    const double rate = 0.3 * std::log2(snr);
    const double pi1 = testing::siso_outage_closed_form(rate, 50.0);
    const double pi2 = testing::siso_outage_closed_form(rate, 900.0);
    const double expected = (1.0 - eps) * pi2 + eps * pi1;
    const double sigma = testing::binomial_sigma(expected, trials);
    CHECK(std::abs(est.probability - expected) < 3.0 * sigma);

    // same-draw level estimates agree with the closed forms as well
    CHECK(std::abs(est.level_outage[0] - pi1) <
          3.0 * testing::binomial_sigma(pi1, trials));
    CHECK(std::abs(est.level_outage[1] - pi2) <
          3.0 * testing::binomial_sigma(pi2, trials));
}

TEST_CASE("sent-index distribution identity") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 3, 0.75);
    const double snr = 100.0;
    const PowerSchedule schedule = manual_schedule(snr, {33.0, 400.0, 3000.0});
    const OutageEstimate est = estimate_outage(cfg, {0.3}, schedule, 100'000, 31);

    // P(I=1) = 1 + P(outage at P_K) - P(outage at P_1): exact on shared draws
    CHECK(est.index_prob[0] ==
          doctest::Approx(1.0 + est.level_outage[2] - est.level_outage[0])
              .epsilon(1e-12));
    // P(I=i) = P(outage at P_{i-1}) - P(outage at P_i)
    CHECK(est.index_prob[1] ==
          doctest::Approx(est.level_outage[0] - est.level_outage[1]).epsilon(1e-12));
    CHECK(est.index_prob[2] ==
          doctest::Approx(est.level_outage[1] - est.level_outage[2]).epsilon(1e-12));

    // and statistically against the closed forms on an independent run
    const double rate = 0.3 * std::log2(snr);
    const double pi1 = testing::siso_outage_closed_form(rate, 33.0);
    const double pi3 = testing::siso_outage_closed_form(rate, 3000.0);
    const double expected_i1 = 1.0 + pi3 - pi1;
    CHECK(std::abs(est.index_prob[0] - expected_i1) <
          3.0 * testing::binomial_sigma(expected_i1, est.trials) + 1e-3);
}

TEST_CASE("multi-user outage respects the union-bound decomposition") {
    const SystemConfig cfg = make_cfg(1, 2, 2, 2, 0.5);
    const double snr = 100.0;
    const double eps = 0.1;
    const PowerSchedule schedule = manual_schedule(snr, {50.0, 600.0});
    const std::uint64_t trials = 100'000;
    const OutageEstimate est =
        estimate_outage(cfg, {0.25, 0.25}, schedule, trials, 41);

    const double bound = (1.0 - 2.0 * eps) * est.level_outage[1] +
                         2.0 * eps * est.level_outage[0];
    const double sigma = testing::binomial_sigma(std::max(bound, 1e-6), trials);
    CHECK(est.probability <= bound + 3.0 * sigma);
    CHECK(est.mixed_power_evals > 0); // corrupted trials actually exercised
}

TEST_CASE("estimate_outage agrees with a replay through the public operations") {
    const SystemConfig cfg = make_cfg(2, 2, 2, 3, 0.4);
    const double snr = 60.0;
    const PowerSchedule schedule = manual_schedule(snr, {20.0, 200.0, 900.0});
    const std::vector<double> gains = {0.3, 0.5};
    const std::uint64_t trials = 2000;
    const std::uint64_t seed = 77;
    const OutageEstimate est = estimate_outage(cfg, gains, schedule, trials, seed);

    const std::vector<double> rates = rates_bits(gains, snr);
    const FeedbackChannel fb = make_feedback_channel(cfg, snr);
    FadingDraw draw = make_fading(cfg);
    std::uint64_t outages = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        SplitMix64 rng(derive_stream(seed, t));
        fill_fading(draw, rng);
        const int sent = feedback_index(draw, rates, schedule);
        std::vector<double> powers(2);
        for (int s = 0; s < 2; ++s)
            powers[static_cast<std::size_t>(s)] =
                schedule.levels[static_cast<std::size_t>(
                    corrupt_index(sent, fb, rng) - 1)];
        if (outage_indicator(draw, rates, powers)) ++outages;
    }
    CHECK(est.outage_count == outages);
}

TEST_CASE("scalar fast path agrees with the replay as well") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 0.5);
    const PowerSchedule schedule = manual_schedule(100.0, {50.0, 900.0});
    const std::vector<double> gains = {0.3};
    const std::uint64_t trials = 200'000;
    const std::uint64_t seed = 123;
    const OutageEstimate est = estimate_outage(cfg, gains, schedule, trials, seed);

    const std::vector<double> rates = rates_bits(gains, 100.0);
    const FeedbackChannel fb = make_feedback_channel(cfg, 100.0);
    FadingDraw draw = make_fading(cfg);
    std::uint64_t outages = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        SplitMix64 rng(derive_stream(seed, t));
        fill_fading(draw, rng);
        const int sent = feedback_index(draw, rates, schedule);
        const std::vector<double> powers = {
            schedule.levels[static_cast<std::size_t>(
                corrupt_index(sent, fb, rng) - 1)]};
        if (outage_indicator(draw, rates, powers)) ++outages;
    }
    CHECK(est.outage_count == outages);
}

TEST_CASE("estimate_outage validates the schedule") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 1.0);
    PowerSchedule bad = manual_schedule(100.0, {500.0, 50.0}); // decreasing
    CHECK_THROWS_AS(estimate_outage(cfg, {0.3}, bad, 10, 1),
                    std::invalid_argument);
    PowerSchedule short_ladder = manual_schedule(100.0, {100.0}); // wrong K
    CHECK_THROWS_AS(estimate_outage(cfg, {0.3}, short_ladder, 10, 1),
                    std::invalid_argument);
    PowerSchedule ok = manual_schedule(100.0, {50.0, 800.0});
    CHECK_THROWS_AS(estimate_outage(cfg, {0.3}, ok, 10, 1, 50, 0),
                    std::invalid_argument); // zero batch size
    CHECK_THROWS_AS(estimate_outage(cfg, {1.2}, ok, 10, 1), FeasibilityError);
}

TEST_CASE("estimates are reproducible and batch-invariant") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 1.0);
    const PowerSchedule schedule = manual_schedule(100.0, {50.0, 800.0});
    const OutageEstimate a = estimate_outage(cfg, {0.3}, schedule, 30'000, 4242);
    const OutageEstimate b = estimate_outage(cfg, {0.3}, schedule, 30'000, 4242);
    CHECK(a.outage_count == b.outage_count);

    const OutageEstimate c =
        estimate_outage(cfg, {0.3}, schedule, 30'000, 4242, 50, 64);
    const OutageEstimate d =
        estimate_outage(cfg, {0.3}, schedule, 30'000, 4242, 50, 29'999);
    CHECK(a.outage_count == c.outage_count);
    CHECK(a.outage_count == d.outage_count);

    const OutageEstimate e = estimate_outage(cfg, {0.3}, schedule, 30'000, 4243);
    CHECK(a.outage_count != e.outage_count); // different seed, different draws
}

TEST_CASE("zero-trial estimate is flagged unreliable") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 1, 1.0);
    const PowerSchedule schedule = manual_schedule(100.0, {100.0});
    const OutageEstimate est = estimate_outage(cfg, {0.3}, schedule, 0, 1);
    CHECK_FALSE(est.reliable);
    CHECK(est.probability == 0.0);
}

TEST_CASE("verify_power_constraint on calibrated scalar schedules") {
    for (const int k : {2, 3}) {
        const SystemConfig cfg = make_cfg(1, 1, 1, k, 1.0);
        const double snr = 100.0; // 20 dB
        const PowerSchedule schedule =
            calibrate_schedule(cfg, {0.25}, snr, 200'000, 1234);
        REQUIRE_FALSE(schedule.flagged);
        const PowerAudit audit =
            verify_power_constraint(cfg, {0.25}, schedule, 200'000, 4321);
        CHECK(audit.pass);
        REQUIRE(audit.users.size() == 1);
        CHECK(audit.users[0].marginal_ok);
        CHECK(audit.users[0].power_ok);
        CHECK(audit.users[0].average_power <=
              snr + 3.0 * audit.users[0].average_power_se);
    }
}

TEST_CASE("audited average power matches the scalar closed-form prediction") {
    // build P(I=i) from closed-form level outages, push it through the
    // received-index mixture, and predict E[P^received] analytically
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 1.0);
    const double snr = 100.0;
    const double eps = 0.01;
    const PowerSchedule schedule =
        calibrate_schedule(cfg, {0.25}, snr, 200'000, 51);
    REQUIRE_FALSE(schedule.flagged);
    const double rate = 0.25 * std::log2(snr);
    const double pi1 = testing::siso_outage_closed_form(rate, schedule.levels[0]);
    const double pi2 = testing::siso_outage_closed_form(rate, schedule.levels[1]);
    const double sent1 = 1.0 + pi2 - pi1;
    const double sent2 = pi1 - pi2;
    const double predicted =
        schedule.levels[0] * (eps + (1.0 - 2.0 * eps) * sent1) +
        schedule.levels[1] * (eps + (1.0 - 2.0 * eps) * sent2);

    const PowerAudit audit =
        verify_power_constraint(cfg, {0.25}, schedule, 400'000, 52);
    CHECK(audit.pass);
    CHECK(std::abs(audit.users[0].average_power - predicted) <
          3.0 * audit.users[0].average_power_se + 1e-9);
    CHECK(predicted <= snr);
}

TEST_CASE("audit with perfect feedback reproduces the sent distribution") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 2, 0.0, true);
    const PowerSchedule schedule = manual_schedule(100.0, {50.0, 700.0});
    const PowerAudit audit =
        verify_power_constraint(cfg, {0.3}, schedule, 50'000, 9);
    REQUIRE(audit.users.size() == 1);
    for (int i = 0; i < 2; ++i)
        CHECK(audit.users[0].received_prob[static_cast<std::size_t>(i)] ==
              audit.index_prob[static_cast<std::size_t>(i)]);
    CHECK(audit.pass);
}

TEST_CASE("two-user audit passes and keeps users within budget") {
    const SystemConfig cfg = make_cfg(1, 2, 2, 2, 0.5);
    const double snr = 100.0;
    const PowerSchedule schedule =
        calibrate_schedule(cfg, {0.2, 0.2}, snr, 100'000, 55);
    REQUIRE_FALSE(schedule.flagged);
    const PowerAudit audit =
        verify_power_constraint(cfg, {0.2, 0.2}, schedule, 100'000, 66);
    CHECK(audit.pass);
    CHECK(audit.users.size() == 2);
}

TEST_CASE("fit_diversity_slope on an exact power law") {
    OutageRun run;
    run.config = make_cfg(1, 1, 1, 1, 1.0);
    run.gains = {0.0};
    for (const auto [snr, p] :
         {std::pair{10.0, 1e-1}, {100.0, 1e-2}, {1000.0, 1e-3}}) {
        OutageEstimate est;
        est.snr = snr;
        est.probability = p;
        est.outage_count = 1000;
        est.trials = static_cast<std::uint64_t>(1000.0 / p);
        est.reliable = true;
        run.estimates.push_back(est);
        run.schedules.push_back(manual_schedule(snr, {snr}));
        run.snr_grid_db.push_back(10.0 * std::log10(snr));
    }
    const SlopeFit fit = fit_diversity_slope(run);
    CHECK(fit.diversity == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.std_error == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(fit.points_used == 3);
}

TEST_CASE("fit_diversity_slope refuses thin or flagged data") {
    OutageRun run;
    run.config = make_cfg(1, 1, 1, 1, 1.0);
    run.gains = {0.0};
    for (const auto [snr, p] : {std::pair{10.0, 1e-1}, {100.0, 1e-2}}) {
        OutageEstimate est;
        est.snr = snr;
        est.probability = p;
        est.reliable = true;
        run.estimates.push_back(est);
        run.schedules.push_back(manual_schedule(snr, {snr}));
        run.snr_grid_db.push_back(10.0 * std::log10(snr));
    }
    CHECK_THROWS_AS(fit_diversity_slope(run), std::runtime_error);

    // a third, flagged point must not rescue the fit
    OutageEstimate est;
    est.snr = 1000.0;
    est.probability = 1e-3;
    est.reliable = true;
    run.estimates.push_back(est);
    PowerSchedule flagged = manual_schedule(1000.0, {1000.0});
    flagged.flagged = true;
    run.schedules.push_back(flagged);
    run.snr_grid_db.push_back(30.0);
    CHECK_THROWS_AS(fit_diversity_slope(run), std::runtime_error);
}

TEST_CASE("slope recovery against the closed-form reference (small run)") {
    const SystemConfig cfg = make_cfg(1, 1, 1, 1, 1.0);
    OutageRun run;
    run.config = cfg;
    run.gains = {0.2};
    std::vector<double> ref_x, ref_y;
    for (const double db : {15.0, 20.0, 25.0, 30.0}) {
        const double snr = std::pow(10.0, db / 10.0);
        const PowerSchedule schedule = manual_schedule(snr, {snr});
        run.schedules.push_back(schedule);
        run.snr_grid_db.push_back(db);
        run.estimates.push_back(estimate_outage(
            cfg, run.gains, schedule, 300'000, 17 + static_cast<int>(db)));
        ref_x.push_back(std::log10(snr));
        ref_y.push_back(std::log10(testing::siso_outage_closed_form(
            0.2 * std::log2(snr), snr)));
    }
    const SlopeFit fit = fit_diversity_slope(run);
    const double reference = -testing::ols_slope(ref_x, ref_y);
    CHECK(std::abs(fit.diversity - reference) < 0.15);
}
