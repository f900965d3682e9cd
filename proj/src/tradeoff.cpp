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

#include "macdmt/tradeoff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace macdmt {

namespace {

constexpr double kEqTol = 1e-9; // breakpoint/branch equality tolerance

double min_with_decay(const SystemConfig& cfg, double value) {
    if (cfg.perfect_feedback) return value;
    return std::min(cfg.feedback_decay, value);
}

} // namespace

double g_exponent(int m, int n, double r, double p) {
    if (m < 1 || n < 1) throw std::invalid_argument("antenna counts must be >= 1");
    if (!(p > 0.0)) throw std::invalid_argument("power exponent p must be > 0");
    if (!(r >= 0.0) || std::isnan(r))
        throw std::invalid_argument("multiplexing gain r must be >= 0");

    const int q = std::min(m, n);
    double t = r / p;
    // Snap to the breakpoint grid so (r = k*p) evaluates exactly even when
    // r/p rounds away from the integer.
    const double rounded = std::round(t);
    if (std::abs(t - rounded) <= kEqTol) t = rounded;
    if (t >= static_cast<double>(q)) return 0.0;

    const int k = static_cast<int>(t);
    const double lo = static_cast<double>((m - k) * (n - k));
    const double hi = static_cast<double>((m - k - 1) * (n - k - 1));
    return p * (lo + (t - k) * (hi - lo));
}

double d_exponent(const SystemConfig& cfg, const std::vector<double>& gains,
                  double p) {
    check_feasible(cfg, gains);
    if (!(p > 0.0)) throw std::invalid_argument("power exponent p must be > 0");

    const int L = cfg.users;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask < (1u << L); ++mask) {
        double sum = 0.0;
        int size = 0;
        for (int i = 0; i < L; ++i) {
            if (mask & (1u << i)) {
                sum += gains[static_cast<std::size_t>(i)];
                ++size;
            }
        }
        best = std::min(best,
                        g_exponent(size * cfg.tx_antennas, cfg.rx_antennas, sum, p));
    }
    return best;
}

double c_recursion(const SystemConfig& cfg, const std::vector<double>& gains,
                   int steps) {
    if (steps < 0) throw std::invalid_argument("recursion depth must be >= 0");
    check_feasible(cfg, gains);
    double c = 0.0;
    for (int j = 0; j < steps; ++j) c = d_exponent(cfg, gains, 1.0 + c);
    return c;
}

double cbar_recursion(const SystemConfig& cfg, const std::vector<double>& gains,
                      int steps) {
    if (steps < 0) throw std::invalid_argument("recursion depth must be >= 0");
    check_feasible(cfg, gains);
    double c = 0.0;
    for (int j = 0; j < steps; ++j)
        c = d_exponent(cfg, gains, 1.0 + min_with_decay(cfg, c));
    return c;
}

double d_opt(const SystemConfig& cfg, const std::vector<double>& gains) {
    check_feasible(cfg, gains);
    const int K = cfg.feedback_levels;
    if (K == 1) return d_exponent(cfg, gains, 1.0);
    const double cbar_k = cbar_recursion(cfg, gains, K);
    if (cfg.perfect_feedback) return cbar_k; // y + C_1 term drops out
    return std::min(cbar_k, cfg.feedback_decay + c_recursion(cfg, gains, 1));
}

double d_opt_piecewise_ymn(const SystemConfig& cfg,
                           const std::vector<double>& gains, int levels) {
    check_feasible(cfg, gains);
    if (levels < 1) throw std::invalid_argument("levels must be >= 1");
    const double mn = static_cast<double>(cfg.antenna_product());
    if (cfg.perfect_feedback || cfg.feedback_decay != mn)
        throw std::invalid_argument(
            "d_opt_piecewise_ymn requires feedback_decay == m*n");

    // Walk C_j upward; k is the last index with C_k <= mn. The comparison is
    // the exact weak inequality so branch selection matches the min() inside
    // cbar_recursion bit for bit.
    const double c1 = d_exponent(cfg, gains, 1.0);
    double c = c1;
    int j = 1;
    while (j < levels && c <= mn) {
        c = d_exponent(cfg, gains, 1.0 + c);
        ++j;
    }
    // Now either j == levels (value C_levels reached) or C_j > mn with j <= levels.
    if (j == levels && c <= mn) return c;          // levels <= k
    if (j == levels) return std::min(c, mn + c1);  // levels == k+1 (C_levels > mn)
    return mn + c1;                                // levels > k+1
}

double sweep_upper_bound(const SystemConfig& cfg, const SweepSpec& sweep) {
    validate(cfg);
    const int L = cfg.users;
    if (sweep.user < 0 || sweep.user >= L)
        throw std::invalid_argument("sweep user index out of range");
    if (sweep.fixed_gains.size() != static_cast<std::size_t>(L))
        throw std::invalid_argument("sweep needs one (fixed) gain per user");

    double hi = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask < (1u << L); ++mask) {
        double sum = 0.0;
        int size = 0;
        for (int i = 0; i < L; ++i) {
            if (mask & (1u << i)) {
                if (i != sweep.user) sum += sweep.fixed_gains[static_cast<std::size_t>(i)];
                ++size;
            }
        }
        const double bound =
            std::min<double>(static_cast<double>(size) * cfg.tx_antennas,
                             static_cast<double>(cfg.rx_antennas));
        if (mask & (1u << sweep.user)) {
            hi = std::min(hi, bound - sum);
        } else if (!(sum < bound)) {
            std::ostringstream out;
            out << "fixed gains infeasible: subset " << subset_to_string(mask)
                << " has rate sum " << sum << " but requires < " << bound;
            throw FeasibilityError(out.str(), mask);
        }
    }
    if (!(hi > 0.0)) {
        std::ostringstream out;
        out << "empty feasible range for swept user " << (sweep.user + 1);
        throw FeasibilityError(out.str(), 1u << sweep.user);
    }
    return hi;
}

DmtCurve sample_curve(const SystemConfig& cfg, const SweepSpec& sweep,
                      int resolution) {
    if (resolution < 4)
        throw std::invalid_argument("resolution must be >= 4");
    const double hi = sweep_upper_bound(cfg, sweep);

    DmtCurve curve;
    curve.config = cfg;
    curve.swept_user = sweep.user;
    curve.fixed_gains = sweep.fixed_gains;

    const double step = hi / resolution; // last sample one step inside the boundary
    std::vector<double> gains = sweep.fixed_gains;
    curve.samples.reserve(static_cast<std::size_t>(resolution));
    for (int i = 0; i < resolution; ++i) {
        const double r = step * i;
        gains[static_cast<std::size_t>(sweep.user)] = r;
        curve.samples.emplace_back(r, d_opt(cfg, gains));
    }

    // Slope-change scan. The curve is piecewise linear, so two clean
    // neighboring segments pin each kink down as a line intersection.
    const int N = resolution;
    std::vector<double> slope(static_cast<std::size_t>(N - 1));
    for (int i = 0; i + 1 < N; ++i)
        slope[static_cast<std::size_t>(i)] =
            (curve.samples[i + 1].second - curve.samples[i].second) / step;

    auto flagged = [&](int i) {
        const double a = slope[static_cast<std::size_t>(i - 1)];
        const double b = slope[static_cast<std::size_t>(i)];
        return std::abs(b - a) > 1e-6 * (1.0 + std::max(std::abs(a), std::abs(b)));
    };

    for (int i = 1; i < N - 1;) {
        if (!flagged(i)) { ++i; continue; }
        int run_end = i;
        while (run_end + 1 < N - 1 && flagged(run_end + 1)) ++run_end;
        const int left = i - 1;      // clean segment on the left
        const int right = run_end;   // clean segment on the right
        const double s_left = slope[static_cast<std::size_t>(left)];
        const double s_right = slope[static_cast<std::size_t>(right)];
        if (std::abs(s_right - s_left) > 1e-12) {
            const double xl = curve.samples[static_cast<std::size_t>(left)].first;
            const double yl = curve.samples[static_cast<std::size_t>(left)].second;
            const double xr = curve.samples[static_cast<std::size_t>(right + 1)].first;
            const double yr = curve.samples[static_cast<std::size_t>(right + 1)].second;
            const double x =
                ((yl - s_left * xl) - (yr - s_right * xr)) / (s_right - s_left);
            if (x > 0.0 && x < hi &&
                (curve.breakpoints.empty() ||
                 x - curve.breakpoints.back() > step * 0.5))
                curve.breakpoints.push_back(x);
        }
        i = run_end + 1;
    }
    return curve;
}

ClosedFormReport verify_closed_forms(const SystemConfig& cfg) {
    validate(cfg);
    ClosedFormReport report;
    const double mn = static_cast<double>(cfg.antenna_product());
    const int K = cfg.feedback_levels;
    const std::vector<double> zeros(static_cast<std::size_t>(cfg.users), 0.0);

    // Geometric closed form, summed termwise so mn = 1 needs no special case.
    double c_expected = 0.0;
    double power = 1.0;
    for (int t = 1; t <= K; ++t) {
        power *= mn;
        c_expected += power;
    }
    {
        IdentityCheck chk;
        std::ostringstream name;
        name << "C_" << K << "(0) == sum_{t=1.." << K << "} (mn)^t";
        chk.name = name.str();
        chk.expected = c_expected;
        chk.actual = c_recursion(cfg, zeros, K);
        chk.difference = chk.actual - chk.expected;
        chk.pass = std::abs(chk.difference) <= kEqTol;
        report.checks.push_back(chk);
    }
    {
        SystemConfig symmetric = cfg;
        symmetric.perfect_feedback = false;
        symmetric.feedback_decay = mn;
        IdentityCheck chk;
        std::ostringstream name;
        name << "Cbar_" << K << "(0) with y=mn == " << (K == 1 ? "mn" : "mn*(1+mn)");
        chk.name = name.str();
        chk.expected = (K == 1) ? mn : mn * (1.0 + mn);
        chk.actual = cbar_recursion(symmetric, zeros, K);
        chk.difference = chk.actual - chk.expected;
        chk.pass = std::abs(chk.difference) <= kEqTol;
        report.checks.push_back(chk);
    }
    for (const auto& chk : report.checks) report.all_pass = report.all_pass && chk.pass;
    return report;
}

} // namespace macdmt
