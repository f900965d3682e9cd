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

#ifndef MACDMT_TRADEOFF_HPP
#define MACDMT_TRADEOFF_HPP

#include <string>
#include <utility>
#include <vector>

#include "macdmt/types.hpp"

namespace macdmt {

// Single-link diversity exponent at multiplexing gain r under power
// exponent p: the piecewise-linear curve through (k*p, p*(m-k)*(n-k)),
// k = 0..min(m,n), and zero beyond min(m,n)*p. Exact at breakpoints.
double g_exponent(int m, int n, double r, double p);

// Multiple-access outage exponent with a common power exponent p:
// min over non-empty user subsets S of g_exponent(|S|*m, n, sum_S r, p).
double d_exponent(const SystemConfig& cfg, const std::vector<double>& gains,
                  double p);

// Perfect-feedback exponent recursion: C_0 = 0, C_j = D(r, 1 + C_{j-1}).
double c_recursion(const SystemConfig& cfg, const std::vector<double>& gains,
                   int steps);

// Error-limited recursion: Cbar_0 = 0,
// Cbar_j = D(r, 1 + min(y, Cbar_{j-1})). Equals c_recursion when the
// feedback is perfect.
double cbar_recursion(const SystemConfig& cfg,
                      const std::vector<double>& gains, int steps);

// Achievable diversity order with K feedback levels:
//   K = 1           -> D(r, 1)              (no feedback)
//   K > 1           -> min(Cbar_K, y + C_1)
double d_opt(const SystemConfig& cfg, const std::vector<double>& gains);

// Three-branch simplification valid only for y = m*n:
//   j <= k   : C_j
//   j == k+1 : min(C_{k+1}, mn + C_1)
//   j >  k+1 : mn + C_1
// with k the largest index such that C_k <= mn (ties count toward k).
// Must agree with d_opt at K = j, y = mn.
double d_opt_piecewise_ymn(const SystemConfig& cfg,
                           const std::vector<double>& gains, int levels);

struct SweepSpec {
    int user = 0;                // 0-based index of the swept coordinate
    std::vector<double> fixed_gains; // entry at `user` is ignored
};

struct DmtCurve {
    SystemConfig config;
    int swept_user = 0;
    std::vector<double> fixed_gains;
    std::vector<std::pair<double, double>> samples; // (r, d), r strictly increasing
    std::vector<double> breakpoints;                // slope changes of d(r)
};

// Largest w such that setting gains[user] = w keeps every subset condition
// strict; throws if the fixed coordinates are already infeasible.
double sweep_upper_bound(const SystemConfig& cfg, const SweepSpec& sweep);

// Samples d_opt along one gain coordinate on [0, hi) with `resolution`
// equidistant points (the last one grid-step inside the boundary), then
// locates the slope-change points of the piecewise-linear curve.
DmtCurve sample_curve(const SystemConfig& cfg, const SweepSpec& sweep,
                      int resolution);

struct IdentityCheck {
    std::string name;
    double expected = 0.0;
    double actual = 0.0;
    double difference = 0.0;
    bool pass = false;
};

struct ClosedFormReport {
    std::vector<IdentityCheck> checks;
    bool all_pass = true;
};

// Evaluates both recursions at r = 0 against their closed forms:
// C_K(0) = sum_{t=1..K} (mn)^t and Cbar_K(0) = mn for K = 1,
// mn*(1+mn) for K > 1 (the latter requires y = mn).
ClosedFormReport verify_closed_forms(const SystemConfig& cfg);

} // namespace macdmt

#endif
