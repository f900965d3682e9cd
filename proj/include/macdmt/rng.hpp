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

#ifndef MACDMT_RNG_HPP
#define MACDMT_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>

namespace macdmt {

// SplitMix64 (Steele/Lea/Flood; Vigna's fixed-increment variant). The state
// walk is a plain counter, so substreams derived with derive_stream are
// disjoint windows of one global sequence and trial results do not depend
// on how work is batched.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

// Child-stream seed: the `id`-th output of the SplitMix64 sequence rooted at
// `seed`. Used as (run seed) -> (phase) -> (trial index) so every trial owns
// an independent stream regardless of batch partitioning.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t id) {
    SplitMix64 g(seed + id * 0x9e3779b97f4a7c15ull);
    return g();
}

// Standard circularly-symmetric complex Gaussian, E|z|^2 = 1, via the
// trigonometric Box-Muller transform (fixed two-draw consumption).
inline std::complex<double> complex_gaussian(SplitMix64& rng) {
    const double u1 = 1.0 - rng.next_double(); // (0, 1]
    const double u2 = rng.next_double();
    const double radius = std::sqrt(-std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

} // namespace macdmt

#endif
