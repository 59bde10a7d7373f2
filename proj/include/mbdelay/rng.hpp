// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The mbdelay Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <complex>
#include <cmath>
#include <cstdint>
#include <random>

namespace mbdelay
{
    /// Counter-based pseudo random generator built on the splitmix64 finalizer.
    ///
    /// The output for draw number i is a pure function of (key, i), so a generator can be split into
    /// statistically independent child streams by deriving a new key. Monte Carlo trials use one child
    /// stream per trial index, which keeps results identical regardless of how trials are scheduled
    /// across worker threads. Satisfies the UniformRandomBitGenerator concept.
    class CounterRng
    {
    public:
        using result_type = std::uint64_t;

        explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
            : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL)))
        {
        }

        static constexpr result_type min() noexcept { return 0; }
        static constexpr result_type max() noexcept { return ~result_type(0); }

        result_type operator()() noexcept
        {
            ++counter_;
            return mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
        }

        /// Child generator keyed on this generator's key and the given stream id; the parent is not advanced.
        CounterRng split(std::uint64_t stream) const noexcept
        {
            CounterRng child;
            child.key_ = mix(key_ ^ mix(stream ^ 0xD1B54A32D192ED03ULL));
            return child;
        }

        /// Uniform double in [0, 1) with 53 random bits.
        double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

        /// Circularly-symmetric complex Gaussian sample with E|z|^2 = variance.
        std::complex<double> complex_normal(double variance)
        {
            std::normal_distribution<double> nd(0.0, 1.0);
            const double s = std::sqrt(0.5 * variance);
            const double re = nd(*this);
            const double im = nd(*this);
            return {s * re, s * im};
        }

    private:
        static constexpr std::uint64_t mix(std::uint64_t z) noexcept
        {
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            return z ^ (z >> 31);
        }

        std::uint64_t key_ = 0;
        std::uint64_t counter_ = 0;
    };
}
