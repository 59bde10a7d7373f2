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

#include "mbdelay/core_model.hpp"
#include "mbdelay/estimator.hpp"
#include "mbdelay/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mbdelay
{
    /// Delay estimator run by the Monte Carlo harness.
    enum class Method
    {
        kMbwde,
        kEsprit,
        kMusic,
    };

    std::string to_string(Method m);
    Method parse_method(const std::string &name);

    /// Monte Carlo scenario: channel, band plan, estimator settings and SNR sweep.
    struct Scenario
    {
        std::string name = "default";
        std::vector<double> delays_ns{3, 5, 10, 16, 22, 28, 33};
        std::vector<double> powers_db{0, -3, -5, -4, -6, -5.5, -7};
        std::vector<double> center_frequencies_hz{6.0e9, 6.12e9, 6.32e9, 6.44e9};
        double subcarrier_spacing_hz = 78.125e3;
        int n_subcarriers = 256;
        int m_snapshots = 12;
        bool redraw_amplitudes = true;
        std::vector<double> snr_db{15, 20, 25};
        int trials = 200;
        std::uint64_t seed = 1;

        Method method = Method::kMbwde;
        std::optional<int> p_rows;
        Variant variant = Variant::kFbNr;
        bool weighted = true;
        WeightRule weight_rule = WeightRule::kOptimal;
        bool k_from_mdl = false;         ///< Estimate K by MDL instead of using a fixed order
        std::optional<int> k_order;      ///< Fixed order, defaults to the true path count
        MdlDimension mdl_dimension = MdlDimension::kMinDimension;
        int lm_iters = 10;
        int multistart = 32;
        double grid_step_ns = 0.005;     ///< MUSIC grid step
        double grid_max_ns = 100.0;      ///< MUSIC grid upper end

        MultipathChannel channel() const;
        BandPlan band_plan() const;
        int fixed_order() const { return k_order.value_or(static_cast<int>(delays_ns.size())); }
        MbwdeOptions estimator_options() const;

        /// Throws std::invalid_argument if any invariant is violated.
        void validate() const;
    };

    /// Results at one SNR point.
    struct SnrPoint
    {
        double snr_db = 0.0;
        double rmse_s = 0.0;              ///< RMSE of the LOS delay over non-diverged trials
        double crb_s = 0.0;               ///< Square root of the CRB of the LOS delay
        int trials = 0;
        int diverged = 0;                 ///< Trials whose estimator raised an error
        std::vector<double> los_errors_s; ///< Per-trial LOS error, NaN for diverged trials
        std::vector<int> k_estimates;     ///< Per-trial path count used by the estimator, 0 if diverged

        bool operator==(const SnrPoint &) const = default;
    };

    struct BenchResult
    {
        std::string scenario;
        std::vector<SnrPoint> points;
        double wall_seconds = 0.0; ///< Elapsed time, the only field that depends on the machine and thread count
    };

    /// Runs `trials` seeded estimations per SNR. Trial t at SNR index s draws its CSI from the stream
    /// CounterRng(seed).split(s).split(t), so the result does not depend on the number of worker threads.
    BenchResult run_monte_carlo(const Scenario &scenario, int threads = 1);

    /// Error of the LOS delay: smallest estimated delay minus the smallest true delay.
    double los_error(const std::vector<double> &estimated, const std::vector<double> &truth);

    struct Quantiles
    {
        double median = 0.0;
        double q80 = 0.0; ///< P90 - P10
        double q95 = 0.0; ///< P97.5 - P2.5
    };

    /// Percentile p in [0, 100] with linear interpolation between order statistics.
    double percentile(std::vector<double> values, double p);

    /// Median and the inter-percentile widths Q80 and Q95. Throws std::invalid_argument on empty input.
    Quantiles error_quantiles(const std::vector<double> &errors);

    using Point2 = std::array<double, 2>;

    /// 2-D position from ranges to at least three anchors: linearised least squares (circle equations minus the
    /// first one) followed by one Gauss-Newton step on sum (||p - a_i|| - d_i)^2.
    Point2 trilaterate(const std::vector<Point2> &anchors, const std::vector<double> &ranges);
}
