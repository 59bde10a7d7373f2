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

#include "mbdelay/bench.hpp"

#include "mbdelay/baselines.hpp"
#include "mbdelay/crb.hpp"
#include "mbdelay/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

namespace mbdelay
{
    namespace
    {
        struct TrialOutcome
        {
            double los_error = std::numeric_limits<double>::quiet_NaN();
            int k_used = 0;
            std::exception_ptr error; // Set for errors other than numerical failures
        };

        TrialOutcome run_trial(const Scenario &sc, const MultipathChannel &channel, const BandPlan &plan,
                               const MbwdeOptions &opts, double snr_db, CounterRng rng)
        {
            TrialOutcome out;
            try
            {
                const MultibandCsi csi = generate_csi(channel, plan, sc.m_snapshots, snr_db, sc.redraw_amplitudes, rng);
                std::vector<double> delays;
                switch (sc.method)
                {
                case Method::kMbwde:
                {
                    const DelayEstimate est = mbwde(csi, opts);
                    delays = est.delays;
                    out.k_used = est.k_order;
                    break;
                }
                case Method::kEsprit:
                    delays = esprit_delays(csi, sc.fixed_order(), sc.p_rows);
                    out.k_used = sc.fixed_order();
                    break;
                case Method::kMusic:
                {
                    const GridSpec grid{0.0, sc.grid_max_ns * 1e-9, sc.grid_step_ns * 1e-9};
                    delays = music_delays(csi, sc.fixed_order(), grid, sc.p_rows);
                    out.k_used = sc.fixed_order();
                    break;
                }
                }
                out.los_error = los_error(delays, channel.delays);
            }
            catch (const NumericalError &)
            {
                out.k_used = 0;
                out.los_error = std::numeric_limits<double>::quiet_NaN();
            }
            return out;
        }
    }

    std::string to_string(Method m)
    {
        switch (m)
        {
        case Method::kMbwde:
            return "mbwde";
        case Method::kEsprit:
            return "esprit";
        case Method::kMusic:
            return "music";
        }
        return "unknown";
    }

    Method parse_method(const std::string &name)
    {
        if (name == "mbwde")
            return Method::kMbwde;
        if (name == "esprit")
            return Method::kEsprit;
        if (name == "music")
            return Method::kMusic;
        throw std::invalid_argument("unknown method '" + name + "', expected mbwde, esprit or music");
    }

    MultipathChannel Scenario::channel() const
    {
        std::vector<double> d;
        for (double v : delays_ns)
            d.push_back(v * 1e-9);
        return MultipathChannel::from_profile(d, powers_db);
    }

    BandPlan Scenario::band_plan() const
    {
        return BandPlan::from_center_frequencies(center_frequencies_hz, subcarrier_spacing_hz, n_subcarriers);
    }

    MbwdeOptions Scenario::estimator_options() const
    {
        MbwdeOptions o;
        o.p_rows = p_rows;
        if (!k_from_mdl)
            o.k_order = fixed_order();
        o.variant = variant;
        o.weighted = weighted;
        o.weight_rule = weight_rule;
        o.mdl_dimension = mdl_dimension;
        o.lm.max_iters = lm_iters;
        o.multistart = multistart;
        o.seed = seed;
        return o;
    }

    void Scenario::validate() const
    {
        if (trials < 1)
            throw std::invalid_argument("Scenario: trials must be at least 1");
        if (snr_db.empty())
            throw std::invalid_argument("Scenario: the SNR list must not be empty");
        if (m_snapshots < 1)
            throw std::invalid_argument("Scenario: snapshots must be at least 1");
        if (lm_iters < 0 || multistart < 1)
            throw std::invalid_argument("Scenario: lm_iters must be >= 0 and multistart >= 1");
        if (k_order && *k_order < 1)
            throw std::invalid_argument("Scenario: k_order must be at least 1");
        if (!(grid_step_ns > 0.0) || !(grid_max_ns > 0.0))
            throw std::invalid_argument("Scenario: MUSIC grid step and extent must be positive");
        channel().validate();
        band_plan().validate();
    }

    double los_error(const std::vector<double> &estimated, const std::vector<double> &truth)
    {
        if (estimated.empty() || truth.empty())
            throw std::invalid_argument("los_error: empty delay list");
        return *std::min_element(estimated.begin(), estimated.end()) - *std::min_element(truth.begin(), truth.end());
    }

    BenchResult run_monte_carlo(const Scenario &scenario, int threads)
    {
        scenario.validate();
        const auto t0 = std::chrono::steady_clock::now();
        const MultipathChannel channel = scenario.channel();
        const BandPlan plan = scenario.band_plan();
        const MbwdeOptions opts = scenario.estimator_options();
        const CounterRng root(scenario.seed);

        const std::size_t n_snr = scenario.snr_db.size();
        const std::size_t n_trials = static_cast<std::size_t>(scenario.trials);
        std::vector<TrialOutcome> outcomes(n_snr * n_trials);
        std::atomic<std::size_t> next{0};

        auto worker = [&]() {
            for (std::size_t job = next++; job < outcomes.size(); job = next++)
            {
                const std::size_t s = job / n_trials;
                const std::size_t t = job % n_trials;
                try
                {
                    outcomes[job] = run_trial(scenario, channel, plan, opts, scenario.snr_db[s], root.split(s).split(t));
                }
                catch (...)
                {
                    outcomes[job].error = std::current_exception();
                }
            }
        };
        const int n_workers = std::max(1, std::min<int>(threads, static_cast<int>(outcomes.size())));
        {
            std::vector<std::jthread> pool;
            for (int w = 1; w < n_workers; ++w)
                pool.emplace_back(worker);
            worker();
        }

        for (const TrialOutcome &o : outcomes)
            if (o.error)
                std::rethrow_exception(o.error);

        BenchResult result;
        result.scenario = scenario.name;
        for (std::size_t s = 0; s < n_snr; ++s)
        {
            SnrPoint pt;
            pt.snr_db = scenario.snr_db[s];
            pt.trials = scenario.trials;
            double sum_sq = 0.0;
            int used = 0;
            for (std::size_t t = 0; t < n_trials; ++t)
            {
                const TrialOutcome &o = outcomes[s * n_trials + t];
                pt.los_errors_s.push_back(o.los_error);
                pt.k_estimates.push_back(o.k_used);
                if (std::isnan(o.los_error))
                    ++pt.diverged;
                else
                {
                    sum_sq += o.los_error * o.los_error;
                    ++used;
                }
            }
            pt.rmse_s = used > 0 ? std::sqrt(sum_sq / used) : std::numeric_limits<double>::quiet_NaN();
            pt.crb_s = std::sqrt(crb(CrbInputs::from_channel(channel, plan, pt.snr_db, scenario.m_snapshots)).variances(0));
            result.points.push_back(std::move(pt));
        }
        result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    }

    double percentile(std::vector<double> values, double p)
    {
        if (values.empty())
            throw std::invalid_argument("percentile: empty input");
        if (!(p >= 0.0 && p <= 100.0))
            throw std::invalid_argument("percentile: p must be in [0, 100]");
        std::sort(values.begin(), values.end());
        const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] + frac * (values[hi] - values[lo]);
    }

    Quantiles error_quantiles(const std::vector<double> &errors)
    {
        if (errors.empty())
            throw std::invalid_argument("error_quantiles: empty input");
        Quantiles q;
        q.median = percentile(errors, 50.0);
        q.q80 = percentile(errors, 90.0) - percentile(errors, 10.0);
        q.q95 = percentile(errors, 97.5) - percentile(errors, 2.5);
        return q;
    }

    Point2 trilaterate(const std::vector<Point2> &anchors, const std::vector<double> &ranges)
    {
        if (anchors.size() < 3)
            throw std::invalid_argument("trilaterate: at least three anchors are required");
        if (ranges.size() != anchors.size())
            throw std::invalid_argument("trilaterate: one range per anchor is required");
        for (double d : ranges)
            if (!(d >= 0.0) || !std::isfinite(d))
                throw std::invalid_argument("trilaterate: ranges must be finite and non-negative");

        const std::size_t n = anchors.size();
        const auto &a0 = anchors.front();
        RMat h(static_cast<Eigen::Index>(n - 1), 2);
        RVec b(static_cast<Eigen::Index>(n - 1));
        for (std::size_t i = 1; i < n; ++i)
        {
            const auto &ai = anchors[i];
            const Eigen::Index r = static_cast<Eigen::Index>(i - 1);
            h(r, 0) = 2.0 * (ai[0] - a0[0]);
            h(r, 1) = 2.0 * (ai[1] - a0[1]);
            b(r) = ranges[0] * ranges[0] - ranges[i] * ranges[i] + ai[0] * ai[0] + ai[1] * ai[1] - a0[0] * a0[0] -
                   a0[1] * a0[1];
        }
        Eigen::JacobiSVD<RMat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const RVec sv = svd.singularValues();
        if (sv.size() < 2 || !(sv(1) > 1e-9 * sv(0)))
            throw std::invalid_argument("trilaterate: anchors are collinear");
        RVec p = svd.solve(b);

        // One Gauss-Newton step on the range residuals; anchors at the current estimate carry no direction.
        RMat jac(static_cast<Eigen::Index>(n), 2);
        RVec res(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
        {
            const Eigen::Index r = static_cast<Eigen::Index>(i);
            const double dx = p(0) - anchors[i][0];
            const double dy = p(1) - anchors[i][1];
            const double dist = std::hypot(dx, dy);
            if (dist > 1e-12)
            {
                jac(r, 0) = dx / dist;
                jac(r, 1) = dy / dist;
                res(r) = dist - ranges[i];
            }
            else
            {
                jac.row(r).setZero();
                res(r) = 0.0;
            }
        }
        const RMat jtj = jac.transpose() * jac;
        if (std::abs(jtj.determinant()) > 1e-12)
            p -= jtj.ldlt().solve(jac.transpose() * res);
        return {p(0), p(1)};
    }
}
