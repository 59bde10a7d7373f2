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

#include "mbdelay/baselines.hpp"

#include "mbdelay/stacking.hpp"
#include "mbdelay/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mbdelay
{
    namespace
    {
        SubspaceEstimate contiguous_subspace(const MultibandCsi &merged, int k_order, std::optional<int> p_rows)
        {
            StackConfig cfg = StackConfig::defaults_for(merged.band_plan);
            if (p_rows)
                cfg.p_rows = *p_rows;
            cfg.validate(merged.band_plan);
            const int q = cfg.q_cols(merged.band_plan);
            if (k_order < 1 || k_order > cfg.p_rows - 1 || k_order > q * static_cast<int>(merged.n_snapshots()))
                throw std::invalid_argument("baseline: model order " + std::to_string(k_order) +
                                            " exceeds the rank supported by the Hankel stack");
            return truncated_svd(stack_snapshots(merged, cfg), k_order, {.all_singular_values = false});
        }
    }

    void GridSpec::validate() const
    {
        if (!(t_min < t_max) || !(step > 0.0) || !std::isfinite(t_min) || !std::isfinite(t_max))
            throw std::invalid_argument("GridSpec: need t_min < t_max and step > 0");
    }

    std::size_t GridSpec::size() const
    {
        validate();
        return static_cast<std::size_t>(std::floor((t_max - t_min) / step + 1e-9)) + 1;
    }

    MultibandCsi merge_contiguous(const MultibandCsi &csi)
    {
        csi.validate();
        const BandPlan &plan = csi.band_plan;
        for (std::size_t i = 1; i < plan.n_bands(); ++i)
            if (plan.band_offsets[i] - plan.band_offsets[i - 1] != plan.n_subcarriers)
                throw std::invalid_argument("baseline: bands " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                            " are not adjacent; the method needs a contiguous spectrum");
        if (plan.n_bands() == 1)
            return csi;

        MultibandCsi out;
        out.band_plan = plan;
        out.band_plan.n_subcarriers = plan.n_subcarriers * static_cast<int>(plan.n_bands());
        out.band_plan.band_offsets = {0};
        out.noise_variance = csi.noise_variance;
        for (std::size_t m = 0; m < csi.n_snapshots(); ++m)
        {
            CsiSnapshot s;
            s.snapshot_id = csi.snapshots[m].snapshot_id;
            s.per_band.push_back(csi.stacked(m));
            out.snapshots.push_back(std::move(s));
        }
        return out;
    }

    RVec music_spectrum(const MultibandCsi &csi, int k_order, const GridSpec &grid, std::optional<int> p_rows)
    {
        const MultibandCsi merged = merge_contiguous(csi);
        const SubspaceEstimate sub = contiguous_subspace(merged, k_order, p_rows);
        const Eigen::Index P = sub.basis.rows();
        const double w = merged.band_plan.omega_sc();
        const std::size_t n = grid.size();

        RVec spectrum(static_cast<Eigen::Index>(n));
        CVec a(P);
        for (std::size_t g = 0; g < n; ++g)
        {
            const double phi = w * grid.at(g);
            for (Eigen::Index p = 0; p < P; ++p)
                a(p) = std::polar(1.0, -phi * static_cast<double>(p));
            const double noise = static_cast<double>(P) - (sub.basis.adjoint() * a).squaredNorm();
            spectrum(static_cast<Eigen::Index>(g)) = 1.0 / std::max(noise, 1e-300);
        }
        return spectrum;
    }

    std::vector<double> music_delays(const MultibandCsi &csi, int k_order, const GridSpec &grid, std::optional<int> p_rows)
    {
        const RVec s = music_spectrum(csi, k_order, grid, p_rows);
        std::vector<Eigen::Index> peaks;
        for (Eigen::Index g = 1; g + 1 < s.size(); ++g)
            if (s(g) > s(g - 1) && s(g) > s(g + 1))
                peaks.push_back(g);
        if (static_cast<int>(peaks.size()) < k_order)
            throw NumericalError("music_delays: found " + std::to_string(peaks.size()) + " spectral peaks, need " +
                                 std::to_string(k_order));
        std::stable_sort(peaks.begin(), peaks.end(), [&](Eigen::Index a, Eigen::Index b) { return s(a) > s(b); });

        std::vector<double> delays;
        for (Eigen::Index g : peaks)
        {
            const bool separated = std::all_of(delays.begin(), delays.end(), [&](double d) {
                return std::abs(d - grid.at(static_cast<std::size_t>(g))) >= 2.0 * grid.step * (1.0 - 1e-9);
            });
            if (separated)
                delays.push_back(grid.at(static_cast<std::size_t>(g)));
            if (static_cast<int>(delays.size()) == k_order)
                break;
        }
        if (static_cast<int>(delays.size()) < k_order)
            throw NumericalError("music_delays: found " + std::to_string(delays.size()) + " separated peaks, need " +
                                 std::to_string(k_order));
        std::sort(delays.begin(), delays.end());
        return delays;
    }

    std::vector<double> esprit_delays(const MultibandCsi &csi, int k_order, std::optional<int> p_rows)
    {
        const MultibandCsi merged = merge_contiguous(csi);
        const SubspaceEstimate sub = contiguous_subspace(merged, k_order, p_rows);
        const Eigen::Index P = sub.basis.rows();
        const CMat psi = sub.basis.topRows(P - 1).colPivHouseholderQr().solve(sub.basis.bottomRows(P - 1));
        Eigen::ComplexEigenSolver<CMat> es(psi, false);
        if (es.info() != Eigen::Success)
            throw NumericalError("esprit_delays: eigen decomposition of the shift operator failed");
        const double w = merged.band_plan.omega_sc();
        std::vector<double> delays;
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
            delays.push_back(merged.band_plan.wrap_delay(-std::arg(es.eigenvalues()(k)) / w));
        std::sort(delays.begin(), delays.end());
        return delays;
    }
}
