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

#include "mbdelay/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mbdelay
{
    void MultipathChannel::validate() const
    {
        if (delays.empty())
            throw std::invalid_argument("MultipathChannel: at least one path is required");
        if (amplitudes.size() != delays.size() || avg_powers.size() != delays.size())
            throw std::invalid_argument("MultipathChannel: delays, amplitudes and avg_powers must have equal length");
        for (std::size_t k = 0; k < delays.size(); ++k)
        {
            if (!std::isfinite(delays[k]) || delays[k] < 0.0)
                throw std::invalid_argument("MultipathChannel: delays must be finite and non-negative");
            if (k > 0 && delays[k] <= delays[k - 1])
                throw std::invalid_argument("MultipathChannel: delays must be strictly increasing");
            if (!(avg_powers[k] > 0.0))
                throw std::invalid_argument("MultipathChannel: average powers must be positive");
        }
    }

    MultipathChannel MultipathChannel::from_profile(const std::vector<double> &delays_s, const std::vector<double> &powers_db)
    {
        if (delays_s.size() != powers_db.size())
            throw std::invalid_argument("MultipathChannel: delay and power lists differ in length");
        MultipathChannel ch;
        ch.delays = delays_s;
        for (double p_db : powers_db)
        {
            const double p = std::pow(10.0, p_db / 10.0);
            ch.avg_powers.push_back(p);
            ch.amplitudes.emplace_back(std::sqrt(p), 0.0);
        }
        ch.validate();
        return ch;
    }

    long BandPlan::offset_gcd() const
    {
        long g = 0;
        for (long o : band_offsets)
            g = std::gcd(g, o);
        return g;
    }

    double BandPlan::wrap_delay(double delay) const
    {
        const double period = delay_period();
        double r = std::fmod(delay, period);
        if (r < 0.0)
            r += period;
        return r < period ? r : 0.0;
    }

    void BandPlan::validate() const
    {
        if (!(subcarrier_spacing > 0.0) || !std::isfinite(subcarrier_spacing))
            throw std::invalid_argument("BandPlan: subcarrier spacing must be positive");
        if (n_subcarriers < 2 || n_subcarriers % 2 != 0)
            throw std::invalid_argument("BandPlan: number of subcarriers must be even and at least 2");
        if (band_offsets.empty())
            throw std::invalid_argument("BandPlan: at least one band is required");
        if (band_offsets.front() != 0)
            throw std::invalid_argument("BandPlan: the first band offset must be 0");
        for (std::size_t i = 1; i < band_offsets.size(); ++i)
            if (band_offsets[i] <= band_offsets[i - 1])
                throw std::invalid_argument("BandPlan: band offsets must be strictly increasing");
    }

    BandPlan BandPlan::from_center_frequencies(const std::vector<double> &centers_hz, double spacing_hz, int n_subcarriers)
    {
        if (centers_hz.empty())
            throw std::invalid_argument("BandPlan: at least one center frequency is required");
        BandPlan plan;
        plan.subcarrier_spacing = spacing_hz;
        plan.n_subcarriers = n_subcarriers;
        plan.base_frequency = centers_hz.front();
        plan.band_offsets.clear();
        for (double f : centers_hz)
        {
            const double n = (f - centers_hz.front()) / spacing_hz;
            const double r = std::round(n);
            if (std::abs(n - r) > 1e-6)
                throw std::invalid_argument("BandPlan: center frequency " + std::to_string(f) +
                                            " Hz is not on the subcarrier grid");
            plan.band_offsets.push_back(static_cast<long>(r));
        }
        plan.validate();
        return plan;
    }

    void MultibandCsi::validate() const
    {
        band_plan.validate();
        if (snapshots.empty())
            throw std::invalid_argument("MultibandCsi: at least one snapshot is required");
        for (const auto &s : snapshots)
        {
            if (s.per_band.size() != band_plan.n_bands())
                throw std::invalid_argument("MultibandCsi: snapshot " + std::to_string(s.snapshot_id) +
                                            " does not have one vector per band");
            for (const auto &h : s.per_band)
                if (h.size() != band_plan.n_subcarriers)
                    throw std::invalid_argument("MultibandCsi: snapshot " + std::to_string(s.snapshot_id) +
                                                " has a band vector of wrong length");
        }
    }

    CVec MultibandCsi::stacked(std::size_t m) const
    {
        const Eigen::Index n = band_plan.n_subcarriers;
        CVec h(n * static_cast<Eigen::Index>(band_plan.n_bands()));
        for (std::size_t i = 0; i < band_plan.n_bands(); ++i)
            h.segment(static_cast<Eigen::Index>(i) * n, n) = snapshots.at(m).per_band.at(i);
        return h;
    }

    OfdmConfig OfdmConfig::defaults_for(const BandPlan &plan)
    {
        OfdmConfig cfg;
        cfg.symbol_duration = 1.0 / plan.subcarrier_spacing;
        cfg.cyclic_prefix = 0.25 * cfg.symbol_duration;
        cfg.training_symbols = CVec::Ones(plan.n_subcarriers);
        return cfg;
    }

    void OfdmConfig::validate(const BandPlan &plan, double max_delay) const
    {
        if (training_symbols.size() != plan.n_subcarriers)
            throw std::invalid_argument("OfdmConfig: training symbol count differs from N");
        if ((training_symbols.array().abs() <= 0.0).any())
            throw std::invalid_argument("OfdmConfig: training symbols must be non-zero");
        if (cyclic_prefix < max_delay)
            throw std::invalid_argument("OfdmConfig: cyclic prefix is shorter than the maximum path delay");
    }

    VandermondeFactors subcarrier_phases(const MultipathChannel &channel, const BandPlan &plan)
    {
        channel.validate();
        plan.validate();
        const Eigen::Index n = plan.n_subcarriers;
        const Eigen::Index k_paths = static_cast<Eigen::Index>(channel.size());
        const double w = plan.omega_sc();

        VandermondeFactors f;
        f.vandermonde.resize(n, k_paths);
        f.phi_diag.resize(k_paths);
        for (Eigen::Index k = 0; k < k_paths; ++k)
        {
            const double phi = w * channel.delays[static_cast<std::size_t>(k)];
            f.phi_diag(k) = std::polar(1.0, -phi);
            for (Eigen::Index r = 0; r < n; ++r)
                f.vandermonde(r, k) = std::polar(1.0, -phi * static_cast<double>(r));
        }
        return f;
    }

    CMat build_full_steering(const std::vector<double> &delays, const BandPlan &plan)
    {
        plan.validate();
        const Eigen::Index n = plan.n_subcarriers;
        const Eigen::Index l_bands = static_cast<Eigen::Index>(plan.n_bands());
        const double w = plan.omega_sc();
        CMat a(n * l_bands, static_cast<Eigen::Index>(delays.size()));
        for (Eigen::Index k = 0; k < a.cols(); ++k)
        {
            const double phi = w * delays[static_cast<std::size_t>(k)];
            for (Eigen::Index i = 0; i < l_bands; ++i)
            {
                const double o = static_cast<double>(plan.band_offsets[static_cast<std::size_t>(i)]);
                for (Eigen::Index r = 0; r < n; ++r)
                    a(i * n + r, k) = std::polar(1.0, -phi * (o + static_cast<double>(r)));
            }
        }
        return a;
    }

    MultibandCsi generate_csi(const MultipathChannel &channel, const BandPlan &plan, int m_snapshots, double snr_db,
                              bool redraw_amplitudes, CounterRng &rng)
    {
        channel.validate();
        plan.validate();
        if (m_snapshots < 1)
            throw std::invalid_argument("generate_csi: at least one snapshot is required");

        const CMat a = build_full_steering(channel.delays, plan);
        const Eigen::Index n = plan.n_subcarriers;
        const bool noisy = std::isfinite(snr_db);
        const double noise_var = noisy ? channel.avg_powers.front() * std::pow(10.0, -snr_db / 10.0) : 0.0;

        MultibandCsi csi;
        csi.band_plan = plan;
        csi.noise_variance = noise_var;
        csi.snapshots.reserve(static_cast<std::size_t>(m_snapshots));

        for (int m = 0; m < m_snapshots; ++m)
        {
            CVec alpha(static_cast<Eigen::Index>(channel.size()));
            for (std::size_t k = 0; k < channel.size(); ++k)
                alpha(static_cast<Eigen::Index>(k)) =
                    redraw_amplitudes ? rng.complex_normal(channel.avg_powers[k]) : channel.amplitudes[k];

            CVec h = a * alpha;
            if (noisy)
                for (Eigen::Index r = 0; r < h.size(); ++r)
                    h(r) += rng.complex_normal(noise_var);

            CsiSnapshot snap;
            snap.snapshot_id = m;
            for (std::size_t i = 0; i < plan.n_bands(); ++i)
                snap.per_band.push_back(h.segment(static_cast<Eigen::Index>(i) * n, n));
            csi.snapshots.push_back(std::move(snap));
        }
        return csi;
    }

    MultibandCsi generate_csi(const MultipathChannel &channel, const BandPlan &plan, int m_snapshots, double snr_db,
                              bool redraw_amplitudes, std::uint64_t rng_seed)
    {
        CounterRng rng(rng_seed);
        return generate_csi(channel, plan, m_snapshots, snr_db, redraw_amplitudes, rng);
    }

    PhaseOffsetResult eliminate_phase_offset(const MultibandCsi &csi_mobile, const MultibandCsi &csi_anchor)
    {
        csi_mobile.validate();
        csi_anchor.validate();
        if (!(csi_mobile.band_plan == csi_anchor.band_plan))
            throw std::invalid_argument("eliminate_phase_offset: mobile and anchor band plans differ");
        if (csi_mobile.n_snapshots() != csi_anchor.n_snapshots())
            throw std::invalid_argument("eliminate_phase_offset: mobile and anchor snapshot counts differ");

        PhaseOffsetResult out;
        out.csi.band_plan = csi_mobile.band_plan;
        for (std::size_t m = 0; m < csi_mobile.n_snapshots(); ++m)
        {
            CsiSnapshot snap;
            snap.snapshot_id = csi_mobile.snapshots[m].snapshot_id;
            std::vector<bool> crossed;
            for (std::size_t i = 0; i < csi_mobile.band_plan.n_bands(); ++i)
            {
                const CVec &hm = csi_mobile.snapshots[m].per_band[i];
                const CVec &ha = csi_anchor.snapshots[m].per_band[i];
                CVec hd(hm.size());
                bool band_crossed = false;
                for (Eigen::Index n = 0; n < hm.size(); ++n)
                {
                    cplx root = std::sqrt(hm(n) * ha(n));
                    // Keep the root on the branch closest to the linear extrapolation of the previous subcarriers,
                    // which follows the response through spectral nulls.
                    if (n == 0)
                    {
                        hd(n) = root;
                        continue;
                    }
                    const cplx pred = n > 1 ? 2.0 * hd(n - 1) - hd(n - 2) : hd(n - 1);
                    if (std::norm(root + pred) < std::norm(root - pred))
                    {
                        root = -root;
                        band_crossed = true;
                    }
                    hd(n) = root;
                }
                snap.per_band.push_back(std::move(hd));
                crossed.push_back(band_crossed);
            }
            out.csi.snapshots.push_back(std::move(snap));
            out.branch_crossed.push_back(std::move(crossed));
        }
        return out;
    }
}
