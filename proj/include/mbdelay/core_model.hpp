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

#include "mbdelay/rng.hpp"
#include "mbdelay/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mbdelay
{
    /// Discrete multipath channel: K propagation paths with delays, complex gains and average powers.
    struct MultipathChannel
    {
        std::vector<double> delays;     ///< Path delays [s], strictly increasing, all >= 0
        std::vector<cplx> amplitudes;   ///< Complex path gains used when amplitudes are not redrawn
        std::vector<double> avg_powers; ///< Average path powers (linear) used when amplitudes are redrawn

        std::size_t size() const { return delays.size(); }

        /// Throws std::invalid_argument if any invariant is violated.
        void validate() const;

        /// Builds a channel from delays [s] and average powers [dB]; fixed amplitudes are sqrt(power).
        static MultipathChannel from_profile(const std::vector<double> &delays_s, const std::vector<double> &powers_db);
    };

    /// Placement of L OFDM bands of N subcarriers each on a common subcarrier grid.
    struct BandPlan
    {
        double subcarrier_spacing = 78.125e3; ///< Subcarrier spacing [Hz]
        int n_subcarriers = 256;              ///< Subcarriers per band N (even)
        std::vector<long> band_offsets{0};    ///< Band start offsets in subcarrier units, first entry 0
        double base_frequency = 0.0;          ///< Carrier of band 0 [Hz], informational only

        std::size_t n_bands() const { return band_offsets.size(); }
        double bandwidth() const { return n_subcarriers * subcarrier_spacing; }
        double omega_sc() const { return 2.0 * kPi * subcarrier_spacing; }

        /// Delay period 1 / spacing [s]; the CSI of a path is unchanged when its delay moves by a whole period.
        double delay_period() const { return 1.0 / subcarrier_spacing; }

        /// Maps a delay [s] into [0, delay_period()). Estimators report delays in this range, so a path estimated
        /// slightly below zero delay comes out just below one period.
        double wrap_delay(double delay) const;

        /// Global subcarrier index of subcarrier n in band i relative to band 0's first subcarrier.
        long global_index(std::size_t band, long n) const { return band_offsets[band] + n; }

        /// Smallest non-zero band offset spacing; delays are ambiguous modulo 1 / (gcd * spacing).
        long offset_gcd() const;

        /// Throws std::invalid_argument if any invariant is violated.
        void validate() const;

        /// Band plan from band center frequencies [Hz]. Offsets are (f_i - f_0) / spacing and must be integral.
        static BandPlan from_center_frequencies(const std::vector<double> &centers_hz, double spacing_hz, int n_subcarriers);

        bool operator==(const BandPlan &) const = default;
    };

    /// One CSI measurement: L per-band vectors of N complex channel samples.
    struct CsiSnapshot
    {
        std::vector<CVec> per_band;
        int snapshot_id = 0;
    };

    /// M snapshots of multiband CSI collected on a common band plan.
    struct MultibandCsi
    {
        std::vector<CsiSnapshot> snapshots;
        BandPlan band_plan;
        std::optional<double> noise_variance; ///< Known per-entry noise variance, if available

        std::size_t n_snapshots() const { return snapshots.size(); }

        /// Throws std::invalid_argument if a snapshot does not match the band plan.
        void validate() const;

        /// Snapshot m with all bands stacked into one LN vector.
        CVec stacked(std::size_t m) const;
    };

    /// OFDM training signal numerology.
    struct OfdmConfig
    {
        double symbol_duration = 0.0; ///< T_sym = N / B [s]
        double cyclic_prefix = 0.0;   ///< T_cp [s]
        CVec training_symbols;        ///< Known training symbols, length N

        /// Unit-magnitude training symbols and a cyclic prefix of a quarter symbol.
        static OfdmConfig defaults_for(const BandPlan &plan);

        /// Throws std::invalid_argument on zero symbols or a cyclic prefix shorter than max_delay.
        void validate(const BandPlan &plan, double max_delay) const;
    };

    /// Vandermonde matrix M (N x K) and the diagonal of the per-subcarrier phase rotation Phi.
    struct VandermondeFactors
    {
        CMat vandermonde;
        CVec phi_diag;
    };

    /// Per-subcarrier phase factors of the channel on one band:
    /// M(n, k) = exp(-j n w_sc tau_k) and Phi = diag(exp(-j w_sc tau_k)).
    VandermondeFactors subcarrier_phases(const MultipathChannel &channel, const BandPlan &plan);

    /// Steering matrix A (LN x K): band blocks M * Phi^{n_i} stacked vertically.
    CMat build_full_steering(const std::vector<double> &delays, const BandPlan &plan);

    /// Synthetic multiband CSI h_i = M Phi^{n_i} alpha + q_i.
    ///
    /// The noise variance is chosen so that the first path has the requested SNR, i.e.
    /// sigma_q^2 = avg_powers[0] * 10^(-snr_db / 10). An infinite snr_db disables noise. With redraw_amplitudes
    /// the path gains are drawn per snapshot from a circular complex Gaussian with the average powers,
    /// otherwise channel.amplitudes is reused for every snapshot.
    MultibandCsi generate_csi(const MultipathChannel &channel, const BandPlan &plan, int m_snapshots, double snr_db,
                              bool redraw_amplitudes, CounterRng &rng);

    /// Convenience overload seeding a fresh CounterRng.
    MultibandCsi generate_csi(const MultipathChannel &channel, const BandPlan &plan, int m_snapshots, double snr_db,
                              bool redraw_amplitudes, std::uint64_t rng_seed);

    /// Result of the two-way phase offset elimination.
    struct PhaseOffsetResult
    {
        MultibandCsi csi; ///< Elementwise square root, equal to +h_i or -h_i per band
        /// [snapshot][band]: true when the principal root changed branch inside the band and the
        /// continuous root was selected instead. The overall sign of every band stays unresolved.
        std::vector<std::vector<bool>> branch_crossed;
    };

    /// Removes the carrier phase offset from reciprocal mobile/anchor CSI pairs by taking the elementwise square
    /// root of h_M .* h_A. The root starts on the principal branch at subcarrier 0 and follows the branch closest
    /// to the linear extrapolation of the two previous subcarriers, so each band equals the true CSI up to one sign.
    PhaseOffsetResult eliminate_phase_offset(const MultibandCsi &csi_mobile, const MultibandCsi &csi_anchor);
}
