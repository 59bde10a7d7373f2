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
#include "mbdelay/types.hpp"

#include <optional>
#include <vector>

namespace mbdelay
{
    /// Hankel stacking parameters.
    struct StackConfig
    {
        int p_rows = 0;      ///< Hankel rows per band P, 1 <= P <= N
        bool use_fb = false; ///< Forward-backward extension across bands (centro-symmetric plans only)
        bool use_nr = false; ///< Noise-reduction projection onto the common per-band signal span

        /// Optional per-band noise variances. When given, band blocks are scaled by 1 / sqrt(var_i) relative to
        /// the mean so that unequal noise levels are whitened before the subspace is estimated.
        std::vector<double> band_noise_variances;

        int q_cols(const BandPlan &plan) const { return plan.n_subcarriers - p_rows + 1; }

        /// Default P = ceil(2N / 3), no extensions.
        static StackConfig defaults_for(const BandPlan &plan);

        /// Throws std::invalid_argument when P is out of range or the noise variance list does not match L.
        void validate(const BandPlan &plan) const;

        /// Throws std::invalid_argument when the stacked matrix cannot have rank K for the given snapshot count.
        void check_rank(const BandPlan &plan, int k_order, int m_snapshots) const;

        /// Per-band block scale factors, all ones when no noise variances are configured.
        std::vector<double> block_scales(const BandPlan &plan) const;
    };

    /// Bit flags recording which extensions produced a StackedData matrix.
    enum StackProvenance : unsigned
    {
        kMultiSnapshot = 1u,
        kForwardBackward = 2u,
        kNoiseReduced = 4u,
    };

    /// Block-Hankel data matrix with L row blocks of P rows.
    ///
    /// Besides the matrix itself the structured builders attach cheap by-products that the subspace stage can use
    /// instead of a dense decomposition of the full matrix: the row Gram matrix computed with a Hankel recurrence,
    /// and, after the noise-reduction projection, the per-band basis together with the coefficient matrix of the
    /// projected data in that basis.
    struct StackedData
    {
        CMat matrix;
        int n_bands = 1;
        int p_rows = 1;
        unsigned provenance = 0;
        BandPlan band_plan;
        std::vector<double> block_scales;         ///< Scale applied to each band block
        std::optional<CMat> row_gram;             ///< matrix * matrix^H
        std::optional<CMat> block_basis;          ///< P x K orthonormal basis U_r shared by all band blocks
        std::optional<CMat> block_coefficients;   ///< LK x C with matrix = (I_L kron U_r) * coefficients

        Eigen::Index rows() const { return matrix.rows(); }
        Eigen::Index cols() const { return matrix.cols(); }
        auto block(int band) const { return matrix.middleRows(static_cast<Eigen::Index>(band) * p_rows, p_rows); }
    };

    /// P x Q Hankel matrix H(p, q) = h(p + q) with Q = N - P + 1.
    CMat hankel(const CVec &h, int p_rows);

    /// Inverse of hankel by averaging along anti-diagonals.
    CVec dehankel(const CMat &h);

    /// Vertical stack of the L per-band Hankel matrices of one snapshot (LP x Q).
    StackedData stack_bands(const CsiSnapshot &snapshot, const BandPlan &plan, const StackConfig &cfg);

    /// Horizontal concatenation of stack_bands over all snapshots (LP x QM).
    StackedData stack_snapshots(const MultibandCsi &csi, const StackConfig &cfg);

    /// True iff the set of used subcarrier indices is invariant under reflection about its center.
    bool is_centro_symmetric(const BandPlan &plan);

    /// Forward-backward extension [H, Pi conj(H)] with Pi the LP x LP exchange matrix.
    /// Throws std::invalid_argument for band plans that are not centro-symmetric.
    StackedData fb_extend(const StackedData &stacked);

    /// Noise-reduction projection.
    ///
    /// The per-band forward-backward stacks [H_i, J conj(H_i)] of all bands are concatenated horizontally and their
    /// K dominant left singular vectors U_r are computed. Every band block of the (optionally FB-extended) stacked
    /// data is then projected onto span(U_r). The result carries U_r and the coefficient matrix so that its SVD can
    /// be computed in the small LK-dimensional coordinate space.
    StackedData noise_reduce(const MultibandCsi &csi, const StackConfig &cfg, int k_order);

    /// Stacked data for an estimator variant: multi-snapshot stack, then FB and NR according to cfg.
    StackedData build_stacked_data(const MultibandCsi &csi, const StackConfig &cfg, int k_order);
}
