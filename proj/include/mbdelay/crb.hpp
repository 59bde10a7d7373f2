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

#include <vector>

namespace mbdelay
{
    /// Parameters of the Cramer-Rao bound for the multiband delay model.
    struct CrbInputs
    {
        std::vector<double> delays; ///< Path delays [s]
        CMat amplitude_cov;         ///< R_alpha = E[alpha alpha^H], Hermitian PSD, K x K
        double noise_variance = 1.0;
        int m_snapshots = 1;
        BandPlan band_plan;

        /// Throws std::invalid_argument if any invariant is violated.
        void validate() const;

        /// Inputs matching generate_csi: R_alpha = diag(avg_powers), noise referenced to the first path.
        static CrbInputs from_channel(const MultipathChannel &channel, const BandPlan &plan, double snr_db, int m_snapshots);
    };

    /// Derivative of the steering matrix columns with respect to the delays (LN x K):
    /// D(r, k) = -j w_sc n_r exp(-j w_sc n_r tau_k), n_r the global subcarrier index.
    CMat steering_derivatives(const std::vector<double> &delays, const BandPlan &plan);

    /// Condition numbers above this mark a Fisher matrix as unreliable.
    inline constexpr double kFimConditionLimit = 1e12;

    struct FimResult
    {
        RMat fim;
        double condition = 0.0;
        bool unreliable = false; ///< Condition number above kFimConditionLimit
    };

    /// F = (2M / sigma^2) Re{ D^H P_A^perp D .* R_alpha^T }.
    /// The transpose keeps the expression valid for correlated amplitudes; it is immaterial for diagonal R_alpha.
    FimResult fim(const CrbInputs &inputs);

    /// The two parts of the Fisher matrix: F = uncoupled - coupling with uncoupled = c Re{D^H D .* R_alpha^T}
    /// and coupling = c Re{D^H P_A D .* R_alpha^T}, c = 2M / sigma^2.
    struct FimPartition
    {
        RMat uncoupled;
        RMat coupling;
        RMat total() const { return uncoupled - coupling; }
    };

    FimPartition fim_partitioned(const CrbInputs &inputs);

    struct CrbResult
    {
        RVec variances; ///< Diagonal of F^-1 [s^2]
        double condition = 0.0;
        bool unreliable = false;

        /// Per-path standard deviation bound [s].
        RVec std_dev() const { return variances.cwiseSqrt(); }
    };

    /// CRB of the delays, the diagonal of F^-1. Throws NumericalError when F is singular.
    CrbResult crb(const CrbInputs &inputs);

    struct DecoupledCrb
    {
        double projector = 0.0;        ///< 1 / (2 M SNR_k b) with b = d_k^H P_A^perp d_k
        double fully_decoupled = 0.0;  ///< Same with b = sum over used subcarriers of (w_sc n)^2, centred indices
    };

    /// Closed-form per-path bound for diagonal R_alpha (path_k is zero-based).
    DecoupledCrb crb_decoupled(const CrbInputs &inputs, int path_k);
}
