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

#include "mbdelay/stacking.hpp"
#include "mbdelay/types.hpp"

namespace mbdelay
{
    /// Signal subspace estimate of a stacked data matrix.
    struct SubspaceEstimate
    {
        CMat basis;            ///< LP x K orthonormal signal basis
        RVec singular_values;  ///< Singular values, descending (empty if not requested)
        RVec signal_powers;    ///< K largest squared singular values divided by the column count
        int k_order = 0;
        double noise_power = 0.0; ///< Mean of the discarded squared singular values divided by the column count
        Eigen::Index column_count = 0;
        Eigen::Index structural_rank = 0; ///< Number of singular values that can be non-zero
    };

    struct SvdOptions
    {
        /// Also return the full singular value spectrum (needed for model order selection).
        bool all_singular_values = true;
        /// Matrices whose smaller dimension exceeds this size are decomposed through their Gram matrix.
        Eigen::Index direct_limit = 160;
    };

    /// Truncated SVD of stacked data.
    ///
    /// Small matrices use a direct SVD. Larger ones are decomposed through the row Gram matrix attached by the
    /// stacking stage. Noise-reduced data is decomposed in its LK-dimensional coefficient space; its structural rank
    /// is LK, which is also the count used when averaging the discarded singular values.
    SubspaceEstimate truncated_svd(const StackedData &data, int k_order, const SvdOptions &opts = {});

    /// Model order from the modified MDL criterion on squared singular values.
    ///
    /// With D = q_cols - 1 and lambda the squared singular values, returns the k in [0, D - 1] minimising
    /// -(D - k) D log(g_k / a_k) + k (2D - k) log(D) / 4 + k, where g_k and a_k are the geometric and arithmetic
    /// means of lambda_{k+1..D}.
    int estimate_model_order_mdl(const RVec &singular_values, int q_cols);

    /// Subspace weights W = Lambda_s - sigma^2 I, floored at floor_ratio * max(Lambda_s).
    RVec weighting_matrix(const SubspaceEstimate &est, double floor_ratio = 1e-3);
}
