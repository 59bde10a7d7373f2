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

#include "mbdelay/subspace.hpp"

#include "linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mbdelay
{
    namespace
    {
        SubspaceEstimate finish(CMat basis, const RVec &squared, int k_order, Eigen::Index cols, Eigen::Index rank,
                                double discarded_energy, bool keep_all)
        {
            SubspaceEstimate est;
            est.basis = std::move(basis);
            est.k_order = k_order;
            est.column_count = cols;
            est.structural_rank = rank;
            const double c = static_cast<double>(cols);
            est.signal_powers = squared.head(k_order) / c;
            const Eigen::Index discarded = rank - k_order;
            est.noise_power = discarded > 0 ? std::max(discarded_energy, 0.0) / (c * static_cast<double>(discarded)) : 0.0;
            if (keep_all)
                est.singular_values = squared.cwiseMax(0.0).cwiseSqrt();
            return est;
        }
    }

    SubspaceEstimate truncated_svd(const StackedData &data, int k_order, const SvdOptions &opts)
    {
        const Eigen::Index rows = data.rows();
        const Eigen::Index cols = data.cols();
        const Eigen::Index min_dim = std::min(rows, cols);
        if (k_order < 1 || k_order > min_dim)
            throw std::invalid_argument("truncated_svd: model order " + std::to_string(k_order) + " is outside [1, " +
                                        std::to_string(min_dim) + "]");

        if (data.block_basis && data.block_coefficients)
        {
            // Noise-reduced data equals (I_L kron U_r) G with orthonormal U_r, so its singular values are those of G
            // and its left singular vectors are the lifted left singular vectors of G.
            const CMat &g = *data.block_coefficients;
            const CMat &u_r = *data.block_basis;
            const Eigen::Index K = u_r.cols();
            Eigen::BDCSVD<CMat> svd(g, Eigen::ComputeThinU);
            const RVec sq = svd.singularValues().array().square().matrix();
            if (k_order > sq.size())
                throw std::invalid_argument("truncated_svd: model order exceeds the noise-reduced rank");
            CMat basis(rows, k_order);
            for (int i = 0; i < data.n_bands; ++i)
                basis.middleRows(static_cast<Eigen::Index>(i) * data.p_rows, data.p_rows).noalias() =
                    u_r * svd.matrixU().block(static_cast<Eigen::Index>(i) * K, 0, K, k_order);
            return finish(std::move(basis), sq, k_order, cols, sq.size(), sq.tail(sq.size() - k_order).sum(),
                          opts.all_singular_values);
        }

        if (min_dim <= opts.direct_limit)
        {
            Eigen::BDCSVD<CMat> svd(data.matrix, Eigen::ComputeThinU);
            const RVec sq = svd.singularValues().array().square().matrix();
            return finish(svd.matrixU().leftCols(k_order), sq, k_order, cols, min_dim,
                          sq.tail(min_dim - k_order).sum(), opts.all_singular_values);
        }

        const CMat gram = data.row_gram ? *data.row_gram : CMat(data.matrix * data.matrix.adjoint());
        const linalg::EigenPairs top = linalg::top_eigenpairs(gram, k_order);
        const double total = gram.diagonal().real().sum();
        RVec sq = top.values;
        if (opts.all_singular_values)
            sq = linalg::eigenvalues_desc(gram).head(min_dim);
        return finish(top.vectors, sq, k_order, cols, min_dim, total - top.values.sum(), opts.all_singular_values);
    }

    int estimate_model_order_mdl(const RVec &singular_values, int q_cols)
    {
        const int d = q_cols - 1;
        if (d < 2)
            throw std::invalid_argument("estimate_model_order_mdl: D = q_cols - 1 must be at least 2");
        if (singular_values.size() < d)
            throw std::invalid_argument("estimate_model_order_mdl: need at least " + std::to_string(d) +
                                        " singular values, got " + std::to_string(singular_values.size()));

        const RVec lambda = singular_values.head(d).array().square().matrix();
        const double dd = static_cast<double>(d);
        int best_k = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < d; ++k)
        {
            const auto tail = lambda.segment(k, d - k).array();
            const double arith = tail.mean();
            double fit = 0.0;
            if (arith > 0.0)
            {
                if ((tail <= 0.0).any())
                    fit = std::numeric_limits<double>::infinity();
                else
                {
                    const double log_geo = tail.log().mean();
                    fit = -(dd - k) * dd * (log_geo - std::log(arith));
                }
            }
            const double penalty = k * (2.0 * dd - k) * std::log(dd) / 4.0 + k;
            const double value = fit + penalty;
            if (value < best)
            {
                best = value;
                best_k = k;
            }
        }
        return best_k;
    }

    RVec weighting_matrix(const SubspaceEstimate &est, double floor_ratio)
    {
        const RVec &lam = est.signal_powers;
        if (lam.size() == 0)
            return lam;
        const double floor = floor_ratio * lam.maxCoeff();
        return (lam.array() - est.noise_power).max(floor).matrix();
    }
}
