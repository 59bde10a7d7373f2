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

#include "mbdelay/stacking.hpp"

#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mbdelay
{
    namespace
    {
        // Adds scale * sum_q a(p + q) conj(b(p' + q)) for p, p' < P to out, i.e. the cross Gram matrix of the
        // Hankel matrices of a and b. The first row and column are summed directly and the remaining entries follow
        // from the recurrence G(p + 1, p' + 1) = G(p, p') - a(p) conj(b(p')) + a(p + Q) conj(b(p' + Q)).
        void add_hankel_cross_gram(const CVec &a, const CVec &b, int p_rows, double scale, Eigen::Ref<CMat> out)
        {
            const Eigen::Index P = p_rows;
            const Eigen::Index Q = a.size() - P + 1;
            CMat g(P, P);
            for (Eigen::Index c = 0; c < P; ++c)
                g(0, c) = (a.segment(0, Q).array() * b.segment(c, Q).array().conjugate()).sum();
            for (Eigen::Index r = 1; r < P; ++r)
                g(r, 0) = (a.segment(r, Q).array() * b.segment(0, Q).array().conjugate()).sum();
            for (Eigen::Index r = 1; r < P; ++r)
                for (Eigen::Index c = 1; c < P; ++c)
                    g(r, c) = g(r - 1, c - 1) - a(r - 1) * std::conj(b(c - 1)) + a(r - 1 + Q) * std::conj(b(c - 1 + Q));
            out += scale * g;
        }

        void check_k_order(int k_order, Eigen::Index limit, const char *what)
        {
            if (k_order < 1 || k_order > limit)
                throw std::invalid_argument(std::string(what) + ": model order " + std::to_string(k_order) +
                                            " is outside [1, " + std::to_string(limit) + "]");
        }
    }

    StackConfig StackConfig::defaults_for(const BandPlan &plan)
    {
        StackConfig cfg;
        cfg.p_rows = (2 * plan.n_subcarriers + 2) / 3;
        return cfg;
    }

    void StackConfig::validate(const BandPlan &plan) const
    {
        plan.validate();
        if (p_rows < 1 || p_rows > plan.n_subcarriers)
            throw std::invalid_argument("StackConfig: P = " + std::to_string(p_rows) + " is outside [1, N]");
        if (!band_noise_variances.empty())
        {
            if (band_noise_variances.size() != plan.n_bands())
                throw std::invalid_argument("StackConfig: one noise variance per band is required");
            for (double v : band_noise_variances)
                if (!(v > 0.0))
                    throw std::invalid_argument("StackConfig: band noise variances must be positive");
        }
    }

    void StackConfig::check_rank(const BandPlan &plan, int k_order, int m_snapshots) const
    {
        const long lp = static_cast<long>(plan.n_bands()) * p_rows;
        const long qm = static_cast<long>(q_cols(plan)) * m_snapshots * (use_fb ? 2 : 1);
        if (lp < k_order || qm < k_order)
            throw std::invalid_argument("StackConfig: stacked matrix of size " + std::to_string(lp) + " x " +
                                        std::to_string(qm) + " cannot hold " + std::to_string(k_order) + " paths");
    }

    std::vector<double> StackConfig::block_scales(const BandPlan &plan) const
    {
        std::vector<double> s(plan.n_bands(), 1.0);
        if (band_noise_variances.empty())
            return s;
        const double mean = std::accumulate(band_noise_variances.begin(), band_noise_variances.end(), 0.0) /
                            static_cast<double>(band_noise_variances.size());
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] = std::sqrt(mean / band_noise_variances[i]);
        return s;
    }

    CMat hankel(const CVec &h, int p_rows)
    {
        if (p_rows < 1 || p_rows > h.size())
            throw std::invalid_argument("hankel: P = " + std::to_string(p_rows) + " is outside [1, " +
                                        std::to_string(h.size()) + "]");
        const Eigen::Index q = h.size() - p_rows + 1;
        CMat out(p_rows, q);
        for (Eigen::Index p = 0; p < p_rows; ++p)
            out.row(p) = h.segment(p, q).transpose();
        return out;
    }

    CVec dehankel(const CMat &h)
    {
        if (h.size() == 0)
            throw std::invalid_argument("dehankel: empty matrix");
        const Eigen::Index n = h.rows() + h.cols() - 1;
        CVec out = CVec::Zero(n);
        RVec count = RVec::Zero(n);
        for (Eigen::Index p = 0; p < h.rows(); ++p)
            for (Eigen::Index q = 0; q < h.cols(); ++q)
            {
                out(p + q) += h(p, q);
                count(p + q) += 1.0;
            }
        return (out.array() / count.array().cast<cplx>()).matrix();
    }

    StackedData stack_bands(const CsiSnapshot &snapshot, const BandPlan &plan, const StackConfig &cfg)
    {
        MultibandCsi one;
        one.band_plan = plan;
        one.snapshots.push_back(snapshot);
        StackedData out = stack_snapshots(one, cfg);
        out.provenance = 0;
        return out;
    }

    StackedData stack_snapshots(const MultibandCsi &csi, const StackConfig &cfg)
    {
        csi.validate();
        cfg.validate(csi.band_plan);
        const BandPlan &plan = csi.band_plan;
        const int L = static_cast<int>(plan.n_bands());
        const int P = cfg.p_rows;
        const Eigen::Index Q = cfg.q_cols(plan);
        const Eigen::Index M = static_cast<Eigen::Index>(csi.n_snapshots());

        StackedData out;
        out.n_bands = L;
        out.p_rows = P;
        out.band_plan = plan;
        out.block_scales = cfg.block_scales(plan);
        out.provenance = M > 1 ? kMultiSnapshot : 0u;
        out.matrix.resize(static_cast<Eigen::Index>(L) * P, Q * M);
        CMat gram = CMat::Zero(out.matrix.rows(), out.matrix.rows());

        for (Eigen::Index m = 0; m < M; ++m)
        {
            const auto &bands = csi.snapshots[static_cast<std::size_t>(m)].per_band;
            for (int i = 0; i < L; ++i)
            {
                const double si = out.block_scales[static_cast<std::size_t>(i)];
                out.matrix.block(static_cast<Eigen::Index>(i) * P, m * Q, P, Q) = si * hankel(bands[static_cast<std::size_t>(i)], P);
                for (int j = i; j < L; ++j)
                {
                    const double sj = out.block_scales[static_cast<std::size_t>(j)];
                    add_hankel_cross_gram(bands[static_cast<std::size_t>(i)], bands[static_cast<std::size_t>(j)], P, si * sj,
                                          gram.block(static_cast<Eigen::Index>(i) * P, static_cast<Eigen::Index>(j) * P, P, P));
                }
            }
        }
        for (int i = 0; i < L; ++i)
            for (int j = i + 1; j < L; ++j)
                gram.block(static_cast<Eigen::Index>(j) * P, static_cast<Eigen::Index>(i) * P, P, P) =
                    gram.block(static_cast<Eigen::Index>(i) * P, static_cast<Eigen::Index>(j) * P, P, P).adjoint();
        out.row_gram = std::move(gram);
        return out;
    }

    bool is_centro_symmetric(const BandPlan &plan)
    {
        plan.validate();
        std::vector<long> idx;
        idx.reserve(plan.n_bands() * static_cast<std::size_t>(plan.n_subcarriers));
        for (long o : plan.band_offsets)
            for (long n = 0; n < plan.n_subcarriers; ++n)
                idx.push_back(o + n);
        std::sort(idx.begin(), idx.end());
        const long mirror = idx.front() + idx.back();
        for (std::size_t a = 0, b = idx.size() - 1; a < idx.size(); ++a, --b)
            if (idx[a] + idx[b] != mirror)
                return false;
        return true;
    }

    StackedData fb_extend(const StackedData &stacked)
    {
        if (!is_centro_symmetric(stacked.band_plan))
            throw std::invalid_argument("fb_extend: the band plan is not centro-symmetric, so the reversed conjugate "
                                        "data does not share the column space of the forward data");
        const auto &s = stacked.block_scales;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] != s[s.size() - 1 - i])
                throw std::invalid_argument("fb_extend: band block scales must be mirror-symmetric");
        if (stacked.provenance & kNoiseReduced)
            throw std::invalid_argument("fb_extend: apply the forward-backward extension before noise reduction");

        StackedData out = stacked;
        const Eigen::Index c = stacked.cols();
        out.matrix.resize(stacked.rows(), 2 * c);
        out.matrix.leftCols(c) = stacked.matrix;
        out.matrix.rightCols(c) = stacked.matrix.conjugate().colwise().reverse();
        if (stacked.row_gram)
            out.row_gram = *stacked.row_gram + stacked.row_gram->conjugate().reverse();
        out.provenance |= kForwardBackward;
        return out;
    }

    StackedData noise_reduce(const MultibandCsi &csi, const StackConfig &cfg, int k_order)
    {
        StackedData base = stack_snapshots(csi, cfg);
        const int L = base.n_bands;
        const Eigen::Index P = base.p_rows;
        const Eigen::Index cols_r = 2 * static_cast<Eigen::Index>(L) * base.cols();
        check_k_order(k_order, std::min(P, cols_r), "noise_reduce");

        // Gram matrix of the horizontally concatenated per-band forward-backward stacks.
        CMat gram_r = CMat::Zero(P, P);
        for (int i = 0; i < L; ++i)
        {
            const auto gii = base.row_gram->block(i * P, i * P, P, P);
            gram_r += gii + gii.conjugate().reverse();
        }
        const CMat u_r = linalg::top_eigenpairs(gram_r, k_order).vectors;

        if (cfg.use_fb)
            base = fb_extend(base);

        const Eigen::Index K = k_order;
        CMat coeffs(static_cast<Eigen::Index>(L) * K, base.cols());
        for (int i = 0; i < L; ++i)
            coeffs.middleRows(i * K, K).noalias() = u_r.adjoint() * base.block(i);

        StackedData out;
        out.n_bands = L;
        out.p_rows = base.p_rows;
        out.band_plan = base.band_plan;
        out.block_scales = base.block_scales;
        out.provenance = base.provenance | kNoiseReduced;
        out.matrix.resize(base.rows(), base.cols());
        for (int i = 0; i < L; ++i)
            out.matrix.middleRows(i * P, P).noalias() = u_r * coeffs.middleRows(i * K, K);
        out.block_basis = u_r;
        out.block_coefficients = std::move(coeffs);
        return out;
    }

    StackedData build_stacked_data(const MultibandCsi &csi, const StackConfig &cfg, int k_order)
    {
        if (cfg.use_nr)
            return noise_reduce(csi, cfg, k_order);
        StackedData out = stack_snapshots(csi, cfg);
        if (cfg.use_fb)
            out = fb_extend(out);
        return out;
    }
}
