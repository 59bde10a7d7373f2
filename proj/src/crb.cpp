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

#include "mbdelay/crb.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mbdelay
{
    namespace
    {
        // Orthonormal basis of span(A); throws when A is numerically rank deficient.
        CMat orthonormal_basis(const CMat &a)
        {
            Eigen::HouseholderQR<CMat> qr(a);
            const CMat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
            for (Eigen::Index k = 0; k < a.cols(); ++k)
                if (std::abs(r(k, k)) <= 1e-12 * a.col(k).norm())
                    throw NumericalError("crb: steering matrix is rank deficient at path " + std::to_string(k + 1));
            CMat q = CMat::Identity(a.rows(), a.cols());
            q.applyOnTheLeft(qr.householderQ());
            return q;
        }

        double condition_number(const RMat &f)
        {
            Eigen::SelfAdjointEigenSolver<RMat> es(f, Eigen::EigenvaluesOnly);
            const double lo = es.eigenvalues().minCoeff();
            const double hi = es.eigenvalues().maxCoeff();
            return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
        }
    }

    void CrbInputs::validate() const
    {
        band_plan.validate();
        const Eigen::Index k = static_cast<Eigen::Index>(delays.size());
        if (k < 1)
            throw std::invalid_argument("CrbInputs: at least one delay is required");
        if (amplitude_cov.rows() != k || amplitude_cov.cols() != k)
            throw std::invalid_argument("CrbInputs: amplitude covariance must be K x K");
        if (!amplitude_cov.isApprox(amplitude_cov.adjoint(), 1e-12))
            throw std::invalid_argument("CrbInputs: amplitude covariance must be Hermitian");
        if (!(noise_variance > 0.0))
            throw std::invalid_argument("CrbInputs: noise variance must be positive");
        if (m_snapshots < 1)
            throw std::invalid_argument("CrbInputs: at least one snapshot is required");
    }

    CrbInputs CrbInputs::from_channel(const MultipathChannel &channel, const BandPlan &plan, double snr_db, int m_snapshots)
    {
        channel.validate();
        CrbInputs in;
        in.delays = channel.delays;
        const Eigen::Index k = static_cast<Eigen::Index>(channel.size());
        in.amplitude_cov = CMat::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i)
            in.amplitude_cov(i, i) = channel.avg_powers[static_cast<std::size_t>(i)];
        in.noise_variance = channel.avg_powers.front() * std::pow(10.0, -snr_db / 10.0);
        in.m_snapshots = m_snapshots;
        in.band_plan = plan;
        return in;
    }

    CMat steering_derivatives(const std::vector<double> &delays, const BandPlan &plan)
    {
        const CMat a = build_full_steering(delays, plan);
        const Eigen::Index n = plan.n_subcarriers;
        const double w = plan.omega_sc();
        CMat d(a.rows(), a.cols());
        for (std::size_t i = 0; i < plan.n_bands(); ++i)
            for (Eigen::Index r = 0; r < n; ++r)
            {
                const Eigen::Index row = static_cast<Eigen::Index>(i) * n + r;
                const double g = w * static_cast<double>(plan.global_index(i, r));
                d.row(row) = cplx(0.0, -g) * a.row(row);
            }
        return d;
    }

    FimPartition fim_partitioned(const CrbInputs &inputs)
    {
        inputs.validate();
        const CMat a = build_full_steering(inputs.delays, inputs.band_plan);
        const CMat d = steering_derivatives(inputs.delays, inputs.band_plan);
        const CMat q = orthonormal_basis(a);
        const CMat qd = q.adjoint() * d;
        const double c = 2.0 * inputs.m_snapshots / inputs.noise_variance;
        const CMat rt = inputs.amplitude_cov.transpose();

        FimPartition part;
        part.uncoupled = c * (d.adjoint() * d).cwiseProduct(rt).real();
        part.coupling = c * (qd.adjoint() * qd).cwiseProduct(rt).real();
        return part;
    }

    FimResult fim(const CrbInputs &inputs)
    {
        inputs.validate();
        const CMat a = build_full_steering(inputs.delays, inputs.band_plan);
        const CMat d = steering_derivatives(inputs.delays, inputs.band_plan);
        const CMat q = orthonormal_basis(a);
        const CMat pd = d - q * (q.adjoint() * d);
        const double c = 2.0 * inputs.m_snapshots / inputs.noise_variance;

        FimResult out;
        out.fim = c * (pd.adjoint() * pd).cwiseProduct(inputs.amplitude_cov.transpose()).real();
        out.fim = 0.5 * (out.fim + out.fim.transpose()).eval();
        out.condition = condition_number(out.fim);
        out.unreliable = !(out.condition <= kFimConditionLimit);
        return out;
    }

    CrbResult crb(const CrbInputs &inputs)
    {
        const FimResult f = fim(inputs);
        Eigen::LDLT<RMat> ldlt(f.fim);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !std::isfinite(f.condition))
            throw NumericalError("crb: Fisher information matrix is singular");
        CrbResult out;
        out.variances = ldlt.solve(RMat::Identity(f.fim.rows(), f.fim.cols())).diagonal();
        out.condition = f.condition;
        out.unreliable = f.unreliable;
        if ((out.variances.array() <= 0.0).any())
            throw NumericalError("crb: Fisher information matrix is not positive definite");
        return out;
    }

    DecoupledCrb crb_decoupled(const CrbInputs &inputs, int path_k)
    {
        inputs.validate();
        const Eigen::Index k = path_k;
        if (k < 0 || k >= static_cast<Eigen::Index>(inputs.delays.size()))
            throw std::invalid_argument("crb_decoupled: path index out of range");
        const CMat &r = inputs.amplitude_cov;
        if (!r.isDiagonal(1e-14 * r.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("crb_decoupled: amplitude covariance must be diagonal");

        const CMat a = build_full_steering(inputs.delays, inputs.band_plan);
        const CMat d = steering_derivatives(inputs.delays, inputs.band_plan);
        const CMat q = orthonormal_basis(a);
        const CVec dk = d.col(k);
        const double b_proj = dk.squaredNorm() - (q.adjoint() * dk).squaredNorm();

        // Centred subcarrier index set: band i covers n_c,i - N/2 <= n < n_c,i + N/2 with
        // n_c,i = n_i - (n_{L-1} - n_0) / 2, where n_i is the band centre offset.
        const BandPlan &plan = inputs.band_plan;
        const double span = static_cast<double>(plan.band_offsets.back() - plan.band_offsets.front());
        const double half = 0.5 * plan.n_subcarriers;
        const double w = plan.omega_sc();
        double b_full = 0.0;
        for (long o : plan.band_offsets)
        {
            const double centre = static_cast<double>(o) - 0.5 * span;
            for (double n = std::ceil(centre - half); n < centre + half; n += 1.0)
                b_full += (w * n) * (w * n);
        }

        const double snr = r(k, k).real() / inputs.noise_variance;
        const double pre = 1.0 / (2.0 * inputs.m_snapshots * snr);
        return {pre / b_proj, pre / b_full};
    }
}
