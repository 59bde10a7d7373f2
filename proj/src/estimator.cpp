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

#include "mbdelay/estimator.hpp"

#include "mbdelay/crb.hpp"
#include "mbdelay/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mbdelay
{
    namespace
    {
        // Fit of the reduced steering matrix to the weighted basis Y = U W at one phase vector.
        struct FitState
        {
            CMat a;      // A'(phi)
            CMat q;      // Thin orthonormal factor of A'
            CMat r;      // Upper triangular factor of A'
            CMat resid;  // P_perp Y
            CMat coef;   // A'^+ Y
            double cost = 0.0;
        };

        double wrapped_distance(double a, double b)
        {
            return std::abs(std::remainder(a - b, 2.0 * kPi));
        }

        [[noreturn]] void throw_collision(const RVec &phases, Eigen::Index k)
        {
            Eigen::Index partner = k == 0 ? 1 : 0;
            for (Eigen::Index j = 0; j < phases.size(); ++j)
                if (j != k && wrapped_distance(phases(j), phases(k)) < wrapped_distance(phases(partner), phases(k)))
                    partner = j;
            const auto lo = std::min(k, partner) + 1;
            const auto hi = std::max(k, partner) + 1;
            throw NumericalError("steering matrix is rank deficient: paths " + std::to_string(lo) + " and " +
                                 std::to_string(hi) + " have coinciding phases");
        }

        // Row index n_glob of every stacked row, and the row scale.
        void row_layout(const WsfProblem &p, RVec &n_glob, RVec &scale)
        {
            const Eigen::Index rows = static_cast<Eigen::Index>(p.band_plan.n_bands()) * p.p_rows;
            n_glob.resize(rows);
            scale.resize(rows);
            for (std::size_t i = 0; i < p.band_plan.n_bands(); ++i)
                for (int r = 0; r < p.p_rows; ++r)
                {
                    const Eigen::Index row = static_cast<Eigen::Index>(i) * p.p_rows + r;
                    n_glob(row) = static_cast<double>(p.band_plan.global_index(i, r));
                    scale(row) = p.block_scales.empty() ? 1.0 : p.block_scales[i];
                }
        }

        FitState evaluate(const WsfProblem &p, const CMat &y, const RVec &phases)
        {
            FitState st;
            st.a = build_reduced_steering(phases, p.p_rows, p.band_plan, p.block_scales);
            const Eigen::Index k = st.a.cols();
            Eigen::HouseholderQR<CMat> qr(st.a);
            st.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
            const double col_norm = st.a.col(0).norm();
            for (Eigen::Index j = 0; j < k; ++j)
                if (!(std::abs(st.r(j, j)) > 1e-10 * col_norm))
                    throw_collision(phases, j);
            st.q = CMat::Identity(st.a.rows(), k);
            st.q.applyOnTheLeft(qr.householderQ());
            const CMat qy = st.q.adjoint() * y;
            st.resid = y - st.q * qy;
            st.coef = st.r.triangularView<Eigen::Upper>().solve(qy);
            st.cost = st.resid.squaredNorm();
            return st;
        }

        CMat derivative_columns(const WsfProblem &p, const CMat &a)
        {
            RVec n_glob, scale;
            row_layout(p, n_glob, scale);
            return (a.array().colwise() * (cplx(0.0, -1.0) * n_glob.cast<cplx>()).array()).matrix();
        }

        // Complex Jacobian of vec(P_perp Y) with respect to the phases.
        CMat residual_jacobian(const WsfProblem &p, const FitState &st)
        {
            const Eigen::Index k = st.a.cols();
            const Eigen::Index rows = st.a.rows();
            const CMat d = derivative_columns(p, st.a);
            const CMat pd = d - st.q * (st.q.adjoint() * d);
            // Columns of Q R^{-H} span the dual basis of A'.
            const CMat g = st.q * st.r.adjoint().triangularView<Eigen::Lower>().solve(CMat::Identity(k, k));
            const CMat dr = d.adjoint() * st.resid; // row j: d_j^H P_perp Y
            const Eigen::Index cols_y = st.resid.cols();
            CMat jac(rows * cols_y, k);
            for (Eigen::Index j = 0; j < k; ++j)
            {
                Eigen::Map<CMat> col(jac.col(j).data(), rows, cols_y);
                col.noalias() = -(pd.col(j) * st.coef.row(j) + g.col(j) * dr.row(j));
            }
            return jac;
        }

        void sort_and_separate(RVec &phases)
        {
            std::sort(phases.data(), phases.data() + phases.size());
            for (Eigen::Index k = 1; k < phases.size(); ++k)
                if (phases(k) - phases(k - 1) < 1e-9)
                    phases(k) = phases(k - 1) + 0.01;
        }

        CMat weighted_basis(const WsfProblem &p)
        {
            return p.basis * p.weight.cast<cplx>().asDiagonal();
        }

        RVec fitting_weights(const SubspaceEstimate &sub, const MbwdeOptions &opts)
        {
            const Eigen::Index k = sub.k_order;
            if (!opts.weighted || opts.weight_rule == WeightRule::kNone)
                return RVec::Ones(k);
            const RVec w = weighting_matrix(sub, opts.weight_floor);
            if (opts.weight_rule == WeightRule::kSubspace)
                return w;
            return (w.array() / sub.signal_powers.array().max(1e-300).sqrt()).matrix();
        }
    }

    std::string to_string(Variant v)
    {
        switch (v)
        {
        case Variant::kPlain:
            return "plain";
        case Variant::kFb:
            return "fb";
        case Variant::kNr:
            return "nr";
        case Variant::kFbNr:
            return "fb_nr";
        }
        return "unknown";
    }

    Variant parse_variant(const std::string &name)
    {
        if (name == "plain")
            return Variant::kPlain;
        if (name == "fb")
            return Variant::kFb;
        if (name == "nr")
            return Variant::kNr;
        if (name == "fb_nr" || name == "fb&nr" || name == "fbnr")
            return Variant::kFbNr;
        throw std::invalid_argument("unknown variant '" + name + "', expected plain, fb, nr or fb_nr");
    }

    std::string to_string(WeightRule r)
    {
        switch (r)
        {
        case WeightRule::kNone:
            return "none";
        case WeightRule::kSubspace:
            return "subspace";
        case WeightRule::kOptimal:
            return "optimal";
        }
        return "unknown";
    }

    WeightRule parse_weight_rule(const std::string &name)
    {
        if (name == "none")
            return WeightRule::kNone;
        if (name == "subspace")
            return WeightRule::kSubspace;
        if (name == "optimal")
            return WeightRule::kOptimal;
        throw std::invalid_argument("unknown weight rule '" + name + "', expected none, subspace or optimal");
    }

    void WsfProblem::validate() const
    {
        band_plan.validate();
        const Eigen::Index rows = static_cast<Eigen::Index>(band_plan.n_bands()) * p_rows;
        if (p_rows < 1 || p_rows > band_plan.n_subcarriers)
            throw std::invalid_argument("WsfProblem: P is outside [1, N]");
        if (basis.rows() != rows || basis.cols() < 1)
            throw std::invalid_argument("WsfProblem: basis must have L * P rows and at least one column");
        if (weight.size() != basis.cols())
            throw std::invalid_argument("WsfProblem: one weight per basis column is required");
        if ((weight.array() <= 0.0).any())
            throw std::invalid_argument("WsfProblem: weights must be positive");
        if (!block_scales.empty() && block_scales.size() != band_plan.n_bands())
            throw std::invalid_argument("WsfProblem: one block scale per band is required");
    }

    CMat build_reduced_steering(const RVec &phases, int p_rows, const BandPlan &plan, const std::vector<double> &block_scales)
    {
        if (p_rows < 1 || p_rows > plan.n_subcarriers)
            throw std::invalid_argument("build_reduced_steering: P is outside [1, N]");
        const Eigen::Index rows = static_cast<Eigen::Index>(plan.n_bands()) * p_rows;
        CMat a(rows, phases.size());
        for (Eigen::Index k = 0; k < phases.size(); ++k)
            for (std::size_t i = 0; i < plan.n_bands(); ++i)
            {
                const double s = block_scales.empty() ? 1.0 : block_scales[i];
                for (int r = 0; r < p_rows; ++r)
                    a(static_cast<Eigen::Index>(i) * p_rows + r, k) =
                        std::polar(s, -phases(k) * static_cast<double>(plan.global_index(i, r)));
            }
        return a;
    }

    double wsf_cost(const WsfProblem &problem, const RVec &phases)
    {
        problem.validate();
        if (phases.size() != problem.k_order())
            throw std::invalid_argument("wsf_cost: one phase per basis column is required");
        return evaluate(problem, weighted_basis(problem), phases).cost;
    }

    RVec wsf_gradient(const WsfProblem &problem, const RVec &phases)
    {
        problem.validate();
        if (phases.size() != problem.k_order())
            throw std::invalid_argument("wsf_gradient: one phase per basis column is required");
        const FitState st = evaluate(problem, weighted_basis(problem), phases);
        const CMat d = derivative_columns(problem, st.a);
        const CMat g = st.resid.adjoint() * d; // G(j, k) = (P_perp Y)_j^H d_k
        RVec grad(phases.size());
        for (Eigen::Index k = 0; k < phases.size(); ++k)
            grad(k) = -2.0 * (st.coef.row(k) * g.col(k)).value().real();
        return grad;
    }

    LmResult lm_minimize(const WsfProblem &problem, const RVec &phases0, const LmOptions &opts)
    {
        problem.validate();
        if (phases0.size() != problem.k_order())
            throw std::invalid_argument("lm_minimize: one phase per basis column is required");

        const CMat y = weighted_basis(problem);
        LmResult out;
        out.phases = phases0;
        FitState st = evaluate(problem, y, phases0);
        out.cost_trace.push_back(st.cost);
        if (opts.max_iters <= 0)
            return out;
        if (st.cost <= 1e-28 * y.squaredNorm())
        {
            out.converged = true;
            return out;
        }

        double lambda = opts.lambda0;
        for (int it = 0; it < opts.max_iters; ++it)
        {
            out.iterations = it + 1;
            const CMat jac = residual_jacobian(problem, st);
            const Eigen::Map<const CVec> r(st.resid.data(), st.resid.size());
            const RMat h = (jac.adjoint() * jac).real();
            const RVec grad = (jac.adjoint() * r).real();
            const RVec diag = h.diagonal().cwiseMax(1e-300);

            bool accepted = false;
            RVec step;
            FitState next;
            while (lambda < 1e16)
            {
                RMat damped = h;
                damped.diagonal() += lambda * diag;
                step = -damped.ldlt().solve(grad);
                if (step.allFinite())
                {
                    try
                    {
                        next = evaluate(problem, y, out.phases + step);
                        if (next.cost < st.cost)
                        {
                            accepted = true;
                            break;
                        }
                    }
                    catch (const NumericalError &)
                    {
                        // A step onto coinciding phases counts as a rejected step.
                    }
                }
                lambda *= 10.0;
            }
            if (!accepted)
            {
                // No descent direction left at any damping: numerically stationary.
                out.converged = true;
                break;
            }
            lambda = std::max(lambda / 10.0, 1e-12);
            const double rel = (st.cost - next.cost) / st.cost;
            out.phases += step;
            st = std::move(next);
            out.cost_trace.push_back(st.cost);
            if (rel < opts.tol || step.norm() < opts.tol)
            {
                out.converged = true;
                break;
            }
        }
        return out;
    }

    RVec initialize_phases(const WsfProblem &problem, const InitOptions &opts)
    {
        problem.validate();
        const Eigen::Index k = problem.k_order();
        const int P = problem.p_rows;
        const Eigen::Index L = static_cast<Eigen::Index>(problem.band_plan.n_bands());
        if (P < 2 || L * (P - 1) < k)
            throw std::invalid_argument("initialize_phases: the stacked basis has too few rows for " + std::to_string(k) +
                                        " paths");

        // Rows p < P - 1 and p >= 1 of every band block differ by the per-subcarrier rotation Phi.
        CMat upper(L * (P - 1), k), lower(L * (P - 1), k);
        for (Eigen::Index i = 0; i < L; ++i)
        {
            upper.middleRows(i * (P - 1), P - 1) = problem.basis.middleRows(i * P, P - 1);
            lower.middleRows(i * (P - 1), P - 1) = problem.basis.middleRows(i * P + 1, P - 1);
        }
        const CMat psi = upper.colPivHouseholderQr().solve(lower);
        Eigen::ComplexEigenSolver<CMat> es(psi, false);
        if (es.info() != Eigen::Success)
            throw NumericalError("initialize_phases: eigen decomposition of the shift operator failed");

        RVec phases(k);
        for (Eigen::Index j = 0; j < k; ++j)
            phases(j) = -std::arg(es.eigenvalues()(j));
        sort_and_separate(phases);

        if (opts.refine_grid_points > 1)
        {
            const CMat y = weighted_basis(problem);
            const long g = problem.band_plan.offset_gcd();
            const double ambiguity = 2.0 * kPi / static_cast<double>(g > 0 ? g : 1);
            const int n = opts.refine_grid_points;
            for (Eigen::Index j = 0; j < k; ++j)
            {
                double best_cost = std::numeric_limits<double>::infinity();
                double best_phase = phases(j);
                const double centre = phases(j);
                for (int s = 0; s < n; ++s)
                {
                    RVec trial = phases;
                    trial(j) = centre + ambiguity * (static_cast<double>(s) / (n - 1) - 0.5);
                    try
                    {
                        const double c = evaluate(problem, y, trial).cost;
                        if (c < best_cost)
                        {
                            best_cost = c;
                            best_phase = trial(j);
                        }
                    }
                    catch (const NumericalError &)
                    {
                    }
                }
                phases(j) = best_phase;
            }
            sort_and_separate(phases);
        }
        return phases;
    }

    std::vector<double> initialize_delays(const MultibandCsi &csi, const StackConfig &cfg, int k_order, const InitOptions &opts)
    {
        cfg.validate(csi.band_plan);
        cfg.check_rank(csi.band_plan, k_order, static_cast<int>(csi.n_snapshots()));
        const StackedData data = build_stacked_data(csi, cfg, k_order);
        const SubspaceEstimate sub = truncated_svd(data, k_order, {.all_singular_values = false});
        WsfProblem problem{sub.basis, RVec::Ones(k_order), csi.band_plan, cfg.p_rows, data.block_scales};
        const RVec phases = initialize_phases(problem, opts);
        std::vector<double> delays(static_cast<std::size_t>(phases.size()));
        for (Eigen::Index j = 0; j < phases.size(); ++j)
            delays[static_cast<std::size_t>(j)] = phases(j) / csi.band_plan.omega_sc();
        return delays;
    }

    std::vector<CVec> estimate_amplitudes(const std::vector<double> &delays, const MultibandCsi &csi)
    {
        csi.validate();
        const CMat a = build_full_steering(delays, csi.band_plan);
        Eigen::HouseholderQR<CMat> qr(a);
        const CMat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
        for (Eigen::Index k = 0; k < a.cols(); ++k)
            if (!(std::abs(r(k, k)) > 1e-10 * a.col(k).norm()))
                throw NumericalError("estimate_amplitudes: steering matrix is rank deficient at path " + std::to_string(k + 1));
        std::vector<CVec> out;
        out.reserve(csi.n_snapshots());
        for (std::size_t m = 0; m < csi.n_snapshots(); ++m)
            out.push_back(qr.solve(csi.stacked(m)));
        return out;
    }

    DelayEstimate mbwde(const MultibandCsi &csi, const MbwdeOptions &opts)
    {
        csi.validate();
        const BandPlan &plan = csi.band_plan;
        const int m_snapshots = static_cast<int>(csi.n_snapshots());

        StackConfig cfg = StackConfig::defaults_for(plan);
        if (opts.p_rows)
            cfg.p_rows = *opts.p_rows;
        cfg.use_fb = opts.variant == Variant::kFb || opts.variant == Variant::kFbNr;
        cfg.use_nr = opts.variant == Variant::kNr || opts.variant == Variant::kFbNr;
        cfg.band_noise_variances = opts.band_noise_variances;
        cfg.validate(plan);

        std::optional<StackedData> pre_nr;
        int k_order = 0;
        if (opts.k_order)
            k_order = *opts.k_order;
        else
        {
            StackedData pre = stack_snapshots(csi, cfg);
            if (cfg.use_fb)
                pre = fb_extend(pre);
            const SubspaceEstimate full = truncated_svd(pre, 1, {.all_singular_values = true});
            const int q_cols = opts.mdl_dimension == MdlDimension::kMinDimension
                                   ? static_cast<int>(std::min(pre.rows(), pre.cols()))
                                   : cfg.q_cols(plan);
            k_order = estimate_model_order_mdl(full.singular_values, q_cols);
            if (k_order < 1)
                throw NumericalError("mbwde: model order selection found no paths");
            pre_nr = std::move(pre);
        }
        cfg.check_rank(plan, k_order, m_snapshots);

        const StackedData data = (pre_nr && !cfg.use_nr) ? std::move(*pre_nr) : build_stacked_data(csi, cfg, k_order);
        const SubspaceEstimate sub = truncated_svd(data, k_order, {.all_singular_values = false});

        WsfProblem problem{sub.basis, fitting_weights(sub, opts), plan, cfg.p_rows, data.block_scales};
        const RVec phi0 = initialize_phases(problem, opts.init);

        LmResult best = lm_minimize(problem, phi0, opts.lm);
        CounterRng rng(opts.seed);
        const double half_width = kPi / static_cast<double>(plan.band_offsets.back() + plan.n_subcarriers);
        for (int s = 1; s < opts.multistart; ++s)
        {
            RVec start = phi0;
            for (Eigen::Index j = 0; j < start.size(); ++j)
                start(j) += half_width * (2.0 * rng.uniform() - 1.0);
            sort_and_separate(start);
            try
            {
                LmResult run = lm_minimize(problem, start, opts.lm);
                if (run.cost_trace.back() < best.cost_trace.back())
                    best = std::move(run);
            }
            catch (const NumericalError &)
            {
                // Start landed on coinciding phases; the remaining starts cover the neighbourhood.
            }
        }

        DelayEstimate est;
        est.k_order = k_order;
        est.phases = best.phases;
        for (double &phi : est.phases)
        {
            phi = std::fmod(phi, 2.0 * kPi);
            if (phi < 0.0)
                phi += 2.0 * kPi;
            if (phi >= 2.0 * kPi)
                phi = 0.0;
        }
        std::sort(est.phases.data(), est.phases.data() + est.phases.size());
        est.cost_trace = std::move(best.cost_trace);
        est.converged = best.converged;
        est.noise_power = sub.noise_power;
        est.weights = problem.weight;
        const double w = plan.omega_sc();
        for (Eigen::Index j = 0; j < est.phases.size(); ++j)
        {
            est.delays.push_back(est.phases(j) / w);
            est.initial_delays.push_back(phi0(j) / w);
        }
        est.amplitudes = estimate_amplitudes(est.delays, csi);

        if (opts.compute_crb)
        {
            CrbInputs in;
            in.delays = est.delays;
            in.band_plan = plan;
            in.m_snapshots = m_snapshots;
            in.amplitude_cov = CMat::Zero(k_order, k_order);
            for (const CVec &alpha : est.amplitudes)
                in.amplitude_cov.diagonal() += alpha.cwiseAbs2().cast<cplx>() / static_cast<double>(m_snapshots);
            if (csi.noise_variance && *csi.noise_variance > 0.0)
                in.noise_variance = *csi.noise_variance;
            else
            {
                const CMat a = build_full_steering(est.delays, plan);
                double energy = 0.0;
                for (std::size_t m = 0; m < csi.n_snapshots(); ++m)
                    energy += (csi.stacked(m) - a * est.amplitudes[m]).squaredNorm();
                const double dof = static_cast<double>(m_snapshots) * static_cast<double>(a.rows() - a.cols());
                in.noise_variance = energy / std::max(dof, 1.0);
            }
            if (in.noise_variance > 0.0)
            {
                const CrbResult bound = crb(in);
                est.crb = std::vector<double>(bound.variances.data(), bound.variances.data() + bound.variances.size());
            }
        }
        return est;
    }
}
