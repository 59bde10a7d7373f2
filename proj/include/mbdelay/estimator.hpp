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
#include "mbdelay/stacking.hpp"
#include "mbdelay/subspace.hpp"
#include "mbdelay/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mbdelay
{
    /// Data extensions applied before the subspace is estimated.
    enum class Variant
    {
        kPlain, ///< Multi-snapshot block-Hankel stack only
        kFb,    ///< Forward-backward extension
        kNr,    ///< Noise-reduction projection
        kFbNr,  ///< Both
    };

    std::string to_string(Variant v);

    /// Parses "plain", "fb", "nr" or "fb_nr" (also "fb&nr"). Throws std::invalid_argument otherwise.
    Variant parse_variant(const std::string &name);

    /// Column weights of the signal basis in the fitting cost J = ||P_perp U W||_F^2.
    enum class WeightRule
    {
        kNone,     ///< W = I
        kSubspace, ///< W = Lambda_s - sigma^2 I, the output of weighting_matrix
        kOptimal,  ///< W = (Lambda_s - sigma^2 I) Lambda_s^{-1/2}, the minimum-variance subspace fitting weight
    };

    std::string to_string(WeightRule r);
    WeightRule parse_weight_rule(const std::string &name);

    /// Weighted subspace fitting problem in the path phases phi_k = w_sc tau_k.
    struct WsfProblem
    {
        CMat basis;                       ///< Signal basis U (LP x K)
        RVec weight;                      ///< Diagonal of W (K)
        BandPlan band_plan;
        int p_rows = 1;
        std::vector<double> block_scales; ///< Per-band scale of the stacked rows, empty for all ones

        int k_order() const { return static_cast<int>(basis.cols()); }

        /// Throws std::invalid_argument on inconsistent dimensions or non-positive weights.
        void validate() const;
    };

    /// Reduced steering matrix A'(phi) (LP x K): band blocks M' Phi^{n_i} with M' the first P Vandermonde rows,
    /// each block multiplied by its scale when block_scales is given.
    CMat build_reduced_steering(const RVec &phases, int p_rows, const BandPlan &plan,
                                const std::vector<double> &block_scales = {});

    /// J(phi) = tr(P_perp(phi) U W^2 U^H), evaluated through a QR factorisation of A'(phi).
    /// Throws NumericalError naming the colliding pair when A'(phi) is rank deficient.
    double wsf_cost(const WsfProblem &problem, const RVec &phases);

    /// Analytic gradient dJ / dphi.
    RVec wsf_gradient(const WsfProblem &problem, const RVec &phases);

    struct LmOptions
    {
        int max_iters = 10;
        double tol = 1e-10;     ///< Relative cost decrease and step norm thresholds
        double lambda0 = 1e-3;  ///< Initial Marquardt damping
    };

    struct LmResult
    {
        RVec phases;
        std::vector<double> cost_trace; ///< Cost at the start and after every accepted step
        bool converged = false;
        int iterations = 0;
    };

    /// Levenberg-Marquardt on the residual P_perp(phi) U W with Marquardt diagonal scaling.
    /// The damping is divided by 10 after an accepted step and multiplied by 10 after a rejected one.
    LmResult lm_minimize(const WsfProblem &problem, const RVec &phases0, const LmOptions &opts = {});

    struct InitOptions
    {
        /// Grid points per path for the coordinate refinement of the coarse phases over one delay ambiguity
        /// interval. A value of 1 keeps the coarse estimate.
        int refine_grid_points = 1;
    };

    /// Coarse phases from the shift invariance between consecutive subcarriers inside every band block of the
    /// signal basis, optionally refined by a per-path grid search of the fitting cost. Sorted ascending, with
    /// coincident phases separated by 0.01 rad.
    RVec initialize_phases(const WsfProblem &problem, const InitOptions &opts = {});

    /// Initial delays [s] for stacked CSI: builds the subspace of the configured stack and applies initialize_phases.
    std::vector<double> initialize_delays(const MultibandCsi &csi, const StackConfig &cfg, int k_order,
                                          const InitOptions &opts = {});

    /// Least-squares path gains alpha^(m) = A^+ h^(m) per snapshot. Throws NumericalError if A is rank deficient.
    std::vector<CVec> estimate_amplitudes(const std::vector<double> &delays, const MultibandCsi &csi);

    /// Which column count feeds D = columns - 1 in the model order criterion.
    enum class MdlDimension
    {
        kMinDimension, ///< min(rows, cols) of the stacked matrix before noise reduction
        kHankelColumns ///< Q, the Hankel column count of a single band and snapshot
    };

    struct MbwdeOptions
    {
        std::optional<int> p_rows;       ///< Hankel rows, default ceil(2N / 3)
        std::optional<int> k_order;      ///< Path count, estimated by MDL when absent
        Variant variant = Variant::kFbNr;
        bool weighted = true;            ///< false gives W = I
        WeightRule weight_rule = WeightRule::kOptimal;
        double weight_floor = 1e-3;
        MdlDimension mdl_dimension = MdlDimension::kMinDimension;
        std::vector<double> band_noise_variances;
        LmOptions lm;
        InitOptions init;
        /// Number of LM runs: the first starts at the initializer output, the others at copies jittered uniformly
        /// by up to half the inverse frequency aperture per path. The run with the lowest cost wins.
        int multistart = 32;
        std::uint64_t seed = 0x5eed;     ///< Seed of the start jitter
        bool compute_crb = false;        ///< Attach a CRB evaluated at the estimates
    };

    /// Output of the delay estimator.
    struct DelayEstimate
    {
        std::vector<double> delays;     ///< Seconds in [0, delay period), ascending
        std::vector<CVec> amplitudes;   ///< One K-vector per snapshot
        RVec phases;                    ///< phi_k = w_sc tau_k in [0, 2 pi), ascending
        int k_order = 0;
        std::vector<double> cost_trace; ///< LM cost trace of the selected start
        bool converged = false;
        std::optional<std::vector<double>> crb; ///< CRB variances [s^2] at the estimates
        std::vector<double> initial_delays;
        double noise_power = 0.0;       ///< Subspace noise power estimate
        RVec weights;                   ///< Subspace fitting weights used
    };

    /// Multiband weighted delay estimation.
    ///
    /// Stacks the snapshots into block-Hankel form with the extensions of the variant, estimates the signal
    /// subspace (and the path count by MDL when it is not given), fits the reduced steering matrix to the weighted
    /// subspace by Levenberg-Marquardt and finally solves for the path gains on the raw CSI.
    DelayEstimate mbwde(const MultibandCsi &csi, const MbwdeOptions &opts = {});
}
