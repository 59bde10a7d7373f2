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
#include "mbdelay/estimator.hpp"
#include "mbdelay/rng.hpp"
#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <set>

using namespace mbdelay;
using namespace mbdelay::testing;
using Catch::Approx;

namespace
{
    constexpr double kInf = std::numeric_limits<double>::infinity();

    MultipathChannel unit_path(double tau)
    {
        MultipathChannel ch;
        ch.delays = {tau};
        ch.amplitudes = {cplx(1.0, 0.0)};
        ch.avg_powers = {1.0};
        return ch;
    }
}

TEST_CASE("MultipathChannel - validation")
{
    MultipathChannel ch = default_channel();
    REQUIRE_NOTHROW(ch.validate());
    CHECK(ch.amplitudes[0] == cplx(1.0, 0.0));
    CHECK(ch.avg_powers[1] == Approx(std::pow(10.0, -0.3)));

    ch.delays[2] = ch.delays[1];
    CHECK_THROWS_AS(ch.validate(), std::invalid_argument);

    MultipathChannel neg = unit_path(-1e-9);
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);

    MultipathChannel empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

    MultipathChannel bad_power = unit_path(1e-9);
    bad_power.avg_powers = {0.0};
    CHECK_THROWS_AS(bad_power.validate(), std::invalid_argument);
}

TEST_CASE("BandPlan - offsets from carrier frequencies")
{
    const BandPlan plan = default_plan();
    REQUIRE(plan.band_offsets == std::vector<long>{0, 1536, 4096, 5632});
    CHECK(plan.offset_gcd() == 512);
    CHECK(plan.bandwidth() == Approx(20e6));
    CHECK(plan.global_index(2, 10) == 4106);

    CHECK_THROWS_AS(BandPlan::from_center_frequencies({6.0e9, 6.0e9 + 1000.0}, 78.125e3, 256), std::invalid_argument);

    BandPlan odd = single_band(255);
    CHECK_THROWS_AS(odd.validate(), std::invalid_argument);
    BandPlan unordered = default_plan();
    std::swap(unordered.band_offsets[1], unordered.band_offsets[2]);
    CHECK_THROWS_AS(unordered.validate(), std::invalid_argument);
    BandPlan shifted = default_plan();
    shifted.band_offsets[0] = 3;
    CHECK_THROWS_AS(shifted.validate(), std::invalid_argument);
}

TEST_CASE("BandPlan - wrapped delays keep the steering vector")
{
    const BandPlan plan = default_plan();
    const double period = plan.delay_period();
    CHECK(period == Approx(12.8e-6).epsilon(1e-12));
    CHECK(plan.wrap_delay(3e-9) == 3e-9);
    CHECK(plan.wrap_delay(0.0) == 0.0);
    CHECK(plan.wrap_delay(period) == 0.0);

    CounterRng rng(17);
    for (int t = 0; t < 50; ++t)
    {
        const double tau = (8.0 * rng.uniform() - 4.0) * period;
        const double w = plan.wrap_delay(tau);
        CHECK(w >= 0.0);
        CHECK(w < period);
        const CMat a = build_full_steering({tau}, plan);
        const CMat b = build_full_steering({w}, plan);
        CHECK((a - b).norm() / a.norm() < 1e-9);
    }
}

TEST_CASE("OfdmConfig - defaults and cyclic prefix check")
{
    const BandPlan plan = default_plan();
    const OfdmConfig cfg = OfdmConfig::defaults_for(plan);
    CHECK(cfg.symbol_duration == Approx(256 / 20e6));
    REQUIRE(cfg.training_symbols.size() == 256);
    CHECK((cfg.training_symbols.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK_NOTHROW(cfg.validate(plan, 33e-9));
    CHECK_THROWS_AS(cfg.validate(plan, 10e-6), std::invalid_argument);

    OfdmConfig zero = cfg;
    zero.training_symbols(5) = 0.0;
    CHECK_THROWS_AS(zero.validate(plan, 33e-9), std::invalid_argument);
}

TEST_CASE("subcarrier_phases - zero delay gives all ones")
{
    const VandermondeFactors f = subcarrier_phases(unit_path(0.0), single_band(64));
    CHECK((f.vandermonde.array() - cplx(1.0, 0.0)).abs().maxCoeff() < 1e-15);
    CHECK(std::abs(f.phi_diag(0) - cplx(1.0, 0.0)) < 1e-15);
}

TEST_CASE("subcarrier_phases - half-turn delay alternates sign")
{
    const double spacing = 78.125e3;
    const VandermondeFactors f = subcarrier_phases(unit_path(1.0 / (2.0 * spacing)), single_band(16, spacing));
    CHECK(std::abs(f.phi_diag(0) - cplx(-1.0, 0.0)) < 1e-12);
    for (Eigen::Index n = 0; n < 16; ++n)
        CHECK(std::abs(f.vandermonde(n, 0) - cplx(n % 2 == 0 ? 1.0 : -1.0, 0.0)) < 1e-12);
}

TEST_CASE("subcarrier_phases - default spacing, 3 ns path")
{
    const VandermondeFactors f = subcarrier_phases(unit_path(3e-9), default_plan());
    const double expected_angle = -2.0 * kPi * 78125.0 * 3e-9;
    CHECK(expected_angle == Approx(-1.4726e-3).epsilon(1e-4));
    CHECK(std::abs(std::abs(f.phi_diag(0)) - 1.0) < 1e-14);
    CHECK(std::arg(f.phi_diag(0)) == Approx(expected_angle).epsilon(1e-12));
}

TEST_CASE("subcarrier_phases - Vandermonde shift and unit circle properties")
{
    const VandermondeFactors f = subcarrier_phases(default_channel(), default_plan());
    for (Eigen::Index k = 0; k < f.phi_diag.size(); ++k)
    {
        CHECK(std::abs(std::abs(f.phi_diag(k)) - 1.0) < 1e-14);
        for (Eigen::Index n = 0; n + 1 < f.vandermonde.rows(); ++n)
            CHECK(std::abs(f.vandermonde(n + 1, k) - f.phi_diag(k) * f.vandermonde(n, k)) < 1e-12);
    }
}

TEST_CASE("build_full_steering - single band equals the Vandermonde matrix")
{
    const MultipathChannel ch = default_channel();
    const BandPlan plan = single_band(256);
    const CMat a = build_full_steering(ch.delays, plan);
    const VandermondeFactors f = subcarrier_phases(ch, plan);
    CHECK((a - f.vandermonde).cwiseAbs().maxCoeff() < 1e-15);

    const CMat ones = build_full_steering({0.0}, default_plan());
    REQUIRE(ones.rows() == 4 * 256);
    CHECK((ones.array() - cplx(1.0, 0.0)).abs().maxCoeff() < 1e-15);
}

TEST_CASE("build_full_steering - band blocks and direct evaluation")
{
    const MultipathChannel ch = default_channel();
    const BandPlan plan = default_plan();
    const CMat a = build_full_steering(ch.delays, plan);
    const VandermondeFactors f = subcarrier_phases(ch, plan);
    for (std::size_t i = 0; i < plan.n_bands(); ++i)
    {
        const CVec shift = f.phi_diag.array().pow(static_cast<double>(plan.band_offsets[i]));
        const CMat block = f.vandermonde * shift.asDiagonal();
        CHECK((a.middleRows(static_cast<Eigen::Index>(i) * 256, 256) - block).cwiseAbs().maxCoeff() < 1e-9);
        for (long n = 0; n < 256; n += 37)
            for (std::size_t k = 0; k < ch.delays.size(); ++k)
                CHECK(std::abs(a(static_cast<Eigen::Index>(i) * 256 + n, static_cast<Eigen::Index>(k)) -
                               steering_entry(plan.subcarrier_spacing, plan.band_offsets[i] + n, ch.delays[k])) < 1e-9);
    }
}

TEST_CASE("build_full_steering - normalized inner product of the 3 ns and 33 ns columns")
{
    const BandPlan plan = default_plan();
    const CMat a = build_full_steering(default_delays(), plan);
    cplx direct = 0.0;
    for (std::size_t i = 0; i < plan.n_bands(); ++i)
        for (long n = 0; n < plan.n_subcarriers; ++n)
        {
            const long g = plan.band_offsets[i] + n;
            direct += std::conj(steering_entry(plan.subcarrier_spacing, g, 3e-9)) *
                      steering_entry(plan.subcarrier_spacing, g, 33e-9);
        }
    direct /= static_cast<double>(plan.n_bands() * plan.n_subcarriers);
    const cplx lib = a.col(0).dot(a.col(6)) / (a.col(0).norm() * a.col(6).norm());
    CHECK(std::abs(lib - direct) < 1e-10);
    CHECK(std::abs(direct) < 1.0);
}

TEST_CASE("generate_csi - noiseless single path at zero delay")
{
    const MultibandCsi csi = generate_csi(unit_path(0.0), default_plan(), 2, kInf, false, 7);
    REQUIRE(csi.n_snapshots() == 2);
    for (const auto &snap : csi.snapshots)
        for (const CVec &h : snap.per_band)
            CHECK((h.array() - cplx(1.0, 0.0)).abs().maxCoeff() == 0.0);
    CHECK_FALSE(csi.noise_variance.value_or(1.0) > 0.0);
}

TEST_CASE("generate_csi - noiseless data reproduces A alpha")
{
    const MultipathChannel ch = default_channel();
    const BandPlan plan = default_plan();
    const MultibandCsi csi = generate_csi(ch, plan, 3, kInf, false, 11);
    const CMat a = build_full_steering(ch.delays, plan);
    const CVec alpha = Eigen::Map<const CVec>(ch.amplitudes.data(), static_cast<Eigen::Index>(ch.amplitudes.size()));
    for (std::size_t m = 0; m < csi.n_snapshots(); ++m)
    {
        const CVec h = csi.stacked(m);
        CHECK((h - a * alpha).norm() / h.norm() < 1e-12);
    }
}

TEST_CASE("generate_csi - noise variance matches the SNR of the first path")
{
    const MultipathChannel ch = unit_path(4e-9);
    BandPlan plan = single_band(16);
    const int m_snapshots = 10000;
    const MultibandCsi csi = generate_csi(ch, plan, m_snapshots, 15.0, false, 3);
    const double sigma2 = std::pow(10.0, -1.5);
    REQUIRE(csi.noise_variance);
    CHECK(*csi.noise_variance == Approx(sigma2).epsilon(1e-12));
    const CMat a = build_full_steering(ch.delays, plan);
    double acc = 0.0;
    for (std::size_t m = 0; m < csi.n_snapshots(); ++m)
        acc += (csi.stacked(m) - a.col(0)).squaredNorm();
    const double sample = acc / (static_cast<double>(m_snapshots) * 16.0);
    CHECK(std::abs(sample / sigma2 - 1.0) < 0.02);
}

TEST_CASE("generate_csi - redrawn amplitudes follow the average powers")
{
    MultipathChannel ch = MultipathChannel::from_profile({2e-9, 9e-9}, {0.0, -6.0});
    const BandPlan plan = single_band(8);
    const int m_snapshots = 20000;
    const MultibandCsi csi = generate_csi(ch, plan, m_snapshots, kInf, true, 5);
    const CMat a = build_full_steering(ch.delays, plan);
    Eigen::ColPivHouseholderQR<CMat> qr(a);
    RVec power = RVec::Zero(2);
    for (std::size_t m = 0; m < csi.n_snapshots(); ++m)
        power += qr.solve(csi.stacked(m)).cwiseAbs2();
    power /= static_cast<double>(m_snapshots);
    CHECK(power(0) == Approx(1.0).epsilon(0.03));
    CHECK(power(1) == Approx(std::pow(10.0, -0.6)).epsilon(0.03));
}

TEST_CASE("generate_csi - seeds are reproducible")
{
    const MultibandCsi a = generate_csi(default_channel(), default_plan(), 2, 10.0, true, 42);
    const MultibandCsi b = generate_csi(default_channel(), default_plan(), 2, 10.0, true, 42);
    const MultibandCsi c = generate_csi(default_channel(), default_plan(), 2, 10.0, true, 43);
    CHECK(a.stacked(1) == b.stacked(1));
    CHECK(a.stacked(1) != c.stacked(1));
}

TEST_CASE("CounterRng - split streams are deterministic and distinct")
{
    const CounterRng root(9);
    CounterRng s1 = root.split(1), s1b = root.split(1), s2 = root.split(2);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i)
    {
        const auto x = s1();
        CHECK(x == s1b());
        seen.insert(x);
        seen.insert(s2());
    }
    CHECK(seen.size() == 2000);

    CounterRng g(1);
    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i)
        acc += std::norm(g.complex_normal(2.0));
    CHECK(acc / n == Approx(2.0).epsilon(0.01));
}

TEST_CASE("eliminate_phase_offset - no offset recovers the CSI up to sign")
{
    const MultibandCsi h = generate_csi(default_channel(), default_plan(), 2, kInf, true, 8);
    const PhaseOffsetResult r = eliminate_phase_offset(h, h);
    for (std::size_t m = 0; m < h.n_snapshots(); ++m)
        for (std::size_t i = 0; i < h.band_plan.n_bands(); ++i)
        {
            const CVec &ref = h.snapshots[m].per_band[i];
            const CVec &got = r.csi.snapshots[m].per_band[i];
            CHECK((got.cwiseAbs() - ref.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(std::min((got - ref).cwiseAbs().maxCoeff(), (got + ref).cwiseAbs().maxCoeff()) < 1e-9);
        }
}

TEST_CASE("eliminate_phase_offset - opposite offsets on a single path")
{
    const MultibandCsi h = generate_csi(unit_path(7e-9), default_plan(), 1, kInf, false, 1);
    MultibandCsi mobile = h, anchor = h;
    for (std::size_t i = 0; i < h.band_plan.n_bands(); ++i)
    {
        mobile.snapshots[0].per_band[i] *= std::polar(1.0, kPi / 3.0);
        anchor.snapshots[0].per_band[i] *= std::polar(1.0, -kPi / 3.0);
    }
    const PhaseOffsetResult r = eliminate_phase_offset(mobile, anchor);
    for (std::size_t i = 0; i < h.band_plan.n_bands(); ++i)
    {
        const CVec &ref = h.snapshots[0].per_band[i];
        const CVec &got = r.csi.snapshots[0].per_band[i];
        CHECK(std::min((got - ref).cwiseAbs().maxCoeff(), (got + ref).cwiseAbs().maxCoeff()) < 1e-12);
        CHECK(((got.array().square() - (mobile.snapshots[0].per_band[i].array() *
                                        anchor.snapshots[0].per_band[i].array()))
                   .abs()
                   .maxCoeff()) < 1e-12);
    }
}

TEST_CASE("eliminate_phase_offset - delays survive conjugate offsets")
{
    const MultipathChannel ch = MultipathChannel::from_profile({4e-9, 12e-9, 25e-9}, {0.0, -3.0, -6.0});
    const BandPlan plan = default_plan();
    const MultibandCsi h = generate_csi(ch, plan, 12, kInf, true, 21);
    MultibandCsi mobile = h, anchor = h;
    CounterRng rng(77);
    for (std::size_t i = 0; i < plan.n_bands(); ++i)
    {
        const cplx psi = std::polar(1.0, 2.0 * kPi * rng.uniform());
        for (std::size_t m = 0; m < h.n_snapshots(); ++m)
        {
            mobile.snapshots[m].per_band[i] *= psi;
            anchor.snapshots[m].per_band[i] *= std::conj(psi);
        }
    }
    PhaseOffsetResult r = eliminate_phase_offset(mobile, anchor);
    REQUIRE(r.branch_crossed.size() == h.n_snapshots());
    REQUIRE(r.branch_crossed[0].size() == plan.n_bands());
    // The per-band sign is left unresolved by the library; align it against the reference before estimating.
    for (std::size_t m = 0; m < h.n_snapshots(); ++m)
        for (std::size_t i = 0; i < plan.n_bands(); ++i)
        {
            CVec &got = r.csi.snapshots[m].per_band[i];
            if (std::real(got.dot(h.snapshots[m].per_band[i])) < 0.0)
                got = -got;
            CHECK((got - h.snapshots[m].per_band[i]).cwiseAbs().maxCoeff() < 1e-12);
        }
    MbwdeOptions opts;
    opts.k_order = 3;
    const DelayEstimate from_root = mbwde(r.csi, opts);
    const DelayEstimate from_truth = mbwde(h, opts);
    CHECK(max_abs_diff(from_root.delays, from_truth.delays) < 1e-15);
    CHECK(max_abs_diff(from_root.delays, ch.delays) < 1e-15);
}

TEST_CASE("eliminate_phase_offset - mismatched inputs")
{
    const MultibandCsi a = generate_csi(unit_path(1e-9), default_plan(), 2, kInf, false, 1);
    const MultibandCsi b = generate_csi(unit_path(1e-9), single_band(256), 2, kInf, false, 1);
    const MultibandCsi c = generate_csi(unit_path(1e-9), default_plan(), 3, kInf, false, 1);
    CHECK_THROWS_AS(eliminate_phase_offset(a, b), std::invalid_argument);
    CHECK_THROWS_AS(eliminate_phase_offset(a, c), std::invalid_argument);
}

TEST_CASE("MultibandCsi - validation")
{
    MultibandCsi csi = generate_csi(unit_path(1e-9), default_plan(), 2, kInf, false, 1);
    REQUIRE_NOTHROW(csi.validate());
    CHECK(csi.stacked(0).size() == 1024);
    csi.snapshots[1].per_band[2].resize(100);
    CHECK_THROWS_AS(csi.validate(), std::invalid_argument);
    MultibandCsi empty;
    empty.band_plan = default_plan();
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}
