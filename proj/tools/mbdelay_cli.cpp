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

// Command line front end: simulation, estimation, bounds, baselines, Monte Carlo benchmarks, positioning and
// dataset ingestion. Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

#include "mbdelay/baselines.hpp"
#include "mbdelay/bench.hpp"
#include "mbdelay/config.hpp"
#include "mbdelay/crb.hpp"
#include "mbdelay/estimator.hpp"
#include "mbdelay/io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

using namespace mbdelay;

namespace
{
    constexpr int kExitConfig = 2;
    constexpr int kExitNumerical = 3;

    struct CommonArgs
    {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::optional<int> trials;
        std::string out;
        int threads = 1;
        std::string variant;
        std::vector<double> snr;
    };

    Scenario load(const CommonArgs &args)
    {
        Scenario sc = args.config.empty() ? Scenario{} : load_scenario(args.config);
        if (args.seed)
            sc.seed = *args.seed;
        if (args.trials)
            sc.trials = *args.trials;
        if (!args.variant.empty())
            sc.variant = parse_variant(args.variant);
        if (!args.snr.empty())
            sc.snr_db = args.snr;
        sc.validate();
        return sc;
    }

    double single_snr(const CommonArgs &args, const Scenario &sc)
    {
        if (args.snr.size() > 1)
            throw ConfigError("this command takes a single --snr value");
        return args.snr.empty() ? sc.snr_db.front() : args.snr.front();
    }

    std::ofstream open_out(const std::string &path)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + path);
        return out;
    }

    void write_delays_csv(const std::vector<double> &delays, const std::string &path)
    {
        auto out = open_out(path);
        out << "path_index,delay_ns,range_m\n";
        for (std::size_t k = 0; k < delays.size(); ++k)
            out << k << ',' << format_double(delays[k] * 1e9) << ',' << format_double(delays[k] * kSpeedOfLight) << '\n';
    }

    int cmd_simulate(const CommonArgs &args, const std::string &format)
    {
        const Scenario sc = load(args);
        const double snr = single_snr(args, sc);
        const MultibandCsi csi =
            generate_csi(sc.channel(), sc.band_plan(), sc.m_snapshots, snr, sc.redraw_amplitudes, sc.seed);
        const std::string path = args.out.empty() ? "csi.csv" : args.out;
        if (format == "cfr")
            write_cfr_csv(csi, path);
        else
            write_csi_csv(csi, path);
        fmt::print("wrote {} snapshots x {} bands x {} subcarriers at {} dB to {}\n", csi.n_snapshots(),
                   csi.band_plan.n_bands(), csi.band_plan.n_subcarriers, snr, path);
        return 0;
    }

    int cmd_estimate(const CommonArgs &args, const std::string &csi_path, std::optional<int> k_order, bool with_crb)
    {
        Scenario sc = load(args);
        if (k_order)
        {
            sc.k_order = k_order;
            sc.k_from_mdl = false;
        }
        const MultibandCsi csi = read_csi_csv(csi_path, sc.band_plan());
        MbwdeOptions opts = sc.estimator_options();
        opts.compute_crb = with_crb;
        const DelayEstimate est = mbwde(csi, opts);
        const std::string path = args.out.empty() ? "estimate.csv" : args.out;
        write_estimate_csv(est, path);
        fmt::print("K = {}, LOS delay {:.6f} ns, converged {}, wrote {}\n", est.k_order, est.delays.front() * 1e9,
                   est.converged, path);
        return 0;
    }

    int cmd_crb(const CommonArgs &args)
    {
        const Scenario sc = load(args);
        const MultipathChannel channel = sc.channel();
        const BandPlan plan = sc.band_plan();
        const std::string path = args.out.empty() ? "crb.csv" : args.out;
        auto out = open_out(path);
        out << "snr_db,path_index,delay_ns,crb_ns,crb_projector_ns,crb_decoupled_ns\n";
        for (const double snr : sc.snr_db)
        {
            const CrbInputs in = CrbInputs::from_channel(channel, plan, snr, sc.m_snapshots);
            const CrbResult bound = crb(in);
            if (bound.unreliable)
                fmt::print(stderr, "warning: FIM condition number {:.3g} at {} dB, bound is unreliable\n", bound.condition,
                           snr);
            for (std::size_t k = 0; k < in.delays.size(); ++k)
            {
                const DecoupledCrb dec = crb_decoupled(in, static_cast<int>(k));
                out << format_double(snr) << ',' << k << ',' << format_double(in.delays[k] * 1e9) << ','
                    << format_double(std::sqrt(bound.variances(static_cast<Eigen::Index>(k))) * 1e9) << ','
                    << format_double(std::sqrt(dec.projector) * 1e9) << ','
                    << format_double(std::sqrt(dec.fully_decoupled) * 1e9) << '\n';
            }
        }
        fmt::print("wrote {}\n", path);
        return 0;
    }

    int cmd_baseline(const CommonArgs &args, const std::string &csi_path, const std::string &method_name,
                     std::optional<int> k_order)
    {
        const Scenario sc = load(args);
        const Method method = parse_method(method_name);
        if (method == Method::kMbwde)
            throw ConfigError("baseline: --method must be music or esprit");
        const MultibandCsi csi = read_csi_csv(csi_path, sc.band_plan());
        const int k = k_order.value_or(sc.fixed_order());
        std::vector<double> delays;
        if (method == Method::kEsprit)
            delays = esprit_delays(csi, k, sc.p_rows);
        else
            delays = music_delays(csi, k, GridSpec{0.0, sc.grid_max_ns * 1e-9, sc.grid_step_ns * 1e-9}, sc.p_rows);
        const std::string path = args.out.empty() ? "baseline.csv" : args.out;
        write_delays_csv(delays, path);
        fmt::print("{}: LOS delay {:.6f} ns, wrote {}\n", method_name, delays.front() * 1e9, path);
        return 0;
    }

    int cmd_bench(const CommonArgs &args)
    {
        const Scenario sc = load(args);
        const BenchResult res = run_monte_carlo(sc, args.threads);
        const std::string dir = args.out.empty() ? "bench_out" : args.out;
        emit_results(res, dir);
        fmt::print("{:>8} {:>12} {:>12} {:>8} {:>9}\n", "snr_db", "rmse_ns", "crb_ns", "ratio", "diverged");
        for (const auto &p : res.points)
            fmt::print("{:>8.2f} {:>12.6f} {:>12.6f} {:>8.3f} {:>9}\n", p.snr_db, p.rmse_s * 1e9, p.crb_s * 1e9,
                       p.rmse_s / p.crb_s, p.diverged);
        fmt::print("{} trials per point in {:.2f} s, results in {}\n", sc.trials, res.wall_seconds, dir);
        return 0;
    }

    /// Reads `position_index,anchor_index,range_m`.
    std::map<long, std::map<long, double>> read_ranges(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open " + path);
        std::string line;
        std::getline(in, line);
        if (line.rfind("position_index,anchor_index,range_m", 0) != 0)
            throw ConfigError(path + ": expected header position_index,anchor_index,range_m");
        std::map<long, std::map<long, double>> ranges;
        std::size_t line_no = 1;
        while (std::getline(in, line))
        {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            std::istringstream ss(line);
            long pos = 0, anchor = 0;
            double r = 0.0;
            char c1 = 0, c2 = 0;
            if (!(ss >> pos >> c1 >> anchor >> c2 >> r) || c1 != ',' || c2 != ',')
                throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed row");
            ranges[pos][anchor] = r;
        }
        return ranges;
    }

    int cmd_position(const CommonArgs &args, const std::string &ranges_path, bool remove_bias)
    {
        if (args.config.empty())
            throw ConfigError("position: --config with a [positioning] section is required");
        const PositioningSetup setup = load_positioning(args.config);
        const auto ranges = read_ranges(ranges_path);
        const bool have_truth = !setup.true_positions.empty();

        auto distance = [](const Point2 &a, const Point2 &b) { return std::hypot(a[0] - b[0], a[1] - b[1]); };
        std::vector<double> range_errors;
        for (const auto &[pos, per_anchor] : ranges)
        {
            if (pos < 0 || (have_truth && pos >= static_cast<long>(setup.true_positions.size())))
                throw ConfigError(fmt::format("position: position index {} has no true position", pos));
            for (const auto &[a, r] : per_anchor)
            {
                if (a < 0 || a >= static_cast<long>(setup.anchors.size()))
                    throw ConfigError(fmt::format("position: anchor index {} is not configured", a));
                if (have_truth)
                    range_errors.push_back(r - distance(setup.anchors[a], setup.true_positions[pos]));
            }
        }
        double bias = 0.0;
        if (remove_bias)
        {
            if (!have_truth)
                throw ConfigError("position: --remove-bias needs true_positions in [positioning]");
            bias = percentile(range_errors, 50.0);
        }

        const std::string path = args.out.empty() ? "positions.csv" : args.out;
        auto out = open_out(path);
        out << "position_index,x_m,y_m,error_m\n";
        std::vector<double> errors;
        for (const auto &[pos, per_anchor] : ranges)
        {
            std::vector<Point2> anchors;
            std::vector<double> r;
            for (const auto &[a, d] : per_anchor)
            {
                anchors.push_back(setup.anchors[a]);
                r.push_back(std::max(0.0, d - bias));
            }
            const Point2 p = trilaterate(anchors, r);
            out << pos << ',' << format_double(p[0]) << ',' << format_double(p[1]) << ',';
            if (have_truth)
            {
                const double e = distance(p, setup.true_positions[pos]);
                errors.push_back(e);
                out << format_double(e);
            }
            out << '\n';
        }
        if (remove_bias)
            fmt::print("removed range bias {:.4f} m\n", bias);
        if (!errors.empty())
        {
            const Quantiles q = error_quantiles(errors);
            fmt::print("position error: median {:.4f} m, Q80 {:.4f} m, Q95 {:.4f} m\n", q.median, q.q80, q.q95);
        }
        fmt::print("wrote {}\n", path);
        return 0;
    }

    int cmd_ingest(const CommonArgs &args, const std::string &cfr_path)
    {
        const Scenario sc = load(args);
        const MultibandCsi csi = load_cfr_dataset(cfr_path, sc.band_plan());
        const std::string path = args.out.empty() ? "csi.csv" : args.out;
        write_csi_csv(csi, path);
        fmt::print("sliced {} snapshots x {} bands from {} into {}\n", csi.n_snapshots(), csi.band_plan.n_bands(),
                   cfr_path, path);
        return 0;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Multiband OFDM delay estimation toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", args.config, "Scenario INI file")->check(CLI::ExistingFile);
        sub->add_option("--seed", args.seed, "Override the scenario seed");
        sub->add_option("--trials", args.trials, "Override the trial count");
        sub->add_option("--out", args.out, "Output file (directory for bench)");
        sub->add_option("--threads", args.threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--variant", args.variant, "plain, fb, nr or fbnr");
        sub->add_option("--snr", args.snr, "SNR value(s) in dB")->delimiter(',');
    };

    std::string csi_path, cfr_path, ranges_path, method = "esprit", format = "csi";
    std::optional<int> k_order;
    bool with_crb = false, remove_bias = false;

    auto *simulate = app.add_subcommand("simulate", "Draw one synthetic CSI realization");
    add_common(simulate);
    simulate->add_option("--format", format, "csi or cfr")->check(CLI::IsMember({"csi", "cfr"}));

    auto *estimate = app.add_subcommand("estimate", "Estimate delays from a CSI CSV");
    add_common(estimate);
    estimate->add_option("--csi", csi_path, "CSI CSV")->required()->check(CLI::ExistingFile);
    estimate->add_option("--k", k_order, "Fixed path count, overrides the scenario");
    estimate->add_flag("--crb", with_crb, "Attach the CRB at the estimates");

    auto *crb_cmd = app.add_subcommand("crb", "Per-path Cramer-Rao bounds for the scenario");
    add_common(crb_cmd);

    auto *baseline = app.add_subcommand("baseline", "MUSIC or ESPRIT on contiguous CSI");
    add_common(baseline);
    baseline->add_option("--csi", csi_path, "CSI CSV")->required()->check(CLI::ExistingFile);
    baseline->add_option("--method", method, "music or esprit")->check(CLI::IsMember({"music", "esprit"}));
    baseline->add_option("--k", k_order, "Fixed path count, overrides the scenario");

    auto *bench = app.add_subcommand("bench", "Monte Carlo RMSE versus CRB sweep");
    add_common(bench);

    auto *position = app.add_subcommand("position", "2-D least-squares positioning from ranges");
    add_common(position);
    position->add_option("--ranges", ranges_path, "CSV position_index,anchor_index,range_m")
        ->required()
        ->check(CLI::ExistingFile);
    position->add_flag("--remove-bias", remove_bias, "Subtract the median range error against the true positions");

    auto *ingest = app.add_subcommand("ingest", "Slice a measured frequency response into CSI");
    add_common(ingest);
    ingest->add_option("--cfr", cfr_path, "CSV freq_hz,re,im[,snapshot]")->required()->check(CLI::ExistingFile);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try
    {
        if (simulate->parsed())
            return cmd_simulate(args, format);
        if (estimate->parsed())
            return cmd_estimate(args, csi_path, k_order, with_crb);
        if (crb_cmd->parsed())
            return cmd_crb(args);
        if (baseline->parsed())
            return cmd_baseline(args, csi_path, method, k_order);
        if (bench->parsed())
            return cmd_bench(args);
        if (position->parsed())
            return cmd_position(args, ranges_path, remove_bias);
        if (ingest->parsed())
            return cmd_ingest(args, cfr_path);
    }
    catch (const NumericalError &e)
    {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    catch (const ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const std::invalid_argument &e)
    {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
