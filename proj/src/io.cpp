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

#include "mbdelay/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

namespace mbdelay
{
    namespace
    {
        std::vector<std::string> split_line(const std::string &line)
        {
            std::vector<std::string> out;
            std::string field;
            std::istringstream ss(line);
            while (std::getline(ss, field, ','))
            {
                const auto b = field.find_first_not_of(" \t\r");
                const auto e = field.find_last_not_of(" \t\r");
                out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
            }
            return out;
        }

        double parse_number(const std::string &text, const std::filesystem::path &path, std::size_t line_no)
        {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || ptr != text.data() + text.size())
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": cannot parse number '" + text + "'");
            return v;
        }

        long parse_integer(const std::string &text, const std::filesystem::path &path, std::size_t line_no)
        {
            long v = 0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || ptr != text.data() + text.size())
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": cannot parse integer '" + text + "'");
            return v;
        }

        std::ifstream open_input(const std::filesystem::path &path)
        {
            std::ifstream in(path);
            if (!in)
                throw ConfigError("cannot open " + path.string());
            return in;
        }

        std::ofstream open_output(const std::filesystem::path &path)
        {
            std::ofstream out(path, std::ios::binary);
            if (!out)
                throw std::runtime_error("cannot write " + path.string());
            return out;
        }

        void expect_header(std::ifstream &in, const std::filesystem::path &path, const std::vector<std::string> &required)
        {
            std::string line;
            if (!std::getline(in, line))
                throw ConfigError(path.string() + ": empty file");
            const auto cols = split_line(line);
            if (cols.size() < required.size() || !std::equal(required.begin(), required.end(), cols.begin()))
            {
                std::string want;
                for (const auto &c : required)
                    want += (want.empty() ? "" : ",") + c;
                throw ConfigError(path.string() + ": expected header starting with " + want);
            }
        }
    }

    std::string format_double(double v)
    {
        if (std::isnan(v))
            return "nan";
        return fmt::format("{}", v);
    }

    void write_csi_csv(const MultibandCsi &csi, const std::filesystem::path &path)
    {
        csi.validate();
        auto out = open_output(path);
        out << "snapshot,band,subcarrier,re,im\n";
        for (std::size_t m = 0; m < csi.n_snapshots(); ++m)
            for (std::size_t i = 0; i < csi.band_plan.n_bands(); ++i)
            {
                const CVec &h = csi.snapshots[m].per_band[i];
                for (Eigen::Index n = 0; n < h.size(); ++n)
                    out << m << ',' << i << ',' << n << ',' << format_double(h(n).real()) << ','
                        << format_double(h(n).imag()) << '\n';
            }
    }

    MultibandCsi read_csi_csv(const std::filesystem::path &path, const BandPlan &plan)
    {
        plan.validate();
        auto in = open_input(path);
        expect_header(in, path, {"snapshot", "band", "subcarrier", "re", "im"});

        std::map<long, std::vector<CVec>> snaps;
        std::map<long, std::vector<std::vector<bool>>> seen;
        const long n_sub = plan.n_subcarriers;
        const long n_bands = static_cast<long>(plan.n_bands());
        std::string line;
        std::size_t line_no = 1;
        while (std::getline(in, line))
        {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            const auto f = split_line(line);
            if (f.size() != 5)
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 5 columns");
            const long m = parse_integer(f[0], path, line_no);
            const long b = parse_integer(f[1], path, line_no);
            const long n = parse_integer(f[2], path, line_no);
            if (m < 0 || b < 0 || b >= n_bands || n < 0 || n >= n_sub)
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": index outside the band plan");
            auto [it, fresh] = snaps.try_emplace(m, std::vector<CVec>(plan.n_bands(), CVec::Zero(n_sub)));
            auto &mask = seen.try_emplace(m, std::vector<std::vector<bool>>(plan.n_bands(), std::vector<bool>(n_sub))).first->second;
            if (mask[b][n])
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": duplicate entry");
            mask[b][n] = true;
            it->second[b](n) = cplx(parse_number(f[3], path, line_no), parse_number(f[4], path, line_no));
        }
        if (snaps.empty())
            throw ConfigError(path.string() + ": no CSI rows");

        MultibandCsi csi;
        csi.band_plan = plan;
        for (auto &[m, bands] : snaps)
        {
            for (long b = 0; b < n_bands; ++b)
                if (std::count(seen[m][b].begin(), seen[m][b].end(), true) != n_sub)
                    throw ConfigError(path.string() + ": snapshot " + std::to_string(m) + " band " + std::to_string(b) +
                                      " is incomplete");
            csi.snapshots.push_back(CsiSnapshot{std::move(bands), static_cast<int>(m)});
        }
        return csi;
    }

    double subcarrier_frequency(const BandPlan &plan, std::size_t band, long n)
    {
        return plan.base_frequency +
               static_cast<double>(plan.band_offsets.at(band) + n - plan.n_subcarriers / 2) * plan.subcarrier_spacing;
    }

    void write_cfr_csv(const MultibandCsi &csi, const std::filesystem::path &path)
    {
        csi.validate();
        auto out = open_output(path);
        out << "freq_hz,re,im,snapshot\n";
        for (std::size_t m = 0; m < csi.n_snapshots(); ++m)
            for (std::size_t i = 0; i < csi.band_plan.n_bands(); ++i)
            {
                const CVec &h = csi.snapshots[m].per_band[i];
                for (Eigen::Index n = 0; n < h.size(); ++n)
                    out << format_double(subcarrier_frequency(csi.band_plan, i, n)) << ',' << format_double(h(n).real())
                        << ',' << format_double(h(n).imag()) << ',' << m << '\n';
            }
    }

    MultibandCsi load_cfr_dataset(const std::filesystem::path &path, const BandPlan &plan)
    {
        plan.validate();
        auto in = open_input(path);
        expect_header(in, path, {"freq_hz", "re", "im"});

        std::map<long, std::vector<std::pair<double, cplx>>> rows;
        std::string line;
        std::size_t line_no = 1;
        while (std::getline(in, line))
        {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            const auto f = split_line(line);
            if (f.size() != 3 && f.size() != 4)
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 3 or 4 columns");
            const long m = f.size() == 4 ? parse_integer(f[3], path, line_no) : 0;
            rows[m].emplace_back(parse_number(f[0], path, line_no),
                                 cplx(parse_number(f[1], path, line_no), parse_number(f[2], path, line_no)));
        }
        if (rows.empty())
            throw ConfigError(path.string() + ": no frequency response rows");

        const double spacing = plan.subcarrier_spacing;
        MultibandCsi csi;
        csi.band_plan = plan;
        for (auto &[m, samples] : rows)
        {
            std::sort(samples.begin(), samples.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
            if (samples.size() < 2)
                throw ConfigError(path.string() + ": snapshot " + std::to_string(m) + " has fewer than two frequencies");
            // The grid step is the smallest spacing; gaps between bands are allowed but every sample must sit on
            // the grid.
            const double f0 = samples.front().first;
            double step = std::numeric_limits<double>::infinity();
            for (std::size_t k = 1; k < samples.size(); ++k)
            {
                const double d = samples[k].first - samples[k - 1].first;
                if (!(d > 0.0))
                    throw ConfigError(path.string() + ": duplicate frequency " + format_double(samples[k].first) +
                                      " Hz in snapshot " + std::to_string(m));
                step = std::min(step, d);
            }
            std::map<long, cplx> grid;
            for (const auto &[f, value] : samples)
            {
                const double pos = (f - f0) / step;
                if (std::abs(pos - std::round(pos)) > 1e-3)
                    throw ConfigError(path.string() + ": frequency " + format_double(f) +
                                      " Hz is not on a uniform grid with step " + format_double(step) + " Hz");
                grid.emplace(std::lround(pos), value);
            }
            if (std::abs(step - spacing) > 1e-3 * spacing)
                throw ConfigError(path.string() + ": frequency grid spacing " + format_double(step) +
                                  " Hz differs from the band plan subcarrier spacing " + format_double(spacing) +
                                  " Hz; resample the measurement onto the subcarrier grid before loading, the loader "
                                  "does not interpolate");

            CsiSnapshot snap;
            snap.snapshot_id = static_cast<int>(m);
            for (std::size_t i = 0; i < plan.n_bands(); ++i)
            {
                CVec h(plan.n_subcarriers);
                for (long n = 0; n < plan.n_subcarriers; ++n)
                {
                    const double f = subcarrier_frequency(plan, i, n);
                    const double pos = (f - f0) / step;
                    const auto it = grid.find(std::lround(pos));
                    if (it == grid.end() || std::abs(pos - std::round(pos)) > 1e-3)
                        throw ConfigError(path.string() + ": band " + std::to_string(i) + " (subcarrier at " +
                                          format_double(f) + " Hz) is not covered by the dataset");
                    h(n) = it->second;
                }
                snap.per_band.push_back(std::move(h));
            }
            csi.snapshots.push_back(std::move(snap));
        }
        return csi;
    }

    void write_estimate_csv(const DelayEstimate &est, const std::filesystem::path &path)
    {
        auto out = open_output(path);
        out << "path_index,delay_ns,range_m,amp_re,amp_im,crb_ns\n";
        for (std::size_t k = 0; k < est.delays.size(); ++k)
        {
            const cplx amp = est.amplitudes.empty() ? cplx() : est.amplitudes.front()(static_cast<Eigen::Index>(k));
            out << k << ',' << format_double(est.delays[k] * 1e9) << ',' << format_double(est.delays[k] * kSpeedOfLight)
                << ',' << format_double(amp.real()) << ',' << format_double(amp.imag()) << ',';
            if (est.crb)
                out << format_double(std::sqrt((*est.crb)[k]) * 1e9);
            out << '\n';
        }
    }

    void emit_results(const BenchResult &result, const std::filesystem::path &dir)
    {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec)
            throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

        {
            auto out = open_output(dir / "rmse.csv");
            out << "snr_db,rmse_ns,crb_ns,trials,diverged\n";
            for (const auto &p : result.points)
                out << format_double(p.snr_db) << ',' << format_double(p.rmse_s * 1e9) << ','
                    << format_double(p.crb_s * 1e9) << ',' << p.trials << ',' << p.diverged << '\n';
        }
        {
            auto out = open_output(dir / "errors.csv");
            out << "snr_db,trial,los_error_ns,k_order\n";
            for (const auto &p : result.points)
                for (std::size_t t = 0; t < p.los_errors_s.size(); ++t)
                    out << format_double(p.snr_db) << ',' << t << ',' << format_double(p.los_errors_s[t] * 1e9) << ','
                        << p.k_estimates[t] << '\n';
        }
        {
            auto out = open_output(dir / "plot_rmse.py");
            out << "# Plots rmse.csv (RMSE and CRB of the LOS delay versus SNR) from this directory.\n"
                   "import csv\n"
                   "import matplotlib.pyplot as plt\n\n"
                   "with open('rmse.csv') as f:\n"
                   "    rows = list(csv.DictReader(f))\n"
                   "snr = [float(r['snr_db']) for r in rows]\n"
                   "plt.semilogy(snr, [float(r['rmse_ns']) for r in rows], 'o-', label='RMSE')\n"
                   "plt.semilogy(snr, [float(r['crb_ns']) for r in rows], 'k--', label='sqrt(CRB)')\n"
                   "plt.xlabel('SNR [dB]')\n"
                   "plt.ylabel('LOS delay error [ns]')\n"
                   "plt.legend()\n"
                   "plt.grid(True, which='both')\n"
                   "plt.savefig('rmse.png', dpi=150)\n";
        }
    }
}
