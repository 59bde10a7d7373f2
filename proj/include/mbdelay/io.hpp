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

#include "mbdelay/bench.hpp"
#include "mbdelay/core_model.hpp"
#include "mbdelay/estimator.hpp"

#include <filesystem>
#include <string>

namespace mbdelay
{
    /// Shortest decimal text that reads back to the same double.
    std::string format_double(double v);

    /// Writes CSI as CSV with header `snapshot,band,subcarrier,re,im`.
    void write_csi_csv(const MultibandCsi &csi, const std::filesystem::path &path);

    /// Reads a CSV written by write_csi_csv. Every (snapshot, band, subcarrier) of the band plan must be present
    /// exactly once; throws ConfigError otherwise.
    MultibandCsi read_csi_csv(const std::filesystem::path &path, const BandPlan &plan);

    /// Absolute frequency of subcarrier n of band i: base + (n_i + n - N/2) * spacing.
    double subcarrier_frequency(const BandPlan &plan, std::size_t band, long n);

    /// Writes CSI as a channel frequency response table `freq_hz,re,im,snapshot`.
    void write_cfr_csv(const MultibandCsi &csi, const std::filesystem::path &path);

    /// Reads a frequency response table `freq_hz,re,im[,snapshot]` sampled on a uniform grid, possibly with gaps, and
    /// slices the subcarriers of the band plan out of it. The grid step is the smallest frequency spacing. Throws
    /// ConfigError when a sample lies off the grid, when the step differs from the band plan spacing (no
    /// interpolation is attempted) or when a band is not covered.
    MultibandCsi load_cfr_dataset(const std::filesystem::path &path, const BandPlan &plan);

    /// Writes `path_index,delay_ns,range_m,amp_re,amp_im,crb_ns`; amplitudes are those of the first snapshot and
    /// crb_ns is the square root of the attached CRB (empty when no CRB is attached).
    void write_estimate_csv(const DelayEstimate &est, const std::filesystem::path &path);

    /// Writes rmse.csv, errors.csv and a plotting script into the directory (created if missing).
    void emit_results(const BenchResult &result, const std::filesystem::path &dir);
}
