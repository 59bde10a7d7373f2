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
#include "mbdelay/types.hpp"

#include <optional>
#include <vector>

namespace mbdelay
{
    /// Uniform delay grid [t_min, t_max] with the given step, all in seconds.
    struct GridSpec
    {
        double t_min = 0.0;
        double t_max = 100e-9;
        double step = 0.005e-9;

        void validate() const;
        std::size_t size() const;
        double at(std::size_t i) const { return t_min + static_cast<double>(i) * step; }
    };

    /// Joins adjacent bands (offsets exactly N apart) into one band of L * N subcarriers.
    /// Throws std::invalid_argument when the spectrum has gaps.
    MultibandCsi merge_contiguous(const MultibandCsi &csi);

    /// MUSIC pseudo-spectrum 1 / ||E_n^H a(tau)||^2 on the grid, from the multi-snapshot Hankel stack of the
    /// contiguous CSI. p_rows defaults to ceil(2N / 3) of the merged band.
    RVec music_spectrum(const MultibandCsi &csi, int k_order, const GridSpec &grid, std::optional<int> p_rows = {});

    /// The k_order strongest strict local maxima of the MUSIC spectrum, sorted by delay.
    /// Throws NumericalError when fewer than k_order peaks exist.
    std::vector<double> music_delays(const MultibandCsi &csi, int k_order, const GridSpec &grid,
                                     std::optional<int> p_rows = {});

    /// ESPRIT on the contiguous CSI: least-squares shift operator between the first and last P - 1 rows of the
    /// signal basis, delays from the angles of its eigenvalues. Wrapped into [0, delay period) and sorted ascending.
    std::vector<double> esprit_delays(const MultibandCsi &csi, int k_order, std::optional<int> p_rows = {});
}
