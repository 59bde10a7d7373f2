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

#include <filesystem>
#include <string>
#include <vector>

namespace mbdelay
{
    /// Anchor layout and ground-truth positions for a ranging scenario.
    struct PositioningSetup
    {
        std::vector<Point2> anchors;
        std::vector<Point2> true_positions;
    };

    /// Loads a Monte-Carlo scenario from an INI file with optional sections [scenario], [channel], [bands] and
    /// [estimator]. Unset keys keep the defaults of Scenario. Lists are comma separated. Throws ConfigError for
    /// unreadable files, unknown keys, malformed values or a scenario that fails validation.
    Scenario load_scenario(const std::filesystem::path &path);

    /// Same as load_scenario for INI text held in memory; `origin` names the source in error messages.
    Scenario parse_scenario(const std::string &ini_text, const std::string &origin = "<memory>");

    /// Reads the [positioning] section: `anchors` and `true_positions` as "x y; x y; ..." in metres.
    PositioningSetup load_positioning(const std::filesystem::path &path);

    std::string to_string(MdlDimension d);
    MdlDimension parse_mdl_dimension(const std::string &name);
}
