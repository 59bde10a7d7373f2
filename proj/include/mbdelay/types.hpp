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

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace mbdelay
{
    using cplx = std::complex<double>;
    using CVec = Eigen::VectorXcd;
    using CMat = Eigen::MatrixXcd;
    using RVec = Eigen::VectorXd;
    using RMat = Eigen::MatrixXd;

    /// Speed of light in vacuum [m/s], used for delay-to-range conversion.
    inline constexpr double kSpeedOfLight = 299792458.0;

    inline constexpr double kPi = 3.14159265358979323846;

    /// Raised when a numerical stage cannot produce a meaningful result, e.g. a
    /// rank-deficient steering matrix or an eigen decomposition that fails.
    /// Precondition violations on user input raise std::invalid_argument instead.
    class NumericalError : public std::runtime_error
    {
    public:
        explicit NumericalError(const std::string &what) : std::runtime_error(what) {}
    };

    /// Raised by the configuration and dataset readers for malformed or inconsistent input files.
    class ConfigError : public std::runtime_error
    {
    public:
        explicit ConfigError(const std::string &what) : std::runtime_error(what) {}
    };
}
