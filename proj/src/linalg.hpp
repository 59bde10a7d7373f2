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

#include "mbdelay/types.hpp"

namespace mbdelay::linalg
{
    struct EigenPairs
    {
        RVec values;  ///< Descending
        CMat vectors; ///< Columns match values
    };

    /// The k largest eigenpairs of a Hermitian matrix (only the lower triangle is read).
    EigenPairs top_eigenpairs(const CMat &hermitian, int k);

    /// All eigenvalues of a Hermitian matrix in descending order.
    RVec eigenvalues_desc(const CMat &hermitian);
}
