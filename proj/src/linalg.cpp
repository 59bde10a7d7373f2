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

#include "linalg.hpp"

#include <lapacke.h>

#include <mutex>
#include <string>
#include <vector>

extern "C" void openblas_set_num_threads(int num_threads);

namespace mbdelay::linalg
{
    namespace
    {
        // Below this size the Eigen solver is as fast as LAPACK and needs no workspace handling.
        constexpr Eigen::Index kSmallProblem = 96;

        // Parallelism comes from independent trials; a threaded BLAS underneath would oversubscribe the cores.
        void single_threaded_blas()
        {
            static std::once_flag once;
            std::call_once(once, [] { openblas_set_num_threads(1); });
        }
    }

    EigenPairs top_eigenpairs(const CMat &hermitian, int k)
    {
        const Eigen::Index n = hermitian.rows();
        if (hermitian.cols() != n || k < 1 || k > n)
            throw std::invalid_argument("top_eigenpairs: need a square matrix and 1 <= k <= n");

        EigenPairs out;
        if (n <= kSmallProblem)
        {
            Eigen::SelfAdjointEigenSolver<CMat> es(hermitian);
            if (es.info() != Eigen::Success)
                throw NumericalError("top_eigenpairs: eigen decomposition did not converge");
            out.values = es.eigenvalues().tail(k).reverse();
            out.vectors = es.eigenvectors().rightCols(k).rowwise().reverse();
            return out;
        }

        single_threaded_blas();
        CMat a = hermitian;
        RVec w(n);
        CMat z(n, k);
        std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
        lapack_int found = 0;
        const lapack_int info = LAPACKE_zheevr(
            LAPACK_COL_MAJOR, 'V', 'I', 'L', static_cast<lapack_int>(n), reinterpret_cast<lapack_complex_double *>(a.data()),
            static_cast<lapack_int>(n), 0.0, 0.0, static_cast<lapack_int>(n - k + 1), static_cast<lapack_int>(n), 0.0, &found,
            w.data(), reinterpret_cast<lapack_complex_double *>(z.data()), static_cast<lapack_int>(n), support.data());
        if (info != 0 || found != k)
            throw NumericalError("top_eigenpairs: LAPACK zheevr failed with info " + std::to_string(info));
        out.values = w.head(k).reverse();
        out.vectors = z.rowwise().reverse();
        return out;
    }

    RVec eigenvalues_desc(const CMat &hermitian)
    {
        Eigen::SelfAdjointEigenSolver<CMat> es(hermitian, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw NumericalError("eigenvalues_desc: eigen decomposition did not converge");
        return es.eigenvalues().reverse();
    }
}
