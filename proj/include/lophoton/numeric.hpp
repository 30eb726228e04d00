/**
 * Copyright 2026 The lophoton Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "lophoton/error.hpp"

namespace lophoton {

using complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double hermitian_tolerance = 1e-10;
inline constexpr double psd_clamp_tolerance = 1e-10;

inline bool all_finite(const ComplexMatrix& m) {
    return m.allFinite();
}

inline double max_abs_entry(const ComplexMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const ComplexMatrix& m, double tol = hermitian_tolerance) {
    return m.rows() == m.cols() && max_abs_entry(m - m.adjoint()) <= tol;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

struct HermitianEigen {
    std::vector<double> values;  // descending
    ComplexMatrix vectors;       // column k pairs with values[k]
};

inline HermitianEigen hermitian_eigen(const ComplexMatrix& m) {
    if (m.rows() != m.cols())
        throw error(errc::bad_dimension, "hermitian_eigen needs a square matrix");
    if (!all_finite(m))
        throw error(errc::invalid_argument, "matrix has non-finite entries");
    if (!is_hermitian(m))
        throw error(errc::not_hermitian, "max |m - m^dagger| exceeds 1e-10");

    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m);
    if (solver.info() != Eigen::Success)
        throw error(errc::invalid_argument, "eigen decomposition failed");

    // Eigen returns ascending order.
    const auto n = m.rows();
    HermitianEigen out;
    out.values.resize(static_cast<std::size_t>(n));
    out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values[static_cast<std::size_t>(k)] = solver.eigenvalues()(n - 1 - k);
        out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
    }
    return out;
}

enum class subsystem { first, second };

inline ComplexMatrix partial_trace(const ComplexMatrix& rho, subsystem keep) {
    if (rho.rows() != 4 || rho.cols() != 4)
        throw error(errc::bad_dimension, "partial_trace expects a 4x4 two-qubit matrix");
    ComplexMatrix out = ComplexMatrix::Zero(2, 2);
    // rho index = 2*a + b, a = first qubit, b = second qubit
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                out(i, j) += keep == subsystem::first ? rho(2 * i + k, 2 * j + k)
                                                      : rho(2 * k + i, 2 * k + j);
    return out;
}

// Applies f to the spectrum of a Hermitian PSD matrix. Eigenvalues in
// [-1e-10, 0) are clamped to zero; anything more negative is an error.
template <typename F>
ComplexMatrix psd_function(const ComplexMatrix& m, F&& f) {
    const auto eig = hermitian_eigen(m);
    const auto n = m.rows();
    Eigen::VectorXd mapped(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double lambda = eig.values[static_cast<std::size_t>(k)];
        if (lambda < -psd_clamp_tolerance)
            throw error(errc::negative_eigenvalue,
                        "eigenvalue " + std::to_string(lambda) + " below -1e-10");
        mapped(k) = f(std::max(lambda, 0.0));
    }
    return eig.vectors * mapped.asDiagonal() * eig.vectors.adjoint();
}

inline ComplexMatrix psd_sqrt(const ComplexMatrix& m) {
    return psd_function(m, [](double x) { return std::sqrt(x); });
}

inline ComplexMatrix pauli(int index) {
    ComplexMatrix s(2, 2);
    const complex i{0.0, 1.0};
    switch (index) {
    case 0: s << 1, 0, 0, 1; break;
    case 1: s << 0, 1, 1, 0; break;
    case 2: s << 0, -i, i, 0; break;
    case 3: s << 1, 0, 0, -1; break;
    default: throw error(errc::invalid_argument, "pauli index must be 0..3");
    }
    return s;
}

}  // namespace lophoton
