// Copyright 2026 The ddq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Angular-momentum algebra for arbitrary half-integer j: ladder and Cartesian
// spin matrices, closed-form Wigner d-matrices and rotation unitaries.
//
// Basis ordering is m = -j .. +j ascending for every matrix in the library.

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "ddq/errors.hpp"

namespace ddq {

using Complex = std::complex<double>;
using SpinMatrix = Eigen::MatrixXcd;

/// A non-negative or signed half-integer, stored as twice its value.
class HalfInteger {
  public:
    constexpr HalfInteger() = default;

    static constexpr HalfInteger from_twice(int twice) {
        HalfInteger h;
        h.twice_ = twice;
        return h;
    }

    /// Throws ConfigError unless 2*value is an integer.
    static HalfInteger from_double(double value) {
        const double twice = 2.0 * value;
        if (!std::isfinite(twice) || std::abs(twice - std::round(twice)) > 1e-12) {
            throw ConfigError("not a half-integer: " + std::to_string(value));
        }
        return from_twice(static_cast<int>(std::lround(twice)));
    }

    constexpr int twice() const {
        return twice_;
    }
    constexpr double value() const {
        return 0.5 * twice_;
    }
    constexpr HalfInteger operator-() const {
        return from_twice(-twice_);
    }
    constexpr bool operator==(const HalfInteger &) const = default;
    constexpr auto operator<=>(const HalfInteger &) const = default;

    /// "5/2", "-1/2", "2".
    std::string to_string() const {
        if (twice_ % 2 == 0) {
            return std::to_string(twice_ / 2);
        }
        return std::to_string(twice_) + "/2";
    }

  private:
    int twice_ = 0;
};

inline HalfInteger validated_spin(double j) {
    const HalfInteger h = HalfInteger::from_double(j);
    if (h.twice() < 0) {
        throw ConfigError("spin quantum number must be non-negative, got " + std::to_string(j));
    }
    // Exact factorials up to (2j)! must fit in 64 bits.
    if (h.twice() > 30) {
        throw ConfigError("spin quantum number too large for exact factorial arithmetic");
    }
    return h;
}

inline int spin_dimension(HalfInteger j) {
    return j.twice() + 1;
}

/// Magnetic quantum number of basis index i (0-based, ascending m).
inline double basis_m(HalfInteger j, int index) {
    return -j.value() + index;
}

struct SpinOperators {
    SpinMatrix jx;
    SpinMatrix jy;
    SpinMatrix jz;
    SpinMatrix jplus;
    SpinMatrix jminus;
};

/// Standard (Condon-Shortley) spin matrices in the |j,m> basis.
inline SpinOperators spin_operators(HalfInteger j) {
    if (j.twice() < 0) {
        throw ConfigError("spin quantum number must be non-negative");
    }
    const int dim = spin_dimension(j);
    const double jj = j.value();
    SpinOperators ops;
    ops.jplus = SpinMatrix::Zero(dim, dim);
    ops.jz = SpinMatrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
        const double m = basis_m(j, i);
        ops.jz(i, i) = m;
        if (i + 1 < dim) {
            ops.jplus(i + 1, i) = std::sqrt(jj * (jj + 1.0) - m * (m + 1.0));
        }
    }
    ops.jminus = ops.jplus.adjoint();
    ops.jx = 0.5 * (ops.jplus + ops.jminus);
    ops.jy = Complex(0.0, -0.5) * (ops.jplus - ops.jminus);
    return ops;
}

inline SpinOperators spin_operators(double j) {
    return spin_operators(validated_spin(j));
}

namespace detail {

inline std::uint64_t factorial(int n) {
    std::uint64_t r = 1;
    for (int k = 2; k <= n; ++k) {
        r *= static_cast<std::uint64_t>(k);
    }
    return r;
}

}  // namespace detail

/// Single element d^j_{m',m}(theta) from the closed-form factorial sum.
/// Arguments are twice the magnetic quantum numbers.
inline double wigner_d(HalfInteger j, int twice_mp, int twice_m, double theta) {
    const int jpmp = (j.twice() + twice_mp) / 2;  // j + m'
    const int jmmp = (j.twice() - twice_mp) / 2;  // j - m'
    const int jpm = (j.twice() + twice_m) / 2;    // j + m
    const int jmm = (j.twice() - twice_m) / 2;    // j - m
    const int mp_minus_m = (twice_mp - twice_m) / 2;
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const double prefactor = std::sqrt(static_cast<double>(detail::factorial(jpmp)) *
                                       static_cast<double>(detail::factorial(jmmp)) *
                                       static_cast<double>(detail::factorial(jpm)) *
                                       static_cast<double>(detail::factorial(jmm)));
    double sum = 0.0;
    for (int k = 0; k <= j.twice(); ++k) {
        const int a = jpm - k;
        const int b = mp_minus_m + k;
        const int d = jmmp - k;
        if (a < 0 || b < 0 || d < 0) {
            continue;
        }
        const double denom = static_cast<double>(detail::factorial(a)) * static_cast<double>(detail::factorial(k)) *
                             static_cast<double>(detail::factorial(b)) * static_cast<double>(detail::factorial(d));
        const double sign = (b % 2 == 0) ? 1.0 : -1.0;
        sum += sign * std::pow(c, j.twice() - mp_minus_m - 2 * k) * std::pow(s, mp_minus_m + 2 * k) / denom;
    }
    return prefactor * sum;
}

/// Wigner small-d matrix; equals exp(-i theta Jy) in the ascending-m basis.
inline SpinMatrix wigner_d_matrix(HalfInteger j, double theta) {
    const int dim = spin_dimension(j);
    SpinMatrix d(dim, dim);
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
            d(r, c) = wigner_d(j, -j.twice() + 2 * r, -j.twice() + 2 * c, theta);
        }
    }
    return d;
}

inline SpinMatrix wigner_d_matrix(double j, double theta) {
    return wigner_d_matrix(validated_spin(j), theta);
}

/// exp(-i * area * (Jx cos(axis_phase) + Jy sin(axis_phase))), computed by
/// diagonalising the Hermitian generator.
inline SpinMatrix rotation_unitary(HalfInteger j, double area, double axis_phase) {
    const SpinOperators ops = spin_operators(j);
    const SpinMatrix generator = std::cos(axis_phase) * ops.jx + std::sin(axis_phase) * ops.jy;
    Eigen::SelfAdjointEigenSolver<SpinMatrix> eig(generator);
    const Eigen::VectorXcd phases =
        (eig.eigenvalues().cast<Complex>() * Complex(0.0, -area)).array().exp().matrix();
    return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

inline SpinMatrix rotation_unitary(double j, double area, double axis_phase) {
    return rotation_unitary(validated_spin(j), area, axis_phase);
}

}  // namespace ddq
