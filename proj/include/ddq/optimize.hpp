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

// Small dense optimizers for the campaign fits: Nelder-Mead for robust
// starts, Levenberg-Marquardt for polishing least-squares problems.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace ddq::optimize {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct MinimizeResult {
    Vector x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

inline MinimizeResult nelder_mead(const std::function<double(const Vector &)> &f, const Vector &x0,
                                  const Vector &initial_step, double ftol = 1e-12, int max_iterations = 2000) {
    const int n = static_cast<int>(x0.size());
    std::vector<Vector> simplex(n + 1, x0);
    std::vector<double> val(n + 1);
    for (int i = 0; i < n; ++i) simplex[i + 1](i) += initial_step(i);
    for (int i = 0; i <= n; ++i) val[i] = f(simplex[i]);
    std::vector<int> order(n + 1);

    MinimizeResult out;
    for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
        const int best = order[0], worst = order[n], second = order[n - 1];
        if (std::abs(val[worst] - val[best]) <= ftol * (std::abs(val[best]) + ftol)) {
            out.converged = true;
            break;
        }
        Vector centroid = Vector::Zero(n);
        for (int i = 0; i < n; ++i) centroid += simplex[order[i]];
        centroid /= n;
        auto along = [&](double t) -> Vector { return centroid + t * (simplex[worst] - centroid); };

        const Vector r = along(-1.0);
        const double fr = f(r);
        if (fr < val[best]) {
            const Vector e = along(-2.0);
            const double fe = f(e);
            if (fe < fr) {
                simplex[worst] = e, val[worst] = fe;
            } else {
                simplex[worst] = r, val[worst] = fr;
            }
        } else if (fr < val[second]) {
            simplex[worst] = r, val[worst] = fr;
        } else {
            const Vector c = fr < val[worst] ? along(-0.5) : along(0.5);
            const double fc = f(c);
            if (fc < std::min(fr, val[worst])) {
                simplex[worst] = c, val[worst] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    const int k = order[i];
                    simplex[k] = simplex[best] + 0.5 * (simplex[k] - simplex[best]);
                    val[k] = f(simplex[k]);
                }
            }
        }
    }
    const auto it = std::min_element(val.begin(), val.end());
    out.x = simplex[it - val.begin()];
    out.value = *it;
    return out;
}

struct LeastSquaresResult {
    Vector x;
    double chi2 = std::numeric_limits<double>::infinity();
    Matrix jtj;  // Gauss-Newton information J^T J at the solution
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt on chi2 = |r(x)|^2 with an analytic Jacobian.
inline LeastSquaresResult levenberg_marquardt(const std::function<Vector(const Vector &)> &residuals,
                                              const std::function<Matrix(const Vector &)> &jacobian, const Vector &x0,
                                              int max_iterations = 200, double tol = 1e-14) {
    LeastSquaresResult out;
    Vector x = x0;
    Vector r = residuals(x);
    double chi2 = r.squaredNorm();
    double lambda = 1e-3;
    for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
        const Matrix J = jacobian(x);
        const Matrix A = J.transpose() * J;
        const Vector g = J.transpose() * r;
        bool improved = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Matrix damped = A;
            damped.diagonal() += lambda * (A.diagonal().array() + 1e-300).matrix();
            const Vector step = damped.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Vector xn = x + step;
            const Vector rn = residuals(xn);
            const double chi2n = rn.squaredNorm();
            if (chi2n <= chi2) {
                const double gain = chi2 - chi2n;
                const bool small_step = step.norm() <= tol * (x.norm() + tol);
                x = xn, r = rn;
                chi2 = chi2n;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (gain <= tol * (chi2 + tol) || small_step) out.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            // No downhill step at any damping: stationary to working precision.
            out.converged = g.norm() <= 1e-6 * (1.0 + std::sqrt(chi2)) * (1.0 + x.norm());
            break;
        }
        if (out.converged) break;
    }
    out.x = x;
    out.chi2 = chi2;
    const Matrix J = jacobian(x);
    out.jtj = J.transpose() * J;
    return out;
}

/// Central differences with step `rel_step` * max(|x_i|, 1).
inline Matrix finite_difference_jacobian(const std::function<Vector(const Vector &)> &residuals, const Vector &x,
                                         double rel_step = 1e-6) {
    const Vector r0 = residuals(x);
    Matrix J(r0.size(), x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(std::abs(x(i)), 1.0);
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        J.col(i) = (residuals(xp) - residuals(xm)) / (2.0 * h);
    }
    return J;
}

}  // namespace ddq::optimize
