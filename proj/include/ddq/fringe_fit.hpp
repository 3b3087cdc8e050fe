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

// Binomial maximum-likelihood fit of p(phi) = offset + (contrast/2) cos(phi - phase).
//
// For fixed phase the model is linear in u = offset - contrast/2 and
// v = 1 - offset - contrast/2, and the log-likelihood is concave on the
// triangle u, v >= 0, u + v <= 1. The inner problem is therefore solved
// exactly (interior Newton plus the three edges), and only the phase is
// searched: a periodic grid locates the global maximum, a bracketing root
// finder on the profile derivative polishes it.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "ddq/constants.hpp"
#include "ddq/errors.hpp"
#include "ddq/sampler.hpp"

namespace ddq {

/// Angle mapped into (-pi, pi].
inline double wrap_phase(double x) {
    double r = std::remainder(x, 2.0 * constants::pi);
    if (r <= -constants::pi) r += 2.0 * constants::pi;
    return r;
}

/// Threshold on -2 delta lnL for a 95% interval with one parameter.
inline double chi2_95_1dof() {
    static const double q = boost::math::quantile(boost::math::chi_squared_distribution<double>(1.0), 0.95);
    return q;
}

struct FringeFit {
    double phase = 0.0;     // (-pi, pi]
    double contrast = 0.0;  // [0, 1]
    double offset = 0.0;
    double neg_log_likelihood = 0.0;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();  // (phase, contrast, offset)
    std::pair<double, double> ci95_phase{0.0, 0.0};  // may extend past (-pi, pi]
    int evaluations = 0;

    double phase_sigma() const {
        return std::sqrt(std::max(cov(0, 0), 0.0));
    }
};

namespace fringe_detail {

struct Obs {
    double phi;
    double k;
    double n;
};

inline double loglik_term(double k, double n, double p) {
    double out = 0.0;
    if (k > 0.0) out += p > 0.0 ? k * std::log(p) : -std::numeric_limits<double>::infinity();
    if (n - k > 0.0) out += p < 1.0 ? (n - k) * std::log1p(-p) : -std::numeric_limits<double>::infinity();
    return out;
}

// d/dp of the per-point log-likelihood.
inline double score_term(double k, double n, double p) {
    double out = 0.0;
    if (k > 0.0) out += k / p;
    if (n - k > 0.0) out -= (n - k) / (1.0 - p);
    return out;
}

// -d^2/dp^2 of the per-point log-likelihood.
inline double curvature_term(double k, double n, double p) {
    double out = 0.0;
    if (k > 0.0) out += k / (p * p);
    if (n - k > 0.0) out += (n - k) / ((1.0 - p) * (1.0 - p));
    return out;
}

struct Inner {
    double u = 0.0;
    double v = 0.0;
    double loglik = -std::numeric_limits<double>::infinity();
};

class Problem {
  public:
    explicit Problem(std::vector<Obs> obs) : obs_(std::move(obs)), w_(obs_.size()) {}

    const std::vector<Obs> &obs() const {
        return obs_;
    }

    double loglik(double u, double v) const {
        double l = 0.0;
        for (std::size_t i = 0; i < obs_.size(); ++i) {
            l += loglik_term(obs_[i].k, obs_[i].n, p_of(i, u, v));
        }
        return l;
    }

    /// Exact maximizer over (u, v) at fixed phase.
    Inner solve(double phase) {
        ++evaluations;
        for (std::size_t i = 0; i < obs_.size(); ++i) w_[i] = 0.5 * (1.0 + std::cos(obs_[i].phi - phase));
        Inner best;
        auto consider = [&](double u, double v) {
            u = std::clamp(u, 0.0, 1.0);
            v = std::clamp(v, 0.0, 1.0 - u);
            const double l = loglik(u, v);
            if (l > best.loglik) best = {u, v, l};
        };
        // Edges of the feasible triangle.
        {
            std::vector<double> a(obs_.size()), b(obs_.size());
            for (std::size_t i = 0; i < obs_.size(); ++i) a[i] = w_[i], b[i] = -w_[i];
            consider(0.0, edge_max(a, b));  // u = 0, t = v
            for (std::size_t i = 0; i < obs_.size(); ++i) a[i] = w_[i], b[i] = 1.0 - w_[i];
            consider(edge_max(a, b), 0.0);  // v = 0, t = u
            for (std::size_t i = 0; i < obs_.size(); ++i) a[i] = 0.0, b[i] = 1.0;
            const double t = edge_max(a, b);  // u + v = 1, zero contrast
            consider(t, 1.0 - t);
        }
        // Interior stationary point by damped Newton.
        double u = 0.25, v = 0.25;
        double l = loglik(u, v);
        for (int it = 0; it < 60; ++it) {
            double gu = 0, gv = 0, huu = 0, huv = 0, hvv = 0;
            for (std::size_t i = 0; i < obs_.size(); ++i) {
                const double p = p_of(i, u, v);
                const double r = score_term(obs_[i].k, obs_[i].n, p);
                const double s = curvature_term(obs_[i].k, obs_[i].n, p);
                const double du = 1.0 - w_[i], dv = -w_[i];
                gu += r * du;
                gv += r * dv;
                huu += s * du * du;
                huv += s * du * dv;
                hvv += s * dv * dv;
            }
            const double det = huu * hvv - huv * huv;
            if (!(det > 0.0)) break;
            const double su = (hvv * gu - huv * gv) / det;
            const double sv = (huu * gv - huv * gu) / det;
            double step = 1.0;
            bool moved = false;
            while (step > 1e-12) {
                const double nu = u + step * su, nv = v + step * sv;
                if (nu > 0.0 && nv > 0.0 && nu + nv < 1.0) {
                    const double nl = loglik(nu, nv);
                    if (nl >= l) {
                        u = nu, v = nv, l = nl;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if (!moved || std::abs(step * su) + std::abs(step * sv) < 1e-15) break;
        }
        consider(u, v);
        return best;
    }

    /// Profile derivative d(loglik)/d(phase) at the inner optimum (envelope theorem).
    double profile_slope(double phase, const Inner &in) const {
        const double c = 1.0 - in.u - in.v;
        double g = 0.0;
        for (const Obs &o : obs_) {
            const double w = 0.5 * (1.0 + std::cos(o.phi - phase));
            const double p = in.u + c * w;
            g += score_term(o.k, o.n, p) * c * 0.5 * std::sin(o.phi - phase);
        }
        return g;
    }

    int evaluations = 0;

  private:
    double p_of(std::size_t i, double u, double v) const {
        return u + (1.0 - u - v) * w_[i];
    }

    // Maximizes sum loglik(alpha + beta t) over t in [0, 1]; concave in t.
    double edge_max(const std::vector<double> &alpha, const std::vector<double> &beta) const {
        auto slope = [&](double t) {
            double g = 0.0;
            for (std::size_t i = 0; i < obs_.size(); ++i) {
                const double p = alpha[i] + beta[i] * t;
                if (beta[i] == 0.0) continue;
                const Obs &o = obs_[i];
                if (p <= 0.0 && o.k > 0.0) return beta[i] > 0.0 ? 1e300 : -1e300;
                if (p >= 1.0 && o.n - o.k > 0.0) return beta[i] > 0.0 ? -1e300 : 1e300;
                g += beta[i] * score_term(o.k, o.n, p);
            }
            return g;
        };
        const double g0 = slope(0.0), g1 = slope(1.0);
        if (g0 <= 0.0) return 0.0;
        if (g1 >= 0.0) return 1.0;
        double lo = 0.0, hi = 1.0;
        // Bisection to full double resolution; the slope is monotone.
        for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            (slope(mid) > 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    std::vector<Obs> obs_;
    std::vector<double> w_;
};

inline std::vector<Obs> observations(const FringeDataset &data) {
    std::vector<Obs> obs;
    for (const auto &p : data.points) obs.push_back({p.phi_laser, p.k_D, static_cast<double>(p.n_shots)});
    return obs;
}

inline void check_fringe(const FringeDataset &data) {
    std::vector<double> phis;
    bool all_zero = true, all_full = true;
    for (const auto &p : data.points) {
        if (p.n_shots < 1) throw FitError("every fringe point needs at least one shot");
        if (!(p.k_D >= 0.0 && p.k_D <= p.n_shots)) throw FitError("k_D outside [0, n_shots]");
        phis.push_back(wrap_phase(p.phi_laser));
        all_zero = all_zero && p.k_D == 0.0;
        all_full = all_full && p.k_D == p.n_shots;
    }
    std::sort(phis.begin(), phis.end());
    const auto distinct = std::unique(phis.begin(), phis.end()) - phis.begin();
    if (distinct < 3) throw FitError("fringe fit needs at least 3 distinct laser phases");
    if (all_zero || all_full) throw DegenerateDataError("all counts are 0 or all equal n; contrast is unidentifiable");
}

}  // namespace fringe_detail

/// Profile log-likelihood of the phase, maximized over contrast and offset.
inline double fringe_profile_loglik(const FringeDataset &data, double phase) {
    fringe_detail::Problem prob(fringe_detail::observations(data));
    return prob.solve(phase).loglik;
}

inline FringeFit fit_fringe_mle(const FringeDataset &data) {
    using namespace fringe_detail;
    check_fringe(data);
    Problem prob(observations(data));
    constexpr int kGrid = 64;
    const double step = 2.0 * constants::pi / kGrid;

    int best = 0;
    std::vector<Inner> grid(kGrid);
    for (int j = 0; j < kGrid; ++j) {
        grid[j] = prob.solve(-constants::pi + step * j);
        if (grid[j].loglik > grid[best].loglik) best = j;
    }
    if (1.0 - grid[best].u - grid[best].v < 1e-10) {
        throw DegenerateDataError("fitted contrast is zero; phase is unidentifiable");
    }

    // Polish: the profile slope changes sign from + to - across the peak.
    auto slope = [&](double th) { return prob.profile_slope(th, prob.solve(th)); };
    double lo = -constants::pi + step * (best - 1), hi = -constants::pi + step * (best + 1);
    double theta = -constants::pi + step * best;
    const double s_lo = slope(lo), s_hi = slope(hi);
    if (s_lo > 0.0 && s_hi < 0.0) {
        boost::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(slope, lo, hi, s_lo, s_hi,
                                                         boost::math::tools::eps_tolerance<double>(52), iters);
        theta = 0.5 * (r.first + r.second);
        if (iters >= 200) throw NonConvergenceError("fringe phase refinement did not converge");
    } else {
        // Flat or kinked profile: Brent minimization on the bracket.
        const auto r = boost::math::tools::brent_find_minima([&](double th) { return -prob.solve(th).loglik; }, lo,
                                                             hi, 52);
        theta = r.first;
    }
    const Inner in = prob.solve(theta);
    FringeFit fit;
    fit.phase = wrap_phase(theta);
    fit.contrast = 1.0 - in.u - in.v;
    fit.offset = 0.5 * (1.0 + in.u - in.v);
    fit.neg_log_likelihood = -in.loglik;
    if (fit.contrast < 1e-10) throw DegenerateDataError("fitted contrast is zero; phase is unidentifiable");

    // Fisher information in (phase, contrast, offset).
    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
    for (const Obs &o : prob.obs()) {
        const double c = std::cos(o.phi - theta), s = std::sin(o.phi - theta);
        const double p = std::clamp(fit.offset + 0.5 * fit.contrast * c, 1e-12, 1.0 - 1e-12);
        const Eigen::Vector3d grad(0.5 * fit.contrast * s, 0.5 * c, 1.0);
        info += o.n / (p * (1.0 - p)) * grad * grad.transpose();
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix3d> cod(info);
    fit.cov = cod.pseudoInverse();

    // Profile-likelihood interval: -2 delta lnL = 3.84 on each side.
    const double target = in.loglik - 0.5 * chi2_95_1dof();
    auto excess = [&](double th) { return prob.solve(th).loglik - target; };
    auto crossing = [&](double dir) {
        double inner = theta;
        double guess = std::max(fit.phase_sigma(), 1e-6) * 2.0;
        while (guess < constants::pi) {
            const double outer = theta + dir * guess;
            if (excess(outer) < 0.0) {
                boost::uintmax_t iters = 200;
                const auto r = boost::math::tools::toms748_solve(
                    excess, std::min(inner, outer), std::max(inner, outer),
                    boost::math::tools::eps_tolerance<double>(40), iters);
                return 0.5 * (r.first + r.second);
            }
            inner = outer;
            guess *= 2.0;
        }
        return theta + dir * constants::pi;
    };
    fit.ci95_phase = {fit.phase + (crossing(-1.0) - theta), fit.phase + (crossing(1.0) - theta)};
    fit.evaluations = prob.evaluations;
    return fit;
}

}  // namespace ddq
