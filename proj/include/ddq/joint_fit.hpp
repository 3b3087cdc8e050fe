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

// Campaign-level estimation of the quadrupole moment from reference-subtracted
// fringe phases:
//
//   phi = tau_total * K * dEz/dz * Theta * g(beta_k + beta0; eps1, alpha) + c_k,
//   K = 9 e a0^2 / (20 hbar),
//
// with one nuisance intercept c_k per field angle.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "ddq/atom.hpp"
#include "ddq/fringe_fit.hpp"
#include "ddq/linear_fit.hpp"
#include "ddq/optimize.hpp"
#include "ddq/sampler.hpp"

namespace ddq {

/// rad/s per (V/m^2 * e a0^2) at unit geometry factor.
inline double quadrupole_phase_coefficient() {
    return 9.0 / (20.0 * constants::hbar) * constants::quadrupole_unit;
}

struct CellPhase {
    double beta_nominal = 0.0;
    double dez_dz = 0.0;
    double tau_total = 0.0;
    int n_echo = 0;
    double phase = 0.0;  // signal minus reference, wrapped to (-pi, pi]
    double sigma = 0.0;  // from the two profile intervals
    FringeFit signal;
    FringeFit reference;
};

inline CellPhase cell_phase(const CampaignCell &cell, int n_echo) {
    CellPhase out;
    out.beta_nominal = cell.beta_nominal;
    out.dez_dz = cell.dez_dz;
    out.tau_total = cell.tau_total;
    out.n_echo = n_echo;
    out.signal = fit_fringe_mle(cell.fringe);
    out.reference = fit_fringe_mle(cell.reference_fringe);
    out.phase = wrap_phase(out.signal.phase - out.reference.phase);
    out.sigma = std::hypot(sigma_from_ci95(out.signal.ci95_phase), sigma_from_ci95(out.reference.ci95_phase));
    return out;
}

inline std::vector<CellPhase> extract_cell_phases(const CampaignDataset &data) {
    std::vector<CellPhase> out;
    out.reserve(data.cells.size());
    for (const auto &c : data.cells) out.push_back(cell_phase(c, data.n_echo));
    return out;
}

// ---------------------------------------------------------------------------
// Joint fit
// ---------------------------------------------------------------------------

struct JointFitOptions {
    bool fit_epsilon1 = false;
    double epsilon1 = 0.0;  // value used when frozen, start value otherwise
    double alpha = 0.0;     // trap azimuth of the field [rad]
    /// Per-angle intercepts c_k as free parameters.
    bool per_angle_offsets = true;
    double theta_min = -10.0;
    double theta_max = 10.0;
    int theta_grid = 201;
    double beta0_min = -constants::pi / 2;
    double beta0_max = constants::pi / 2;
    int beta0_grid = 73;
    /// Skip the grid search and start here (theta, beta0).
    std::optional<std::pair<double, double>> start;
    bool profile_interval = true;
    int profile_samples = 21;
};

struct JointFitDiagnostics {
    int iterations = 0;
    bool converged = false;
    double chi2 = 0.0;
    int dof = 0;
    /// (theta, chi2 - chi2_min) along the profile.
    std::vector<std::pair<double, double>> profile;
};

struct JointFitResult {
    double theta = 0.0;
    double beta0 = 0.0;
    double epsilon1 = 0.0;
    std::vector<double> angles;  // distinct beta_nominal, ascending
    std::vector<double> per_angle_offsets;
    std::pair<double, double> ci95_theta{0.0, 0.0};
    double theta_sigma = 0.0;  // from the curvature
    JointFitDiagnostics fit_diagnostics;
};

/// Residual model shared by the joint fit and its tests. Parameter vector:
/// [theta, beta0, (eps1), c_1..c_K].
class JointModel {
  public:
    JointModel(const std::vector<CellPhase> &cells, const JointFitOptions &options)
        : options_(options), k_(quadrupole_phase_coefficient()) {
        for (const auto &c : cells) {
            if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) throw FitError("cell phase sigma must be positive");
            angles_.push_back(c.beta_nominal);
        }
        std::sort(angles_.begin(), angles_.end());
        angles_.erase(std::unique(angles_.begin(), angles_.end()), angles_.end());
        for (const auto &c : cells) {
            const int a = static_cast<int>(std::lower_bound(angles_.begin(), angles_.end(), c.beta_nominal) - angles_.begin());
            rows_.push_back({a, c.beta_nominal, c.dez_dz * c.tau_total * k_, c.phase, c.sigma});
        }
    }

    int n_angles() const {
        return static_cast<int>(angles_.size());
    }
    const std::vector<double> &angles() const {
        return angles_;
    }
    int n_shape() const {
        return options_.fit_epsilon1 ? 3 : 2;
    }
    int n_params() const {
        return n_shape() + (options_.per_angle_offsets ? n_angles() : 0);
    }
    int n_rows() const {
        return static_cast<int>(rows_.size());
    }

    double epsilon1(const optimize::Vector &x) const {
        return options_.fit_epsilon1 ? x(2) : options_.epsilon1;
    }
    double offset(const optimize::Vector &x, int angle) const {
        return options_.per_angle_offsets ? x(n_shape() + angle) : 0.0;
    }

    double predict(const optimize::Vector &x, int i) const {
        const Row &r = rows_[i];
        return r.scale * x(0) * quadrupole_geometry(r.beta + x(1), epsilon1(x), options_.alpha) + offset(x, r.angle);
    }

    optimize::Vector residuals(const optimize::Vector &x) const {
        optimize::Vector out(n_rows());
        for (int i = 0; i < n_rows(); ++i) out(i) = wrap_phase(rows_[i].phase - predict(x, i)) / rows_[i].sigma;
        return out;
    }

    optimize::Matrix jacobian(const optimize::Vector &x) const {
        optimize::Matrix J = optimize::Matrix::Zero(n_rows(), n_params());
        const double eps = epsilon1(x);
        const double c2a = std::cos(2.0 * options_.alpha);
        for (int i = 0; i < n_rows(); ++i) {
            const Row &r = rows_[i];
            const double b = r.beta + x(1);
            const double s2b = std::sin(2.0 * b), sb = std::sin(b);
            J(i, 0) = -r.scale * quadrupole_geometry(b, eps, options_.alpha) / r.sigma;
            J(i, 1) = r.scale * x(0) * s2b * (3.0 + eps * c2a) / r.sigma;
            if (options_.fit_epsilon1) J(i, 2) = r.scale * x(0) * sb * sb * c2a / r.sigma;
            if (options_.per_angle_offsets) J(i, n_shape() + r.angle) = -1.0 / r.sigma;
        }
        return J;
    }

    double chi2(const optimize::Vector &x) const {
        return residuals(x).squaredNorm();
    }

    /// Fills the offsets with their per-angle circular weighted means given
    /// the shape parameters, and returns the resulting chi2.
    double profile_offsets(optimize::Vector &x) const {
        if (options_.per_angle_offsets) {
            std::vector<double> sc(n_angles(), 0.0), ss(n_angles(), 0.0);
            for (int a = 0; a < n_angles(); ++a) x(n_shape() + a) = 0.0;
            for (int i = 0; i < n_rows(); ++i) {
                const double w = 1.0 / (rows_[i].sigma * rows_[i].sigma);
                const double r = rows_[i].phase - predict(x, i);
                sc[rows_[i].angle] += w * std::cos(r);
                ss[rows_[i].angle] += w * std::sin(r);
            }
            for (int a = 0; a < n_angles(); ++a) x(n_shape() + a) = std::atan2(ss[a], sc[a]);
        }
        return chi2(x);
    }

    /// Best (theta, beta0) on a rectangular grid, offsets profiled; eps1 held
    /// at its option value. Geometry is evaluated once per beta0 column.
    std::pair<double, double> grid_start() const {
        const auto at = [](double lo, double hi, int n, int i) { return lo + (hi - lo) * i / std::max(n - 1, 1); };
        std::vector<double> base(rows_.size()), w(rows_.size()), sc(n_angles()), ss(n_angles()), c(n_angles());
        for (std::size_t i = 0; i < rows_.size(); ++i) w[i] = 1.0 / (rows_[i].sigma * rows_[i].sigma);
        double best = std::numeric_limits<double>::infinity();
        std::pair<double, double> arg{0.0, 0.0};
        for (int j = 0; j < options_.beta0_grid; ++j) {
            const double beta0 = at(options_.beta0_min, options_.beta0_max, options_.beta0_grid, j);
            for (std::size_t i = 0; i < rows_.size(); ++i) {
                base[i] = rows_[i].scale * quadrupole_geometry(rows_[i].beta + beta0, options_.epsilon1, options_.alpha);
            }
            for (int t = 0; t < options_.theta_grid; ++t) {
                const double theta = at(options_.theta_min, options_.theta_max, options_.theta_grid, t);
                std::fill(sc.begin(), sc.end(), 0.0);
                std::fill(ss.begin(), ss.end(), 0.0);
                for (std::size_t i = 0; i < rows_.size(); ++i) {
                    const double r = rows_[i].phase - theta * base[i];
                    sc[rows_[i].angle] += w[i] * std::cos(r);
                    ss[rows_[i].angle] += w[i] * std::sin(r);
                }
                for (int a = 0; a < n_angles(); ++a) c[a] = options_.per_angle_offsets ? std::atan2(ss[a], sc[a]) : 0.0;
                double chi2 = 0.0;
                for (std::size_t i = 0; i < rows_.size() && chi2 < best; ++i) {
                    const double r = wrap_phase(rows_[i].phase - theta * base[i] - c[rows_[i].angle]);
                    chi2 += w[i] * r * r;
                }
                if (chi2 < best) best = chi2, arg = {theta, beta0};
            }
        }
        return arg;
    }

    /// Distinct gradient-times-time values per angle.
    std::vector<int> lever_arms() const {
        std::vector<std::vector<double>> xs(n_angles());
        for (const Row &r : rows_) xs[r.angle].push_back(r.scale);
        std::vector<int> out;
        for (auto &v : xs) {
            std::sort(v.begin(), v.end());
            out.push_back(static_cast<int>(std::unique(v.begin(), v.end()) - v.begin()));
        }
        return out;
    }

  private:
    struct Row {
        int angle;
        double beta;
        double scale;  // dEz/dz * tau_total * K
        double phase;
        double sigma;
    };
    JointFitOptions options_;
    double k_;
    std::vector<double> angles_;
    std::vector<Row> rows_;
};

namespace joint_detail {

// Least squares with theta optionally held fixed; offsets and the remaining
// shape parameters are refined by LM.
inline optimize::LeastSquaresResult polish(const JointModel &model, const optimize::Vector &start,
                                           std::optional<double> fixed_theta = std::nullopt) {
    if (!fixed_theta) {
        return optimize::levenberg_marquardt([&](const optimize::Vector &x) { return model.residuals(x); },
                                             [&](const optimize::Vector &x) { return model.jacobian(x); }, start);
    }
    const int n = model.n_params() - 1;
    auto expand = [&](const optimize::Vector &y) {
        optimize::Vector x(model.n_params());
        x(0) = *fixed_theta;
        x.tail(n) = y;
        return x;
    };
    auto res = optimize::levenberg_marquardt(
        [&](const optimize::Vector &y) { return model.residuals(expand(y)); },
        [&](const optimize::Vector &y) { return optimize::Matrix(model.jacobian(expand(y)).rightCols(n)); },
        start.tail(n));
    res.x = expand(res.x);
    return res;
}

}  // namespace joint_detail

/// Maximum-likelihood fit of (theta, beta0[, eps1], c_k) to all cell phases,
/// with a profile-likelihood 95% interval on theta.
inline JointFitResult joint_fit_quadrupole(const std::vector<CellPhase> &cells, const JointFitOptions &options = {}) {
    const JointModel model(cells, options);
    if (model.n_angles() < 2) {
        throw NonIdentifiableError("joint fit needs at least two distinct field angles");
    }
    if (options.per_angle_offsets) {
        for (int n : model.lever_arms()) {
            if (n < 2) throw NonIdentifiableError("each angle needs at least two distinct gradient-time products");
        }
    }
    if (model.n_rows() <= model.n_params()) {
        throw NonIdentifiableError("more parameters than cell phases");
    }

    optimize::Vector x = optimize::Vector::Zero(model.n_params());
    if (options.fit_epsilon1) x(2) = options.epsilon1;

    // Coarse start: grid over (theta, beta0) with offsets profiled.
    if (options.start) {
        x(0) = options.start->first;
        x(1) = options.start->second;
    } else {
        std::tie(x(0), x(1)) = model.grid_start();
    }
    model.profile_offsets(x);

    // Simplex on the shape parameters, offsets profiled.
    const int ns = model.n_shape();
    optimize::Vector step(ns);
    step(0) = 0.05 * std::max(std::abs(x(0)), 0.1);
    step(1) = 0.02;
    if (ns == 3) step(2) = 0.01;
    auto shape_chi2 = [&](const optimize::Vector &s) {
        optimize::Vector full = x;
        full.head(ns) = s;
        return model.profile_offsets(full);
    };
    const auto simplex = optimize::nelder_mead(shape_chi2, x.head(ns), step, 1e-13, 4000);
    x.head(ns) = simplex.x;
    model.profile_offsets(x);

    // Newton-type polish on everything.
    const auto lm = joint_detail::polish(model, x);
    x = lm.x;

    Eigen::FullPivLU<optimize::Matrix> lu(lm.jtj);
    lu.setThreshold(1e-10);
    if (lu.rank() < model.n_params()) {
        throw NonIdentifiableError("joint fit information matrix is singular; theta is not identifiable");
    }
    const optimize::Matrix cov = lm.jtj.inverse();

    JointFitResult out;
    out.theta = x(0);
    out.beta0 = x(1);
    out.epsilon1 = model.epsilon1(x);
    out.angles = model.angles();
    for (int a = 0; a < model.n_angles(); ++a) out.per_angle_offsets.push_back(model.offset(x, a));
    out.theta_sigma = std::sqrt(std::max(cov(0, 0), 0.0));
    out.fit_diagnostics.iterations = simplex.iterations + lm.iterations;
    out.fit_diagnostics.converged = lm.converged;
    out.fit_diagnostics.chi2 = lm.chi2;
    out.fit_diagnostics.dof = model.n_rows() - model.n_params();
    if (!lm.converged) {
        throw NonConvergenceError("joint fit did not converge after " + std::to_string(out.fit_diagnostics.iterations) +
                                  " iterations (chi2 = " + std::to_string(lm.chi2) + ")");
    }
    out.ci95_theta = {out.theta - kZ95 * out.theta_sigma, out.theta + kZ95 * out.theta_sigma};
    if (!options.profile_interval) return out;

    // Profile likelihood on theta.
    const double chi2_min = lm.chi2;
    const double threshold = chi2_95_1dof();
    auto delta = [&](double theta) { return joint_detail::polish(model, x, theta).chi2 - chi2_min; };
    auto crossing = [&](double dir) {
        double inner = out.theta;
        double d = 2.0 * std::max(out.theta_sigma, 1e-9);
        for (int k = 0; k < 60; ++k) {
            const double outer = out.theta + dir * d;
            if (delta(outer) > threshold) {
                boost::uintmax_t iters = 100;
                auto f = [&](double t) { return delta(t) - threshold; };
                const auto r = boost::math::tools::toms748_solve(f, std::min(inner, outer), std::max(inner, outer),
                                                                 boost::math::tools::eps_tolerance<double>(30), iters);
                return 0.5 * (r.first + r.second);
            }
            inner = outer;
            d *= 1.5;
        }
        throw NonConvergenceError("profile likelihood for theta does not reach the 95% threshold");
    };
    out.ci95_theta = {crossing(-1.0), crossing(1.0)};
    const double lo = out.ci95_theta.first, hi = out.ci95_theta.second;
    const double pad = 0.25 * (hi - lo);
    for (int i = 0; i < options.profile_samples; ++i) {
        const double t = lo - pad + (hi - lo + 2 * pad) * i / std::max(options.profile_samples - 1, 1);
        out.fit_diagnostics.profile.emplace_back(t, delta(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Explicit offset subtraction and the two-stage chain
// ---------------------------------------------------------------------------

struct OffsetSubtraction {
    std::vector<double> angles;
    std::vector<double> offsets;  // intercept of phase vs dEz/dz * tau_total per angle
    std::vector<CellPhase> corrected;
    bool ambiguous = false;
};

namespace joint_detail {

// Indices of cells grouped by beta_nominal (ascending).
inline std::map<double, std::vector<std::size_t>> by_angle(const std::vector<CellPhase> &cells) {
    std::map<double, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < cells.size(); ++i) out[cells[i].beta_nominal].push_back(i);
    return out;
}

}  // namespace joint_detail

/// Per angle: unwrap along dEz/dz * tau_total from zero, fit a line, and
/// subtract its intercept from every phase at that angle.
inline OffsetSubtraction subtract_angle_offsets(const std::vector<CellPhase> &cells) {
    OffsetSubtraction out;
    out.corrected = cells;
    for (auto &[beta, idx] : joint_detail::by_angle(cells)) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return cells[a].dez_dz * cells[a].tau_total < cells[b].dez_dz * cells[b].tau_total;
        });
        std::vector<double> wrapped, x, s;
        for (std::size_t i : idx) {
            wrapped.push_back(cells[i].phase);
            x.push_back(cells[i].dez_dz * cells[i].tau_total);
            s.push_back(cells[i].sigma);
        }
        const Unwrapped u = unwrap_by_continuity(wrapped);
        out.ambiguous = out.ambiguous || u.ambiguous;
        const LinearFit line = weighted_linear_fit(x, u.phases, s);
        out.angles.push_back(beta);
        out.offsets.push_back(line.intercept);
        for (std::size_t j = 0; j < idx.size(); ++j) out.corrected[idx[j]].phase = wrap_phase(u.phases[j] - line.intercept);
    }
    return out;
}

/// The explicit-subtraction path: intercepts removed first, then a fit with
/// no offset parameters. Reported offsets are the subtracted intercepts.
inline JointFitResult joint_fit_offset_subtracted(const std::vector<CellPhase> &cells, JointFitOptions options = {}) {
    const OffsetSubtraction sub = subtract_angle_offsets(cells);
    options.per_angle_offsets = false;
    JointFitResult r = joint_fit_quadrupole(sub.corrected, options);
    r.per_angle_offsets = sub.offsets;
    return r;
}

/// Fitted phase of one cell, optionally including the angle's offset.
inline double joint_model_phase(const JointFitResult &fit, const JointFitOptions &options, double beta_nominal,
                                double dez_dz, double tau_total, bool with_offset = true) {
    double phase = quadrupole_phase_coefficient() * dez_dz * tau_total * fit.theta *
                   quadrupole_geometry(beta_nominal + fit.beta0, fit.epsilon1, options.alpha);
    if (with_offset) {
        for (std::size_t a = 0; a < fit.angles.size() && a < fit.per_angle_offsets.size(); ++a) {
            if (fit.angles[a] == beta_nominal) phase += fit.per_angle_offsets[a];
        }
    }
    return phase;
}

struct AngleSlope {
    double beta_nominal = 0.0;
    GradientSlope gradient_fit;          // frequency [Hz] vs dEz/dz
    bool has_gradient_fit = false;       // needs two distinct gradients
    std::vector<FrequencyGradientPoint> points;
};

struct TwoStageResult {
    double theta = 0.0;
    double beta0 = 0.0;
    double theta_sigma = 0.0;
    std::vector<AngleSlope> angle_slopes;
    bool ambiguous = false;
};

/// Per angle: frequency at each gradient (from phase vs time when several
/// times exist, otherwise phase / (2 pi tau_total) unwrapped along the
/// gradient), then a line through frequency vs gradient when at least two
/// gradients exist.
inline std::vector<AngleSlope> angle_frequency_slopes(const std::vector<CellPhase> &cells, bool &ambiguous) {
    std::vector<AngleSlope> result;
    for (auto &[beta, idx] : joint_detail::by_angle(cells)) {
        std::map<double, std::vector<std::size_t>> by_gradient;
        for (std::size_t i : idx) by_gradient[cells[i].dez_dz].push_back(i);
        AngleSlope as;
        as.beta_nominal = beta;
        bool multi_time = true;
        for (auto &[g, cell_idx] : by_gradient) {
            std::vector<double> t;
            for (std::size_t i : cell_idx) t.push_back(cells[i].tau_total);
            std::sort(t.begin(), t.end());
            if (std::unique(t.begin(), t.end()) - t.begin() < 2) multi_time = false;
        }
        if (multi_time) {
            for (auto &[g, cell_idx] : by_gradient) {
                std::sort(cell_idx.begin(), cell_idx.end(),
                          [&](std::size_t a, std::size_t b) { return cells[a].tau_total < cells[b].tau_total; });
                std::vector<double> wrapped;
                for (std::size_t i : cell_idx) wrapped.push_back(cells[i].phase);
                const Unwrapped u = unwrap_by_continuity(wrapped);
                ambiguous = ambiguous || u.ambiguous;
                std::vector<PhaseTimePoint> pts;
                for (std::size_t j = 0; j < cell_idx.size(); ++j) {
                    pts.push_back({cells[cell_idx[j]].tau_total, u.phases[j], cells[cell_idx[j]].sigma});
                }
                const PhaseSlope ps = fit_phase_vs_time(pts);
                as.points.push_back({g, ps.slope_hz, ps.fit.slope_sigma / (2.0 * constants::pi)});
            }
        } else {
            // One time per gradient: frequency from phase / (2 pi tau_total),
            // unwrapped along the gradient axis from zero.
            std::vector<std::size_t> order = idx;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return cells[a].dez_dz * cells[a].tau_total < cells[b].dez_dz * cells[b].tau_total;
            });
            std::vector<double> wrapped;
            for (std::size_t i : order) wrapped.push_back(cells[i].phase);
            const Unwrapped u = unwrap_by_continuity(wrapped);
            ambiguous = ambiguous || u.ambiguous;
            for (std::size_t j = 0; j < order.size(); ++j) {
                const CellPhase &c = cells[order[j]];
                if (!(c.tau_total > 0.0)) throw FitError("tau_total must be positive for a frequency estimate");
                const double scale = 2.0 * constants::pi * c.tau_total;
                as.points.push_back({c.dez_dz, u.phases[j] / scale, c.sigma / scale});
            }
        }
        as.has_gradient_fit = by_gradient.size() >= 2;
        if (as.has_gradient_fit) as.gradient_fit = fit_frequency_vs_gradient(as.points);
        result.push_back(std::move(as));
    }
    return result;
}

/// Phase -> frequency (per gradient) -> slope vs gradient (per angle) ->
/// angular fit of the slopes for (theta, beta0).
inline TwoStageResult two_stage_theta(const std::vector<CellPhase> &cells, const JointFitOptions &options = {}) {
    TwoStageResult out;
    out.angle_slopes = angle_frequency_slopes(cells, out.ambiguous);
    for (const auto &as : out.angle_slopes) {
        if (!as.has_gradient_fit) throw NonIdentifiableError("two-stage fit needs at least two gradients per angle");
    }
    if (out.angle_slopes.size() < 2) throw NonIdentifiableError("two-stage fit needs at least two distinct angles");

    // slope_k [Hz per V/m^2] = K / (2 pi) * theta * g(beta_k + beta0)
    const double kh = quadrupole_phase_coefficient() / (2.0 * constants::pi);
    const auto &sl = out.angle_slopes;
    auto residuals = [&](const optimize::Vector &x) {
        optimize::Vector r(sl.size());
        for (std::size_t k = 0; k < sl.size(); ++k) {
            const double g = quadrupole_geometry(sl[k].beta_nominal + x(1), options.epsilon1, options.alpha);
            r(k) = (sl[k].gradient_fit.slope - kh * x(0) * g) / sl[k].gradient_fit.fit.slope_sigma;
        }
        return r;
    };
    auto jacobian = [&](const optimize::Vector &x) {
        optimize::Matrix J(sl.size(), 2);
        const double c2a = std::cos(2.0 * options.alpha);
        for (std::size_t k = 0; k < sl.size(); ++k) {
            const double b = sl[k].beta_nominal + x(1);
            const double s = sl[k].gradient_fit.fit.slope_sigma;
            J(k, 0) = -kh * quadrupole_geometry(b, options.epsilon1, options.alpha) / s;
            J(k, 1) = kh * x(0) * std::sin(2.0 * b) * (3.0 + options.epsilon1 * c2a) / s;
        }
        return J;
    };
    optimize::Vector x(2);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < options.theta_grid; ++i) {
        for (int j = 0; j < options.beta0_grid; ++j) {
            optimize::Vector t(2);
            t(0) = options.theta_min + (options.theta_max - options.theta_min) * i / std::max(options.theta_grid - 1, 1);
            t(1) = options.beta0_min + (options.beta0_max - options.beta0_min) * j / std::max(options.beta0_grid - 1, 1);
            const double c = residuals(t).squaredNorm();
            if (c < best) best = c, x = t;
        }
    }
    const auto lm = optimize::levenberg_marquardt(residuals, jacobian, x);
    if (!lm.converged) throw NonConvergenceError("two-stage angular fit did not converge");
    Eigen::FullPivLU<optimize::Matrix> lu(lm.jtj);
    lu.setThreshold(1e-10);
    if (lu.rank() < 2) throw NonIdentifiableError("two-stage angular fit is singular");
    out.theta = lm.x(0);
    out.beta0 = lm.x(1);
    out.theta_sigma = std::sqrt(lm.jtj.inverse()(0, 0));
    return out;
}

}  // namespace ddq
