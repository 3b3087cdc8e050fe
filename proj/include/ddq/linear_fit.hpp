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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "ddq/constants.hpp"
#include "ddq/errors.hpp"
#include "ddq/fringe_fit.hpp"

namespace ddq {

/// Two-sided 95% normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_sigma = 0.0;
    double intercept_sigma = 0.0;
    double covariance = 0.0;  // cov(slope, intercept)
    double chi2 = 0.0;
    int dof = 0;

    double reduced_chi2() const {
        return dof > 0 ? chi2 / dof : 0.0;
    }
    std::pair<double, double> slope_ci95() const {
        return {slope - kZ95 * slope_sigma, slope + kZ95 * slope_sigma};
    }
    std::pair<double, double> intercept_ci95() const {
        return {intercept - kZ95 * intercept_sigma, intercept + kZ95 * intercept_sigma};
    }
};

/// Weighted least squares y = intercept + slope x with known per-point sigma.
inline LinearFit weighted_linear_fit(const std::vector<double> &x, const std::vector<double> &y,
                                     const std::vector<double> &sigma) {
    if (x.size() != y.size() || x.size() != sigma.size()) throw FitError("linear fit: size mismatch");
    double s = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) throw FitError("linear fit: sigma must be positive");
        const double w = 1.0 / (sigma[i] * sigma[i]);
        s += w, sx += w * x[i], sy += w * y[i];
    }
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < 2) {
        throw FitError("singular design: need at least two distinct abscissae");
    }
    // Centering keeps the normal equations well conditioned for x ~ 1e8.
    const double xm = sx / s;
    double sxx_c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sxx_c += (x[i] - xm) * (x[i] - xm) / (sigma[i] * sigma[i]);
    LinearFit fit;
    double sxy_c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy_c += (x[i] - xm) * y[i] / (sigma[i] * sigma[i]);
    fit.slope = sxy_c / sxx_c;
    fit.intercept = sy / s - fit.slope * xm;
    fit.slope_sigma = std::sqrt(1.0 / sxx_c);
    fit.intercept_sigma = std::sqrt(1.0 / s + xm * xm / sxx_c);
    fit.covariance = -xm / sxx_c;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = (y[i] - fit.intercept - fit.slope * x[i]) / sigma[i];
        fit.chi2 += r * r;
    }
    fit.dof = static_cast<int>(x.size()) - 2;
    return fit;
}

/// Standard deviation implied by a 95% interval.
inline double sigma_from_ci95(std::pair<double, double> ci) {
    return (ci.second - ci.first) / (2.0 * kZ95);
}

struct PhaseTimePoint {
    double tau_total = 0.0;  // s
    double phase = 0.0;      // rad, unwrapped
    double sigma = 0.0;      // rad
};

struct PhaseSlope {
    double slope = 0.0;  // rad/s
    double slope_hz = 0.0;
    std::pair<double, double> ci95{0.0, 0.0};     // rad/s
    std::pair<double, double> ci95_hz{0.0, 0.0};  // Hz
    double intercept = 0.0;                       // rad, diagnostic
    LinearFit fit;
};

inline PhaseSlope fit_phase_vs_time(const std::vector<PhaseTimePoint> &points) {
    std::vector<double> x, y, s;
    for (const auto &p : points) x.push_back(p.tau_total), y.push_back(p.phase), s.push_back(p.sigma);
    PhaseSlope out;
    out.fit = weighted_linear_fit(x, y, s);
    out.slope = out.fit.slope;
    out.slope_hz = out.slope / (2.0 * constants::pi);
    out.ci95 = out.fit.slope_ci95();
    out.ci95_hz = {out.ci95.first / (2.0 * constants::pi), out.ci95.second / (2.0 * constants::pi)};
    out.intercept = out.fit.intercept;
    return out;
}

struct FrequencyGradientPoint {
    double dez_dz = 0.0;     // V/m^2
    double frequency = 0.0;  // Hz
    double sigma = 0.0;      // Hz
};

struct GradientSlope {
    double slope = 0.0;  // Hz per V/m^2
    std::pair<double, double> ci95{0.0, 0.0};
    double intercept = 0.0;  // Hz; nonzero flags a stray static gradient
    std::pair<double, double> intercept_ci95{0.0, 0.0};
    LinearFit fit;
};

inline GradientSlope fit_frequency_vs_gradient(const std::vector<FrequencyGradientPoint> &points) {
    std::vector<double> x, y, s;
    for (const auto &p : points) x.push_back(p.dez_dz), y.push_back(p.frequency), s.push_back(p.sigma);
    GradientSlope out;
    out.fit = weighted_linear_fit(x, y, s);
    out.slope = out.fit.slope;
    out.ci95 = out.fit.slope_ci95();
    out.intercept = out.fit.intercept;
    out.intercept_ci95 = out.fit.intercept_ci95();
    return out;
}

struct Unwrapped {
    std::vector<double> phases;
    /// Some successive pair differed by more than pi/2 after unwrapping.
    bool ambiguous = false;
};

/// Unwraps phases ordered along their axis by continuity, starting from
/// `anchor` (the phase at the axis origin, 0 after reference subtraction).
inline Unwrapped unwrap_by_continuity(const std::vector<double> &wrapped, double anchor = 0.0) {
    Unwrapped out;
    double prev = anchor;
    for (double w : wrapped) {
        const double u = prev + wrap_phase(w - prev);
        if (std::abs(u - prev) > 0.5 * constants::pi) out.ambiguous = true;
        out.phases.push_back(u);
        prev = u;
    }
    return out;
}

}  // namespace ddq
