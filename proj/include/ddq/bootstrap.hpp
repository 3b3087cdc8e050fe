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
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ddq/errors.hpp"
#include "ddq/joint_fit.hpp"
#include "ddq/sampler.hpp"

namespace ddq {

struct BootstrapResult {
    std::pair<double, double> ci95{0.0, 0.0};
    std::vector<double> thetas;  // successful resamples, in resample order
    int failures = 0;
};

/// Linear-interpolated empirical quantile of sorted values.
inline double empirical_quantile(const std::vector<double> &sorted, double q) {
    if (sorted.empty()) throw FitError("quantile of an empty sample");
    const double h = (sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

/// Percentile bootstrap for theta: every fringe point is redrawn as
/// Binomial(n, k/n) and the whole chain is refitted. Exact datasets carry no
/// sampling noise and give a zero-width interval at the point estimate.
inline BootstrapResult bootstrap_ci(const CampaignDataset &data, int n_resamples, std::uint64_t seed,
                                    JointFitOptions options = {}, double max_failure_fraction = 0.05) {
    if (n_resamples < 100) throw FitError("bootstrap needs at least 100 resamples");
    const JointFitResult central = joint_fit_quadrupole(extract_cell_phases(data), options);
    BootstrapResult out;
    if (data.exact) {
        out.ci95 = {central.theta, central.theta};
        return out;
    }
    options.start = std::pair{central.theta, central.beta0};
    options.profile_interval = false;
    for (int r = 0; r < n_resamples; ++r) {
        CampaignDataset resampled = data;
        for (std::size_t c = 0; c < resampled.cells.size(); ++c) {
            FringeDataset *fringes[2] = {&resampled.cells[c].fringe, &resampled.cells[c].reference_fringe};
            for (std::uint64_t kind = 0; kind < 2; ++kind) {
                auto &points = fringes[kind]->points;
                for (std::size_t i = 0; i < points.size(); ++i) {
                    std::mt19937_64 engine(rng::derive_seed(seed, {static_cast<std::uint64_t>(r), c, kind, i}));
                    const double p = points[i].k_D / points[i].n_shots;
                    std::binomial_distribution<int> binom(points[i].n_shots, p);
                    points[i].k_D = binom(engine);
                }
            }
        }
        try {
            out.thetas.push_back(joint_fit_quadrupole(extract_cell_phases(resampled), options).theta);
        } catch (const FitError &) {
            ++out.failures;
        }
    }
    if (out.failures > max_failure_fraction * n_resamples) {
        throw FitError("bootstrap: " + std::to_string(out.failures) + " of " + std::to_string(n_resamples) +
                       " resamples failed to fit");
    }
    std::vector<double> sorted = out.thetas;
    std::sort(sorted.begin(), sorted.end());
    out.ci95 = {empirical_quantile(sorted, 0.025), empirical_quantile(sorted, 0.975)};
    return out;
}

}  // namespace ddq
