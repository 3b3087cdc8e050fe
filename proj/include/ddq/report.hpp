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
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ddq/atom.hpp"
#include "ddq/joint_fit.hpp"
#include "ddq/linear_fit.hpp"

namespace ddq {

struct ComparisonRow {
    std::string label;
    std::string kind;
    double value = 0.0;
    double sigma = 0.0;
    double deviation_sigma = 0.0;  // (theta_hat - value) / combined sigma
    std::string deviation_text;    // e.g. "1.2σ"
};

struct ComparisonReport {
    double theta = 0.0;
    std::pair<double, double> ci95{0.0, 0.0};
    std::vector<ComparisonRow> rows;  // ascending |deviation|

    std::string to_text() const {
        std::string out = fmt::format("Theta(D5/2) = {:.3f} +{:.3f} -{:.3f} e a0^2 (95% CI)\n", theta,
                                      ci95.second - theta, theta - ci95.first);
        out += fmt::format("{:<48} {:>8} {:>8} {:>10}\n", "reference", "value", "sigma", "deviation");
        for (const auto &r : rows) {
            out += fmt::format("{:<48} {:>8.3f} {:>8.3f} {:>10}\n", r.label, r.value, r.sigma, r.deviation_text);
        }
        return out;
    }
};

/// Deviation of the estimate from each configured reference value in units of
/// the combined standard uncertainty. The estimate's uncertainty is the side
/// of its 95% interval facing the reference, converted to one sigma.
inline ComparisonReport theta_comparison_report(const JointFitResult &result, const IonSpecies &species) {
    ComparisonReport report;
    report.theta = result.theta;
    report.ci95 = result.ci95_theta;
    for (const auto &ref : species.reference_theta_values) {
        const double side = ref.value >= result.theta ? result.ci95_theta.second - result.theta
                                                      : result.theta - result.ci95_theta.first;
        const double combined = std::hypot(ref.sigma, side / kZ95);
        ComparisonRow row{ref.label, ref.kind, ref.value, ref.sigma, 0.0, {}};
        row.deviation_sigma = combined > 0.0 ? (result.theta - ref.value) / combined : 0.0;
        row.deviation_text = fmt::format("{:.1f}σ", std::abs(row.deviation_sigma));
        report.rows.push_back(std::move(row));
    }
    std::stable_sort(report.rows.begin(), report.rows.end(), [](const ComparisonRow &a, const ComparisonRow &b) {
        return std::abs(a.deviation_sigma) < std::abs(b.deviation_sigma);
    });
    return report;
}

}  // namespace ddq
