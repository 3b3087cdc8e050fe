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


#include <cmath>
#include <numbers>
#include <random>

#include "ddq/bootstrap.hpp"
#include "ddq/joint_fit.hpp"
#include "ddq/linear_fit.hpp"
#include "ddq/report.hpp"
#include "gtest/gtest.h"

using namespace ddq;

namespace {

constexpr double pi = std::numbers::pi;

struct Truth {
    double theta = 2.973;
    double beta0 = 0.1;
    double epsilon1 = 0.0;
    double alpha = 0.0;
    std::vector<double> offsets;  // per angle, empty = zero
};

std::vector<double> default_betas() {
    std::vector<double> b;
    for (int i = 0; i < 7; ++i) b.push_back(i * (pi / 2) / 6);
    return b;
}

// Cell phases straight from the closed-form model, optionally with Gaussian noise.
std::vector<CellPhase> synthetic_cells(const Truth &t, const std::vector<double> &betas,
                                       const std::vector<double> &gradients, const std::vector<double> &taus,
                                       double sigma = 0.03, std::mt19937_64 *rng = nullptr) {
    std::vector<CellPhase> cells;
    std::normal_distribution<double> noise(0.0, sigma);
    for (std::size_t k = 0; k < betas.size(); ++k) {
        for (double g : gradients) {
            for (double tau : taus) {
                CellPhase c;
                c.beta_nominal = betas[k];
                c.dez_dz = g;
                c.tau_total = tau;
                c.n_echo = 8;
                const double phi = tau * quadrupole_phase_coefficient() * g * t.theta *
                                       quadrupole_geometry(betas[k] + t.beta0, t.epsilon1, t.alpha) +
                                   (t.offsets.empty() ? 0.0 : t.offsets[k]);
                c.phase = wrap_phase(phi + (rng ? noise(*rng) : 0.0));
                c.sigma = sigma;
                cells.push_back(c);
            }
        }
    }
    return cells;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear fits
// ---------------------------------------------------------------------------

TEST(LinearFit, PhaseSlopeAtZeroAngle) {
    IonModel m;
    std::vector<PhaseTimePoint> pts;
    for (double t : {1e-3, 2e-3, 3e-3, 4e-3}) pts.push_back({t, analytic_phase(8, t / 16, m), 0.03});
    const PhaseSlope s = fit_phase_vs_time(pts);
    EXPECT_NEAR(s.slope_hz, 181.17323907907925, 1e-9);
    EXPECT_NEAR(s.slope, 1138.3450338358052, 1e-8);
    EXPECT_NEAR(s.intercept, 0.0, 1e-9);
}

TEST(LinearFit, SingularDesign) {
    EXPECT_THROW(fit_phase_vs_time({{1e-3, 0.1, 0.01}, {1e-3, 0.2, 0.01}}), FitError);
    EXPECT_THROW(fit_frequency_vs_gradient({{1e8, 1, 1}, {1e8, 2, 1}}), FitError);
    EXPECT_THROW(fit_frequency_vs_gradient({{1e8, 1, 0}, {2e8, 2, 1}}), FitError);
}

TEST(LinearFit, ZeroSlopeCoveredByInterval) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.05);
    std::vector<PhaseTimePoint> pts;
    for (int i = 1; i <= 8; ++i) pts.push_back({i * 5e-4, 0.3 + n(rng), 0.05});
    const PhaseSlope s = fit_phase_vs_time(pts);
    EXPECT_LE(s.ci95.first, 0.0);
    EXPECT_GE(s.ci95.second, 0.0);
}

TEST(LinearFit, GradientSlopeAndSignFlip) {
    std::vector<FrequencyGradientPoint> pts;
    const double per = 181.17323907907925 / 1e8;
    for (double g : {0.5e8, 1e8, 1.5e8}) pts.push_back({g, per * g, 0.5});
    const GradientSlope a = fit_frequency_vs_gradient(pts);
    EXPECT_NEAR(a.slope / 1.8117323907907924e-06, 1.0, 1e-12);
    EXPECT_NEAR(a.intercept, 0.0, 1e-9);
    for (auto &p : pts) p.frequency = -p.frequency;
    const GradientSlope b = fit_frequency_vs_gradient(pts);
    EXPECT_EQ(b.slope, -a.slope);
}

TEST(LinearFit, MatchesNormalEquations) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 6;
        std::vector<double> x(n), y(n), s(n);
        Eigen::MatrixXd A(n, 2);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) {
            x[i] = 1e8 * u(rng), y[i] = u(rng), s[i] = 0.1 + u(rng);
            A(i, 0) = 1.0 / s[i], A(i, 1) = x[i] / s[i], b(i) = y[i] / s[i];
        }
        const LinearFit f = weighted_linear_fit(x, y, s);
        const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
        const Eigen::Matrix2d cov = (A.transpose() * A).inverse();
        EXPECT_NEAR(f.intercept, sol(0), 1e-9 * (1 + std::abs(sol(0))));
        EXPECT_NEAR(f.slope / sol(1), 1.0, 1e-9);
        EXPECT_NEAR(f.slope_sigma / std::sqrt(cov(1, 1)), 1.0, 1e-7);
        EXPECT_NEAR(f.intercept_sigma / std::sqrt(cov(0, 0)), 1.0, 1e-7);
        EXPECT_NEAR(f.chi2, (A * sol - b).squaredNorm(), 1e-8);
    }
}

TEST(Unwrap, ContinuityAndAmbiguity) {
    std::vector<double> truth, wrapped;
    for (int i = 0; i <= 10; ++i) truth.push_back(1.2 * i), wrapped.push_back(wrap_phase(1.2 * i));
    const Unwrapped u = unwrap_by_continuity(std::vector<double>(wrapped.begin() + 1, wrapped.end()));
    for (int i = 1; i <= 10; ++i) EXPECT_NEAR(u.phases[i - 1], truth[i], 1e-12);
    EXPECT_FALSE(u.ambiguous);
    const Unwrapped v = unwrap_by_continuity({0.3, 2.2});
    EXPECT_TRUE(v.ambiguous);
}

// ---------------------------------------------------------------------------
// Joint fit
// ---------------------------------------------------------------------------

TEST(JointFit, NoiselessRecovery) {
    Truth t;
    const auto cells = synthetic_cells(t, default_betas(), {0.5e8, 1e8, 1.5e8}, {4e-3});
    const JointFitResult r = joint_fit_quadrupole(cells);
    EXPECT_NEAR(r.theta / 2.973, 1.0, 1e-6);
    EXPECT_NEAR(r.beta0, 0.1, 1e-6);
    for (double c : r.per_angle_offsets) EXPECT_NEAR(c, 0.0, 1e-6);
    EXPECT_TRUE(r.fit_diagnostics.converged);
    EXPECT_LE(r.ci95_theta.first, r.theta);
    EXPECT_GE(r.ci95_theta.second, r.theta);
    EXPECT_EQ(r.angles.size(), 7u);
}

TEST(JointFit, NoiselessRecoveryWithOffsetsAndAsymmetry) {
    Truth t;
    t.beta0 = -0.2;
    t.offsets = {0.15, -0.1, 0.05, 0.19, -0.18, 0.0, 0.12};
    const auto cells = synthetic_cells(t, default_betas(), {0.5e8, 1e8, 1.5e8}, {4e-3});
    const JointFitResult r = joint_fit_quadrupole(cells);
    EXPECT_NEAR(r.theta / 2.973, 1.0, 1e-6);
    EXPECT_NEAR(r.beta0, -0.2, 1e-6);
    for (std::size_t k = 0; k < t.offsets.size(); ++k) EXPECT_NEAR(r.per_angle_offsets[k], t.offsets[k], 1e-6);

    // eps1 with an azimuth that makes it visible.
    Truth a;
    a.epsilon1 = 0.08;
    a.alpha = 0.3;
    JointFitOptions opt;
    opt.fit_epsilon1 = true;
    opt.alpha = 0.3;
    const JointFitResult re = joint_fit_quadrupole(synthetic_cells(a, default_betas(), {0.5e8, 1e8, 1.5e8}, {2e-3, 4e-3}), opt);
    EXPECT_NEAR(re.theta / 2.973, 1.0, 1e-6);
    EXPECT_NEAR(re.epsilon1, 0.08, 1e-6);
}

TEST(JointFit, AnalyticJacobianMatchesFiniteDifferences) {
    std::mt19937_64 rng(12);
    Truth t;
    t.offsets = {0.1, 0.0, -0.1, 0.05, 0.0, 0.0, 0.02};
    const auto cells = synthetic_cells(t, default_betas(), {0.5e8, 1e8}, {1e-3}, 0.03, &rng);
    for (bool eps : {false, true}) {
        JointFitOptions opt;
        opt.fit_epsilon1 = eps;
        opt.alpha = 0.4;
        const JointModel model(cells, opt);
        optimize::Vector x = optimize::Vector::Zero(model.n_params());
        x(0) = 2.9, x(1) = 0.13;
        if (eps) x(2) = 0.05;
        for (int a = 0; a < model.n_angles(); ++a) x(model.n_shape() + a) = 0.01 * a;
        const optimize::Matrix fd =
            optimize::finite_difference_jacobian([&](const optimize::Vector &y) { return model.residuals(y); }, x, 1e-6);
        const optimize::Matrix an = model.jacobian(x);
        EXPECT_LE((fd - an).norm() / an.norm(), 1e-4);
    }
}

TEST(JointFit, NonIdentifiableInputs) {
    Truth t;
    const double magic = std::acos(1 / std::sqrt(3.0));
    EXPECT_THROW(joint_fit_quadrupole(synthetic_cells(t, {magic}, {0.5e8, 1e8}, {4e-3})), NonIdentifiableError);
    EXPECT_THROW(joint_fit_quadrupole(synthetic_cells(t, {0.3, 0.3}, {0.5e8, 1e8}, {4e-3})), NonIdentifiableError);
    EXPECT_THROW(joint_fit_quadrupole(synthetic_cells(t, {0.0, 0.5}, {1e8}, {4e-3})), NonIdentifiableError);
    JointFitOptions opt;
    opt.fit_epsilon1 = true;
    opt.alpha = pi / 4;  // cos(2 alpha) = 0: eps1 has no effect
    EXPECT_THROW(joint_fit_quadrupole(synthetic_cells(t, default_betas(), {0.5e8, 1e8}, {4e-3}), opt),
                 NonIdentifiableError);
}

TEST(JointFit, OffsetSubtractionPathAgrees) {
    Truth t;
    t.offsets = {0.15, -0.1, 0.05, 0.19, -0.18, 0.0, 0.12};
    const auto cells = synthetic_cells(t, default_betas(), {0.5e8, 1e8, 1.5e8}, {4e-3});
    const JointFitResult joint = joint_fit_quadrupole(cells);
    const JointFitResult sub = joint_fit_offset_subtracted(cells);
    EXPECT_NEAR(sub.theta, joint.theta, 1e-6);
    EXPECT_NEAR(sub.beta0, joint.beta0, 1e-6);
    for (std::size_t k = 0; k < t.offsets.size(); ++k) EXPECT_NEAR(sub.per_angle_offsets[k], t.offsets[k], 1e-6);
}

TEST(JointFit, TwoStageChainAgreesNoiseless) {
    Truth t;
    t.offsets = {0.1, -0.1, 0.05, 0.0, 0.0, 0.0, 0.1};
    for (const std::vector<double> &taus : {std::vector<double>{4e-3}, std::vector<double>{1e-3, 2e-3, 3e-3, 4e-3}}) {
        const auto cells = synthetic_cells(t, default_betas(), {0.5e8, 1e8, 1.5e8}, taus);
        const JointFitResult joint = joint_fit_quadrupole(cells);
        const TwoStageResult chain = two_stage_theta(cells);
        EXPECT_NEAR(chain.theta, 2.973, 1e-6);
        EXPECT_LT(std::abs(chain.theta - joint.theta), joint.theta_sigma);
    }
}

TEST(JointFit, TwoStageChainAgreesStatistically) {
    Truth t;
    t.offsets = {0.1, -0.1, 0.05, 0.0, 0.0, 0.0, 0.1};
    int within = 0;
    double mean_diff = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        const auto cells = synthetic_cells(t, default_betas(), {0.5e8, 1e8, 1.5e8}, {4e-3}, 0.033, &rng);
        JointFitOptions opt;
        opt.profile_interval = false;
        const JointFitResult joint = joint_fit_quadrupole(cells, opt);
        const TwoStageResult chain = two_stage_theta(cells);
        within += std::abs(chain.theta - joint.theta) < joint.theta_sigma;
        mean_diff += (chain.theta - joint.theta) / 50;
    }
    EXPECT_GE(within, 48);
    EXPECT_LT(std::abs(mean_diff), 0.005);
}

TEST(JointFit, ProfileIntervalCoverage) {
    Truth t;
    int covered = 0;
    const int runs = 100;
    for (int seed = 0; seed < runs; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        const auto cells = synthetic_cells(t, default_betas(), {0.5e8, 1e8, 1.5e8}, {4e-3}, 0.033, &rng);
        const JointFitResult r = joint_fit_quadrupole(cells);
        covered += r.ci95_theta.first <= 2.973 && 2.973 <= r.ci95_theta.second;
    }
    EXPECT_GE(covered, 89);
}

TEST(JointFit, ScalingDegeneracy) {
    Truth a, b;
    const double s = 3.7;
    b.theta = a.theta / s;
    const auto ca = synthetic_cells(a, default_betas(), {0.5e8, 1e8}, {4e-3});
    const auto cb = synthetic_cells(b, default_betas(), {0.5e8 * s, 1e8 * s}, {4e-3});
    for (std::size_t i = 0; i < ca.size(); ++i) EXPECT_NEAR(ca[i].phase, cb[i].phase, 1e-12);
}

TEST(JointFit, ProfileSamplesBracketMinimum) {
    std::mt19937_64 rng(3);
    const auto cells = synthetic_cells(Truth{}, default_betas(), {0.5e8, 1e8, 1.5e8}, {4e-3}, 0.03, &rng);
    const JointFitResult r = joint_fit_quadrupole(cells);
    ASSERT_EQ(r.fit_diagnostics.profile.size(), 21u);
    for (const auto &[theta, d] : r.fit_diagnostics.profile) EXPECT_GE(d, -1e-9);
    EXPECT_GT(r.fit_diagnostics.profile.front().second, 3.84);
    EXPECT_GT(r.fit_diagnostics.profile.back().second, 3.84);
    // Asymmetric in general; close to the curvature interval here.
    EXPECT_NEAR(r.ci95_theta.second - r.ci95_theta.first, 2 * kZ95 * r.theta_sigma, 0.1 * r.theta_sigma);
}

// ---------------------------------------------------------------------------
// End to end on simulated fringes
// ---------------------------------------------------------------------------

namespace {

CampaignPlan compact_plan() {
    CampaignPlan plan;
    plan.betas = {0.0, 0.5, 1.0, 1.5};
    plan.gradients = {0.5e8, 1.0e8, 1.5e8};
    plan.tau_totals = {4e-3};
    plan.shots = 300;
    plan.seed = 2;
    return plan;
}

}  // namespace

TEST(Pipeline, ExactCampaignRecoversTheta) {
    IonModel m;
    m.second_order_zeeman = false;
    m.field.beta0 = 0.1;
    CampaignOptions opt;
    opt.scan.exact = true;
    const CampaignDataset d = run_campaign(compact_plan(), m, NoiseModel{}, opt);
    const auto cells = extract_cell_phases(d);
    for (const auto &c : cells) {
        IonModel mc = m;
        mc.trap.dez_dz = c.dez_dz;
        mc.field.beta = c.beta_nominal;
        EXPECT_NEAR(wrap_phase(c.phase - analytic_phase(8, c.tau_total / 16, mc)), 0.0, 1e-9);
    }
    const JointFitResult r = joint_fit_quadrupole(cells);
    EXPECT_NEAR(r.theta / 2.973, 1.0, 1e-6);
    EXPECT_NEAR(r.beta0, 0.1, 1e-6);
}

TEST(Pipeline, CommonPhaseShiftCancels) {
    IonModel m;
    const CampaignDataset d = run_campaign(compact_plan(), m, NoiseModel{});
    CampaignDataset shifted = d;
    for (auto &c : shifted.cells) {
        for (auto *f : {&c.fringe, &c.reference_fringe}) {
            for (auto &p : f->points) p.phi_laser += 0.77;
        }
    }
    const auto a = extract_cell_phases(d), b = extract_cell_phases(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(wrap_phase(a[i].phase - b[i].phase), 0.0, 1e-9);
    JointFitOptions opt;
    opt.profile_interval = false;
    EXPECT_NEAR(joint_fit_quadrupole(a, opt).theta, joint_fit_quadrupole(b, opt).theta, 1e-9);
}

TEST(Pipeline, InjectedOffsetsBecomeNuisances) {
    IonModel m;
    m.second_order_zeeman = false;
    CampaignPlan plan = compact_plan();
    plan.angle_phase_offsets = {0.1, -0.15, 0.05, 0.18};
    CampaignOptions opt;
    opt.scan.exact = true;
    const JointFitResult r = joint_fit_quadrupole(extract_cell_phases(run_campaign(plan, m, NoiseModel{}, opt)));
    EXPECT_NEAR(r.theta / 2.973, 1.0, 1e-6);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(r.per_angle_offsets[k], plan.angle_phase_offsets[k], 1e-6);
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

TEST(Bootstrap, ExactDataGivesZeroWidth) {
    IonModel m;
    CampaignOptions opt;
    opt.scan.exact = true;
    const CampaignDataset d = run_campaign(compact_plan(), m, NoiseModel{}, opt);
    const BootstrapResult b = bootstrap_ci(d, 100, 1);
    EXPECT_EQ(b.ci95.first, b.ci95.second);
    EXPECT_THROW(bootstrap_ci(d, 99, 1), FitError);
}

TEST(Bootstrap, DeterministicAndConsistentWithProfile) {
    IonModel m;
    NoiseModel noise;
    noise.kind = NoiseKind::quasi_static;
    noise.sigma_b = field_for_zeeman_shift(1e3, m.species.g_d);
    const CampaignDataset d = run_campaign(compact_plan(), m, noise);
    const BootstrapResult a = bootstrap_ci(d, 100, 9);
    const BootstrapResult b = bootstrap_ci(d, 100, 9);
    EXPECT_EQ(a.ci95, b.ci95);
    EXPECT_EQ(a.failures, 0);
    const JointFitResult r = joint_fit_quadrupole(extract_cell_phases(d));
    const double boot_half = 0.5 * (a.ci95.second - a.ci95.first);
    const double prof_half = 0.5 * (r.ci95_theta.second - r.ci95_theta.first);
    EXPECT_NEAR(boot_half / prof_half, 1.0, 0.25);
}

TEST(Bootstrap, QuantileInterpolation) {
    EXPECT_EQ(empirical_quantile({1, 2, 3, 4, 5}, 0.5), 3);
    EXPECT_DOUBLE_EQ(empirical_quantile({0, 10}, 0.25), 2.5);
}

// ---------------------------------------------------------------------------
// Comparison report
// ---------------------------------------------------------------------------

namespace {

JointFitResult published_result() {
    JointFitResult r;
    r.theta = 2.973;
    r.ci95_theta = {2.973 - 0.033, 2.973 + 0.026};
    return r;
}

}  // namespace

TEST(Report, SelfComparisonIsZero) {
    IonSpecies s;
    s.reference_theta_values = {{"self", 2.973, 0.03, "measurement"}};
    const auto rep = theta_comparison_report(published_result(), s);
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_EQ(rep.rows[0].deviation_sigma, 0.0);
    EXPECT_EQ(rep.rows[0].deviation_text, "0.0σ");
}

TEST(Report, PriorMeasurementHandArithmetic) {
    const auto rep = theta_comparison_report(published_result(), IonSpecies{});
    ASSERT_EQ(rep.rows.size(), 1u);
    // (2.973 - 2.6) / sqrt(0.3^2 + (0.033 / 1.96)^2)
    const double expected = 0.373 / std::sqrt(0.09 + std::pow(0.033 / 1.959963984540054, 2));
    EXPECT_NEAR(rep.rows[0].deviation_sigma, expected, 1e-12);
    EXPECT_EQ(rep.rows[0].deviation_text, "1.2σ");
    EXPECT_NE(rep.to_text().find("2.973 +0.026 -0.033"), std::string::npos);
}

TEST(Report, RowsSortedByDeviation) {
    IonSpecies s;
    s.reference_theta_values = {{"far", 2.0, 0.1, "theory"}, {"near", 2.95, 0.05, "theory"},
                                {"mid", 3.3, 0.1, "theory"}, {"above", 3.0, 0.01, "theory"}};
    JointFitResult r = published_result();
    r.theta = 2.981;
    const auto rep = theta_comparison_report(r, s);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        EXPECT_LE(std::abs(rep.rows[i - 1].deviation_sigma), std::abs(rep.rows[i].deviation_sigma));
    }
    EXPECT_EQ(rep.rows.front().label, "near");
    EXPECT_EQ(rep.rows.back().label, "far");
}
