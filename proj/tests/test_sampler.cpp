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


#include "ddq/sampler.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

using namespace ddq;

namespace {

constexpr double pi = std::numbers::pi;

IonModel reference_model(double beta = 0.0) {
    IonModel m;
    m.field.beta = beta;
    return m;
}

double exact_p(const IonModel &model, int n, double tau, double phi, DetectionModel det = {}) {
    const PulseSequence seq = build_quadrupole_dd_sequence(n, tau, phi);
    return measure_population_D(CompiledSequence(seq, model).run(FieldTrajectory::zero()), det);
}

}  // namespace

TEST(Detection, GroundStateReadsZero) {
    EXPECT_EQ(measure_population_D(StateVector()), 0.0);
    EXPECT_EQ(measure_population_D(StateVector::basis(BasisLabel::d(3))), 1.0);
    EXPECT_DOUBLE_EQ(measure_population_D(StateVector::prepared_superposition()), 1.0);
}

TEST(Detection, ErrorMapShrinksContrast) {
    const DetectionModel det{0.01, 0.01};
    EXPECT_NEAR(det.apply(1.0) - det.apply(0.0), 0.98, 1e-15);
    const IonModel m = reference_model();
    const double hi = exact_p(m, 8, 250e-6, 0.0, det), lo = exact_p(m, 8, 250e-6, pi, det);
    const double hi0 = exact_p(m, 8, 250e-6, 0.0), lo0 = exact_p(m, 8, 250e-6, pi);
    EXPECT_NEAR((hi - lo) / (hi0 - lo0), 0.98, 1e-12);
    EXPECT_THROW(DetectionModel({0.6, 0.0}).validate(), ConfigError);
    EXPECT_THROW(DetectionModel({0.0, -0.1}).validate(), ConfigError);
}

TEST(Detection, ErrorMapKeepsProbabilityBounds) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> e(0.0, 0.5), p(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const DetectionModel det{e(rng), e(rng)};
        const double q = det.apply(p(rng));
        EXPECT_GE(q, 0.0);
        EXPECT_LE(q, 1.0);
    }
}

TEST(Detection, FringeLawAtAnalyticPhase) {
    // P_D = (1 + cos(phi_laser - phi_total)) / 2 with phi_total from the
    // reference-subtracted analytic phase (quadratic Zeeman off, as the
    // analytic phase omits it).
    IonModel m = reference_model(0.3);
    m.second_order_zeeman = false;
    const double tau = 100e-6;
    const int n = 4;
    const double phi_ref = std::atan2(exact_p(m, n, 0.0, pi / 2) - 0.5, exact_p(m, n, 0.0, 0.0) - 0.5);
    const double phi_total = analytic_phase(n, tau, m) + phi_ref;
    for (double phi : {0.0, 0.4, 1.0, 2.5, 4.0}) {
        EXPECT_NEAR(exact_p(m, n, tau, phi), 0.5 * (1 + std::cos(phi - phi_total)), 1e-10);
    }
    EXPECT_NEAR(exact_p(m, n, tau, std::remainder(phi_total + pi, 2 * pi)), 0.0, 1e-10);
}

TEST(Shots, DeterministicExtremes) {
    std::mt19937_64 e(1);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(sample_shot(0.0, e), 0);
        EXPECT_EQ(sample_shot(1.0, e), 1);
    }
    EXPECT_EQ(sample_shot(-1e-13, e), 0);
    EXPECT_EQ(sample_shot(1.0 + 1e-13, e), 1);
    EXPECT_THROW(sample_shot(-1e-9, e), SimulationError);
    EXPECT_THROW(sample_shot(1.1, e), SimulationError);
    EXPECT_THROW(sample_shot(std::nan(""), e), SimulationError);
}

TEST(Shots, FairCoinWithinFourSigma) {
    std::mt19937_64 e(2024);
    int k = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) k += sample_shot(0.5, e);
    EXPECT_LE(std::abs(k - n / 2.0), 4 * std::sqrt(n * 0.25));
}

TEST(Shots, SubstreamsAreDistinct) {
    EXPECT_NE(rng::derive_seed(1, {0, 0, 0, 0}), rng::derive_seed(1, {0, 0, 0, 1}));
    EXPECT_NE(rng::derive_seed(1, {0, 0, 1, 0}), rng::derive_seed(1, {0, 1, 0, 0}));
    EXPECT_NE(rng::derive_seed(1, {0}), rng::derive_seed(2, {0}));
    EXPECT_EQ(rng::derive_seed(9, {1, 2, 3}), rng::derive_seed(9, {1, 2, 3}));
}

TEST(FringeScan, ShapeAndDeterminism) {
    const IonModel m = reference_model();
    NoiseModel noise;
    noise.kind = NoiseKind::quasi_static;
    noise.sigma_b = field_for_zeeman_shift(1e3, m.species.g_d);
    const auto grid = default_phi_grid();
    ASSERT_EQ(grid.size(), 12u);
    const FringeDataset a = run_fringe_scan(8, 250e-6, m, noise, grid, 300, 42);
    const FringeDataset b = run_fringe_scan(8, 250e-6, m, noise, grid, 300, 42);
    const FringeDataset c = run_fringe_scan(8, 250e-6, m, noise, grid, 300, 43);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    a.validate();
    int total = 0;
    for (const auto &p : a.points) total += p.n_shots;
    EXPECT_EQ(total, 3600);
    EXPECT_EQ(a.context.n_echo, 8);
    EXPECT_EQ(a.context.tau, 250e-6);
}

TEST(FringeScan, NoiselessCountsFollowExactProbability) {
    const IonModel m = reference_model(0.7);
    const auto grid = default_phi_grid();
    const FringeDataset sampled = run_fringe_scan(8, 200e-6, m, NoiseModel{}, grid, 300, 5);
    ScanOptions exact;
    exact.exact = true;
    const FringeDataset ex = run_fringe_scan(8, 200e-6, m, NoiseModel{}, grid, 300, 5, exact);
    EXPECT_TRUE(ex.exact);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p = exact_p(m, 8, 200e-6, grid[i]);
        EXPECT_NEAR(ex.points[i].k_D, 300 * p, 1e-9);
        const double sd = std::sqrt(300 * p * (1 - p));
        EXPECT_LE(std::abs(sampled.points[i].k_D - 300 * p), 5 * sd + 1e-9);
    }
}

TEST(FringeScan, ExtremaReachFullContrast) {
    // Laser phases placed at the fringe maximum and minimum.
    const IonModel m = reference_model();
    const double phi_ref = std::atan2(exact_p(m, 8, 0.0, pi / 2) - 0.5, exact_p(m, 8, 0.0, 0.0) - 0.5);
    double top = std::fmod(analytic_phase(8, 250e-6, m) + phi_ref, 2 * pi);
    if (top < 0) top += 2 * pi;
    const double bottom = top < pi ? top + pi : top - pi;
    const std::vector<double> grid = {std::min(top, bottom), std::max(top, bottom)};
    const FringeDataset d = run_fringe_scan(8, 250e-6, m, NoiseModel{}, grid, 300, 11);
    const auto &at_top = top < bottom ? d.points[0] : d.points[1];
    const auto &at_bottom = top < bottom ? d.points[1] : d.points[0];
    EXPECT_EQ(at_top.k_D, 300);
    EXPECT_EQ(at_bottom.k_D, 0);
}

TEST(FringeScan, RejectsBadInputs) {
    const IonModel m;
    EXPECT_THROW(run_fringe_scan(8, 1e-4, m, NoiseModel{}, {}, 10, 1), SimulationError);
    EXPECT_THROW(run_fringe_scan(8, 1e-4, m, NoiseModel{}, {0.0}, 0, 1), SimulationError);
    EXPECT_THROW(run_fringe_scan(8, 1e-4, m, NoiseModel{}, {1.0, 0.5}, 10, 1), SimulationError);
    EXPECT_THROW(run_fringe_scan(8, 1e-4, m, NoiseModel{}, {7.0}, 10, 1), SimulationError);
    EXPECT_THROW(run_fringe_scan(7, 1e-4, m, NoiseModel{}, {0.0}, 10, 1), SimulationError);
}

TEST(FringeScan, PhaseOffsetShiftsFringe) {
    const IonModel m = reference_model(0.2);
    ScanOptions plain, shifted;
    plain.exact = shifted.exact = true;
    shifted.phase_offset = 0.15;
    const std::vector<double> grid = {0.5, 1.5};
    const auto a = run_fringe_scan(4, 1e-4, m, NoiseModel{}, {0.5 - 0.15 + 2 * pi - 2 * pi}, 100, 1, plain);
    const auto b = run_fringe_scan(4, 1e-4, m, NoiseModel{}, {0.5}, 100, 1, shifted);
    EXPECT_NEAR(a.points[0].k_D, b.points[0].k_D, 1e-9);
}

namespace {

CampaignPlan small_plan() {
    CampaignPlan plan;
    plan.betas = {0.0, 0.6, 1.2};
    plan.gradients = {0.5e8, 1.0e8};
    plan.tau_totals = {2e-3, 4e-3};
    plan.shots = 50;
    plan.seed = 77;
    return plan;
}

}  // namespace

TEST(Campaign, StructureAndReferences) {
    const CampaignPlan plan = small_plan();
    const CampaignDataset d = run_campaign(plan, IonModel{}, NoiseModel{});
    ASSERT_EQ(d.cells.size(), 12u);
    EXPECT_EQ(d.cells[0].beta_nominal, 0.0);
    EXPECT_EQ(d.cells[3].dez_dz, 1.0e8);
    EXPECT_EQ(d.cells[3].tau_total, 4e-3);
    EXPECT_EQ(d.cells[4].beta_nominal, 0.6);
    for (const auto &c : d.cells) {
        EXPECT_TRUE(c.reference_fringe.context.reference);
        EXPECT_EQ(c.reference_fringe.context.tau, 0.0);
        EXPECT_EQ(c.fringe.context.tau, c.tau_total / 16);
        EXPECT_EQ(c.fringe.points.size(), 12u);
        c.fringe.validate();
        c.reference_fringe.validate();
    }
}

TEST(Campaign, DeterministicAcrossThreadCounts) {
    const CampaignPlan plan = small_plan();
    NoiseModel noise;
    noise.kind = NoiseKind::random_walk;
    noise.sigma_b = 1e-8;
    noise.drift_rate_sigma = 1e-7;
    noise.step_dt = 2e-4;
    CampaignOptions one, four;
    four.threads = 4;
    const CampaignDataset a = run_campaign(plan, IonModel{}, noise, one);
    const CampaignDataset b = run_campaign(plan, IonModel{}, noise, four);
    const CampaignDataset c = run_campaign(plan, IonModel{}, noise, one);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Campaign, BetaCalibrationErrorPerAngle) {
    CampaignPlan plan = small_plan();
    plan.shots = 1;
    IonModel m;
    m.field.beta_calibration_sigma = 0.01;
    const CampaignDataset d = run_campaign(plan, m, NoiseModel{});
    for (std::size_t c = 0; c < d.cells.size(); ++c) {
        const auto &ctx = d.cells[c].fringe.context;
        EXPECT_NE(ctx.beta_true, ctx.beta_nominal);
        EXPECT_LT(std::abs(ctx.beta_true - ctx.beta_nominal), 0.06);
        // all cells at one angle share the same drawn error
        const auto &first = d.cells[(c / 4) * 4].fringe.context;
        EXPECT_EQ(ctx.beta_true, first.beta_true);
    }
}

TEST(Campaign, DetectionErrorsKeepCountBounds) {
    CampaignPlan plan = small_plan();
    CampaignOptions opts;
    opts.scan.detection = {0.5, 0.5};
    const CampaignDataset d = run_campaign(plan, IonModel{}, NoiseModel{}, opts);
    for (const auto &c : d.cells) c.fringe.validate();
}

TEST(Campaign, RejectsBadPlans) {
    CampaignPlan plan = small_plan();
    plan.n_echo = 3;
    EXPECT_THROW(run_campaign(plan, IonModel{}, NoiseModel{}), ConfigError);
    plan = small_plan();
    plan.betas.clear();
    EXPECT_THROW(run_campaign(plan, IonModel{}, NoiseModel{}), ConfigError);
    plan = small_plan();
    plan.angle_phase_offsets = {0.1};
    EXPECT_THROW(run_campaign(plan, IonModel{}, NoiseModel{}), ConfigError);
}

TEST(Campaign, CustomSequenceMatchesBuilder) {
    CampaignPlan plan = small_plan();
    CampaignOptions custom;
    custom.sequence = build_quadrupole_dd_sequence(8, Parameter::named("tau"), Parameter::named("phi_laser"));
    EXPECT_EQ(run_campaign(plan, IonModel{}, NoiseModel{}, custom), run_campaign(plan, IonModel{}, NoiseModel{}));
    custom.sequence = build_quadrupole_dd_sequence(4, Parameter::named("tau"), Parameter::named("phi_laser"));
    EXPECT_THROW(run_campaign(plan, IonModel{}, NoiseModel{}, custom), ConfigError);
    custom.sequence = build_quadrupole_dd_sequence(8, 1e-4, 0.0);
    EXPECT_THROW(run_campaign(plan, IonModel{}, NoiseModel{}, custom), ConfigError);
}

TEST(Campaign, ShotThroughputWithQuasiStaticNoise) {
    // Sizing guard for replication studies: one full-scale fringe pair.
    const IonModel m;
    NoiseModel noise;
    noise.kind = NoiseKind::quasi_static;
    noise.sigma_b = 6e-8;
    const auto t0 = std::chrono::steady_clock::now();
    run_fringe_scan(8, 250e-6, m, noise, default_phi_grid(), 300, 1);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    RecordProperty("seconds_per_3600_shots", std::to_string(seconds));
    EXPECT_LT(seconds, 2.0);
}
