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

#include "ddq/sequence.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

using namespace ddq;

namespace {

constexpr double pi = std::numbers::pi;

double population_d(const StateVector &s) {
    double p = 0.0;
    for (int i = kFirstD; i < kNumLevels; ++i) p += std::norm(s[i]);
    return p;
}

double wrap(double x) {
    return std::remainder(x, 2 * pi);
}

// Fringe phase by discrete Fourier analysis of P_D over 8 laser phases. The
// ideal fringe is A + B cos(phi_laser - phase), so the first harmonic is exact.
double fringe_phase(const IonModel &model, int n, double tau, const FieldTrajectory &traj = {},
                    double rf_area = pi, SimulationOptions opts = {}) {
    double c = 0.0, s = 0.0;
    for (int k = 0; k < 8; ++k) {
        const double phi = 2 * pi * k / 8;
        PulseSequence seq = build_quadrupole_dd_sequence(n, tau, phi);
        for (auto &e : seq.elements) {
            if (auto *rf = std::get_if<RfPulse>(&e)) rf->area = rf_area;
        }
        const double p = population_d(run_sequence(StateVector::basis(seq.initial), seq, model, traj, opts));
        c += p * std::cos(phi);
        s += p * std::sin(phi);
    }
    return std::atan2(s, c);
}

double total_phase(const IonModel &model, int n, double tau, const FieldTrajectory &traj = {}, double rf_area = pi,
                   SimulationOptions opts = {}) {
    return wrap(fringe_phase(model, n, tau, traj, rf_area, opts) - fringe_phase(model, n, 0.0, {}, rf_area, opts));
}

IonModel reference_model(double beta) {
    IonModel m;
    m.trap.dez_dz = 1e8;
    m.theta = 2.973;
    m.field.b = 3e-4;
    m.field.beta = beta;
    m.second_order_zeeman = false;
    return m;
}

}  // namespace

TEST(build_quadrupole_dd_sequence, structure) {
    const auto seq = build_quadrupole_dd_sequence(2, 1e-4, 0.0);
    EXPECT_EQ(seq.elements.size(), 11u);
    EXPECT_EQ(seq.initial, BasisLabel::s(-1));
    EXPECT_TRUE(std::holds_alternative<Measure>(seq.elements.back()));
    const auto eight = build_quadrupole_dd_sequence(8, 250e-6, 0.0);
    EXPECT_NEAR(eight.total_wait(), 4e-3, 1e-15);
    int rf_index = 0;
    for (std::size_t i = 0; i < eight.elements.size(); ++i) {
        if (const auto *rf = std::get_if<RfPulse>(&eight.elements[i])) {
            EXPECT_DOUBLE_EQ(rf->area, pi);
            EXPECT_DOUBLE_EQ(rf->rf_phase.get(), rf_index % 2 == 0 ? 0.0 : pi);
            EXPECT_TRUE(std::holds_alternative<Wait>(eight.elements[i - 1]));
            EXPECT_TRUE(std::holds_alternative<Wait>(eight.elements[i + 1]));
            ++rf_index;
        }
    }
    EXPECT_EQ(rf_index, 8);
    EXPECT_EQ(eight.metadata.n_echo, 8);
}

TEST(build_quadrupole_dd_sequence, rejects_odd_or_small_n) {
    EXPECT_THROW(build_quadrupole_dd_sequence(3, 1e-4, 0.0), SimulationError);
    EXPECT_THROW(build_quadrupole_dd_sequence(0, 1e-4, 0.0), SimulationError);
    EXPECT_THROW(build_quadrupole_dd_sequence(2, -1e-4, 0.0), SimulationError);
}

TEST(apply_optical_pulse, preparation_makes_equal_superposition) {
    StateVector s = StateVector::basis(BasisLabel::s(-1));
    s = apply_optical_pulse(s, {HalfInteger::from_twice(-5), pi / 2, Parameter::literal(0.0)});
    s = apply_optical_pulse(s, {HalfInteger::from_twice(-1), pi, Parameter::literal(0.0)});
    EXPECT_NEAR(std::abs(s.amplitude(BasisLabel::d(-5))), 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::abs(s.amplitude(BasisLabel::d(-1))), 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(s.norm_squared(), 1.0, 1e-15);
}

TEST(apply_optical_pulse, zero_area_and_double_pi) {
    StateVector s = StateVector::prepared_superposition();
    s[0] = 0.3;
    s[BasisLabel::d(-5).index()] = Complex(0.2, 0.5);
    const OpticalPulse zero{HalfInteger::from_twice(-5), 0.0, Parameter::literal(0.4)};
    const auto z = apply_optical_pulse(s, zero);
    for (int i = 0; i < kNumLevels; ++i) EXPECT_EQ(z[i], s[i]);
    const OpticalPulse pi_pulse{HalfInteger::from_twice(-5), pi, Parameter::literal(0.4)};
    const auto twice = apply_optical_pulse(apply_optical_pulse(s, pi_pulse), pi_pulse);
    for (int i = 0; i < kNumLevels; ++i) EXPECT_NEAR(std::norm(twice[i]), std::norm(s[i]), 1e-15);
    // 2 pi rotation: coupled amplitudes flip sign
    EXPECT_NEAR(std::abs(twice[0] + s[0]), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(twice[BasisLabel::d(-5).index()] + s[BasisLabel::d(-5).index()]), 0.0, 1e-15);
}

TEST(apply_rf_pulse, pi_pulse_maps_subspaces) {
    const auto s = apply_rf_pulse(StateVector::prepared_superposition(), {pi, Parameter::literal(0.0)});
    EXPECT_NEAR(s.population(BasisLabel::d(5)), 0.5, 1e-12);
    EXPECT_NEAR(s.population(BasisLabel::d(1)), 0.5, 1e-12);
    const auto t = apply_rf_pulse(StateVector::basis(BasisLabel::d(-5)), {pi, Parameter::literal(pi)});
    EXPECT_NEAR(t.population(BasisLabel::d(5)), 1.0, 1e-12);
}

TEST(free_evolve, zero_time_is_identity) {
    const auto s = StateVector::prepared_superposition();
    const auto out = free_evolve(s, 0.0, reference_model(0.0), {});
    for (int i = 0; i < kNumLevels; ++i) EXPECT_EQ(out[i], s[i]);
}

TEST(free_evolve, two_quantum_zeeman_gap) {
    IonModel m = reference_model(0.0);
    m.theta = 0.0;
    const double tau = 1.37e-7;
    const auto out = free_evolve(StateVector::prepared_superposition(), tau, m, {});
    const double rel = std::arg(out.amplitude(BasisLabel::d(-5)) / out.amplitude(BasisLabel::d(-1)));
    FieldConfig f;
    f.b = 3e-4;
    EXPECT_NEAR(wrap(rel - 2 * pi * 2 * zeeman_splitting(f, 1.2) * tau), 0.0, 1e-9);
}

TEST(free_evolve, quadrupole_phase_matches_arm_rate) {
    IonModel m = reference_model(0.0);
    m.field.b = 0.0;
    const double tau = 2.5e-4;
    const auto out = free_evolve(StateVector::prepared_superposition(), tau, m, {});
    const double rel = std::arg(out.amplitude(BasisLabel::d(-5)) / out.amplitude(BasisLabel::d(-1)));
    EXPECT_NEAR(rel, 1138.3450338358052 * tau, 1e-9);
}

TEST(run_sequence, total_phase_at_forty_five_degrees) {
    EXPECT_NEAR(total_phase(reference_model(pi / 4), 8, 250e-6), 1.138345033835806, 1e-9);
}

TEST(run_sequence, static_zeeman_offset_is_cancelled) {
    const IonModel m = reference_model(pi / 4);
    const double base = total_phase(m, 8, 250e-6);
    for (double khz : {0.1, 1.0, 5.0, 40.0}) {
        const auto traj = FieldTrajectory::constant(field_for_zeeman_shift(khz * 1e3, 1.2));
        EXPECT_NEAR(wrap(total_phase(m, 8, 250e-6, traj) - base), 0.0, 1e-9) << khz;
    }
}

TEST(run_sequence, signal_accumulation_matches_analytic_phase) {
    for (double beta : {0.0, pi / 4, 1.0}) {
        const IonModel m = reference_model(beta);
        for (int n : {2, 4, 8, 16}) {
            for (double tau : {50e-6, 250e-6}) {
                EXPECT_NEAR(wrap(total_phase(m, n, tau) - analytic_phase(n, tau, m)), 0.0, 1e-9)
                    << beta << " " << n << " " << tau;
            }
        }
    }
    EXPECT_NEAR(analytic_phase(8, 250e-6, reference_model(0.0)), 4.553380135343221, 1e-9);
    EXPECT_EQ(analytic_phase(8, 0.0, reference_model(0.0)), 0.0);
    EXPECT_NEAR(analytic_phase(8, 250e-6, reference_model(std::acos(1 / std::sqrt(3.0)))), 0.0, 1e-12);
}

TEST(run_sequence, norm_is_preserved_by_every_element) {
    IonModel m = reference_model(0.7);
    NoiseModel noise;
    noise.kind = NoiseKind::random_walk;
    noise.sigma_b = 1e-7;
    noise.drift_rate_sigma = 1e-5;
    const auto traj = sample_noise_trajectory(noise, 5e-3, 9);
    const auto seq = build_quadrupole_dd_sequence(8, 250e-6, 0.3);
    StateVector s = StateVector::basis(seq.initial);
    double t = 0.0;
    for (const auto &e : seq.elements) {
        if (const auto *o = std::get_if<OpticalPulse>(&e)) s = apply_optical_pulse(s, *o);
        if (const auto *r = std::get_if<RfPulse>(&e)) s = apply_rf_pulse(s, *r);
        if (const auto *w = std::get_if<Wait>(&e)) {
            s = free_evolve(s, w->tau.get(), m, traj, t);
            t += w->tau.get();
        }
        EXPECT_NEAR(s.norm_squared(), 1.0, 1e-12);
    }
}

TEST(run_sequence, linear_drift_is_suppressed_relative_to_ramsey) {
    const IonModel m = reference_model(pi / 4);
    const double duration = 4e-3;
    // 2 kHz of adjacent-level Zeeman drift over the sequence, 1 us steps.
    FieldTrajectory drift{1e-6, {}};
    for (int i = 0; i <= 4000; ++i) {
        drift.offsets.push_back(field_for_zeeman_shift(2e3 * (i + 0.5) / 4000.0, 1.2));
    }
    const double echo_shift = wrap(total_phase(m, 8, duration / 16, drift) - total_phase(m, 8, duration / 16));
    auto ramsey_phase = [&](const FieldTrajectory &traj) {
        double c = 0.0, s = 0.0;
        for (int k = 0; k < 8; ++k) {
            const double phi = 2 * pi * k / 8;
            const double p = population_d(run_sequence(StateVector::basis(BasisLabel::s(-1)),
                                                       build_ramsey_sequence(duration, phi), m, traj));
            c += p * std::cos(phi);
            s += p * std::sin(phi);
        }
        return std::atan2(s, c);
    };
    // The unechoed shift is tens of radians: follow it by continuity while the
    // drift amplitude is ramped up.
    double ramsey_shift = 0.0;
    double previous = ramsey_phase({});
    for (int step = 1; step <= 200; ++step) {
        FieldTrajectory scaled = drift;
        for (double &v : scaled.offsets) v *= step / 200.0;
        const double current = ramsey_phase(scaled);
        ramsey_shift += wrap(current - previous);
        previous = current;
    }
    EXPECT_NEAR(std::abs(ramsey_shift), 2 * pi * 2 * 1e3 * duration, 1e-3);
    EXPECT_GT(std::abs(ramsey_shift), 100 * std::abs(echo_shift));
}

TEST(run_sequence, pulse_area_error_enters_at_second_order) {
    const IonModel m = reference_model(pi / 4);
    const double ideal = total_phase(m, 8, 250e-6);
    const double e1 = wrap(total_phase(m, 8, 250e-6, {}, pi * 1.01) - ideal);
    const double e2 = wrap(total_phase(m, 8, 250e-6, {}, pi * 1.005) - ideal);
    ASSERT_GT(std::abs(e1), 0.0);
    EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(run_sequence, finite_pulses_are_absorbed_by_reference) {
    const IonModel m = reference_model(pi / 4);
    SimulationOptions opts;
    opts.finite_rf_pulses = true;
    opts.rf_rabi_frequency = 2 * pi * 200e3;
    const double phase = total_phase(m, 8, 250e-6, {}, pi, opts);
    EXPECT_NEAR(phase, 1.138345033835806, 1e-3);
}

TEST(run_sequence, rejects_malformed_sequences) {
    const IonModel m = reference_model(0.0);
    PulseSequence no_measure = build_quadrupole_dd_sequence(2, 1e-4, 0.0);
    no_measure.elements.pop_back();
    EXPECT_THROW(run_sequence({}, no_measure, m, {}), SimulationError);
    PulseSequence trailing = build_quadrupole_dd_sequence(2, 1e-4, 0.0);
    trailing.elements.push_back(Wait{Parameter::literal(1e-6)});
    EXPECT_THROW(run_sequence({}, trailing, m, {}), SimulationError);
    PulseSequence unbound = build_quadrupole_dd_sequence(2, Parameter::literal(1e-4), Parameter::named("phi_laser"));
    EXPECT_THROW(run_sequence({}, unbound, m, {}), SimulationError);
    EXPECT_NO_THROW(run_sequence({}, bind(unbound, {{"phi_laser", 0.2}}), m, {}));
}
