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

// Pulse sequences and their execution on the eight-level probe.
//
// Pulses are instantaneous unless SimulationOptions::finite_rf_pulses is set.
// Free evolution is evaluated in the lab frame: every level picks up its full
// linear Zeeman, quadrupole and second-order Zeeman phase, integrated exactly
// over the piecewise-constant field trajectory.

#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ddq/atom.hpp"
#include "ddq/constants.hpp"
#include "ddq/errors.hpp"
#include "ddq/spin.hpp"
#include "ddq/state.hpp"

namespace ddq {

/// A number that may instead name a scan variable bound at run time ("$phi_laser").
struct Parameter {
    double value = 0.0;
    std::string variable;  // empty when literal

    static Parameter literal(double v) {
        return {v, {}};
    }
    static Parameter named(std::string name) {
        return {0.0, std::move(name)};
    }
    bool symbolic() const {
        return !variable.empty();
    }
    double get() const {
        if (symbolic()) {
            throw SimulationError("unbound scan variable $" + variable);
        }
        return value;
    }
    bool operator==(const Parameter &) const = default;
};

/// Couples |S,-1/2> and |D,target_m> only.
struct OpticalPulse {
    HalfInteger target_m = HalfInteger::from_twice(-5);
    double area = 0.0;
    Parameter laser_phase;
    bool operator==(const OpticalPulse &) const = default;
};

/// Spin-5/2 rotation of the whole D manifold.
struct RfPulse {
    double area = 0.0;
    Parameter rf_phase;
    bool operator==(const RfPulse &) const = default;
};

struct Wait {
    Parameter tau;  // seconds
    bool operator==(const Wait &) const = default;
};

struct Measure {
    bool operator==(const Measure &) const = default;
};

using SequenceElement = std::variant<OpticalPulse, RfPulse, Wait, Measure>;

struct SequenceMetadata {
    int n_echo = 0;
    Parameter tau;
    bool operator==(const SequenceMetadata &) const = default;
};

struct PulseSequence {
    BasisLabel initial = BasisLabel::s(-1);
    std::vector<SequenceElement> elements;
    SequenceMetadata metadata;

    bool operator==(const PulseSequence &) const = default;

    /// Names of all unbound scan variables.
    std::set<std::string> variables() const {
        std::set<std::string> out;
        auto add = [&](const Parameter &p) {
            if (p.symbolic()) out.insert(p.variable);
        };
        for (const auto &e : elements) {
            std::visit(
                [&](const auto &el) {
                    using T = std::decay_t<decltype(el)>;
                    if constexpr (std::is_same_v<T, OpticalPulse>) add(el.laser_phase);
                    if constexpr (std::is_same_v<T, RfPulse>) add(el.rf_phase);
                    if constexpr (std::is_same_v<T, Wait>) add(el.tau);
                },
                e);
        }
        return out;
    }

    /// Sum of all wait durations (requires bound waits).
    double total_wait() const {
        double t = 0.0;
        for (const auto &e : elements) {
            if (const auto *w = std::get_if<Wait>(&e)) t += w->tau.get();
        }
        return t;
    }
};

/// Substitutes scan variables; unknown names are left symbolic.
inline PulseSequence bind(const PulseSequence &seq, const std::map<std::string, double> &values) {
    PulseSequence out = seq;
    auto subst = [&](Parameter &p) {
        if (!p.symbolic()) return;
        const auto it = values.find(p.variable);
        if (it != values.end()) p = Parameter::literal(it->second);
    };
    for (auto &e : out.elements) {
        std::visit(
            [&](auto &el) {
                using T = std::decay_t<decltype(el)>;
                if constexpr (std::is_same_v<T, OpticalPulse>) subst(el.laser_phase);
                if constexpr (std::is_same_v<T, RfPulse>) subst(el.rf_phase);
                if constexpr (std::is_same_v<T, Wait>) {
                    subst(el.tau);
                    if (el.tau.value < 0.0) throw SimulationError("negative wait duration after binding");
                }
            },
            e);
    }
    subst(out.metadata.tau);
    return out;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace detail {

inline void append_preparation(PulseSequence &seq) {
    constexpr double pi = constants::pi;
    seq.elements.emplace_back(OpticalPulse{HalfInteger::from_twice(-5), pi / 2, Parameter::literal(0.0)});
    seq.elements.emplace_back(OpticalPulse{HalfInteger::from_twice(-1), pi, Parameter::literal(0.0)});
}

inline void append_detection(PulseSequence &seq, Parameter laser_phase) {
    constexpr double pi = constants::pi;
    seq.elements.emplace_back(OpticalPulse{HalfInteger::from_twice(-5), pi, Parameter::literal(0.0)});
    seq.elements.emplace_back(OpticalPulse{HalfInteger::from_twice(-1), pi / 2, std::move(laser_phase)});
    seq.elements.emplace_back(Measure{});
}

}  // namespace detail

/// The quadrupole measurement: preparation of (|D,-5/2> + |D,-1/2>)/sqrt(2),
/// n_echo blocks [wait tau, RF pi with phase 0/pi alternating, wait tau],
/// transfer of D:-5/2 back to S:-1/2 and the analysis pi/2 pulse.
inline PulseSequence build_quadrupole_dd_sequence(int n_echo, Parameter tau, Parameter laser_phase) {
    if (n_echo < 2 || n_echo % 2 != 0) {
        throw SimulationError("n_echo must be even and >= 2, got " + std::to_string(n_echo));
    }
    if (!tau.symbolic() && !(tau.value >= 0.0)) {
        throw SimulationError("wait time must be non-negative");
    }
    PulseSequence seq;
    seq.metadata = {n_echo, tau};
    detail::append_preparation(seq);
    for (int k = 0; k < n_echo; ++k) {
        seq.elements.emplace_back(Wait{tau});
        seq.elements.emplace_back(RfPulse{constants::pi, Parameter::literal(k % 2 == 0 ? 0.0 : constants::pi)});
        seq.elements.emplace_back(Wait{tau});
    }
    detail::append_detection(seq, std::move(laser_phase));
    return seq;
}

inline PulseSequence build_quadrupole_dd_sequence(int n_echo, double tau, double laser_phase) {
    return build_quadrupole_dd_sequence(n_echo, Parameter::literal(tau), Parameter::literal(laser_phase));
}

/// Unechoed Ramsey on the same superposition with one wait of `duration`.
inline PulseSequence build_ramsey_sequence(double duration, double laser_phase) {
    if (!(duration >= 0.0)) {
        throw SimulationError("wait time must be non-negative");
    }
    PulseSequence seq;
    seq.metadata = {0, Parameter::literal(duration)};
    detail::append_preparation(seq);
    seq.elements.emplace_back(Wait{Parameter::literal(duration)});
    detail::append_detection(seq, Parameter::literal(laser_phase));
    return seq;
}

// ---------------------------------------------------------------------------
// Element application
// ---------------------------------------------------------------------------

/// Two-level rotation by `area` about cos(phase) x + sin(phase) y on
/// {|S,-1/2>, |D,target_m>}, with the D level as the upper (spin-up) state.
inline StateVector apply_optical_pulse(const StateVector &state, const OpticalPulse &pulse) {
    const int g = BasisLabel::s(-1).index();
    const int e = BasisLabel{Level::D, pulse.target_m}.index();
    const double phase = pulse.laser_phase.get();
    const double c = std::cos(0.5 * pulse.area);
    const Complex minus_i_sin = Complex(0.0, -std::sin(0.5 * pulse.area));
    const Complex up = std::polar(1.0, -phase);    // <e| n.sigma |g>
    const Complex down = std::polar(1.0, phase);   // <g| n.sigma |e>
    StateVector out = state;
    out[e] = c * state[e] + minus_i_sin * up * state[g];
    out[g] = minus_i_sin * down * state[e] + c * state[g];
    return out;
}

using DMatrix = Eigen::Matrix<Complex, kNumD, kNumD>;

inline DMatrix rf_unitary(double area, double rf_phase) {
    return rotation_unitary(HalfInteger::from_twice(5), area, rf_phase);
}

inline StateVector apply_d_unitary(const StateVector &state, const DMatrix &u) {
    Eigen::Matrix<Complex, kNumD, 1> d;
    for (int i = 0; i < kNumD; ++i) d(i) = state[kFirstD + i];
    const Eigen::Matrix<Complex, kNumD, 1> r = u * d;
    StateVector out = state;
    for (int i = 0; i < kNumD; ++i) out[kFirstD + i] = r(i);
    return out;
}

/// Applies rotation_unitary(5/2, area, rf_phase) to the D amplitudes.
inline StateVector apply_rf_pulse(const StateVector &state, const RfPulse &pulse) {
    return apply_d_unitary(state, rf_unitary(pulse.area, pulse.rf_phase.get()));
}

/// Per-level frequency coefficients derived from an IonModel.
struct LevelRates {
    std::array<double, kNumLevels> zeeman{};     // Hz per tesla
    std::array<double, kNumLevels> quadrupole{};  // Hz
    std::array<double, kNumLevels> quadratic{};  // Hz per tesla^2
    double b0 = 0.0;

    explicit LevelRates(const IonModel &model) : b0(model.field.b) {
        const double beta = model.field.effective_beta();
        for (int i = 0; i < kNumLevels; ++i) {
            const BasisLabel label = basis_label(i);
            const double m = label.m.value();
            if (label.level == Level::S) {
                zeeman[i] = m * model.species.g_ground * constants::bohr_magneton_hz_per_tesla;
            } else {
                zeeman[i] = m * model.species.g_d * constants::bohr_magneton_hz_per_tesla;
                quadrupole[i] = quadrupole_shift(label.m, model.trap, model.theta, beta);
                if (model.second_order_zeeman) {
                    quadratic[i] = second_order_zeeman_shift(label.m, 1.0, model.species);
                }
            }
        }
    }

    /// Phase -2 pi \int nu_i dt for level i over [t0, t0 + tau].
    double phase(int i, double tau, const FieldTrajectory::Integrals &in) const {
        return -2.0 * constants::pi *
               (zeeman[i] * (b0 * tau + in.offset) + quadrupole[i] * tau + quadratic[i] * in.field_squared);
    }
};

inline StateVector free_evolve(const StateVector &state, double tau, const LevelRates &rates,
                               const FieldTrajectory &trajectory, double t_start = 0.0) {
    if (!(tau >= 0.0)) {
        throw SimulationError("wait time must be non-negative");
    }
    if (tau == 0.0) {
        return state;
    }
    const auto in = trajectory.integrate(t_start, t_start + tau, rates.b0);
    StateVector out = state;
    for (int i = 0; i < kNumLevels; ++i) {
        out[i] *= std::polar(1.0, rates.phase(i, tau, in));
    }
    return out;
}

inline StateVector free_evolve(const StateVector &state, double tau, const IonModel &model,
                               const FieldTrajectory &trajectory, double t_start = 0.0) {
    return free_evolve(state, tau, LevelRates(model), trajectory, t_start);
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct SimulationOptions {
    /// Give RF pulses a duration area / rf_rabi_frequency with all level
    /// shifts active during the pulse.
    bool finite_rf_pulses = false;
    /// Spin-rotation rate of the RF drive [rad/s]; no physical default exists.
    double rf_rabi_frequency = 2.0 * constants::pi * 50e3;
};

/// A bound sequence with its unitaries precomputed, for repeated execution
/// under different noise trajectories.
class CompiledSequence {
  public:
    CompiledSequence(const PulseSequence &seq, const IonModel &model, SimulationOptions options = {})
        : rates_(model), options_(options), initial_(StateVector::basis(seq.initial)) {
        if (!seq.variables().empty()) {
            throw SimulationError("sequence has unbound scan variable $" + *seq.variables().begin());
        }
        if (options_.finite_rf_pulses && !(options_.rf_rabi_frequency > 0.0)) {
            throw SimulationError("rf_rabi_frequency must be positive");
        }
        bool measured = false;
        for (const auto &e : seq.elements) {
            if (measured) {
                throw SimulationError("sequence has elements after measure");
            }
            std::visit(
                [&](const auto &el) {
                    using T = std::decay_t<decltype(el)>;
                    if constexpr (std::is_same_v<T, OpticalPulse>) {
                        if (el.area < 0.0) throw SimulationError("pulse area must be non-negative");
                        ops_.push_back(Op{Op::kOptical, el, {}, 0.0, 0.0, 0.0});
                    } else if constexpr (std::is_same_v<T, RfPulse>) {
                        if (el.area < 0.0) throw SimulationError("pulse area must be non-negative");
                        Op op{Op::kRf, {}, rf_unitary(el.area, el.rf_phase.get()), 0.0, el.area, el.rf_phase.get()};
                        if (options_.finite_rf_pulses) {
                            op.duration = el.area / options_.rf_rabi_frequency;
                        }
                        duration_ += op.duration;
                        ops_.push_back(op);
                    } else if constexpr (std::is_same_v<T, Wait>) {
                        const double tau = el.tau.get();
                        if (!(tau >= 0.0)) throw SimulationError("wait time must be non-negative");
                        ops_.push_back(Op{Op::kWait, {}, {}, tau, 0.0, 0.0});
                        duration_ += tau;
                    } else {
                        measured = true;
                    }
                },
                e);
        }
        if (!measured) {
            throw SimulationError("sequence must end with measure");
        }
    }

    /// Total time spanned by the sequence (waits plus finite pulse durations).
    double duration() const {
        return duration_;
    }
    const StateVector &initial_state() const {
        return initial_;
    }

    StateVector run(const FieldTrajectory &trajectory) const {
        return run(initial_, trajectory);
    }

    StateVector run(StateVector state, const FieldTrajectory &trajectory) const {
        double t = 0.0;
        for (const Op &op : ops_) {
            switch (op.kind) {
                case Op::kOptical:
                    state = apply_optical_pulse(state, op.optical);
                    break;
                case Op::kRf:
                    if (options_.finite_rf_pulses) {
                        state = finite_rf(state, op, trajectory, t);
                        t += op.duration;
                    } else {
                        state = apply_d_unitary(state, op.unitary);
                    }
                    break;
                case Op::kWait:
                    state = free_evolve(state, op.duration, rates_, trajectory, t);
                    t += op.duration;
                    break;
            }
        }
        return state;
    }

  private:
    struct Op {
        enum Kind { kOptical, kRf, kWait } kind;
        OpticalPulse optical;
        DMatrix unitary;
        double duration;
        double area;
        double phase;
    };

    // RF frame locked to the nominal linear Zeeman splitting; the residual
    // (noise detuning, quadrupole, quadratic Zeeman) acts during the drive.
    StateVector finite_rf(const StateVector &state, const Op &op, const FieldTrajectory &trajectory, double t) const {
        const double T = op.duration;
        const auto in = trajectory.integrate(t, t + T, rates_.b0);
        const double mean_offset = T > 0.0 ? in.offset / T : 0.0;
        const double mean_b2 = T > 0.0 ? in.field_squared / T : 0.0;
        const SpinOperators ops = spin_operators(HalfInteger::from_twice(5));
        Eigen::Matrix<Complex, kNumD, kNumD> h =
            options_.rf_rabi_frequency * (std::cos(op.phase) * ops.jx + std::sin(op.phase) * ops.jy);
        for (int i = 0; i < kNumD; ++i) {
            const int level = kFirstD + i;
            h(i, i) += 2.0 * constants::pi *
                       (rates_.zeeman[level] * mean_offset + rates_.quadrupole[level] + rates_.quadratic[level] * mean_b2);
        }
        Eigen::SelfAdjointEigenSolver<DMatrix> eig(h);
        const Eigen::Matrix<Complex, kNumD, 1> ph =
            (eig.eigenvalues().cast<Complex>() * Complex(0.0, -T)).array().exp().matrix();
        DMatrix u = eig.eigenvectors() * ph.asDiagonal() * eig.eigenvectors().adjoint();
        // Nominal Zeeman precession, split symmetrically around the pulse.
        Eigen::Matrix<Complex, kNumD, 1> half;
        for (int i = 0; i < kNumD; ++i) {
            half(i) = std::polar(1.0, -constants::pi * rates_.zeeman[kFirstD + i] * rates_.b0 * T);
        }
        u = half.asDiagonal() * u * half.asDiagonal();
        StateVector out = apply_d_unitary(state, u);
        for (int i = 0; i < kFirstD; ++i) {
            out[i] *= std::polar(1.0, rates_.phase(i, T, in));
        }
        return out;
    }

    LevelRates rates_;
    SimulationOptions options_;
    StateVector initial_;
    std::vector<Op> ops_;
    double duration_ = 0.0;
};

/// Left fold of all elements over `initial`; returns the pre-measurement state.
inline StateVector run_sequence(const StateVector &initial, const PulseSequence &seq, const IonModel &model,
                                const FieldTrajectory &trajectory, SimulationOptions options = {}) {
    return CompiledSequence(seq, model, options).run(initial, trajectory);
}

/// 2 n tau times the per-arm phase rate at the model's physical angle [rad].
inline double analytic_phase(int n_echo, double tau, const IonModel &model) {
    return 2.0 * n_echo * tau * arm_phase_rate(model.trap, model.theta, model.field.effective_beta());
}

}  // namespace ddq
