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

// Physics-to-numbers conversions for the 88Sr+ probe: Zeeman and quadrupole
// level shifts, the trap-frequency gradient calibration, per-arm phase rates
// and magnetic-field noise trajectories.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ddq/constants.hpp"
#include "ddq/errors.hpp"
#include "ddq/spin.hpp"

namespace ddq {

/// A literature value of the D5/2 quadrupole moment used by the comparison report.
struct ReferenceValue {
    std::string label;
    double value = 0.0;  // e a0^2
    double sigma = 0.0;  // one standard uncertainty, e a0^2
    std::string kind;    // "measurement" or "theory"
};

struct IonSpecies {
    double mass = constants::sr88_mass_u * constants::atomic_mass_unit;  // kg
    double charge = constants::elementary_charge;                        // C
    double g_ground = 2.0023;
    double g_d = 1.2;
    /// Differential second-order Zeeman coefficient of the probed superposition [Hz/T^2].
    double c2_quad_zeeman = 3.1e6;
    std::vector<ReferenceValue> reference_theta_values = default_references();

    static std::vector<ReferenceValue> default_references() {
        return {{"Barwood et al. 2004 (optical clock transition)", 2.6, 0.3, "measurement"}};
    }

    void validate() const {
        if (!(mass > 0.0) || !(charge > 0.0)) {
            throw ConfigError("ion mass and charge must be positive");
        }
        if (!std::isfinite(c2_quad_zeeman)) {
            throw ConfigError("second-order Zeeman coefficient must be finite");
        }
    }
};

struct TrapConfig {
    double dez_dz = 1e8;   // axial DC field gradient [V/m^2]
    double epsilon1 = 0.0;  // radial asymmetry of the DC potential
    /// Azimuth of the field projection in the radial plane, measured from the trap x axis.
    double alpha = 0.0;
    std::optional<double> omega_z;  // axial secular frequency [rad/s]
    double rf_axial_correction = 0.0;

    void validate() const {
        if (!(epsilon1 >= -1.0 && epsilon1 <= 1.0)) {
            throw ConfigError("epsilon1 must lie in [-1, 1]");
        }
        if (!(rf_axial_correction >= 0.0 && rf_axial_correction <= 0.01)) {
            throw ConfigError("rf_axial_correction must lie in [0, 0.01]");
        }
        if (!std::isfinite(dez_dz)) {
            throw ConfigError("dEz_dz must be finite");
        }
        if (omega_z && !(*omega_z > 0.0)) {
            throw ConfigError("omega_z must be positive");
        }
    }
};

struct FieldConfig {
    double b = 3e-4;  // tesla
    double beta = 0.0;  // nominal angle between field and trap axis
    double beta0 = 0.0;  // base-angle offset; the physical angle is beta + beta0
    double beta_calibration_sigma = 0.0;

    double effective_beta() const {
        return beta + beta0;
    }

    void validate() const {
        if (!(b >= 0.0)) {
            throw ConfigError("magnetic field magnitude must be non-negative");
        }
        if (!(beta_calibration_sigma >= 0.0)) {
            throw ConfigError("beta_calibration_sigma must be non-negative");
        }
    }
};

enum class NoiseKind { none, quasi_static, random_walk };

inline std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::none:
            return "none";
        case NoiseKind::quasi_static:
            return "quasi_static";
        case NoiseKind::random_walk:
            return "random_walk";
    }
    return "none";
}

inline NoiseKind noise_kind_from_string(const std::string &s) {
    if (s == "none") return NoiseKind::none;
    if (s == "quasi_static") return NoiseKind::quasi_static;
    if (s == "random_walk") return NoiseKind::random_walk;
    throw ConfigError("unknown noise kind '" + s + "'");
}

/// Magnetic-field noise seen by the ion. sigma_b is the per-shot static
/// offset; a random walk starts from such an offset and adds Gaussian steps.
struct NoiseModel {
    NoiseKind kind = NoiseKind::none;
    double sigma_b = 0.0;           // tesla
    double drift_rate_sigma = 0.0;  // tesla / sqrt(s)
    double step_dt = 1e-5;          // seconds

    void validate() const {
        if (!(sigma_b >= 0.0) || !(drift_rate_sigma >= 0.0)) {
            throw ConfigError("noise standard deviations must be non-negative");
        }
        if (kind == NoiseKind::random_walk && !(step_dt > 0.0)) {
            throw ConfigError("random-walk noise needs step_dt > 0");
        }
    }
};

/// Everything the dynamics needs: species, trap, field and the quadrupole moment.
struct IonModel {
    IonSpecies species;
    TrapConfig trap;
    FieldConfig field;
    double theta = 2.973;  // e a0^2
    bool second_order_zeeman = true;

    void validate() const {
        species.validate();
        trap.validate();
        field.validate();
        if (!std::isfinite(theta)) {
            throw ConfigError("theta must be finite");
        }
    }
};

// ---------------------------------------------------------------------------
// Level shifts
// ---------------------------------------------------------------------------

/// Adjacent-sublevel Zeeman splitting g mu_B B / h [Hz].
inline double zeeman_splitting(const FieldConfig &field, double g) {
    if (!(field.b >= 0.0)) {
        throw ConfigError("magnetic field magnitude must be non-negative");
    }
    return g * constants::bohr_magneton_hz_per_tesla * field.b;
}

/// Field offset whose adjacent-level Zeeman shift is `hz` for Lande factor g.
inline double field_for_zeeman_shift(double hz, double g) {
    return hz / (g * constants::bohr_magneton_hz_per_tesla);
}

/// Angular factor of the quadrupole shift for a DC potential
///   U = (dE/dz)/4 [(x^2 + y^2 - 2 z^2) + eps1 (x^2 - y^2)]
/// seen along a field at polar angle beta and azimuth alpha (from x).
inline double quadrupole_geometry(double beta, double epsilon1, double alpha) {
    const double c = std::cos(beta);
    const double s = std::sin(beta);
    return (3.0 * c * c - 1.0) - epsilon1 * s * s * std::cos(2.0 * alpha);
}

namespace detail {

inline void require_d_sublevel(HalfInteger m) {
    if (m.twice() % 2 == 0 || std::abs(m.twice()) > 5) {
        throw ConfigError("m must be one of +-1/2, +-3/2, +-5/2, got " + m.to_string());
    }
}

}  // namespace detail

/// Quadrupole shift of |D5/2, m> [Hz].
inline double quadrupole_shift(HalfInteger m, const TrapConfig &trap, double theta_q, double beta) {
    detail::require_d_sublevel(m);
    const double m2 = m.value() * m.value();
    return trap.dez_dz * theta_q * constants::quadrupole_unit / (4.0 * constants::planck) * (35.0 - 12.0 * m2) / 40.0 *
           quadrupole_geometry(beta, trap.epsilon1, trap.alpha);
}

inline double quadrupole_shift(double m, const TrapConfig &trap, double theta_q, double beta) {
    return quadrupole_shift(HalfInteger::from_double(m), trap, theta_q, beta);
}

/// Second-order Zeeman shift kappa m^2 B^2 [Hz], with kappa = C2/6 so that the
/// m=5/2 and m=1/2 arms differ by exactly C2 B^2.
inline double second_order_zeeman_shift(HalfInteger m, double b_tesla, const IonSpecies &species) {
    detail::require_d_sublevel(m);
    return species.c2_quad_zeeman / 6.0 * m.value() * m.value() * b_tesla * b_tesla;
}

inline double second_order_zeeman_shift(HalfInteger m, const FieldConfig &field, const IonSpecies &species) {
    return second_order_zeeman_shift(m, field.b, species);
}

/// |shift(5/2) - shift(1/2)| = C2 B^2 [Hz]: the frequency bias of the probe.
inline double second_order_zeeman_differential(const FieldConfig &field, const IonSpecies &species) {
    return second_order_zeeman_shift(HalfInteger::from_twice(5), field, species) -
           second_order_zeeman_shift(HalfInteger::from_twice(1), field, species);
}

/// Axial DC gradient from the secular frequency: (1 - c) m w^2 / q [V/m^2].
inline double gradient_from_trap_frequency(double omega_z, const IonSpecies &species, double rf_correction = 0.0) {
    if (!(omega_z > 0.0)) {
        throw ConfigError("trap frequency must be positive");
    }
    if (!(rf_correction >= 0.0 && rf_correction <= 0.01)) {
        throw ConfigError("rf_axial_correction must lie in [0, 0.01]");
    }
    return (1.0 - rf_correction) * species.mass * omega_z * omega_z / species.charge;
}

inline double trap_frequency_from_gradient(double gradient, const IonSpecies &species) {
    return std::sqrt(species.charge * gradient / species.mass);
}

/// Phase accumulated per unit wait time between the echo-mapped arms [rad/s].
inline double arm_phase_rate(const TrapConfig &trap, double theta_q, double beta) {
    return 9.0 / (20.0 * constants::hbar) * trap.dez_dz * theta_q * constants::quadrupole_unit *
           quadrupole_geometry(beta, trap.epsilon1, trap.alpha);
}

// ---------------------------------------------------------------------------
// Noise trajectories
// ---------------------------------------------------------------------------

/// Piecewise-constant field offset: offsets[i] holds on [i*dt, (i+1)*dt); the
/// last value extends to +infinity. An empty trajectory is identically zero.
struct FieldTrajectory {
    double step_dt = 1.0;
    std::vector<double> offsets;

    bool operator==(const FieldTrajectory &) const = default;

    static FieldTrajectory zero() {
        return {};
    }
    static FieldTrajectory constant(double offset) {
        return {1.0, {offset}};
    }

    double value_at(double t) const {
        if (offsets.empty()) {
            return 0.0;
        }
        if (offsets.size() == 1 || t < 0.0) {
            return offsets.front();
        }
        const auto i = static_cast<std::size_t>(t / step_dt);
        return offsets[std::min(i, offsets.size() - 1)];
    }

    /// Exact integrals over [t0, t1] of delta(t) and of (b0 + delta(t))^2.
    struct Integrals {
        double offset = 0.0;
        double field_squared = 0.0;
    };

    Integrals integrate(double t0, double t1, double b0) const {
        Integrals out;
        const double span = t1 - t0;
        if (span <= 0.0) {
            return out;
        }
        if (offsets.size() <= 1) {
            const double d = offsets.empty() ? 0.0 : offsets.front();
            out.offset = d * span;
            out.field_squared = (b0 + d) * (b0 + d) * span;
            return out;
        }
        const std::size_t last = offsets.size() - 1;
        auto index_of = [&](double t) {
            if (t <= 0.0) return std::size_t{0};
            return std::min(static_cast<std::size_t>(t / step_dt), last);
        };
        std::size_t i = index_of(t0);
        double t = t0;
        while (t < t1) {
            const double seg_end = (i == last) ? t1 : std::min(t1, (static_cast<double>(i) + 1.0) * step_dt);
            const double w = seg_end - t;
            if (w > 0.0) {
                const double d = offsets[i];
                out.offset += d * w;
                out.field_squared += (b0 + d) * (b0 + d) * w;
            }
            t = seg_end;
            if (i < last) {
                ++i;
            } else {
                break;
            }
        }
        return out;
    }
};

/// Draws one field-offset trajectory covering [0, duration] from `rng`.
template <typename Engine>
FieldTrajectory sample_noise_trajectory(const NoiseModel &model, double duration, Engine &rng) {
    model.validate();
    if (!(duration >= 0.0)) {
        throw ConfigError("noise trajectory duration must be non-negative");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    switch (model.kind) {
        case NoiseKind::none:
            return FieldTrajectory::zero();
        case NoiseKind::quasi_static:
            return FieldTrajectory::constant(model.sigma_b * normal(rng));
        case NoiseKind::random_walk: {
            const auto steps = static_cast<std::size_t>(std::ceil(duration / model.step_dt)) + 1;
            FieldTrajectory traj{model.step_dt, {}};
            traj.offsets.reserve(steps);
            double value = model.sigma_b * normal(rng);
            const double step_sigma = model.drift_rate_sigma * std::sqrt(model.step_dt);
            for (std::size_t i = 0; i < steps; ++i) {
                traj.offsets.push_back(value);
                value += step_sigma * normal(rng);
            }
            return traj;
        }
    }
    return FieldTrajectory::zero();
}

inline FieldTrajectory sample_noise_trajectory(const NoiseModel &model, double duration, std::uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    return sample_noise_trajectory(model, duration, rng);
}

}  // namespace ddq
