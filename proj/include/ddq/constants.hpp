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

// Physical constants (SI, CODATA 2018). Every module reads its constants from
// here; values are given to at least 10 significant figures.

#include <numbers>

namespace ddq::constants {

inline constexpr double pi = std::numbers::pi;

/// Planck constant [J s] (exact).
inline constexpr double planck = 6.62607015e-34;
/// Reduced Planck constant [J s].
inline constexpr double hbar = planck / (2.0 * pi);  // 1.054571817e-34
/// Bohr magneton [J/T].
inline constexpr double bohr_magneton = 9.2740100783e-24;
/// Elementary charge [C] (exact).
inline constexpr double elementary_charge = 1.602176634e-19;
/// Bohr radius [m].
inline constexpr double bohr_radius = 5.29177210903e-11;
/// Atomic mass unit [kg].
inline constexpr double atomic_mass_unit = 1.66053906660e-27;

/// One e*a0^2 in C m^2 (4.486551525e-40). Quadrupole moments cross every
/// public interface in units of e*a0^2 and are converted with this only.
inline constexpr double quadrupole_unit = elementary_charge * bohr_radius * bohr_radius;

/// mu_B / h [Hz/T] (1.399624494e10).
inline constexpr double bohr_magneton_hz_per_tesla = bohr_magneton / planck;

/// 88Sr+ mass in atomic mass units.
inline constexpr double sr88_mass_u = 87.905612;

}  // namespace ddq::constants
