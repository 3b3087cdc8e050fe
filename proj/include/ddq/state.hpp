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

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>

#include "ddq/errors.hpp"
#include "ddq/spin.hpp"

namespace ddq {

enum class Level { S, D };

/// One of the eight probe levels: |S, m=+-1/2> and |D, m=-5/2..+5/2>.
struct BasisLabel {
    Level level = Level::S;
    HalfInteger m = HalfInteger::from_twice(-1);

    bool operator==(const BasisLabel &) const = default;

    static BasisLabel s(int twice_m) {
        return {Level::S, HalfInteger::from_twice(twice_m)};
    }
    static BasisLabel d(int twice_m) {
        return {Level::D, HalfInteger::from_twice(twice_m)};
    }

    bool valid() const {
        const int t = m.twice();
        if (t % 2 == 0) {
            return false;
        }
        return level == Level::S ? (t == -1 || t == 1) : (t >= -5 && t <= 5);
    }

    /// Position in the StateVector: S:-1/2, S:+1/2, D:-5/2 .. D:+5/2.
    int index() const {
        if (!valid()) {
            throw SimulationError("invalid basis label " + to_string());
        }
        return level == Level::S ? (m.twice() + 1) / 2 : 2 + (m.twice() + 5) / 2;
    }

    std::string to_string() const {
        std::string sign = m.twice() > 0 ? "+" : "";
        return std::string(level == Level::S ? "S:" : "D:") + sign + m.to_string();
    }

    /// Accepts "S:-1/2", "D:+5/2", "D:5/2".
    static BasisLabel parse(std::string_view text) {
        if (text.size() < 3 || text[1] != ':' || (text[0] != 'S' && text[0] != 'D')) {
            throw SimulationError("unknown level label '" + std::string(text) + "'");
        }
        BasisLabel label;
        label.level = text[0] == 'S' ? Level::S : Level::D;
        std::string_view rest = text.substr(2);
        int sign = 1;
        if (!rest.empty() && (rest[0] == '+' || rest[0] == '-')) {
            sign = rest[0] == '-' ? -1 : 1;
            rest.remove_prefix(1);
        }
        const auto slash = rest.find('/');
        if (slash == std::string_view::npos || rest.substr(slash + 1) != "2" || slash == 0) {
            throw SimulationError("unknown level label '" + std::string(text) + "'");
        }
        int numerator = 0;
        for (char ch : rest.substr(0, slash)) {
            if (ch < '0' || ch > '9') {
                throw SimulationError("unknown level label '" + std::string(text) + "'");
            }
            numerator = numerator * 10 + (ch - '0');
        }
        label.m = HalfInteger::from_twice(sign * numerator);
        if (!label.valid()) {
            throw SimulationError("unknown level label '" + std::string(text) + "'");
        }
        return label;
    }
};

inline constexpr int kNumLevels = 8;
inline constexpr int kFirstD = 2;
inline constexpr int kNumD = 6;

inline BasisLabel basis_label(int index) {
    return index < kFirstD ? BasisLabel::s(2 * index - 1) : BasisLabel::d(2 * (index - kFirstD) - 5);
}

/// The eight-level probe state. Operations in the library are unitary, so the
/// norm stays 1 up to rounding.
class StateVector {
  public:
    using Amplitudes = std::array<Complex, kNumLevels>;

    StateVector() {
        amps_.fill(Complex(0.0, 0.0));
        amps_[0] = 1.0;
    }
    explicit StateVector(const Amplitudes &amps) : amps_(amps) {
    }

    static StateVector basis(BasisLabel label) {
        Amplitudes a;
        a.fill(Complex(0.0, 0.0));
        a[label.index()] = 1.0;
        return StateVector(a);
    }

    /// (|D,-5/2> + |D,-1/2>)/sqrt(2), the state the optical preparation makes.
    static StateVector prepared_superposition() {
        Amplitudes a;
        a.fill(Complex(0.0, 0.0));
        a[BasisLabel::d(-5).index()] = (1.0 / std::numbers::sqrt2);
        a[BasisLabel::d(-1).index()] = (1.0 / std::numbers::sqrt2);
        return StateVector(a);
    }

    Complex &operator[](int i) {
        return amps_[i];
    }
    const Complex &operator[](int i) const {
        return amps_[i];
    }
    Complex amplitude(BasisLabel label) const {
        return amps_[label.index()];
    }
    double population(BasisLabel label) const {
        return std::norm(amps_[label.index()]);
    }
    const Amplitudes &amplitudes() const {
        return amps_;
    }

    double norm_squared() const {
        double s = 0.0;
        for (const auto &a : amps_) {
            s += std::norm(a);
        }
        return s;
    }

  private:
    Amplitudes amps_;
};

}  // namespace ddq
