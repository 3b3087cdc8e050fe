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

// Scenario configuration: a sectioned key = value file with a strict schema.
// Every key has a default; unknown sections or keys are rejected. The
// resolved configuration is written back in canonical form and hashed
// (SHA-256, excluding run.output_dir and run.threads) so outputs can name the
// exact inputs that produced them.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "ddq/atom.hpp"
#include "ddq/dsl.hpp"
#include "ddq/errors.hpp"
#include "ddq/sampler.hpp"
#include "ddq/sequence.hpp"

namespace ddq {

struct RunSettings {
    std::uint64_t seed = 1;
    int threads = 1;
    /// Exact-probability mode (k_D = n p) for every fringe.
    bool exact = false;
    std::string sequence_file;
    std::string output_dir = "ddq_out";
};

struct FitSettings {
    bool fit_epsilon1 = false;
    double theta_min = -10.0;
    double theta_max = 10.0;
    int bootstrap_resamples = 0;  // 0 disables
};

struct RabiSettings {
    double max_area = 4.0 * constants::pi;
    int points = 201;
    double rf_phase = 0.0;
};

struct FringeSettings {
    int n_echo = 8;
    double tau = 250e-6;
    int shots = 300;
    int phi_points = 12;
};

struct ScenarioConfig {
    IonModel model;
    NoiseModel noise;
    DetectionModel detection;
    SimulationOptions simulation;
    CampaignPlan plan;
    int plan_phi_points = 12;
    FitSettings fit;
    RabiSettings rabi;
    FringeSettings fringe;
    RunSettings run;
    /// Alternative inputs resolved into trap.dez_dz and noise.sigma_b.
    double omega_z = 0.0;
    double zeeman_sigma_hz = 0.0;
    /// Ion mass [u] and charge [e]; converted to SI in resolve().
    double mass_u = constants::sr88_mass_u;
    double charge_e = 1.0;

    /// The built-in scenario: 7 angles over [0, pi/2], 3 gradients around
    /// 1e8 V/m^2, tau_total = 4 ms, 300 shots per point, quasi-static 1 kHz
    /// Zeeman noise.
    static ScenarioConfig builtin() {
        ScenarioConfig c;
        c.plan.betas.clear();
        for (int i = 0; i < 7; ++i) c.plan.betas.push_back(constants::pi / 2 * i / 6);
        c.plan.gradients = {0.5e8, 1.0e8, 1.5e8};
        c.plan.tau_totals = {4e-3};
        c.plan.n_echo = 8;
        c.plan.shots = 300;
        c.noise.kind = NoiseKind::quasi_static;
        c.zeeman_sigma_hz = 1e3;
        c.resolve();
        return c;
    }

    /// Applies derived quantities and validates everything.
    void resolve() {
        if (!(mass_u > 0.0) || !(charge_e > 0.0)) throw ConfigError("ion.mass_u and ion.charge_e must be positive");
        model.species.mass = mass_u * constants::atomic_mass_unit;
        model.species.charge = charge_e * constants::elementary_charge;
        if (omega_z != 0.0) {
            model.trap.dez_dz = gradient_from_trap_frequency(omega_z, model.species, model.trap.rf_axial_correction);
        }
        if (zeeman_sigma_hz != 0.0) {
            if (!(zeeman_sigma_hz > 0.0)) throw ConfigError("noise.zeeman_sigma_hz must be positive");
            noise.sigma_b = field_for_zeeman_shift(zeeman_sigma_hz, model.species.g_d);
        }
        plan.seed = run.seed;
        plan.phi_grid = default_phi_grid(plan_phi_points);
        model.validate();
        noise.validate();
        detection.validate();
        plan.validate();
        if (run.threads < 1) throw ConfigError("run.threads must be >= 1");
        if (fringe.n_echo < 2 || fringe.n_echo % 2) throw ConfigError("fringe.n_echo must be even and >= 2");
        if (!(fringe.tau >= 0.0)) throw ConfigError("fringe.tau must be non-negative");
        if (fringe.shots < 1 || fringe.phi_points < 3) throw ConfigError("fringe needs shots >= 1 and phi_points >= 3");
        if (rabi.points < 2 || !(rabi.max_area > 0.0)) throw ConfigError("rabi needs points >= 2 and max_area > 0");
        if (!(fit.theta_max > fit.theta_min)) throw ConfigError("fit.theta_max must exceed fit.theta_min");
        if (fit.bootstrap_resamples != 0 && fit.bootstrap_resamples < 100) {
            throw ConfigError("fit.bootstrap_resamples must be 0 or >= 100");
        }
        if (simulation.finite_rf_pulses && !(simulation.rf_rabi_frequency > 0.0)) {
            throw ConfigError("simulation.rf_rabi_frequency must be positive");
        }
    }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string where(const std::string &section, const std::string &key) {
    return section + "." + key;
}

inline double parse_double(const std::string &section, const std::string &key, const std::string &text) {
    // Angle literals such as pi/4 are accepted for every real-valued key.
    const auto v = dsl_detail::parse_angle_literal(trim(text));
    if (!v || !std::isfinite(*v)) throw ConfigError(where(section, key) + ": expected a number, got '" + text + "'");
    return *v;
}

inline long long parse_integer(const std::string &section, const std::string &key, const std::string &text) {
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ConfigError(where(section, key) + ": expected an integer, got '" + text + "'");
    }
    return v;
}

inline bool parse_bool(const std::string &section, const std::string &key, const std::string &text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(where(section, key) + ": expected true or false, got '" + text + "'");
}

inline std::vector<double> parse_list(const std::string &section, const std::string &key, const std::string &text) {
    std::vector<double> out;
    const std::string t = trim(text);
    if (t.empty()) return out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(section, key, item));
    return out;
}

inline std::string fmt_double(double v) {
    return dsl_detail::format_number(v);
}

inline std::string fmt_list(const std::vector<double> &v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt_double(v[i]);
    return out;
}

struct Key {
    std::string section;
    std::string name;
    std::function<std::string(const ScenarioConfig &)> get;
    std::function<void(ScenarioConfig &, const std::string &)> set;
    /// Excluded from the config hash (does not affect results).
    bool hash_exempt = false;
};

template <class Getter>
Key real_key(std::string section, std::string name, Getter ref) {
    return {section, name, [ref](const ScenarioConfig &c) { return fmt_double(ref(const_cast<ScenarioConfig &>(c))); },
            [ref, section, name](ScenarioConfig &c, const std::string &v) { ref(c) = parse_double(section, name, v); }};
}

template <class Getter>
Key int_key(std::string section, std::string name, Getter ref) {
    return {section, name,
            [ref](const ScenarioConfig &c) { return std::to_string(ref(const_cast<ScenarioConfig &>(c))); },
            [ref, section, name](ScenarioConfig &c, const std::string &v) {
                ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_integer(section, name, v));
            }};
}

template <class Getter>
Key bool_key(std::string section, std::string name, Getter ref) {
    return {section, name,
            [ref](const ScenarioConfig &c) { return std::string(ref(const_cast<ScenarioConfig &>(c)) ? "true" : "false"); },
            [ref, section, name](ScenarioConfig &c, const std::string &v) { ref(c) = parse_bool(section, name, v); }};
}

template <class Getter>
Key list_key(std::string section, std::string name, Getter ref) {
    return {section, name, [ref](const ScenarioConfig &c) { return fmt_list(ref(const_cast<ScenarioConfig &>(c))); },
            [ref, section, name](ScenarioConfig &c, const std::string &v) { ref(c) = parse_list(section, name, v); }};
}

inline const std::vector<Key> &schema() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        // [run]
        k.push_back({"run", "seed", [](const ScenarioConfig &c) { return std::to_string(c.run.seed); },
                     [](ScenarioConfig &c, const std::string &v) {
                         const std::string t = trim(v);
                         std::uint64_t s = 0;
                         const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), s);
                         if (ec != std::errc() || p != t.data() + t.size()) {
                             throw ConfigError("run.seed: expected a non-negative integer, got '" + v + "'");
                         }
                         c.run.seed = s;
                     }});
        Key threads = int_key("run", "threads", [](ScenarioConfig &c) -> int & { return c.run.threads; });
        threads.hash_exempt = true;
        k.push_back(threads);
        k.push_back(bool_key("run", "exact", [](ScenarioConfig &c) -> bool & { return c.run.exact; }));
        k.push_back({"run", "sequence_file", [](const ScenarioConfig &c) { return c.run.sequence_file; },
                     [](ScenarioConfig &c, const std::string &v) { c.run.sequence_file = trim(v); }});
        k.push_back({"run", "output_dir", [](const ScenarioConfig &c) { return c.run.output_dir; },
                     [](ScenarioConfig &c, const std::string &v) { c.run.output_dir = trim(v); }, true});
        // [ion]
        k.push_back(real_key("ion", "mass_u", [](ScenarioConfig &c) -> double & { return c.mass_u; }));
        k.push_back(real_key("ion", "charge_e", [](ScenarioConfig &c) -> double & { return c.charge_e; }));
        k.push_back(real_key("ion", "g_ground", [](ScenarioConfig &c) -> double & { return c.model.species.g_ground; }));
        k.push_back(real_key("ion", "g_d", [](ScenarioConfig &c) -> double & { return c.model.species.g_d; }));
        k.push_back(real_key("ion", "c2_quad_zeeman",
                             [](ScenarioConfig &c) -> double & { return c.model.species.c2_quad_zeeman; }));
        k.push_back(real_key("ion", "theta", [](ScenarioConfig &c) -> double & { return c.model.theta; }));
        k.push_back(bool_key("ion", "second_order_zeeman",
                             [](ScenarioConfig &c) -> bool & { return c.model.second_order_zeeman; }));
        // [trap]
        k.push_back(real_key("trap", "dez_dz", [](ScenarioConfig &c) -> double & { return c.model.trap.dez_dz; }));
        k.push_back(real_key("trap", "omega_z", [](ScenarioConfig &c) -> double & { return c.omega_z; }));
        k.push_back(real_key("trap", "epsilon1", [](ScenarioConfig &c) -> double & { return c.model.trap.epsilon1; }));
        k.push_back(real_key("trap", "alpha", [](ScenarioConfig &c) -> double & { return c.model.trap.alpha; }));
        k.push_back(real_key("trap", "rf_axial_correction",
                             [](ScenarioConfig &c) -> double & { return c.model.trap.rf_axial_correction; }));
        // [field]
        k.push_back(real_key("field", "b", [](ScenarioConfig &c) -> double & { return c.model.field.b; }));
        k.push_back(real_key("field", "beta", [](ScenarioConfig &c) -> double & { return c.model.field.beta; }));
        k.push_back(real_key("field", "beta0", [](ScenarioConfig &c) -> double & { return c.model.field.beta0; }));
        k.push_back(real_key("field", "beta_calibration_sigma",
                             [](ScenarioConfig &c) -> double & { return c.model.field.beta_calibration_sigma; }));
        // [noise]
        k.push_back({"noise", "kind", [](const ScenarioConfig &c) { return to_string(c.noise.kind); },
                     [](ScenarioConfig &c, const std::string &v) { c.noise.kind = noise_kind_from_string(trim(v)); }});
        k.push_back(real_key("noise", "sigma_b", [](ScenarioConfig &c) -> double & { return c.noise.sigma_b; }));
        k.push_back(real_key("noise", "zeeman_sigma_hz", [](ScenarioConfig &c) -> double & { return c.zeeman_sigma_hz; }));
        k.push_back(real_key("noise", "drift_rate_sigma",
                             [](ScenarioConfig &c) -> double & { return c.noise.drift_rate_sigma; }));
        k.push_back(real_key("noise", "step_dt", [](ScenarioConfig &c) -> double & { return c.noise.step_dt; }));
        // [detection]
        k.push_back(real_key("detection", "false_bright",
                             [](ScenarioConfig &c) -> double & { return c.detection.false_bright; }));
        k.push_back(real_key("detection", "false_dark",
                             [](ScenarioConfig &c) -> double & { return c.detection.false_dark; }));
        // [simulation]
        k.push_back(bool_key("simulation", "finite_rf_pulses",
                             [](ScenarioConfig &c) -> bool & { return c.simulation.finite_rf_pulses; }));
        k.push_back(real_key("simulation", "rf_rabi_frequency",
                             [](ScenarioConfig &c) -> double & { return c.simulation.rf_rabi_frequency; }));
        // [plan]
        k.push_back(list_key("plan", "betas", [](ScenarioConfig &c) -> std::vector<double> & { return c.plan.betas; }));
        k.push_back(
            list_key("plan", "gradients", [](ScenarioConfig &c) -> std::vector<double> & { return c.plan.gradients; }));
        k.push_back(
            list_key("plan", "tau_totals", [](ScenarioConfig &c) -> std::vector<double> & { return c.plan.tau_totals; }));
        k.push_back(int_key("plan", "n_echo", [](ScenarioConfig &c) -> int & { return c.plan.n_echo; }));
        k.push_back(int_key("plan", "shots", [](ScenarioConfig &c) -> int & { return c.plan.shots; }));
        k.push_back(int_key("plan", "phi_points", [](ScenarioConfig &c) -> int & { return c.plan_phi_points; }));
        k.push_back(list_key("plan", "angle_phase_offsets",
                             [](ScenarioConfig &c) -> std::vector<double> & { return c.plan.angle_phase_offsets; }));
        // [fit]
        k.push_back(bool_key("fit", "fit_epsilon1", [](ScenarioConfig &c) -> bool & { return c.fit.fit_epsilon1; }));
        k.push_back(real_key("fit", "theta_min", [](ScenarioConfig &c) -> double & { return c.fit.theta_min; }));
        k.push_back(real_key("fit", "theta_max", [](ScenarioConfig &c) -> double & { return c.fit.theta_max; }));
        k.push_back(
            int_key("fit", "bootstrap_resamples", [](ScenarioConfig &c) -> int & { return c.fit.bootstrap_resamples; }));
        // [rabi]
        k.push_back(real_key("rabi", "max_area", [](ScenarioConfig &c) -> double & { return c.rabi.max_area; }));
        k.push_back(int_key("rabi", "points", [](ScenarioConfig &c) -> int & { return c.rabi.points; }));
        k.push_back(real_key("rabi", "rf_phase", [](ScenarioConfig &c) -> double & { return c.rabi.rf_phase; }));
        // [fringe]
        k.push_back(int_key("fringe", "n_echo", [](ScenarioConfig &c) -> int & { return c.fringe.n_echo; }));
        k.push_back(real_key("fringe", "tau", [](ScenarioConfig &c) -> double & { return c.fringe.tau; }));
        k.push_back(int_key("fringe", "shots", [](ScenarioConfig &c) -> int & { return c.fringe.shots; }));
        k.push_back(int_key("fringe", "phi_points", [](ScenarioConfig &c) -> int & { return c.fringe.phi_points; }));
        return k;
    }();
    return keys;
}

inline const Key *find_key(const std::string &section, const std::string &name) {
    for (const Key &k : schema()) {
        if (k.section == section && k.name == name) return &k;
    }
    return nullptr;
}

inline constexpr std::string_view kReferencePrefix = "reference.";

}  // namespace config_detail

/// Raw assignments in file order: (section, key) -> value.
using ConfigAssignments = std::vector<std::pair<std::pair<std::string, std::string>, std::string>>;

inline ConfigAssignments read_config_assignments(std::istream &in, const std::string &source = "config") {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error &e) {
        throw ConfigError(source + ": line " + std::to_string(e.line()) + ": " + e.message());
    }
    ConfigAssignments out;
    for (const auto &[section, body] : tree) {
        if (body.empty()) throw ConfigError(source + ": key '" + section + "' outside of any section");
        for (const auto &[key, value] : body) out.push_back({{section, key}, value.data()});
    }
    return out;
}

/// Applies assignments over `cfg`. Reference sections replace the default
/// reference table as a whole.
inline void apply_assignments(ScenarioConfig &cfg, const ConfigAssignments &assignments) {
    using namespace config_detail;
    std::map<std::string, ReferenceValue> refs;
    std::vector<std::string> ref_order;
    for (const auto &[where_, value] : assignments) {
        const auto &[section, key] = where_;
        if (section.starts_with(kReferencePrefix)) {
            const std::string id = section.substr(kReferencePrefix.size());
            if (id.empty()) throw ConfigError("reference section needs a name, e.g. [reference.prior]");
            if (!refs.count(id)) ref_order.push_back(id), refs[id] = {id, 0.0, 0.0, "measurement"};
            ReferenceValue &r = refs[id];
            if (key == "label") r.label = trim(value);
            else if (key == "value") r.value = parse_double(section, key, value);
            else if (key == "sigma") r.sigma = parse_double(section, key, value);
            else if (key == "kind") r.kind = trim(value);
            else throw ConfigError("unknown key '" + key + "' in [" + section + "]");
            continue;
        }
        const Key *k = find_key(section, key);
        if (!k) {
            bool known_section = false;
            for (const Key &s : schema()) known_section = known_section || s.section == section;
            throw ConfigError(known_section ? "unknown key '" + key + "' in [" + section + "]"
                                            : "unknown section [" + section + "]");
        }
        k->set(cfg, value);
    }
    if (!ref_order.empty()) {
        cfg.model.species.reference_theta_values.clear();
        for (const auto &id : ref_order) {
            const ReferenceValue &r = refs[id];
            if (!(r.sigma > 0.0)) throw ConfigError("reference." + id + ".sigma must be positive");
            cfg.model.species.reference_theta_values.push_back(r);
        }
    }
}

/// Parses one `section.key=value` override.
inline std::pair<std::pair<std::string, std::string>, std::string> parse_override(const std::string &text) {
    const auto eq = text.find('=');
    const auto dot = text.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError("override must look like section.key=value, got '" + text + "'");
    }
    // The key is everything after the last dot before '=' so that
    // reference.<id>.value works.
    const auto last_dot = text.rfind('.', eq);
    return {{config_detail::trim(text.substr(0, last_dot)), config_detail::trim(text.substr(last_dot + 1, eq - last_dot - 1))},
            config_detail::trim(text.substr(eq + 1))};
}

/// Defaults, then the file (if any), then overrides; resolved and validated.
inline ScenarioConfig load_config(const std::optional<std::string> &path, const std::vector<std::string> &overrides = {},
                                  ScenarioConfig base = ScenarioConfig::builtin()) {
    ConfigAssignments all;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot open config file " + *path);
        all = read_config_assignments(in, *path);
    }
    for (const auto &o : overrides) all.push_back(parse_override(o));
    // Derived inputs start unset unless given explicitly.
    bool has_omega = false, has_zeeman = false, has_sigma_b = false, has_dez = false;
    for (const auto &[w, v] : all) {
        has_omega = has_omega || w == std::pair<std::string, std::string>{"trap", "omega_z"};
        has_dez = has_dez || w == std::pair<std::string, std::string>{"trap", "dez_dz"};
        has_zeeman = has_zeeman || w == std::pair<std::string, std::string>{"noise", "zeeman_sigma_hz"};
        has_sigma_b = has_sigma_b || w == std::pair<std::string, std::string>{"noise", "sigma_b"};
    }
    if (has_sigma_b && !has_zeeman) base.zeeman_sigma_hz = 0.0;
    if (has_dez && !has_omega) base.omega_z = 0.0;
    apply_assignments(base, all);
    const double dez_given = base.model.trap.dez_dz;
    const double sigma_given = base.noise.sigma_b;
    base.resolve();
    if (has_dez && base.omega_z != 0.0 && std::abs(dez_given - base.model.trap.dez_dz) > 1e-12 * std::abs(dez_given)) {
        throw ConfigError("trap.dez_dz conflicts with trap.omega_z; set only one");
    }
    if (has_sigma_b && base.zeeman_sigma_hz != 0.0 &&
        std::abs(sigma_given - base.noise.sigma_b) > 1e-12 * std::abs(sigma_given)) {
        throw ConfigError("noise.sigma_b conflicts with noise.zeeman_sigma_hz; set only one");
    }
    return base;
}

/// Canonical text of the resolved configuration. Without the execution-only
/// keys (output_dir, threads) this is the written-back file and the hashed
/// text, so outputs do not depend on where or how parallel a run was.
inline std::string serialize_config(const ScenarioConfig &cfg, bool include_hash_exempt = false) {
    std::string out;
    std::string section;
    for (const auto &k : config_detail::schema()) {
        if (k.hash_exempt && !include_hash_exempt) continue;
        if (k.section != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + k.section + "]\n";
            section = k.section;
        }
        out += k.name + " = " + k.get(cfg) + "\n";
    }
    int i = 0;
    for (const auto &r : cfg.model.species.reference_theta_values) {
        out += "\n[reference." + std::to_string(++i) + "]\n";
        out += "label = " + r.label + "\n";
        out += "value = " + config_detail::fmt_double(r.value) + "\n";
        out += "sigma = " + config_detail::fmt_double(r.sigma) + "\n";
        out += "kind = " + r.kind + "\n";
    }
    return out;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += hex[digest[i] >> 4], out += hex[digest[i] & 15];
    return out;
}

/// Hash of everything that can influence results.
inline std::string config_hash(const ScenarioConfig &cfg) {
    return sha256_hex(serialize_config(cfg));
}

}  // namespace ddq

namespace ddq {

/// The written-back resolved configuration: the canonical text preceded by
/// comment lines naming its hash (comments are not part of the hash).
inline std::string write_back_config(const ScenarioConfig &cfg) {
    return "# ddq resolved configuration\n# config_sha256: " + config_hash(cfg) + "\n\n" + serialize_config(cfg);
}

}  // namespace ddq
