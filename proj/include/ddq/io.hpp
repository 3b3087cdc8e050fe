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

// Plain-text dataset formats. Numbers are written with 17 significant digits
// so that a dataset read back is bit-identical to the one written; see
// docs/formats.md for the column definitions.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ddq/config.hpp"
#include "ddq/errors.hpp"
#include "ddq/sampler.hpp"

namespace ddq {

inline constexpr int kCampaignCsvVersion = 1;
inline constexpr int kJsonSchemaVersion = 1;
inline constexpr std::string_view kCampaignCsvHeader =
    "beta_nominal,dEz_dz,tau_total,n_echo,phi_laser,n_shots,k_D,is_reference";

inline std::string fmt_g17(double v) {
    return fmt::format("{:.17g}", v);
}

/// Comment lines every CSV output starts with.
inline std::string csv_preamble(std::string_view kind, std::string_view config_hash) {
    return fmt::format("# ddq {} v{}\n# config_sha256: {}\n", kind, kCampaignCsvVersion, config_hash);
}

inline std::string write_campaign_csv(const CampaignDataset &data, std::string_view config_hash) {
    std::string out = csv_preamble("campaign", config_hash);
    out += fmt::format("# exact: {}\n", data.exact ? "true" : "false");
    out += kCampaignCsvHeader;
    out += '\n';
    for (const auto &cell : data.cells) {
        for (const FringeDataset *f : {&cell.fringe, &cell.reference_fringe}) {
            for (const auto &pt : f->points) {
                out += fmt::format("{},{},{},{},{},{},{},{}\n", fmt_g17(cell.beta_nominal), fmt_g17(cell.dez_dz),
                                   fmt_g17(cell.tau_total), data.n_echo, fmt_g17(pt.phi_laser), pt.n_shots,
                                   fmt_g17(pt.k_D), f->context.reference ? 1 : 0);
            }
        }
    }
    return out;
}

namespace io_detail {

inline std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(config_detail::trim(item));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double to_double(const std::string &s, int line) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError(fmt::format("campaign CSV line {}: bad number '{}'", line, s));
    }
    return v;
}

inline int to_int(const std::string &s, int line) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ConfigError(fmt::format("campaign CSV line {}: bad integer '{}'", line, s));
    }
    return v;
}

}  // namespace io_detail

/// Inverse of write_campaign_csv. Cells keep their first-appearance order;
/// the dataset is exact when the header says so or any count is fractional.
inline CampaignDataset read_campaign_csv(std::istream &in, std::string *config_hash = nullptr) {
    using Key = std::tuple<double, double, double>;
    CampaignDataset data;
    std::map<Key, std::size_t> index;
    std::string line;
    int line_no = 0;
    bool header_seen = false, exact_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                const std::string key = config_detail::trim(line.substr(1, colon - 1));
                const std::string value = config_detail::trim(line.substr(colon + 1));
                if (key == "exact") exact_header = value == "true";
                if (key == "config_sha256" && config_hash) *config_hash = value;
            }
            continue;
        }
        if (!header_seen) {
            if (line != kCampaignCsvHeader) {
                throw ConfigError("campaign CSV: expected header '" + std::string(kCampaignCsvHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        const auto f = io_detail::split_csv(line);
        if (f.size() != 8) throw ConfigError(fmt::format("campaign CSV line {}: expected 8 fields", line_no));
        const double beta = io_detail::to_double(f[0], line_no);
        const double g = io_detail::to_double(f[1], line_no);
        const double t = io_detail::to_double(f[2], line_no);
        const int n_echo = io_detail::to_int(f[3], line_no);
        const FringePoint pt{io_detail::to_double(f[4], line_no), io_detail::to_int(f[5], line_no),
                             io_detail::to_double(f[6], line_no)};
        const int ref = io_detail::to_int(f[7], line_no);
        if (ref != 0 && ref != 1) throw ConfigError(fmt::format("campaign CSV line {}: is_reference must be 0 or 1", line_no));
        if (data.n_echo == 0) data.n_echo = n_echo;
        if (n_echo != data.n_echo) throw ConfigError(fmt::format("campaign CSV line {}: mixed n_echo", line_no));

        const Key key{beta, g, t};
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, data.cells.size()).first;
            CampaignCell cell;
            cell.beta_nominal = beta;
            cell.dez_dz = g;
            cell.tau_total = t;
            cell.fringe.context = {n_echo, t / (2.0 * n_echo), beta, beta, g, false};
            cell.reference_fringe.context = {n_echo, 0.0, beta, beta, g, true};
            data.cells.push_back(cell);
        }
        CampaignCell &cell = data.cells[it->second];
        (ref ? cell.reference_fringe : cell.fringe).points.push_back(pt);
        if (pt.k_D != std::floor(pt.k_D)) data.exact = true;
    }
    if (!header_seen) throw ConfigError("campaign CSV: missing header");
    if (data.cells.empty()) throw ConfigError("campaign CSV: no data rows");
    data.exact = data.exact || exact_header;
    for (auto &cell : data.cells) {
        cell.fringe.exact = cell.reference_fringe.exact = data.exact;
        if (cell.fringe.points.empty() || cell.reference_fringe.points.empty()) {
            throw ConfigError(fmt::format("campaign CSV: cell (beta={}, dEz_dz={}, tau_total={}) lacks a signal or "
                                          "reference fringe",
                                          cell.beta_nominal, cell.dez_dz, cell.tau_total));
        }
        try {
            cell.fringe.validate();
            cell.reference_fringe.validate();
        } catch (const SimulationError &e) {
            throw ConfigError(std::string("campaign CSV: ") + e.what());
        }
    }
    return data;
}

inline CampaignDataset read_campaign_csv_file(const std::string &path, std::string *config_hash = nullptr) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return read_campaign_csv(in, config_hash);
}

inline std::string write_fringe_csv(const FringeDataset &data, std::string_view config_hash) {
    std::string out = csv_preamble("fringe", config_hash);
    out += fmt::format("# exact: {}\n", data.exact ? "true" : "false");
    out += "phi_laser,n_shots,k_D\n";
    for (const auto &pt : data.points) out += fmt::format("{},{},{}\n", fmt_g17(pt.phi_laser), pt.n_shots, fmt_g17(pt.k_D));
    return out;
}

// ---------------------------------------------------------------------------
// JSON snapshots
// ---------------------------------------------------------------------------

/// The hashed part of the resolved configuration as a section -> key -> text
/// object, using the same canonical text as the written-back file.
inline nlohmann::ordered_json config_to_json(const ScenarioConfig &cfg) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto &k : config_detail::schema()) {
        if (!k.hash_exempt) j[k.section][k.name] = k.get(cfg);
    }
    auto refs = nlohmann::ordered_json::array();
    for (const auto &r : cfg.model.species.reference_theta_values) {
        refs.push_back({{"label", r.label}, {"value", r.value}, {"sigma", r.sigma}, {"kind", r.kind}});
    }
    j["references"] = refs;
    return j;
}

inline nlohmann::ordered_json model_to_json(const IonModel &m) {
    return {{"theta", m.theta},
            {"mass_kg", m.species.mass},
            {"charge_c", m.species.charge},
            {"g_ground", m.species.g_ground},
            {"g_d", m.species.g_d},
            {"c2_quad_zeeman", m.species.c2_quad_zeeman},
            {"second_order_zeeman", m.second_order_zeeman},
            {"trap", {{"dez_dz", m.trap.dez_dz}, {"epsilon1", m.trap.epsilon1}, {"alpha", m.trap.alpha}}},
            {"field",
             {{"b", m.field.b},
              {"beta", m.field.beta},
              {"beta0", m.field.beta0},
              {"beta_calibration_sigma", m.field.beta_calibration_sigma}}}};
}

inline nlohmann::ordered_json plan_to_json(const CampaignPlan &p) {
    return {{"betas", p.betas},         {"gradients", p.gradients}, {"tau_totals", p.tau_totals},
            {"n_echo", p.n_echo},       {"shots", p.shots},         {"seed", p.seed},
            {"phi_grid", p.phi_grid},   {"angle_phase_offsets", p.angle_phase_offsets}};
}

/// JSON text with a trailing newline; doubles use the shortest round-trip form.
inline std::string dump_json(const nlohmann::ordered_json &j) {
    return j.dump(2) + "\n";
}

}  // namespace ddq
