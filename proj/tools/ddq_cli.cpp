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


// ddq command-line front end. See README.md for the command reference.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddq/config.hpp"
#include "ddq/dsl.hpp"
#include "ddq/errors.hpp"
#include "ddq/io.hpp"
#include "ddq/scenario.hpp"

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kSimulation = 3, kFit = 4 };

struct CommonOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
};

void add_common(CLI::App *cmd, CommonOptions &o) {
    cmd->add_option("--seed", o.seed, "Root RNG seed (run.seed)");
    cmd->add_option("--config", o.config_path, "Scenario config file")->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out_dir, "Output directory (run.output_dir)");
    cmd->add_option("--set", o.overrides, "Override section.key=value; repeatable, applied after --config");
    cmd->add_option("--threads", o.threads, "Worker threads (run.threads)");
}

ddq::ScenarioConfig resolve(const CommonOptions &o, std::vector<std::string> extra = {}) {
    std::vector<std::string> overrides = o.overrides;
    for (auto &e : extra) overrides.push_back(std::move(e));
    if (o.seed) overrides.push_back("run.seed=" + std::to_string(*o.seed));
    if (o.threads) overrides.push_back("run.threads=" + std::to_string(*o.threads));
    if (!o.out_dir.empty()) overrides.push_back("run.output_dir=" + o.out_dir);
    return ddq::load_config(o.config_path.empty() ? std::nullopt : std::optional(o.config_path), overrides);
}

void write_outputs(const std::string &dir, const ddq::CommandOutput &out) {
    std::filesystem::create_directories(dir);
    for (const auto &f : out.files) {
        const auto path = std::filesystem::path(dir) / f.name;
        std::ofstream os(path, std::ios::binary);
        os << f.content;
        if (!os) throw ddq::Error("cannot write " + path.string());
    }
    std::cout << out.summary;
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ddq::ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int report_error(const std::string &out_dir, int code, std::string_view kind, const std::exception &e) {
    nlohmann::ordered_json j = {{"schema_version", ddq::kJsonSchemaVersion},
                                {"kind", "error"},
                                {"error", kind},
                                {"exit_code", code},
                                {"message", e.what()}};
    if (const auto *pe = dynamic_cast<const ddq::ParseError *>(&e)) {
        j["line"] = pe->line();
        j["column"] = pe->column();
    }
    std::cerr << "error: " << e.what() << "\n" << j.dump() << "\n";
    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        std::ofstream(std::filesystem::path(out_dir) / "error.json") << j.dump(2) << "\n";
    }
    return code;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"ddq: dynamic-decoupling quadrupole-moment simulator and estimator"};
    app.require_subcommand(1);

    CommonOptions rabi_o, fringe_o, campaign_o, fit_o, repro_o, parse_o;
    std::string fringe_seq, campaign_seq, fit_input, parse_file;
    bool campaign_exact = false, no_noise = false;
    int bootstrap = -1, replications = 1;

    auto *rabi = app.add_subcommand("simulate-rabi", "Populations vs RF pulse area (rabi.csv)");
    add_common(rabi, rabi_o);

    auto *fringe = app.add_subcommand("simulate-fringe", "One Ramsey fringe and its MLE fit (fringe.csv)");
    add_common(fringe, fringe_o);
    fringe->add_option("--sequence-file", fringe_seq, "DSL program with $phi_laser open")->check(CLI::ExistingFile);

    auto *campaign = app.add_subcommand("run-campaign", "Simulate and fit a (beta, gradient, tau) campaign");
    add_common(campaign, campaign_o);
    campaign->add_option("--sequence-file", campaign_seq, "DSL program with $tau and $phi_laser open")
        ->check(CLI::ExistingFile);
    campaign->add_flag("--exact", campaign_exact, "Exact-probability counts (k_D = n p)");

    auto *fit = app.add_subcommand("fit", "Fit an existing campaign.csv");
    add_common(fit, fit_o);
    fit->add_option("--input", fit_input, "campaign.csv to fit")->required()->check(CLI::ExistingFile);
    fit->add_option("--bootstrap", bootstrap, "Bootstrap resamples (fit.bootstrap_resamples)");

    auto *repro = app.add_subcommand("reproduce-paper", "Built-in quadrupole-moment scenario with report");
    add_common(repro, repro_o);
    repro->add_option("--replications", replications, "Independent seeds to run (seed, seed+1, ...)")
        ->check(CLI::PositiveNumber);
    repro->add_flag("--no-noise", no_noise, "Disable noise and use exact-probability counts");

    auto *parse = app.add_subcommand("parse", "Check a DSL file and print its canonical form");
    add_common(parse, parse_o);
    parse->add_option("file", parse_file, "DSL file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kConfig;
    }

    std::string out_dir;
    for (const auto &[cmd, opts] : {std::pair{rabi, &rabi_o}, {fringe, &fringe_o}, {campaign, &campaign_o},
                                    {fit, &fit_o}, {repro, &repro_o}, {parse, &parse_o}}) {
        if (cmd->parsed()) out_dir = opts->out_dir;
    }
    try {
        if (rabi->parsed()) {
            const auto cfg = resolve(rabi_o);
            out_dir = cfg.run.output_dir;
            write_outputs(out_dir, ddq::cmd_simulate_rabi(cfg));
        } else if (fringe->parsed()) {
            std::vector<std::string> extra;
            if (!fringe_seq.empty()) extra.push_back("run.sequence_file=" + fringe_seq);
            const auto cfg = resolve(fringe_o, extra);
            out_dir = cfg.run.output_dir;
            write_outputs(out_dir, ddq::cmd_simulate_fringe(cfg));
        } else if (campaign->parsed()) {
            std::vector<std::string> extra;
            if (!campaign_seq.empty()) extra.push_back("run.sequence_file=" + campaign_seq);
            if (campaign_exact) extra.push_back("run.exact=true");
            const auto cfg = resolve(campaign_o, extra);
            out_dir = cfg.run.output_dir;
            write_outputs(out_dir, ddq::cmd_run_campaign(cfg));
        } else if (fit->parsed()) {
            std::vector<std::string> extra;
            if (bootstrap >= 0) extra.push_back("fit.bootstrap_resamples=" + std::to_string(bootstrap));
            const auto cfg = resolve(fit_o, extra);
            out_dir = cfg.run.output_dir;
            write_outputs(out_dir, ddq::cmd_fit(cfg, read_file(fit_input)));
        } else if (repro->parsed()) {
            std::vector<std::string> extra;
            if (no_noise) extra = {"noise.kind=none", "run.exact=true"};
            const auto cfg = resolve(repro_o, extra);
            out_dir = cfg.run.output_dir;
            write_outputs(out_dir, ddq::cmd_reproduce_paper(cfg, replications));
        } else if (parse->parsed()) {
            const auto cfg = resolve(parse_o);
            const ddq::PulseSequence seq = ddq::parse_sequence_text(read_file(parse_file));
            const std::string canonical = ddq::serialize_sequence(seq);
            if (out_dir.empty()) {
                std::cout << canonical;
            } else {
                const std::string hash = ddq::config_hash(cfg);
                nlohmann::ordered_json j = {{"schema_version", ddq::kJsonSchemaVersion},
                                            {"kind", "sequence"},
                                            {"config_hash", hash},
                                            {"n_echo", seq.metadata.n_echo},
                                            {"elements", seq.elements.size()},
                                            {"variables", seq.variables()},
                                            {"canonical", canonical}};
                ddq::CommandOutput out;
                out.files = {{"sequence.dsl", "# config_sha256: " + hash + "\n" + canonical},
                             {"sequence.json", ddq::dump_json(j)}};
                out.summary = canonical;
                write_outputs(out_dir, out);
            }
        }
    } catch (const ddq::ConfigError &e) {
        return report_error(out_dir, kConfig, "config", e);
    } catch (const ddq::SimulationError &e) {
        return report_error(out_dir, kSimulation, "simulation", e);
    } catch (const ddq::FitError &e) {
        return report_error(out_dir, kFit, "fit", e);
    } catch (const std::exception &e) {
        return report_error(out_dir, kInternal, "internal", e);
    }
    return kOk;
}
