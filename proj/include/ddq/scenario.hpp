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

// Command orchestration. Each command is a pure function of its inputs that
// returns named file contents and a console summary; the CLI only writes
// them. Every file embeds the config hash, and nothing depends on the output
// directory or the thread count, so repeated runs are byte-identical.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ddq/bootstrap.hpp"
#include "ddq/config.hpp"
#include "ddq/dsl.hpp"
#include "ddq/fringe_fit.hpp"
#include "ddq/io.hpp"
#include "ddq/joint_fit.hpp"
#include "ddq/linear_fit.hpp"
#include "ddq/report.hpp"
#include "ddq/sampler.hpp"
#include "ddq/sequence.hpp"

namespace ddq {

using Json = nlohmann::ordered_json;

struct OutputFile {
    std::string name;
    std::string content;
};

struct CommandOutput {
    std::vector<OutputFile> files;
    std::string summary;

    const std::string &file(std::string_view name) const {
        for (const auto &f : files) {
            if (f.name == name) return f.content;
        }
        throw Error("no output file named " + std::string(name));
    }
};

namespace scenario_detail {

inline std::string pm(double v) {
    return fmt::format("{:.6g}", v);
}

inline Json header(std::string_view kind, const std::string &hash) {
    return {{"schema_version", kJsonSchemaVersion}, {"kind", kind}, {"config_hash", hash}};
}

inline Json fringe_fit_json(const FringeFit &f) {
    return {{"phase", f.phase},
            {"phase_sigma", f.phase_sigma()},
            {"phase_ci95", {f.ci95_phase.first, f.ci95_phase.second}},
            {"contrast", f.contrast},
            {"offset", f.offset},
            {"neg_log_likelihood", f.neg_log_likelihood}};
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
    return out;
}

// Unwraps `phase` onto the branch nearest `anchor`.
inline double near(double phase, double anchor) {
    return anchor + wrap_phase(phase - anchor);
}

}  // namespace scenario_detail

/// Reads and parses the sequence file named in the config, if any.
inline std::optional<PulseSequence> load_sequence(const ScenarioConfig &cfg, std::string *text_out = nullptr) {
    if (cfg.run.sequence_file.empty()) return std::nullopt;
    std::ifstream in(cfg.run.sequence_file);
    if (!in) throw ConfigError("cannot open sequence file " + cfg.run.sequence_file);
    std::stringstream ss;
    ss << in.rdbuf();
    if (text_out) *text_out = ss.str();
    return parse_sequence_text(ss.str());
}

inline JointFitOptions fit_options(const ScenarioConfig &cfg) {
    JointFitOptions o;
    o.fit_epsilon1 = cfg.fit.fit_epsilon1;
    o.epsilon1 = cfg.model.trap.epsilon1;
    o.alpha = cfg.model.trap.alpha;
    o.theta_min = cfg.fit.theta_min;
    o.theta_max = cfg.fit.theta_max;
    return o;
}

inline ScanOptions scan_options(const ScenarioConfig &cfg) {
    ScanOptions s;
    s.detection = cfg.detection;
    s.exact = cfg.run.exact;
    s.simulation = cfg.simulation;
    return s;
}

// ---------------------------------------------------------------------------
// simulate-rabi
// ---------------------------------------------------------------------------

/// Six D populations vs RF pulse area from |D,-5/2> and from the prepared
/// superposition (|D,-5/2> + |D,-1/2>)/sqrt(2).
inline CommandOutput cmd_simulate_rabi(const ScenarioConfig &cfg) {
    const std::string hash = config_hash(cfg);
    std::string csv = csv_preamble("rabi", hash);
    csv += "initial,area,P(-5/2),P(-3/2),P(-1/2),P(+1/2),P(+3/2),P(+5/2)\n";
    const std::vector<std::pair<std::string, StateVector>> initial = {
        {"D-5/2", StateVector::basis(BasisLabel::d(-5))}, {"psi_i", StateVector::prepared_superposition()}};
    for (const auto &[name, psi] : initial) {
        for (double area : scenario_detail::linspace(0.0, cfg.rabi.max_area, cfg.rabi.points)) {
            const StateVector out =
                apply_rf_pulse(psi, RfPulse{area, Parameter::literal(cfg.rabi.rf_phase)});
            csv += name + "," + fmt_g17(area);
            for (int i = kFirstD; i < kFirstD + kNumD; ++i) csv += "," + fmt_g17(std::norm(out[i]));
            csv += '\n';
        }
    }
    Json meta = scenario_detail::header("rabi", hash);
    meta["config"] = config_to_json(cfg);
    meta["rows"] = 2 * cfg.rabi.points;
    CommandOutput out;
    out.files = {{"rabi.csv", csv}, {"rabi.json", dump_json(meta)}, {"resolved_config.ini", write_back_config(cfg)}};
    out.summary = fmt::format("rabi: {} areas x 2 initial states written to rabi.csv\n", cfg.rabi.points);
    return out;
}

// ---------------------------------------------------------------------------
// simulate-fringe
// ---------------------------------------------------------------------------

/// One fringe at the configured field angle and gradient and its tau = 0
/// reference, with binomial MLE fits and their phase difference. A sequence file must leave $phi_laser open; $tau, if present, is
/// bound to fringe.tau.
inline CommandOutput cmd_simulate_fringe(const ScenarioConfig &cfg) {
    const std::string hash = config_hash(cfg);
    std::string seq_text;
    PulseSequence templ = build_quadrupole_dd_sequence(cfg.fringe.n_echo, Parameter::literal(cfg.fringe.tau),
                                                       Parameter::named("phi_laser"));
    bool custom = false;
    if (auto seq = load_sequence(cfg, &seq_text)) {
        for (const auto &v : seq->variables()) {
            if (v != "tau" && v != "phi_laser") throw ConfigError("sequence file has unsupported variable $" + v);
        }
        if (!seq->variables().contains("phi_laser")) throw ConfigError("fringe sequences must leave $phi_laser open");
        templ = bind(*seq, {{"tau", cfg.fringe.tau}});
        custom = true;
    }
    const auto grid = default_phi_grid(cfg.fringe.phi_points);
    const FringeDataset data =
        run_fringe_scan(templ, cfg.model, cfg.noise, grid, cfg.fringe.shots, cfg.run.seed, scan_options(cfg));
    FringeDataset reference = detail::scan(zero_waits(templ), cfg.model, cfg.noise, grid, cfg.fringe.shots,
                                           cfg.run.seed, 0, rng::kReferenceFringe, scan_options(cfg));
    reference.context = data.context;
    reference.context.tau = 0.0;
    reference.context.reference = true;
    const FringeFit fit = fit_fringe_mle(data);
    const FringeFit ref_fit = fit_fringe_mle(reference);
    const double phase_total = wrap_phase(fit.phase - ref_fit.phase);

    Json j = scenario_detail::header("fringe", hash);
    j["config"] = config_to_json(cfg);
    j["exact"] = data.exact;
    j["fit"] = scenario_detail::fringe_fit_json(fit);
    j["reference_fit"] = scenario_detail::fringe_fit_json(ref_fit);
    j["phase_total"] = phase_total;
    j["phase_total_sigma"] = std::hypot(sigma_from_ci95(fit.ci95_phase), sigma_from_ci95(ref_fit.ci95_phase));
    if (!custom) j["analytic_phase"] = wrap_phase(analytic_phase(cfg.fringe.n_echo, cfg.fringe.tau, cfg.model));
    if (custom) j["sequence_sha256"] = sha256_hex(seq_text);
    CommandOutput out;
    out.files = {{"fringe.csv", write_fringe_csv(data, hash)},
                 {"reference_fringe.csv", write_fringe_csv(reference, hash)},
                 {"fringe.json", dump_json(j)},
                 {"resolved_config.ini", write_back_config(cfg)}};
    out.summary = fmt::format("fringe phase = {} rad (95% CI [{}, {}]), contrast = {}; phase_total = {} rad\n",
                              scenario_detail::pm(fit.phase), scenario_detail::pm(fit.ci95_phase.first),
                              scenario_detail::pm(fit.ci95_phase.second), scenario_detail::pm(fit.contrast),
                              scenario_detail::pm(phase_total));
    return out;
}

// ---------------------------------------------------------------------------
// Campaign analysis (shared by run-campaign, fit and reproduce-paper)
// ---------------------------------------------------------------------------

struct CampaignAnalysis {
    std::vector<CellPhase> cells;
    std::optional<JointFitResult> joint;
    std::string joint_error;
    std::optional<JointFitResult> offset_subtracted;
    std::optional<TwoStageResult> two_stage;
    std::vector<AngleSlope> angle_slopes;
    bool ambiguous = false;
    std::optional<BootstrapResult> bootstrap;
    JointFitOptions options;
};

/// Runs every estimator path. A campaign that cannot identify the angular
/// model (one angle, one lever arm) still yields the per-cell and
/// frequency-vs-gradient results; a joint fit that fails to converge raises
/// NonConvergenceError with its diagnostics.
inline CampaignAnalysis analyze_campaign(const CampaignDataset &data, const ScenarioConfig &cfg) {
    CampaignAnalysis a;
    a.options = fit_options(cfg);
    a.cells = extract_cell_phases(data);
    try {
        a.joint = joint_fit_quadrupole(a.cells, a.options);
    } catch (const NonIdentifiableError &e) {
        a.joint_error = e.what();
    }
    if (a.joint && !a.joint->fit_diagnostics.converged) {
        const auto &d = a.joint->fit_diagnostics;
        throw NonConvergenceError(fmt::format("joint fit did not converge: theta={} beta0={} chi2={} dof={} iterations={}",
                                              a.joint->theta, a.joint->beta0, d.chi2, d.dof, d.iterations));
    }
    if (a.joint) {
        try {
            a.offset_subtracted = joint_fit_offset_subtracted(a.cells, a.options);
        } catch (const FitError &) {
        }
    }
    try {
        a.angle_slopes = angle_frequency_slopes(a.cells, a.ambiguous);
    } catch (const FitError &) {
    }
    if (a.joint) {
        try {
            a.two_stage = two_stage_theta(a.cells, a.options);
        } catch (const FitError &) {
        }
    }
    if (a.joint && cfg.fit.bootstrap_resamples > 0) {
        a.bootstrap = bootstrap_ci(data, cfg.fit.bootstrap_resamples, cfg.run.seed, a.options);
    }
    return a;
}

namespace scenario_detail {

inline Json joint_json(const JointFitResult &r) {
    Json offsets = Json::array();
    for (std::size_t k = 0; k < r.angles.size(); ++k) {
        offsets.push_back({{"beta_nominal", r.angles[k]},
                           {"offset", k < r.per_angle_offsets.size() ? r.per_angle_offsets[k] : 0.0}});
    }
    const auto &d = r.fit_diagnostics;
    return {{"theta", r.theta},
            {"theta_ci95", {r.ci95_theta.first, r.ci95_theta.second}},
            {"theta_plus", r.ci95_theta.second - r.theta},
            {"theta_minus", r.theta - r.ci95_theta.first},
            {"theta_sigma", r.theta_sigma},
            {"beta0", r.beta0},
            {"epsilon1", r.epsilon1},
            {"per_angle_offsets", offsets},
            {"diagnostics",
             {{"iterations", d.iterations},
              {"converged", d.converged},
              {"chi2", d.chi2},
              {"dof", d.dof},
              {"reduced_chi2", d.dof > 0 ? d.chi2 / d.dof : 0.0}}}};
}

}  // namespace scenario_detail

/// fit.json plus the three plot-ready tables.
inline std::vector<OutputFile> analysis_files(const CampaignAnalysis &a, const CampaignDataset &data,
                                              const std::string &hash, const std::string &input_sha256) {
    using scenario_detail::near;
    Json j = scenario_detail::header("fit", hash);
    j["input_sha256"] = input_sha256;
    j["exact"] = data.exact;
    j["n_echo"] = data.n_echo;
    Json cells = Json::array();
    for (const auto &c : a.cells) {
        cells.push_back({{"beta_nominal", c.beta_nominal},
                         {"dEz_dz", c.dez_dz},
                         {"tau_total", c.tau_total},
                         {"phase", c.phase},
                         {"phase_sigma", c.sigma},
                         {"signal", scenario_detail::fringe_fit_json(c.signal)},
                         {"reference", scenario_detail::fringe_fit_json(c.reference)}});
    }
    j["cells"] = cells;
    j["joint_fit"] = a.joint ? scenario_detail::joint_json(*a.joint) : Json(nullptr);
    if (!a.joint) j["joint_fit_error"] = a.joint_error;
    j["offset_subtracted_fit"] = a.offset_subtracted ? scenario_detail::joint_json(*a.offset_subtracted) : Json(nullptr);
    if (a.two_stage) {
        j["two_stage_fit"] = {{"theta", a.two_stage->theta},
                              {"theta_sigma", a.two_stage->theta_sigma},
                              {"beta0", a.two_stage->beta0},
                              {"ambiguous", a.two_stage->ambiguous}};
    } else {
        j["two_stage_fit"] = nullptr;
    }
    Json slopes = Json::array();
    for (const auto &s : a.angle_slopes) {
        Json row = {{"beta_nominal", s.beta_nominal}};
        if (s.has_gradient_fit) {
            const auto &g = s.gradient_fit;
            row["slope_hz_per_v_m2"] = g.slope;
            row["slope_ci95"] = {g.ci95.first, g.ci95.second};
            row["intercept_hz"] = g.intercept;
            row["intercept_ci95"] = {g.intercept_ci95.first, g.intercept_ci95.second};
            row["reduced_chi2"] = g.fit.dof > 0 ? g.fit.reduced_chi2() : 0.0;
        }
        slopes.push_back(row);
    }
    j["frequency_vs_gradient"] = slopes;
    j["phase_unwrap_ambiguous"] = a.ambiguous;
    if (a.bootstrap) {
        j["bootstrap"] = {{"resamples", a.bootstrap->thetas.size() + a.bootstrap->failures},
                          {"failures", a.bootstrap->failures},
                          {"theta_ci95", {a.bootstrap->ci95.first, a.bootstrap->ci95.second}}};
    } else {
        j["bootstrap"] = nullptr;
    }

    // Phase vs time: unwrapped onto the fitted model when there is one,
    // otherwise by continuity along tau_total from zero.
    std::string time_table = csv_preamble("phase_vs_time", hash);
    time_table += "beta_nominal,dEz_dz,tau_total,phase,phase_sigma,model_phase\n";
    std::string angle_table = csv_preamble("phase_vs_beta", hash);
    angle_table += "beta_nominal,dEz_dz,tau_total,phase,phase_sigma,offset,model_phase\n";
    std::map<std::pair<double, double>, double> last;  // continuity anchor per (beta, gradient)
    for (const auto &c : a.cells) {
        std::string model_text, model_no_offset_text;
        double phase = 0.0, corrected = 0.0, offset = 0.0;
        if (a.joint) {
            const double model = joint_model_phase(*a.joint, a.options, c.beta_nominal, c.dez_dz, c.tau_total);
            const double bare = joint_model_phase(*a.joint, a.options, c.beta_nominal, c.dez_dz, c.tau_total, false);
            offset = model - bare;
            phase = near(c.phase, model);
            corrected = near(c.phase - offset, bare);
            model_text = fmt_g17(model);
            model_no_offset_text = fmt_g17(bare);
        } else {
            const auto key = std::pair{c.beta_nominal, c.dez_dz};
            phase = near(c.phase, last.count(key) ? last[key] : 0.0);
            last[key] = phase;
            corrected = phase;
        }
        time_table += fmt::format("{},{},{},{},{},{}\n", fmt_g17(c.beta_nominal), fmt_g17(c.dez_dz), fmt_g17(c.tau_total),
                             fmt_g17(phase), fmt_g17(c.sigma), model_text);
        angle_table += fmt::format("{},{},{},{},{},{},{}\n", fmt_g17(c.beta_nominal), fmt_g17(c.dez_dz), fmt_g17(c.tau_total),
                            fmt_g17(corrected), fmt_g17(c.sigma), fmt_g17(offset), model_no_offset_text);
    }

    std::string gradient_table = csv_preamble("frequency_vs_gradient", hash);
    gradient_table += "beta_nominal,dEz_dz,frequency_hz,frequency_sigma_hz,line_hz\n";
    for (const auto &s : a.angle_slopes) {
        for (const auto &p : s.points) {
            const std::string line =
                s.has_gradient_fit ? fmt_g17(s.gradient_fit.slope * p.dez_dz + s.gradient_fit.intercept) : "";
            gradient_table += fmt::format("{},{},{},{},{}\n", fmt_g17(s.beta_nominal), fmt_g17(p.dez_dz),
                                 fmt_g17(p.frequency), fmt_g17(p.sigma), line);
        }
    }
    return {{"fit.json", dump_json(j)},
            {"phase_vs_time.csv", time_table},
            {"frequency_vs_gradient.csv", gradient_table},
            {"phase_vs_beta.csv", angle_table}};
}

inline std::string analysis_summary(const CampaignAnalysis &a) {
    if (!a.joint) return fmt::format("joint fit unavailable: {}\n", a.joint_error);
    const auto &r = *a.joint;
    std::string s = fmt::format("theta = {:.4f} +{:.4f} -{:.4f} e a0^2 (95% CI), beta0 = {:.4f} rad\n", r.theta,
                                r.ci95_theta.second - r.theta, r.theta - r.ci95_theta.first, r.beta0);
    if (a.ambiguous) s += "warning: phase unwrapping was ambiguous for at least one angle\n";
    return s;
}

// ---------------------------------------------------------------------------
// run-campaign, fit, reproduce-paper
// ---------------------------------------------------------------------------

inline CampaignDataset simulate_campaign(const ScenarioConfig &cfg, std::string *sequence_text = nullptr) {
    CampaignOptions opts;
    opts.scan = scan_options(cfg);
    opts.threads = cfg.run.threads;
    opts.sequence = load_sequence(cfg, sequence_text);
    return run_campaign(cfg.plan, cfg.model, cfg.noise, opts);
}

inline Json campaign_json(const ScenarioConfig &cfg, const CampaignDataset &data, const std::string &hash,
                          const std::string &csv, const std::string &sequence_text) {
    Json j = scenario_detail::header("campaign", hash);
    j["csv_sha256"] = sha256_hex(csv);
    j["exact"] = data.exact;
    j["n_cells"] = data.cells.size();
    j["plan"] = plan_to_json(cfg.plan);
    j["model"] = model_to_json(cfg.model);
    j["noise"] = {{"kind", to_string(cfg.noise.kind)},
                  {"sigma_b", cfg.noise.sigma_b},
                  {"drift_rate_sigma", cfg.noise.drift_rate_sigma},
                  {"step_dt", cfg.noise.step_dt}};
    j["detection"] = {{"false_bright", cfg.detection.false_bright}, {"false_dark", cfg.detection.false_dark}};
    j["sequence_sha256"] = sequence_text.empty() ? Json(nullptr) : Json(sha256_hex(sequence_text));
    Json truth = Json::array();
    for (const auto &c : data.cells) truth.push_back(c.fringe.context.beta_true);
    j["beta_true_per_cell"] = truth;
    j["config"] = config_to_json(cfg);
    return j;
}

struct CampaignOutcome {
    CommandOutput output;
    CampaignDataset data;
    CampaignAnalysis analysis;
};

inline CampaignOutcome run_campaign_command(const ScenarioConfig &cfg) {
    const std::string hash = config_hash(cfg);
    CampaignOutcome r;
    std::string seq_text;
    r.data = simulate_campaign(cfg, &seq_text);
    const std::string csv = write_campaign_csv(r.data, hash);
    r.analysis = analyze_campaign(r.data, cfg);
    r.output.files = {{"campaign.csv", csv},
                      {"campaign.json", dump_json(campaign_json(cfg, r.data, hash, csv, seq_text))},
                      {"resolved_config.ini", write_back_config(cfg)}};
    for (auto &f : analysis_files(r.analysis, r.data, hash, sha256_hex(csv))) r.output.files.push_back(std::move(f));
    r.output.summary = fmt::format("{} cells simulated\n", r.data.cells.size()) + analysis_summary(r.analysis);
    return r;
}

inline CommandOutput cmd_run_campaign(const ScenarioConfig &cfg) {
    return run_campaign_command(cfg).output;
}

/// Refits a campaign CSV. Fit settings come from the config; the input's
/// own config hash is recorded alongside.
inline CommandOutput cmd_fit(const ScenarioConfig &cfg, const std::string &csv_text) {
    const std::string hash = config_hash(cfg);
    std::istringstream in(csv_text);
    std::string input_hash;
    const CampaignDataset data = read_campaign_csv(in, &input_hash);
    const CampaignAnalysis a = analyze_campaign(data, cfg);
    CommandOutput out;
    out.files = analysis_files(a, data, hash, sha256_hex(csv_text));
    out.files.push_back({"resolved_config.ini", write_back_config(cfg)});
    out.summary = fmt::format("{} cells read (input config {})\n", data.cells.size(),
                              input_hash.empty() ? "unknown" : input_hash.substr(0, 12)) +
                  analysis_summary(a);
    return out;
}

struct ReproduceResult {
    double theta_true = 0.0;
    double theta = 0.0;
    std::pair<double, double> ci95{0.0, 0.0};
    bool covered = false;
    double half_width() const {
        return 0.5 * (ci95.second - ci95.first);
    }
};

inline ReproduceResult reproduce_result(const ScenarioConfig &cfg, const CampaignAnalysis &a) {
    if (!a.joint) throw NonIdentifiableError("reproduce-paper: " + a.joint_error);
    ReproduceResult r;
    r.theta_true = cfg.model.theta;
    r.theta = a.joint->theta;
    r.ci95 = a.joint->ci95_theta;
    r.covered = r.ci95.first <= r.theta_true && r.theta_true <= r.ci95.second;
    return r;
}

/// The built-in scenario (or the configured one), fitted and compared with
/// the truth and with the reference table. With replications > 1 the seeds
/// seed, seed+1, ... are run and summarized in replications.csv.
inline CommandOutput cmd_reproduce_paper(const ScenarioConfig &cfg, int replications = 1) {
    if (replications < 1) throw ConfigError("replications must be >= 1");
    const std::string hash = config_hash(cfg);
    CampaignOutcome base = run_campaign_command(cfg);
    const ReproduceResult r = reproduce_result(cfg, base.analysis);
    const ComparisonReport table = theta_comparison_report(*base.analysis.joint, cfg.model.species);

    Json rep = scenario_detail::header("report", hash);
    rep["theta_true"] = r.theta_true;
    rep["theta"] = r.theta;
    rep["theta_ci95"] = {r.ci95.first, r.ci95.second};
    rep["theta_plus"] = r.ci95.second - r.theta;
    rep["theta_minus"] = r.theta - r.ci95.first;
    rep["deviation_from_truth"] = r.theta - r.theta_true;
    rep["truth_covered"] = r.covered;
    Json rows = Json::array();
    for (const auto &row : table.rows) {
        rows.push_back({{"label", row.label},
                        {"kind", row.kind},
                        {"value", row.value},
                        {"sigma", row.sigma},
                        {"deviation_sigma", row.deviation_sigma},
                        {"deviation_text", row.deviation_text}});
    }
    rep["comparison"] = rows;

    std::string text = "# config_sha256: " + hash + "\n" + table.to_text();
    text += fmt::format("truth: theta = {:.4f}, deviation = {:+.4f} e a0^2, covered by the 95% CI: {}\n", r.theta_true,
                        r.theta - r.theta_true, r.covered ? "yes" : "no");

    CommandOutput out = std::move(base.output);
    if (replications > 1) {
        std::string csv = csv_preamble("replications", hash);
        csv += "seed,theta,ci95_low,ci95_high,half_width,covered\n";
        std::vector<double> widths;
        int covered = 0;
        for (int i = 0; i < replications; ++i) {
            ScenarioConfig c = cfg;
            c.run.seed = cfg.run.seed + static_cast<std::uint64_t>(i);
            c.resolve();
            const ReproduceResult ri =
                i == 0 ? r : reproduce_result(c, analyze_campaign(simulate_campaign(c), c));
            covered += ri.covered;
            widths.push_back(ri.half_width());
            csv += fmt::format("{},{},{},{},{},{}\n", c.run.seed, fmt_g17(ri.theta), fmt_g17(ri.ci95.first),
                               fmt_g17(ri.ci95.second), fmt_g17(ri.half_width()), ri.covered ? 1 : 0);
        }
        std::sort(widths.begin(), widths.end());
        const double median = empirical_quantile(widths, 0.5);
        rep["replications"] = {{"count", replications}, {"covered", covered}, {"median_half_width", median}};
        text += fmt::format("replications: {}/{} intervals cover the truth, median half-width {:.4f}\n", covered,
                            replications, median);
        out.files.push_back({"replications.csv", csv});
    }
    rep["text"] = text;
    out.files.push_back({"report.json", dump_json(rep)});
    out.files.push_back({"report.txt", text});
    out.summary += text;
    return out;
}

}  // namespace ddq
