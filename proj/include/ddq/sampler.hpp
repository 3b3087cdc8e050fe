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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ddq/atom.hpp"
#include "ddq/errors.hpp"
#include "ddq/sequence.hpp"

namespace ddq {

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

/// Binary state-selective detection with misassignment probabilities.
/// A D (dark) ion reads bright with probability false_bright, an S ion reads
/// dark with probability false_dark.
struct DetectionModel {
    double false_bright = 0.0;
    double false_dark = 0.0;

    void validate() const {
        if (!(false_bright >= 0.0 && false_bright <= 0.5) || !(false_dark >= 0.0 && false_dark <= 0.5)) {
            throw ConfigError("detection error probabilities must lie in [0, 0.5]");
        }
    }
    double apply(double p_d) const {
        return p_d * (1.0 - false_bright) + (1.0 - p_d) * false_dark;
    }
    bool operator==(const DetectionModel &) const = default;
};

inline double measure_population_D(const StateVector &state, const DetectionModel &detection = {}) {
    double p = 0.0;
    for (int i = kFirstD; i < kNumLevels; ++i) p += std::norm(state[i]);
    return detection.apply(std::clamp(p, 0.0, 1.0));
}

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of the substream addressed by `path` under `root`. Distinct paths give
/// statistically independent streams regardless of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(root);
    for (std::uint64_t v : path) h = splitmix64(h ^ splitmix64(v + 0x632BE59BD9B4E019ULL));
    return h;
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
template <class Engine>
double uniform01(Engine &engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Stream tags.
inline constexpr std::uint64_t kSignalFringe = 0;
inline constexpr std::uint64_t kReferenceFringe = 1;
inline constexpr std::uint64_t kBetaCalibration = 2;

}  // namespace rng

/// One Bernoulli(p) outcome.
template <class Engine>
int sample_shot(double p, Engine &engine) {
    constexpr double tol = 1e-12;
    if (!(p >= -tol && p <= 1.0 + tol)) {
        throw SimulationError("shot probability outside [0, 1]: " + std::to_string(p));
    }
    return rng::uniform01(engine) < p ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Fringe scans
// ---------------------------------------------------------------------------

struct FringePoint {
    double phi_laser = 0.0;
    int n_shots = 0;
    double k_D = 0.0;  // integral unless the dataset is exact
    bool operator==(const FringePoint &) const = default;
};

struct FringeContext {
    int n_echo = 0;
    double tau = 0.0;  // per-wait duration actually used [s]
    double beta_nominal = 0.0;
    double beta_true = 0.0;  // nominal plus calibration error
    double dez_dz = 0.0;
    bool reference = false;
    bool operator==(const FringeContext &) const = default;
};

struct FringeDataset {
    std::vector<FringePoint> points;
    FringeContext context;
    /// Counts are n * p rather than sampled.
    bool exact = false;

    bool operator==(const FringeDataset &) const = default;

    void validate() const {
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto &pt = points[i];
            if (pt.n_shots < 1) throw SimulationError("fringe point needs at least one shot");
            if (!(pt.k_D >= 0.0 && pt.k_D <= pt.n_shots)) throw SimulationError("k_D outside [0, n_shots]");
            if (!exact && pt.k_D != std::floor(pt.k_D)) throw SimulationError("sampled k_D must be integral");
            if (!(pt.phi_laser >= 0.0 && pt.phi_laser < 2.0 * constants::pi)) {
                throw SimulationError("phi_laser outside [0, 2pi)");
            }
            if (i > 0 && !(pt.phi_laser > points[i - 1].phi_laser)) {
                throw SimulationError("phi_laser grid must be strictly increasing");
            }
        }
    }
};

/// n equally spaced laser phases over [0, 2pi).
inline std::vector<double> default_phi_grid(int n = 12) {
    if (n < 1) throw ConfigError("phi grid needs at least one point");
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) grid[i] = 2.0 * constants::pi * i / n;
    return grid;
}

struct ScanOptions {
    DetectionModel detection;
    /// Emit k_D = n * p with p evaluated on the noise-free trajectory.
    bool exact = false;
    SimulationOptions simulation;
    /// Constant phase added to the fringe (systematic offset injection) [rad].
    double phase_offset = 0.0;
};

/// Same sequence with every wait set to zero, as used for the reference fringe.
inline PulseSequence zero_waits(PulseSequence seq) {
    for (auto &e : seq.elements) {
        if (auto *w = std::get_if<Wait>(&e)) w->tau = Parameter::literal(0.0);
    }
    seq.metadata.tau = Parameter::literal(0.0);
    return seq;
}

namespace detail {

inline void check_scan_inputs(const std::vector<double> &grid, int shots) {
    if (grid.empty()) throw SimulationError("phi grid must be non-empty");
    if (shots < 1) throw SimulationError("shots_per_point must be >= 1");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] < 2.0 * constants::pi)) throw SimulationError("phi_laser outside [0, 2pi)");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw SimulationError("phi grid must be strictly increasing");
    }
}

// Shot (cell, kind, point, shot) draws from its own substream.
inline FringeDataset scan(const PulseSequence &templ, const IonModel &model, const NoiseModel &noise,
                          const std::vector<double> &grid, int shots, std::uint64_t seed, std::uint64_t cell,
                          std::uint64_t kind, const ScanOptions &options) {
    check_scan_inputs(grid, shots);
    options.detection.validate();
    noise.validate();
    model.validate();
    for (const auto &v : templ.variables()) {
        if (v != "phi_laser") throw SimulationError("unbound scan variable $" + v);
    }
    FringeDataset out;
    out.exact = options.exact;
    out.points.reserve(grid.size());
    const bool noiseless = options.exact || noise.kind == NoiseKind::none;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double phi = grid[i];
        const CompiledSequence compiled(bind(templ, {{"phi_laser", phi - options.phase_offset}}), model,
                                        options.simulation);
        FringePoint pt{phi, shots, 0.0};
        double p_fixed = 0.0;
        if (noiseless) {
            p_fixed = measure_population_D(compiled.run(FieldTrajectory::zero()), options.detection);
        }
        if (options.exact) {
            pt.k_D = shots * p_fixed;
        } else {
            int k = 0;
            for (int s = 0; s < shots; ++s) {
                std::mt19937_64 engine(rng::derive_seed(seed, {cell, kind, i, static_cast<std::uint64_t>(s)}));
                double p = p_fixed;
                if (!noiseless) {
                    const FieldTrajectory traj = sample_noise_trajectory(noise, compiled.duration(), engine);
                    p = measure_population_D(compiled.run(traj), options.detection);
                }
                k += sample_shot(p, engine);
            }
            pt.k_D = k;
        }
        out.points.push_back(pt);
    }
    return out;
}

}  // namespace detail

/// Fringe of a sequence template whose analysis pulse carries $phi_laser.
inline FringeDataset run_fringe_scan(const PulseSequence &templ, const IonModel &model, const NoiseModel &noise,
                                     const std::vector<double> &phi_grid, int shots_per_point, std::uint64_t rng_seed,
                                     const ScanOptions &options = {}) {
    FringeDataset out =
        detail::scan(templ, model, noise, phi_grid, shots_per_point, rng_seed, 0, rng::kSignalFringe, options);
    out.context.n_echo = templ.metadata.n_echo;
    out.context.tau = templ.metadata.tau.symbolic() ? 0.0 : templ.metadata.tau.value;
    out.context.beta_nominal = out.context.beta_true = model.field.beta;
    out.context.dez_dz = model.trap.dez_dz;
    return out;
}

inline FringeDataset run_fringe_scan(int n_echo, double tau, const IonModel &model, const NoiseModel &noise,
                                     const std::vector<double> &phi_grid, int shots_per_point, std::uint64_t rng_seed,
                                     const ScanOptions &options = {}) {
    const PulseSequence templ =
        build_quadrupole_dd_sequence(n_echo, Parameter::literal(tau), Parameter::named("phi_laser"));
    return run_fringe_scan(templ, model, noise, phi_grid, shots_per_point, rng_seed, options);
}

// ---------------------------------------------------------------------------
// Campaigns
// ---------------------------------------------------------------------------

struct CampaignPlan {
    std::vector<double> betas;
    std::vector<double> gradients;   // dEz/dz [V/m^2]
    std::vector<double> tau_totals;  // 2 n tau [s]
    int n_echo = 8;
    int shots = 300;
    std::uint64_t seed = 1;
    std::vector<double> phi_grid = default_phi_grid();
    /// Optional per-angle constant phase injected into the signal fringes.
    std::vector<double> angle_phase_offsets;

    bool operator==(const CampaignPlan &) const = default;

    void validate() const {
        if (betas.empty() || gradients.empty() || tau_totals.empty()) {
            throw ConfigError("campaign grids must be non-empty");
        }
        if (n_echo < 2 || n_echo % 2 != 0) throw ConfigError("n_echo must be even and >= 2");
        if (shots < 1) throw ConfigError("shots must be >= 1");
        for (double t : tau_totals) {
            if (!(t >= 0.0)) throw ConfigError("tau_total must be non-negative");
        }
        if (!angle_phase_offsets.empty() && angle_phase_offsets.size() != betas.size()) {
            throw ConfigError("angle_phase_offsets must have one entry per beta");
        }
        detail::check_scan_inputs(phi_grid, shots);
    }
};

struct CampaignCell {
    double beta_nominal = 0.0;
    double dez_dz = 0.0;
    double tau_total = 0.0;
    FringeDataset fringe;
    FringeDataset reference_fringe;  // same cell with all waits at zero
    bool operator==(const CampaignCell &) const = default;
};

struct CampaignDataset {
    std::vector<CampaignCell> cells;
    int n_echo = 0;
    bool exact = false;
    bool operator==(const CampaignDataset &) const = default;
};

struct CampaignOptions {
    ScanOptions scan;
    /// Worker threads; results do not depend on this.
    int threads = 1;
    /// Custom program with $phi_laser and $tau left open; the echo builder is
    /// used when absent.
    std::optional<PulseSequence> sequence;
};

/// Cells are ordered beta-major, then gradient, then tau_total.
inline CampaignDataset run_campaign(const CampaignPlan &plan, const IonModel &model, const NoiseModel &noise,
                                    const CampaignOptions &options = {}) {
    plan.validate();
    model.validate();
    noise.validate();
    options.scan.detection.validate();
    if (options.threads < 1) throw ConfigError("threads must be >= 1");

    PulseSequence templ = build_quadrupole_dd_sequence(plan.n_echo, Parameter::named("tau"),
                                                       Parameter::named("phi_laser"));
    if (options.sequence) {
        templ = *options.sequence;
        for (const auto &v : templ.variables()) {
            if (v != "tau" && v != "phi_laser") throw ConfigError("sequence file has unsupported variable $" + v);
        }
        if (!templ.variables().contains("phi_laser") || !templ.variables().contains("tau")) {
            throw ConfigError("campaign sequences must leave $tau and $phi_laser open");
        }
        if (templ.metadata.n_echo != plan.n_echo) {
            throw ConfigError("sequence file has " + std::to_string(templ.metadata.n_echo) +
                              " RF pulses but plan.n_echo is " + std::to_string(plan.n_echo));
        }
    }

    // Per-angle calibration error on beta.
    std::vector<double> beta_true(plan.betas.size());
    for (std::size_t k = 0; k < plan.betas.size(); ++k) {
        double err = 0.0;
        if (model.field.beta_calibration_sigma > 0.0) {
            std::mt19937_64 engine(rng::derive_seed(plan.seed, {rng::kBetaCalibration, k}));
            err = std::normal_distribution<double>(0.0, model.field.beta_calibration_sigma)(engine);
        }
        beta_true[k] = plan.betas[k] + err;
    }

    struct Job {
        std::size_t beta_index;
        double gradient;
        double tau_total;
    };
    std::vector<Job> jobs;
    for (std::size_t k = 0; k < plan.betas.size(); ++k) {
        for (double g : plan.gradients) {
            for (double t : plan.tau_totals) jobs.push_back({k, g, t});
        }
    }

    CampaignDataset out;
    out.n_echo = plan.n_echo;
    out.exact = options.scan.exact;
    out.cells.resize(jobs.size());

    auto run_cell = [&](std::size_t c) {
        const Job &job = jobs[c];
        IonModel m = model;
        m.field.beta = beta_true[job.beta_index];
        m.trap.dez_dz = job.gradient;
        const double tau = job.tau_total / (2.0 * plan.n_echo);
        const PulseSequence signal = bind(templ, {{"tau", tau}});
        const PulseSequence reference = zero_waits(bind(templ, {{"tau", 0.0}}));

        ScanOptions sig_opts = options.scan;
        if (!plan.angle_phase_offsets.empty()) sig_opts.phase_offset += plan.angle_phase_offsets[job.beta_index];

        CampaignCell cell;
        cell.beta_nominal = plan.betas[job.beta_index];
        cell.dez_dz = job.gradient;
        cell.tau_total = job.tau_total;
        cell.fringe = detail::scan(signal, m, noise, plan.phi_grid, plan.shots, plan.seed, c, rng::kSignalFringe,
                                   sig_opts);
        cell.reference_fringe = detail::scan(reference, m, noise, plan.phi_grid, plan.shots, plan.seed, c,
                                             rng::kReferenceFringe, options.scan);
        FringeContext ctx{plan.n_echo, tau, cell.beta_nominal, m.field.beta, job.gradient, false};
        cell.fringe.context = ctx;
        ctx.tau = 0.0;
        ctx.reference = true;
        cell.reference_fringe.context = ctx;
        out.cells[c] = std::move(cell);
    };

    const std::size_t n_workers = std::min<std::size_t>(options.threads, jobs.size());
    if (n_workers <= 1) {
        for (std::size_t c = 0; c < jobs.size(); ++c) run_cell(c);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            for (std::size_t c = next++; c < jobs.size(); c = next++) {
                try {
                    run_cell(c);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto &t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace ddq
