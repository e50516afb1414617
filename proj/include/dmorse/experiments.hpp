#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmorse/point_process.hpp"
#include "dmorse/theory.hpp"

namespace dmorse {

inline constexpr const char* kVersion = "0.1.0";

enum class Mode {
    mean_scaling,
    variance_scaling,
    poisson_limit,
    clt,
    global_vs_local,
    euler_phase,
    gamma_curve,
    morse_euler_audit,
};

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

/// Parsed experiment configuration. The JSON schema is documented in README.md.
struct ExperimentConfig {
    Mode mode = Mode::mean_scaling;
    nlohmann::json density_spec = {{"id", "uniform_box"}, {"d", 2}};
    DensityPtr density;
    RegimeSpec regime;
    ProcessKind process = ProcessKind::iid;
    std::vector<int> k;
    std::vector<std::size_t> n;
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    unsigned threads = 0;  // 0: hardware concurrency

    /// Monte Carlo samples per theory constant.
    std::uint64_t theory_samples = 200'000;

    // global_vs_local
    std::optional<double> d_star;
    std::vector<double> d_star_candidates = {1, 2, 4, 8};
    std::size_t calibration_trials = 20;
    double calibration_gap = 0.05;
    bool annulus_counterexample = false;

    // euler_phase: trials with index % audit_every == 0 and n <= audit_max_n
    // are also checked against the full Cech complex.
    std::size_t audit_every = 10;
    std::size_t audit_max_n = 400;

    // gamma_curve
    std::vector<double> lambdas = {1, 4, 16, 64, 256};

    // morse_euler_audit
    std::size_t audit_clouds = 100;
    std::size_t audit_radii = 10;
    std::size_t audit_n_max = 50;
    std::vector<int> audit_dims = {2, 3};

    int dim() const { return density->dim(); }

    /// Validates and fills defaults. Errors name the offending field path.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Counts from one trial: by_index[k] = N_k, k = 0..d.
struct TrialRecord {
    std::size_t n_index = 0;
    std::size_t n = 0;
    std::size_t trial = 0;
    std::vector<std::uint64_t> local;
    /// Counts over all critical points; filled in global_vs_local only.
    std::vector<std::uint64_t> global;
};

struct ExperimentResult {
    std::vector<TrialRecord> records;
    /// Mode-specific aggregate; always carries "mode", "version", "seed" and "config".
    nlohmann::json aggregate;
    /// Extra plot-ready CSV tables, by file name.
    std::vector<std::pair<std::string, std::string>> tables;
};

/// Runs the configured experiment. Deterministic given the config: trial t of
/// schedule entry s draws from Rng(seed).substream(s).substream(t).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Theory targets for the configured mode, computed with Rng(seed).substream(1 << 20).
nlohmann::json theory_targets(const ExperimentConfig& cfg);

/// Recomputes the aggregate from raw records and precomputed theory targets.
/// run_experiment() uses this too, so offline recomputation matches exactly.
nlohmann::json aggregate_records(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records,
                                 const nlohmann::json& targets, const nlohmann::json& extra);

/// Raw CSV "n,trial,k,count", rows sorted by (n index, trial, k).
void write_raw_csv(std::ostream& os, const std::vector<TrialRecord>& records, bool global = false);
/// Inverse of write_raw_csv; merges global counts into `records` when `global`.
void read_raw_csv(std::istream& is, std::vector<TrialRecord>& records, const std::vector<std::size_t>& n_schedule,
                  bool global = false);

/// Writes raw.csv (and raw_global.csv), aggregate.json and the extra tables.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// Smallest candidate D* whose mean global-local gap at the largest scheduled n
/// is below cfg.calibration_gap. For the annulus counterexample only indices
/// below d enter the gap. Returns the last candidate when none qualifies.
struct Calibration {
    double d_star = 1.0;
    std::vector<std::pair<double, double>> gaps;  // (candidate, gap)
    bool satisfied = false;
};
Calibration calibrate_d_star(const ExperimentConfig& cfg);

}  // namespace dmorse
