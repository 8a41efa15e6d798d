#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nlbu/config.hpp"
#include "nlbu/eki.hpp"

namespace nlbu {

/// Full description of one twin experiment or EKI run. Fields map 1:1 onto
/// config-file keys (see README for the schema); CLI flags override file
/// values.
struct ExperimentConfig {
  std::string name;              // output file stem; derived when empty
  std::string experiment = "l63";  // l63 | l96 | darcy

  // model parameters
  double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;  // l63
  double forcing = 8.0;                               // l96
  int l96_dim = 40;
  int grid_n = 64;                                    // darcy
  double truth_u1 = 1.5, truth_u2 = 0.5;
  bool literal_source = false;

  // assimilation protocol
  double dt = 1e-2;
  double assim_dt = 0.4;
  int n_cycles = 500;
  int ensemble_size = 500;
  double init_value = 0.0;
  double init_variance = 0.1;
  double obs_variance = 1e-2;  // sigma_o^2
  std::string observed = "";   // "even" | "odd" | "all" | comma list; default per experiment
  // truth start: -1 = auto (1000 attractor spin-up steps for l63, none for
  // l96, whose analysis shock at dt = 0.1 is not integrable from a cold
  // ensemble against a spun-up truth). With 0 steps the truth starts as an
  // init_value + N(0, init_variance) draw, like the members.
  int truth_spinup_steps = -1;

  // update rule
  std::string method = "eakf";  // eakf | nlbu (eki accepts linear as alias of eakf)
  bool subsampling = true;
  bool clustering = false;
  double radius = 1.0;
  int m_min = 0;  // 0 = auto: 40 for l96, otherwise 2 * state dimension
  int oversample = 10;
  double inflation = 1.0;
  double fallback_inflation = 0.0;  // 0 = same as inflation
  double loc_half_width = 0.0;      // 0 = localization off

  // eki protocol
  int max_iters = 30;
  double rel_tol = 1e-6;
  double eki_init_mean = 0.5;
  double eki_init_variance = 5.0;

  std::uint64_t seed = 1;
  std::string output_dir;  // empty: $NLBU_OUTPUT_DIR, else "."

  static ExperimentConfig from_config(const ConfigMap& map);

  std::string method_label() const;   // e.g. "NlBU w/ SS Cl"
  std::string default_name() const;   // e.g. "l63_nlbu_ss_cl"
  std::string resolved_output_dir() const;
};

struct CycleRecord {
  int cycle = 0;
  double prior_error = 0.0;
  double post_error = 0.0;
  bool fallback = false;
};

struct ExperimentRecord {
  std::vector<CycleRecord> cycles;
  double prior_avg = 0.0;  // time average over the last ceil(n/2) cycles
  double post_avg = 0.0;
  double fallback_fraction = 0.0;
  bool diverged = false;
  int divergence_cycle = -1;
  std::string method_label;
};

/// Root-mean-square error ||estimate - truth||_2 / sqrt(d).
double error_metric(const Vector& estimate_mean, const Vector& truth);

/// Synthetic-truth assimilation run: spin up a truth trajectory, synthesize
/// noisy measurements each cycle, alternate forecast and update, and record
/// per-cycle errors. Deterministic per seed.
ExperimentRecord run_twin_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double inflation = 0.0;
  double prior_avg = 0.0;
  double post_avg = 0.0;
  bool diverged = false;
  bool best = false;
};

/// Runs the experiment once per inflation value with an identical seed and
/// marks the row with the smallest posterior error (diverged runs rank last).
std::vector<SweepRow> sweep_inflation(const ExperimentConfig& cfg,
                                      const std::vector<double>& values);

struct EkiExperimentResult {
  EkiTrace trace;
  Vector truth;
  std::string method_label;
};

/// Darcy-flow inversion: builds the truth measurement, runs the EKI loop
/// with the configured update rule, and reports the per-iteration trace.
EkiExperimentResult run_eki_experiment(const ExperimentConfig& cfg);

// ---- CSV output (UTF-8, header row, %.17g floats, byte-stable) ----

std::string format_float(double v);

void write_cycles_csv(const std::string& path, const ExperimentRecord& record);
void write_summary_csv(const std::string& path, const ExperimentRecord& record);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);
void write_eki_csv(const std::string& path, const EkiExperimentResult& result);

/// Aggregates *_summary.csv files under dir into an aligned text table.
std::string render_summary_table(const std::string& dir);

}  // namespace nlbu
