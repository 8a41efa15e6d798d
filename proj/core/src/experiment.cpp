#include "nlbu/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nlbu/darcy.hpp"
#include "nlbu/dynamics.hpp"
#include "nlbu/rng.hpp"

namespace nlbu {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> parse_observed_spec(const std::string& spec, int d) {
  std::vector<int> indices;
  if (spec == "even") {
    // the second, fourth, ... components (x2, x4, ... in 1-based notation)
    for (int i = 1; i < d; i += 2) indices.push_back(i);
  } else if (spec == "odd") {
    for (int i = 0; i < d; i += 2) indices.push_back(i);
  } else if (spec == "all") {
    for (int i = 0; i < d; ++i) indices.push_back(i);
  } else {
    std::istringstream in(spec);
    std::string token;
    while (std::getline(in, token, ',')) {
      if (token.empty()) continue;
      indices.push_back(std::stoi(token));
    }
  }
  if (indices.empty()) throw std::runtime_error("observed index spec is empty: " + spec);
  return indices;
}

OdeModel build_model(const ExperimentConfig& cfg) {
  if (cfg.experiment == "l63") return lorenz63_model(cfg.sigma, cfg.rho, cfg.beta);
  if (cfg.experiment == "l96") return lorenz96_model(cfg.forcing, cfg.l96_dim);
  throw std::runtime_error("run_twin_experiment: unknown experiment: " + cfg.experiment);
}

int resolve_m_min(const ExperimentConfig& cfg, int d) {
  if (cfg.m_min > 0) return cfg.m_min;
  return cfg.experiment == "l96" ? 40 : 2 * d;
}

NlbuConfig build_nlbu_config(const ExperimentConfig& cfg, int d,
                             const std::optional<Localization>& loc) {
  NlbuConfig ncfg;
  ncfg.radius = cfg.radius;
  ncfg.m_min = resolve_m_min(cfg, d);
  ncfg.clustering_enabled = cfg.clustering;
  ncfg.subsampling_enabled = cfg.subsampling;
  ncfg.oversample_factor = cfg.oversample;
  ncfg.inflation = cfg.inflation;
  ncfg.fallback_inflation = cfg.fallback_inflation > 0.0 ? cfg.fallback_inflation : cfg.inflation;
  ncfg.localization = loc;
  return ncfg;
}

std::optional<Localization> build_localization(const ExperimentConfig& cfg, int d) {
  if (!(cfg.loc_half_width > 0.0)) return std::nullopt;
  return Localization{cfg.loc_half_width, cfg.experiment == "l96", d};
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const ConfigMap& map) {
  ExperimentConfig cfg;
  cfg.name = map.get_string("name", "");
  cfg.experiment = map.get_string("experiment", cfg.experiment);

  cfg.sigma = map.get_double("sigma", cfg.sigma);
  cfg.rho = map.get_double("rho", cfg.rho);
  cfg.beta = map.get_double("beta", cfg.beta);
  cfg.forcing = map.get_double("forcing", cfg.forcing);
  cfg.l96_dim = map.get_int("l96_dim", cfg.l96_dim);
  cfg.grid_n = map.get_int("grid_n", cfg.grid_n);
  cfg.truth_u1 = map.get_double("truth_u1", cfg.truth_u1);
  cfg.truth_u2 = map.get_double("truth_u2", cfg.truth_u2);
  cfg.literal_source = map.get_bool("literal_source", cfg.literal_source);

  cfg.dt = map.get_double("dt", cfg.dt);
  cfg.assim_dt = map.get_double("assim_dt", cfg.assim_dt);
  cfg.n_cycles = map.get_int("n_cycles", cfg.n_cycles);
  cfg.ensemble_size = map.get_int("ensemble_size", cfg.ensemble_size);
  cfg.init_value = map.get_double("init_value", cfg.init_value);
  cfg.init_variance = map.get_double("init_variance", cfg.init_variance);
  cfg.obs_variance = map.get_double("obs_variance", cfg.obs_variance);
  cfg.observed = map.get_string("observed", cfg.observed);
  cfg.truth_spinup_steps = map.get_int("truth_spinup_steps", cfg.truth_spinup_steps);

  cfg.method = map.get_string("method", cfg.method);
  cfg.subsampling = map.get_bool("ss", cfg.subsampling);
  cfg.clustering = map.get_bool("cl", cfg.clustering);
  cfg.radius = map.get_double("radius", cfg.radius);
  cfg.m_min = map.get_int("m_min", cfg.m_min);
  cfg.oversample = map.get_int("oversample", cfg.oversample);
  cfg.inflation = map.get_double("inflation", cfg.inflation);
  cfg.fallback_inflation = map.get_double("fallback_inflation", cfg.fallback_inflation);
  cfg.loc_half_width = map.get_double("loc_half_width", cfg.loc_half_width);

  cfg.max_iters = map.get_int("max_iters", cfg.max_iters);
  cfg.rel_tol = map.get_double("rel_tol", cfg.rel_tol);
  cfg.eki_init_mean = map.get_double("eki_init_mean", cfg.eki_init_mean);
  cfg.eki_init_variance = map.get_double("eki_init_variance", cfg.eki_init_variance);

  cfg.seed = map.get_uint64("seed", cfg.seed);
  cfg.output_dir = map.get_string("output_dir", cfg.output_dir);
  return cfg;
}

std::string ExperimentConfig::method_label() const {
  if (method == "eakf" || method == "linear") return "EAKF";
  std::string label = "NlBU";
  if (subsampling || clustering) {
    label += " w/";
    if (subsampling) label += " SS";
    if (clustering) label += " Cl";
  }
  return label;
}

std::string ExperimentConfig::default_name() const {
  std::string stem = experiment + "_" + (method == "linear" ? "eakf" : method);
  if (method == "nlbu") {
    if (subsampling) stem += "_ss";
    if (clustering) stem += "_cl";
  }
  return stem;
}

std::string ExperimentConfig::resolved_output_dir() const {
  if (!output_dir.empty()) return output_dir;
  if (const char* env = std::getenv("NLBU_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

double error_metric(const Vector& estimate_mean, const Vector& truth) {
  if (estimate_mean.size() != truth.size())
    throw std::invalid_argument("error_metric: dimension mismatch");
  if (estimate_mean.size() == 0) throw std::invalid_argument("error_metric: empty vectors");
  return (estimate_mean - truth).norm() / std::sqrt(static_cast<double>(truth.size()));
}

ExperimentRecord run_twin_experiment(const ExperimentConfig& cfg) {
  const OdeModel model = build_model(cfg);
  const int d = model.dim;
  const int K = cfg.ensemble_size;

  std::string observed_spec = cfg.observed;
  if (observed_spec.empty()) observed_spec = cfg.experiment == "l96" ? "even" : "1";
  const StatePartition partition =
      StatePartition::from_observed(d, parse_observed_spec(observed_spec, d));
  const int d2 = partition.d2;

  const double steps_real = cfg.assim_dt / cfg.dt;
  const int n_steps = static_cast<int>(std::lround(steps_real));
  if (n_steps < 1 || std::abs(steps_real - n_steps) > 1e-9)
    throw std::invalid_argument("run_twin_experiment: assim_dt must be an integer multiple of dt");

  const Matrix gamma = cfg.obs_variance * Matrix::Identity(d2, d2);
  const auto loc = build_localization(cfg, d);
  const NlbuConfig ncfg = build_nlbu_config(cfg, d, loc);
  const bool use_nlbu = cfg.method == "nlbu";
  if (!use_nlbu && cfg.method != "eakf" && cfg.method != "linear")
    throw std::runtime_error("run_twin_experiment: unknown method: " + cfg.method);

  ExperimentRecord record;
  record.method_label = cfg.method_label();

  // truth start: either a randomized state integrated onto the attractor,
  // or (spinup 0) a draw from the same initial distribution as the members
  const int spinup =
      cfg.truth_spinup_steps >= 0 ? cfg.truth_spinup_steps : (cfg.experiment == "l96" ? 0 : 1000);
  Rng truth_rng(derive_seed(cfg.seed, 0));
  Vector x_truth(d);
  if (spinup > 0) {
    for (int i = 0; i < d; ++i) x_truth[i] = truth_rng.gaussian();
    x_truth = integrate(model, x_truth, cfg.dt, spinup);
  } else {
    const double sd = std::sqrt(cfg.init_variance);
    for (int i = 0; i < d; ++i) x_truth[i] = cfg.init_value + sd * truth_rng.gaussian();
  }

  Ensemble ens = perturbed_constant_ensemble(Vector::Constant(d, cfg.init_value),
                                             cfg.init_variance, K, derive_seed(cfg.seed, 1),
                                             partition);
  Rng meas_rng(derive_seed(cfg.seed, 2));
  const double obs_sd = std::sqrt(cfg.obs_variance);

  for (int cycle = 0; cycle < cfg.n_cycles; ++cycle) {
    x_truth = integrate(model, x_truth, cfg.dt, n_steps);
    try {
      ens = propagate_ensemble(model, ens, cfg.dt, n_steps);
    } catch (const DivergenceError&) {
      record.diverged = true;
      record.divergence_cycle = cycle;
      break;
    }

    const Vector prior_mean = ens.members.colwise().mean().transpose();
    const double prior_error = error_metric(prior_mean, x_truth);

    Vector m(d2);
    for (int j = 0; j < d2; ++j)
      m[j] = x_truth[partition.observed_indices[j]] + obs_sd * meas_rng.gaussian();
    const MeasurementModel meas{partition, gamma, m};

    Vector post_mean;
    bool fallback = false;
    if (use_nlbu) {
      UpdateOutcome out = nlbu_update(ens, meas, ncfg, derive_seed(cfg.seed, 1000 + cycle));
      ens = std::move(out.posterior);
      post_mean = std::move(out.posterior_mean);
      fallback = out.used_fallback;
    } else {
      ens = eakf_update(ens, meas, cfg.inflation, loc);
      post_mean = ens.members.colwise().mean().transpose();
    }

    if (!post_mean.allFinite() || !ens.members.allFinite()) {
      record.diverged = true;
      record.divergence_cycle = cycle;
      break;
    }
    record.cycles.push_back({cycle, prior_error, error_metric(post_mean, x_truth), fallback});
  }

  if (record.diverged) {
    record.prior_avg = kInf;
    record.post_avg = kInf;
    record.fallback_fraction = 0.0;
    return record;
  }

  // summary over the last ceil(n/2) cycles
  const int n = static_cast<int>(record.cycles.size());
  const int window = (n + 1) / 2;
  double prior_sum = 0.0, post_sum = 0.0;
  for (int i = n - window; i < n; ++i) {
    prior_sum += record.cycles[i].prior_error;
    post_sum += record.cycles[i].post_error;
  }
  record.prior_avg = prior_sum / window;
  record.post_avg = post_sum / window;

  int fallback_count = 0;
  for (const auto& c : record.cycles) fallback_count += c.fallback ? 1 : 0;
  record.fallback_fraction = n > 0 ? static_cast<double>(fallback_count) / n : 0.0;
  return record;
}

std::vector<SweepRow> sweep_inflation(const ExperimentConfig& cfg,
                                      const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sweep_inflation: empty value list");
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (const double v : values) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.inflation = v;
    const ExperimentRecord record = run_twin_experiment(run_cfg);
    rows.push_back({v, record.prior_avg, record.post_avg, record.diverged, false});
  }
  int best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].post_avg < rows[best].post_avg) best = static_cast<int>(i);
  rows[best].best = true;
  return rows;
}

EkiExperimentResult run_eki_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment != "darcy")
    throw std::runtime_error("run_eki_experiment: only the darcy experiment is supported");

  DarcyOptions opts;
  opts.literal_source = cfg.literal_source;
  const int n = cfg.grid_n;

  EkiExperimentResult result;
  result.truth = Eigen::Vector2d(cfg.truth_u1, cfg.truth_u2);
  result.method_label = cfg.method_label();

  const Vector clean = darcy_forward(Eigen::Vector2d(cfg.truth_u1, cfg.truth_u2), n, opts);
  const int d2 = static_cast<int>(clean.size());

  Rng meas_rng(derive_seed(cfg.seed, 2));
  const double obs_sd = std::sqrt(cfg.obs_variance);
  Vector m = clean;
  for (int j = 0; j < d2; ++j) m[j] += obs_sd * meas_rng.gaussian();

  EkiProblem problem;
  problem.forward = [n, opts](const Vector& u) {
    return darcy_forward(Eigen::Vector2d(u[0], u[1]), n, opts);
  };
  problem.m = std::move(m);
  problem.gamma = cfg.obs_variance * Matrix::Identity(d2, d2);
  problem.max_iters = cfg.max_iters;
  problem.rel_tol = cfg.rel_tol;

  Rng init_rng(derive_seed(cfg.seed, 1));
  const double init_sd = std::sqrt(cfg.eki_init_variance);
  MemberMatrix init(cfg.ensemble_size, 2);
  for (int k = 0; k < cfg.ensemble_size; ++k)
    for (int j = 0; j < 2; ++j) init(k, j) = cfg.eki_init_mean + init_sd * init_rng.gaussian();

  EkiUpdateRule rule;
  if (cfg.method == "eakf" || cfg.method == "linear") {
    rule = EkiUpdateRule::linear(cfg.inflation);
  } else if (cfg.method == "nlbu") {
    rule = EkiUpdateRule::nonlinear(build_nlbu_config(cfg, 2 + d2, std::nullopt));
  } else {
    throw std::runtime_error("run_eki_experiment: unknown method: " + cfg.method);
  }

  result.trace = run_eki(problem, init, rule, derive_seed(cfg.seed, 3), &result.truth);
  return result;
}

std::string format_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_csv(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

}  // namespace

void write_cycles_csv(const std::string& path, const ExperimentRecord& record) {
  auto out = open_csv(path);
  out << "cycle,prior_error,post_error,fallback\n";
  for (const auto& c : record.cycles)
    out << c.cycle << ',' << format_float(c.prior_error) << ',' << format_float(c.post_error)
        << ',' << (c.fallback ? 1 : 0) << '\n';
}

void write_summary_csv(const std::string& path, const ExperimentRecord& record) {
  auto out = open_csv(path);
  out << "method,prior,post\n";
  out << record.method_label << ',' << format_float(record.prior_avg) << ','
      << format_float(record.post_avg) << '\n';
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto out = open_csv(path);
  out << "inflation,prior_error,post_error,diverged,best\n";
  for (const auto& r : rows)
    out << format_float(r.inflation) << ',' << format_float(r.prior_avg) << ','
        << format_float(r.post_avg) << ',' << (r.diverged ? 1 : 0) << ',' << (r.best ? 1 : 0)
        << '\n';
}

void write_eki_csv(const std::string& path, const EkiExperimentResult& result) {
  auto out = open_csv(path);
  const int d1 = result.trace.iterations.empty()
                     ? 0
                     : static_cast<int>(result.trace.iterations.front().u_mean.size());
  out << "iter,param_error,misfit,fallback";
  for (int j = 0; j < d1; ++j) out << ",u" << j;
  out << '\n';
  for (std::size_t i = 0; i < result.trace.iterations.size(); ++i) {
    const auto& it = result.trace.iterations[i];
    out << i << ',' << format_float(it.param_error) << ',' << format_float(it.misfit) << ','
        << (it.fallback ? 1 : 0);
    for (int j = 0; j < d1; ++j) out << ',' << format_float(it.u_mean[j]);
    out << '\n';
  }
}

std::string render_summary_table(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 12 && name.substr(name.size() - 12) == "_summary.csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  struct Row {
    std::string method, prior, post;
  };
  std::vector<Row> rows;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string header, line;
    if (!std::getline(in, header) || !std::getline(in, line)) continue;
    std::istringstream ls(line);
    Row row;
    std::string prior_s, post_s;
    if (!std::getline(ls, row.method, ',') || !std::getline(ls, prior_s, ',') ||
        !std::getline(ls, post_s, ','))
      continue;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", std::stod(prior_s));
    row.prior = buf;
    std::snprintf(buf, sizeof(buf), "%.3e", std::stod(post_s));
    row.post = buf;
    rows.push_back(std::move(row));
  }

  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  std::ostringstream out;
  auto pad = [&](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 1, ' ');
  };
  out << pad("method", width + 2) << pad("prior", 12) << "post\n";
  for (const auto& r : rows) out << pad(r.method, width + 2) << pad(r.prior, 12) << r.post << '\n';
  return out.str();
}

}  // namespace nlbu
