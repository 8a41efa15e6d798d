#include "nlbu/eki.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nlbu/locality.hpp"
#include "nlbu/rng.hpp"

namespace nlbu {

EkiUpdateRule EkiUpdateRule::linear(double inflation) {
  EkiUpdateRule rule;
  rule.kind = Kind::Linear;
  rule.inflation = inflation;
  return rule;
}

EkiUpdateRule EkiUpdateRule::nonlinear(NlbuConfig cfg) {
  EkiUpdateRule rule;
  rule.kind = Kind::Nonlinear;
  rule.nlbu = std::move(cfg);
  return rule;
}

Ensemble augment(const MemberMatrix& ens_u, const std::function<Vector(const Vector&)>& forward,
                 int d2) {
  const int K = static_cast<int>(ens_u.rows());
  const int d1 = static_cast<int>(ens_u.cols());
  if (K < 1) throw std::invalid_argument("augment: empty ensemble");
  if (d2 < 1) throw std::invalid_argument("augment: observation dimension must be positive");

  MemberMatrix members(K, d1 + d2);
  std::vector<std::string> errors(K);

#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k) {
    try {
      const Vector g = forward(ens_u.row(k).transpose());
      if (g.size() != d2) {
        errors[k] = "forward map returned wrong dimension";
        continue;
      }
      members.row(k).head(d1) = ens_u.row(k);
      members.row(k).tail(d2) = g.transpose();
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }

  for (int k = 0; k < K; ++k)
    if (!errors[k].empty())
      throw std::runtime_error("augment: forward model failed for member " + std::to_string(k) +
                               ": " + errors[k]);

  std::vector<int> observed(d2);
  std::iota(observed.begin(), observed.end(), d1);
  return Ensemble{std::move(members), StatePartition::from_observed(d1 + d2, std::move(observed))};
}

EkiTrace run_eki(const EkiProblem& problem, const MemberMatrix& init, const EkiUpdateRule& rule,
                 std::uint64_t seed, const Vector* truth) {
  const int d2 = static_cast<int>(problem.m.size());
  const int K = static_cast<int>(init.rows());
  if (K < 2) throw std::invalid_argument("run_eki: need at least two members");
  if (problem.max_iters < 0) throw std::invalid_argument("run_eki: max_iters must be nonnegative");
  if (!(problem.rel_tol > 0.0)) throw std::invalid_argument("run_eki: rel_tol must be positive");

  MemberMatrix u = init;
  EkiTrace trace;

  const auto record = [&](bool fallback) {
    EkiIteration it;
    it.u_mean = u.colwise().mean().transpose();
    it.misfit = mahalanobis_distance(problem.m, problem.forward(it.u_mean), problem.gamma);
    it.param_error =
        truth ? (it.u_mean - *truth).norm() : std::numeric_limits<double>::quiet_NaN();
    it.fallback = fallback;
    trace.iterations.push_back(std::move(it));
  };

  record(false);  // iteration 0: the initial ensemble

  for (int iter = 1; iter <= problem.max_iters; ++iter) {
    const Ensemble augmented = augment(u, problem.forward, d2);
    const MeasurementModel meas{augmented.partition, problem.gamma, problem.m};

    bool fallback = false;
    Ensemble posterior;
    if (rule.kind == EkiUpdateRule::Kind::Linear) {
      posterior = eakf_update(augmented, meas, rule.inflation);
    } else {
      UpdateOutcome outcome = nlbu_update(augmented, meas, rule.nlbu, derive_seed(seed, iter));
      posterior = std::move(outcome.posterior);
      fallback = outcome.used_fallback;
    }

    const Vector mean_before = u.colwise().mean().transpose();
    u = split_uv(posterior).first;
    record(fallback);

    const Vector mean_after = u.colwise().mean().transpose();
    const double rel_change =
        (mean_after - mean_before).norm() / std::max(mean_before.norm(), 1e-300);
    if (rel_change < problem.rel_tol) {
      trace.converged = true;
      break;
    }
    if (problem.collapse_guard) {
      const Matrix centered = u.rowwise() - mean_after.transpose();
      const double spread = centered.squaredNorm() / static_cast<double>(K - 1);
      if (spread < 1e-14) {
        trace.converged = true;
        break;
      }
    }
  }
  return trace;
}

}  // namespace nlbu
