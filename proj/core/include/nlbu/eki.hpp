#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nlbu/nonlinear_update.hpp"

namespace nlbu {

/// Inverse problem argmin_u ||m - G(u)||^2_gamma attacked by iterating
/// Bayesian updates on the augmented state (u, G(u)) with the same
/// measurement m.
struct EkiProblem {
  std::function<Vector(const Vector&)> forward;  // u (d1) -> G(u) (d2)
  Vector m;      // d2
  Matrix gamma;  // d2 x d2 SPD
  int max_iters = 30;
  double rel_tol = 1e-6;      // relative change of the mean u
  bool collapse_guard = true; // stop once the u-spread trace drops below 1e-14
};

struct EkiIteration {
  Vector u_mean;
  double misfit = 0.0;       // ||m - G(u_mean)||_gamma
  double param_error = 0.0;  // ||u_mean - truth||_2, NaN when truth unknown
  bool fallback = false;
};

/// Entry 0 is the initial ensemble before any update.
struct EkiTrace {
  std::vector<EkiIteration> iterations;
  bool converged = false;
};

struct EkiUpdateRule {
  enum class Kind { Linear, Nonlinear };
  Kind kind = Kind::Linear;
  double inflation = 1.0;  // linear rule
  NlbuConfig nlbu;         // nonlinear rule

  static EkiUpdateRule linear(double inflation = 1.0);
  static EkiUpdateRule nonlinear(NlbuConfig cfg);
};

/// Member k of the result is (u_k, G(u_k)) with the G-block marked observed.
/// Forward evaluations run in parallel; a forward failure is reported with
/// the lowest offending member index.
Ensemble augment(const MemberMatrix& ens_u, const std::function<Vector(const Vector&)>& forward,
                 int d2);

/// Iterates augment -> Bayesian update -> extract u until max_iters, the
/// relative-change tolerance, or ensemble collapse.
EkiTrace run_eki(const EkiProblem& problem, const MemberMatrix& init, const EkiUpdateRule& rule,
                 std::uint64_t seed, const Vector* truth = nullptr);

}  // namespace nlbu
