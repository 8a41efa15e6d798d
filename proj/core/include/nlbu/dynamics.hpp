#pragma once

#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>

#include "nlbu/ensemble.hpp"

namespace nlbu {

/// Raised when time integration produces a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int member, int step);
  int member() const { return member_; }
  int step() const { return step_; }

 private:
  int member_;
  int step_;
};

/// Autonomous ODE with a reusable right-hand side writing into a caller
/// buffer (no allocation on the hot path).
struct OdeModel {
  int dim = 0;
  std::function<void(std::span<const double>, std::span<double>)> rhs;
  std::map<std::string, double> params;
};

Vector lorenz63_rhs(const Vector& x, double sigma, double rho, double beta);
Vector lorenz96_rhs(const Vector& x, double forcing);

OdeModel lorenz63_model(double sigma = 10.0, double rho = 28.0, double beta = 8.0 / 3.0);
OdeModel lorenz96_model(double forcing, int dim = 40);

/// One classical fourth-order Runge-Kutta step.
Vector rk4_step(const OdeModel& model, const Vector& x, double dt);

/// n_steps RK4 steps applied to a single state.
Vector integrate(const OdeModel& model, const Vector& x, double dt, int n_steps);

/// Advances every member independently by n_steps RK4 steps. Members are
/// processed in parallel; the result is bitwise independent of thread
/// count. Throws DivergenceError with the lowest offending member index.
Ensemble propagate_ensemble(const OdeModel& model, const Ensemble& ens, double dt, int n_steps);

}  // namespace nlbu
