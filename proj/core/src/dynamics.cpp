#include "nlbu/dynamics.hpp"

#include <cmath>
#include <vector>

namespace nlbu {

namespace {

struct Rk4Workspace {
  std::vector<double> k1, k2, k3, k4, xtmp;
  explicit Rk4Workspace(int n) : k1(n), k2(n), k3(n), k4(n), xtmp(n) {}
};

// One RK4 step on x in place; returns false on a non-finite result.
bool rk4_inplace(const OdeModel& model, std::span<double> x, double dt, Rk4Workspace& ws) {
  const int n = model.dim;
  model.rhs(x, ws.k1);
  for (int i = 0; i < n; ++i) ws.xtmp[i] = x[i] + 0.5 * dt * ws.k1[i];
  model.rhs(ws.xtmp, ws.k2);
  for (int i = 0; i < n; ++i) ws.xtmp[i] = x[i] + 0.5 * dt * ws.k2[i];
  model.rhs(ws.xtmp, ws.k3);
  for (int i = 0; i < n; ++i) ws.xtmp[i] = x[i] + dt * ws.k3[i];
  model.rhs(ws.xtmp, ws.k4);
  const double sixth = dt / 6.0;
  bool finite = true;
  for (int i = 0; i < n; ++i) {
    x[i] += sixth * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    finite = finite && std::isfinite(x[i]);
  }
  return finite;
}

}  // namespace

DivergenceError::DivergenceError(int member, int step)
    : std::runtime_error("time integration diverged (member " + std::to_string(member) +
                         ", step " + std::to_string(step) + ")"),
      member_(member),
      step_(step) {}

Vector lorenz63_rhs(const Vector& x, double sigma, double rho, double beta) {
  Vector dx(3);
  dx[0] = sigma * (x[1] - x[0]);
  dx[1] = x[0] * (rho - x[2]) - x[1];
  dx[2] = x[0] * x[1] - beta * x[2];
  return dx;
}

Vector lorenz96_rhs(const Vector& x, double forcing) {
  const int n = static_cast<int>(x.size());
  Vector dx(n);
  for (int i = 0; i < n; ++i) {
    const double xp1 = x[(i + 1) % n];
    const double xm2 = x[(i + n - 2) % n];
    const double xm1 = x[(i + n - 1) % n];
    dx[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
  }
  return dx;
}

OdeModel lorenz63_model(double sigma, double rho, double beta) {
  OdeModel model;
  model.dim = 3;
  model.params = {{"sigma", sigma}, {"rho", rho}, {"beta", beta}};
  model.rhs = [sigma, rho, beta](std::span<const double> x, std::span<double> dx) {
    dx[0] = sigma * (x[1] - x[0]);
    dx[1] = x[0] * (rho - x[2]) - x[1];
    dx[2] = x[0] * x[1] - beta * x[2];
  };
  return model;
}

OdeModel lorenz96_model(double forcing, int dim) {
  if (dim < 4) throw std::invalid_argument("lorenz96_model: need at least four components");
  OdeModel model;
  model.dim = dim;
  model.params = {{"forcing", forcing}};
  model.rhs = [forcing, dim](std::span<const double> x, std::span<double> dx) {
    for (int i = 0; i < dim; ++i) {
      const double xp1 = x[(i + 1) % dim];
      const double xm2 = x[(i + dim - 2) % dim];
      const double xm1 = x[(i + dim - 1) % dim];
      dx[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
    }
  };
  return model;
}

Vector rk4_step(const OdeModel& model, const Vector& x, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  if (x.size() != model.dim) throw std::invalid_argument("rk4_step: state dimension mismatch");
  Vector out = x;
  Rk4Workspace ws(model.dim);
  if (!rk4_inplace(model, {out.data(), static_cast<std::size_t>(model.dim)}, dt, ws))
    throw DivergenceError(0, 0);
  return out;
}

Vector integrate(const OdeModel& model, const Vector& x, double dt, int n_steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (n_steps < 0) throw std::invalid_argument("integrate: n_steps must be nonnegative");
  Vector out = x;
  Rk4Workspace ws(model.dim);
  std::span<double> view{out.data(), static_cast<std::size_t>(model.dim)};
  for (int s = 0; s < n_steps; ++s)
    if (!rk4_inplace(model, view, dt, ws)) throw DivergenceError(0, s);
  return out;
}

Ensemble propagate_ensemble(const OdeModel& model, const Ensemble& ens, double dt, int n_steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_ensemble: dt must be positive");
  if (n_steps < 0) throw std::invalid_argument("propagate_ensemble: n_steps must be nonnegative");
  if (ens.dim() != model.dim)
    throw std::invalid_argument("propagate_ensemble: ensemble/model dimension mismatch");

  const int K = ens.size();
  MemberMatrix out = ens.members;
  std::vector<int> failed_step(K, -1);

#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k) {
    Rk4Workspace ws(model.dim);
    std::span<double> row{out.row(k).data(), static_cast<std::size_t>(model.dim)};
    for (int s = 0; s < n_steps; ++s) {
      if (!rk4_inplace(model, row, dt, ws)) {
        failed_step[k] = s;
        break;
      }
    }
  }

  for (int k = 0; k < K; ++k)
    if (failed_step[k] >= 0) throw DivergenceError(k, failed_step[k]);

  return Ensemble{std::move(out), ens.partition};
}

}  // namespace nlbu
