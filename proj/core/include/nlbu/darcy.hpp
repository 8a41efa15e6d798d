#pragma once

#include <functional>

#include "nlbu/ensemble.hpp"

namespace nlbu {

/// Two-region log-permeability: u1 on {x + y >= 1}, u2 on {x + y < 1}.
struct PermeabilityParams {
  double u1 = 0.0;
  double u2 = 0.0;
};

/// Nodal pressure on the unit square; grid(i, j) = p(i/n, j/n), n cells
/// per side.
struct PressureField {
  Matrix grid;  // (n+1) x (n+1)
  int n = 0;
};

struct DarcyOptions {
  /// Use the source exactly as written, 10 exp(-50(x-1/2)^2 + 50(y-1/2)^2),
  /// instead of the Gaussian-bump reading with both terms negative.
  bool literal_source = false;
  /// Overrides for the source term and Dirichlet data (used by convergence
  /// and invariance tests); null means the defaults above.
  std::function<double(double, double)> source;
  std::function<double(double, double)> boundary;
};

/// Solves -div(e^c grad p) = f with a 5-point scheme using harmonic-mean
/// face coefficients; Dirichlet data (p = 0 on x in {0,1}, p = sin(5x) on
/// y in {0,1}) is imposed exactly. Direct sparse solve, verified to a
/// relative residual of 1e-10.
PressureField solve_pressure(const PermeabilityParams& perm, int n, const DarcyOptions& opts = {});

/// Samples p bilinearly at the 8x8 interior lattice (i/9, j/9), applies the
/// unnormalized 2-D DFT, and returns the 64 magnitudes with the y-frequency
/// index varying slowest (row-major order).
Vector observe_fourier_amplitude(const PressureField& p);

/// Forward map G(u) = observe_fourier_amplitude(solve_pressure(u)).
Vector darcy_forward(const Eigen::Vector2d& u, int n, const DarcyOptions& opts = {});

/// Debug dump of a nodal pressure grid as CSV, one row per y level (row j
/// holds p(x_0..x_n, y_j)), 17 significant digits.
void write_pressure_csv(const PressureField& p, const std::string& path);

}  // namespace nlbu
