#include "nlbu/darcy.hpp"

#include <Eigen/Sparse>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace nlbu {

namespace {

double default_source(double x, double y) {
  return 10.0 * std::exp(-50.0 * ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)));
}

double literal_source(double x, double y) {
  return 10.0 * std::exp(-50.0 * (x - 0.5) * (x - 0.5) + 50.0 * (y - 0.5) * (y - 0.5));
}

// p = 0 on the x-faces takes the corners; p = sin(5x) on the y-faces.
double default_boundary(double x, double y) {
  (void)y;
  if (x == 0.0 || x == 1.0) return 0.0;
  return std::sin(5.0 * x);
}

double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

PressureField solve_pressure(const PermeabilityParams& perm, int n, const DarcyOptions& opts) {
  if (n < 16) throw std::invalid_argument("solve_pressure: grid must have at least 16 cells per side");

  const auto source = opts.source ? opts.source
                     : opts.literal_source ? std::function<double(double, double)>(literal_source)
                                           : std::function<double(double, double)>(default_source);
  const auto boundary =
      opts.boundary ? opts.boundary : std::function<double(double, double)>(default_boundary);

  const double h = 1.0 / n;
  const double inv_h2 = 1.0 / (h * h);
  const int m = n - 1;  // interior nodes per side

  // nodal conductivity; the interface x + y >= 1 becomes i + j >= n exactly
  Matrix a(n + 1, n + 1);
  const double a1 = std::exp(perm.u1);
  const double a2 = std::exp(perm.u2);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) a(i, j) = (i + j >= n) ? a1 : a2;

  PressureField field;
  field.n = n;
  field.grid = Matrix::Zero(n + 1, n + 1);
  for (int i = 0; i <= n; ++i) {
    const double x = static_cast<double>(i) / n;
    field.grid(i, 0) = boundary(x, 0.0);
    field.grid(i, n) = boundary(x, 1.0);
  }
  for (int j = 0; j <= n; ++j) {
    const double y = static_cast<double>(j) / n;
    field.grid(0, j) = boundary(0.0, y);
    field.grid(n, j) = boundary(1.0, y);
  }

  const auto idx = [m](int i, int j) { return (j - 1) * m + (i - 1); };

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(5) * m * m);
  Vector b(m * m);

  for (int j = 1; j < n; ++j) {
    const double y = static_cast<double>(j) / n;
    for (int i = 1; i < n; ++i) {
      const double x = static_cast<double>(i) / n;
      const int row = idx(i, j);
      const double aE = harmonic_mean(a(i, j), a(i + 1, j));
      const double aW = harmonic_mean(a(i, j), a(i - 1, j));
      const double aN = harmonic_mean(a(i, j), a(i, j + 1));
      const double aS = harmonic_mean(a(i, j), a(i, j - 1));

      triplets.emplace_back(row, row, (aE + aW + aN + aS) * inv_h2);
      b[row] = source(x, y);

      if (i + 1 < n) triplets.emplace_back(row, idx(i + 1, j), -aE * inv_h2);
      else b[row] += aE * inv_h2 * field.grid(n, j);
      if (i - 1 > 0) triplets.emplace_back(row, idx(i - 1, j), -aW * inv_h2);
      else b[row] += aW * inv_h2 * field.grid(0, j);
      if (j + 1 < n) triplets.emplace_back(row, idx(i, j + 1), -aN * inv_h2);
      else b[row] += aN * inv_h2 * field.grid(i, n);
      if (j - 1 > 0) triplets.emplace_back(row, idx(i, j - 1), -aS * inv_h2);
      else b[row] += aS * inv_h2 * field.grid(i, 0);
    }
  }

  Eigen::SparseMatrix<double> A(m * m, m * m);
  A.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("solve_pressure: sparse factorization failed");
  const Vector sol = solver.solve(b);

  const double b_norm = b.norm();
  const double residual = (A * sol - b).norm() / (b_norm > 0.0 ? b_norm : 1.0);
  if (!(residual <= 1e-10)) {
    std::ostringstream msg;
    msg << "solve_pressure: linear solve did not converge (relative residual " << residual << ")";
    throw std::runtime_error(msg.str());
  }

  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i) field.grid(i, j) = sol[idx(i, j)];
  return field;
}

Vector observe_fourier_amplitude(const PressureField& p) {
  const int n = p.n;
  if (n < 16) throw std::invalid_argument("observe_fourier_amplitude: grid too coarse");

  // bilinear samples at the 8x8 interior lattice
  double s[8][8];  // s[row = y index][col = x index]
  for (int r = 0; r < 8; ++r) {
    const double y = static_cast<double>(r + 1) / 9.0;
    const double gy = y * n;
    const int j0 = std::min(static_cast<int>(gy), n - 1);
    const double ty = gy - j0;
    for (int c = 0; c < 8; ++c) {
      const double x = static_cast<double>(c + 1) / 9.0;
      const double gx = x * n;
      const int i0 = std::min(static_cast<int>(gx), n - 1);
      const double tx = gx - i0;
      s[r][c] = (1.0 - tx) * (1.0 - ty) * p.grid(i0, j0) + tx * (1.0 - ty) * p.grid(i0 + 1, j0) +
                (1.0 - tx) * ty * p.grid(i0, j0 + 1) + tx * ty * p.grid(i0 + 1, j0 + 1);
    }
  }

  // unnormalized 2-D DFT of the 8x8 array, magnitudes in row-major
  // frequency order (y-frequency k slowest)
  std::complex<double> twiddle[8];
  for (int t = 0; t < 8; ++t) {
    const double angle = -2.0 * std::numbers::pi * t / 8.0;
    twiddle[t] = {std::cos(angle), std::sin(angle)};
  }
  Vector out(64);
  for (int k = 0; k < 8; ++k) {
    for (int l = 0; l < 8; ++l) {
      std::complex<double> acc{0.0, 0.0};
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) acc += s[r][c] * twiddle[(k * r + l * c) % 8];
      out[8 * k + l] = std::abs(acc);
    }
  }
  return out;
}

Vector darcy_forward(const Eigen::Vector2d& u, int n, const DarcyOptions& opts) {
  return observe_fourier_amplitude(solve_pressure(PermeabilityParams{u[0], u[1]}, n, opts));
}

void write_pressure_csv(const PressureField& p, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  char buf[40];
  for (int j = 0; j <= p.n; ++j) {
    for (int i = 0; i <= p.n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", p.grid(i, j));
      out << (i > 0 ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace nlbu
