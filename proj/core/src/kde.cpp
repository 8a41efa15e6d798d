#include "nlbu/kde.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "nlbu/rng.hpp"

namespace nlbu {

namespace {

constexpr double kUnderflowFloor = -700.0;

bool cholesky_lower(const Matrix& A, Matrix& L) {
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) return false;
  L = llt.matrixL();
  return true;
}

Matrix checked_cholesky(const Matrix& A, const char* what) {
  Matrix L;
  if (!cholesky_lower(A, L)) {
    std::ostringstream msg;
    msg << what << ": bandwidth matrix is not positive definite";
    throw std::runtime_error(msg.str());
  }
  return L;
}

}  // namespace

DegenerateWeightsError::DegenerateWeightsError(double max_log_kernel)
    : std::runtime_error("conditional_weights: all kernel log-densities below underflow floor"),
      max_log_kernel_(max_log_kernel) {}

KdeModel::KdeModel(Matrix centers_u, Matrix centers_v, Matrix bandwidth_u, Matrix bandwidth_v)
    : centers_u_(std::move(centers_u)),
      centers_v_(std::move(centers_v)),
      bandwidth_u_(std::move(bandwidth_u)),
      bandwidth_v_(std::move(bandwidth_v)) {
  if (centers_v_.rows() < 1) throw std::invalid_argument("KdeModel: need at least one center");
  if (centers_u_.rows() != centers_v_.rows())
    throw std::invalid_argument("KdeModel: u/v center counts differ");
  if (bandwidth_u_.rows() != centers_u_.cols() || bandwidth_v_.rows() != centers_v_.cols())
    throw std::invalid_argument("KdeModel: bandwidth dimensions inconsistent with centers");
  if (centers_u_.cols() > 0) chol_u_ = checked_cholesky(bandwidth_u_, "KdeModel(u)");
  chol_v_ = checked_cholesky(bandwidth_v_, "KdeModel(v)");
}

KdeModel KdeModel::fit(Matrix centers_u, Matrix centers_v) {
  Matrix Hu = centers_u.cols() > 0 ? scott_bandwidth(centers_u) : Matrix(0, 0);
  Matrix Hv = scott_bandwidth(centers_v);
  return KdeModel(std::move(centers_u), std::move(centers_v), std::move(Hu), std::move(Hv));
}

Matrix scott_bandwidth(const Matrix& samples) {
  const int M = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  if (M < 2) throw std::invalid_argument("scott_bandwidth: need at least two samples");
  if (n < 1) throw std::invalid_argument("scott_bandwidth: need at least one dimension");

  const Vector mean = samples.colwise().mean().transpose();
  Matrix centered = samples.rowwise() - mean.transpose();
  Matrix S = centered.transpose() * centered / static_cast<double>(M - 1);
  Matrix sym = 0.5 * (S + S.transpose());
  S = sym;

  const double factor = std::pow(static_cast<double>(M), -2.0 / (n + 4.0));
  const double ridge = 1e-10 * S.trace() / n;
  Matrix H = factor * (S + ridge * Matrix::Identity(n, n));

  Matrix L;
  if (cholesky_lower(H, L)) return H;

  // degenerate subsample: fall back to the diagonal of S, floored so the
  // Cholesky factorization at model build cannot fail
  Vector diag = S.diagonal();
  const double floor = 1e-16 * std::max(1.0, S.trace() / n);
  for (int i = 0; i < n; ++i) diag[i] = std::max(diag[i], floor);
  Matrix fallback = Matrix::Zero(n, n);
  fallback.diagonal() = factor * diag;
  return fallback;
}

Vector kernel_log_densities(const KdeModel& model, const Vector& v_query) {
  if (v_query.size() != model.dim_v())
    throw std::invalid_argument("kernel_log_densities: query dimension mismatch");
  const int M = model.size();
  const auto& L = model.chol_v();

  // -0.5 * Mahalanobis^2 under bandwidth_v; the shared normalization
  // constant cancels in the weights
  Vector logk(M);
  Vector diff(model.dim_v());
  for (int k = 0; k < M; ++k) {
    diff = v_query - model.centers_v().row(k).transpose();
    L.triangularView<Eigen::Lower>().solveInPlace(diff);
    logk[k] = -0.5 * diff.squaredNorm();
  }
  return logk;
}

namespace {

ConditionalWeights normalize_log_weights(const Vector& logk, const Vector& v_query) {
  const double mx = logk.maxCoeff();
  Vector w = (logk.array() - mx).exp().matrix();
  w /= w.sum();
  return ConditionalWeights{std::move(w), v_query};
}

}  // namespace

ConditionalWeights conditional_weights(const KdeModel& model, const Vector& v_query) {
  const Vector logk = kernel_log_densities(model, v_query);
  const double mx = logk.maxCoeff();
  if (mx < kUnderflowFloor) throw DegenerateWeightsError(mx);
  return normalize_log_weights(logk, v_query);
}

ConditionalWeights conditional_weights_raw(const KdeModel& model, const Vector& v_query) {
  return normalize_log_weights(kernel_log_densities(model, v_query), v_query);
}

Vector nadaraya_watson(const KdeModel& model, const Vector& v_query) {
  return nadaraya_watson(model, conditional_weights(model, v_query));
}

Vector nadaraya_watson(const KdeModel& model, const ConditionalWeights& weights) {
  return model.centers_u().transpose() * weights.weights;
}

Matrix sample_conditional(const KdeModel& model, const Vector& v_query, int n_draws,
                          std::uint64_t seed) {
  return sample_conditional(model, conditional_weights(model, v_query), n_draws, seed);
}

Matrix sample_conditional(const KdeModel& model, const ConditionalWeights& cw, int n_draws,
                          std::uint64_t seed) {
  if (n_draws < 1) throw std::invalid_argument("sample_conditional: need at least one draw");
  const int M = model.size();
  const int d1 = model.dim_u();

  std::vector<double> cumulative(M);
  double acc = 0.0;
  for (int k = 0; k < M; ++k) {
    acc += cw.weights[k];
    cumulative[k] = acc;
  }
  cumulative[M - 1] = 1.0;

  Rng rng(seed);
  Matrix draws(n_draws, d1);
  Vector z(d1);
  for (int i = 0; i < n_draws; ++i) {
    const double r = rng.uniform();
    const int k = static_cast<int>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    const int comp = std::min(k, M - 1);
    for (int j = 0; j < d1; ++j) z[j] = rng.gaussian();
    draws.row(i) = model.centers_u().row(comp) +
                   (model.chol_u().triangularView<Eigen::Lower>() * z).transpose();
  }
  return draws;
}

}  // namespace nlbu
