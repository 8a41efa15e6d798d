#include "nlbu/gaussian_update.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nlbu {

namespace {

// LDLT factorization that rejects singular or indefinite input with a
// condition-number diagnostic in the error message.
Eigen::LDLT<Matrix> checked_ldlt(const Matrix& S, const char* what) {
  Eigen::LDLT<Matrix> ldlt(S);
  const Vector D = ldlt.vectorD();
  const double dmax = D.cwiseAbs().maxCoeff();
  const double dmin = D.minCoeff();
  if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || dmin <= dmax * 1e-14) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    std::ostringstream msg;
    msg << what << ": singular or indefinite matrix (eigenvalues in [" << lo << ", " << hi
        << "], condition "
        << (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) << ")";
    throw std::runtime_error(msg.str());
  }
  return ldlt;
}

double index_distance(int i, int j, const Localization& loc) {
  const int raw = std::abs(i - j);
  if (!loc.cyclic || loc.period <= 0) return static_cast<double>(raw);
  return static_cast<double>(std::min(raw, loc.period - raw));
}

}  // namespace

GaussianPosterior kalman_posterior_moments(const Moments& prior, const MeasurementModel& meas) {
  const auto& p = meas.partition;
  const int d = p.dim();
  const int d2 = p.d2;
  if (prior.mean.size() != d || prior.cov.rows() != d)
    throw std::invalid_argument("kalman_posterior_moments: prior/measurement dimension mismatch");
  if (meas.gamma.rows() != d2 || meas.m.size() != d2)
    throw std::invalid_argument("kalman_posterior_moments: gamma/m dimension mismatch");

  // C H^T gathers the observed columns of the full covariance
  Matrix CHt(d, d2);
  for (int j = 0; j < d2; ++j) CHt.col(j) = prior.cov.col(p.observed_indices[j]);
  Matrix S(d2, d2);
  for (int i = 0; i < d2; ++i)
    for (int j = 0; j < d2; ++j) S(i, j) = prior.cov(p.observed_indices[i], p.observed_indices[j]);
  S += meas.gamma;

  const auto ldlt = checked_ldlt(S, "kalman_posterior_moments");
  Vector innovation = meas.m;
  for (int j = 0; j < d2; ++j) innovation[j] -= prior.mean[p.observed_indices[j]];

  // K = C H^T S^{-1}; work with S^{-1} H C to keep one factorization
  Matrix SinvHC = ldlt.solve(CHt.transpose());
  GaussianPosterior post;
  post.mean = prior.mean + SinvHC.transpose() * innovation;
  post.cov = prior.cov - SinvHC.transpose() * CHt.transpose();
  Matrix sym = 0.5 * (post.cov + post.cov.transpose());
  post.cov = sym;
  return post;
}

std::pair<Vector, Matrix> conditional_gaussian(const Moments& prior, const Vector& v_query) {
  const auto& p = prior.partition;
  if (v_query.size() != p.d2)
    throw std::invalid_argument("conditional_gaussian: query dimension mismatch");
  const Matrix Cvv = prior.cov_vv();
  const Matrix Cuv = prior.cov_uv();
  const auto ldlt = checked_ldlt(Cvv, "conditional_gaussian");
  Vector mean = prior.mean_u() + Cuv * ldlt.solve(v_query - prior.mean_v());
  Matrix cov = prior.cov_uu() - Cuv * ldlt.solve(Cuv.transpose());
  Matrix sym = 0.5 * (cov + cov.transpose());
  return {std::move(mean), std::move(sym)};
}

double gaspari_cohn_taper(double distance, double half_width) {
  if (distance < 0.0 || !(half_width > 0.0))
    throw std::invalid_argument("gaspari_cohn_taper: need distance >= 0 and half_width > 0");
  const double r = distance / half_width;
  if (r >= 2.0) return 0.0;
  if (r <= 1.0) return 1.0 + r * r * (-5.0 / 3.0 + r * (5.0 / 8.0 + r * (0.5 - 0.25 * r)));
  const double r2 = r * r;
  return 4.0 - 5.0 * r + (5.0 / 3.0) * r2 + (5.0 / 8.0) * r2 * r - 0.5 * r2 * r2 +
         (1.0 / 12.0) * r2 * r2 * r - (2.0 / 3.0) / r;
}

Ensemble eakf_update(const Ensemble& ens, const MeasurementModel& meas, double inflation,
                     const std::optional<Localization>& localization, UpdateScope scope) {
  const auto& p = meas.partition;
  const int K = ens.size();
  const int d = ens.dim();
  if (d != p.dim()) throw std::invalid_argument("eakf_update: ensemble/measurement dimension mismatch");
  if (K < 2) throw std::invalid_argument("eakf_update: need at least two members");
  if (inflation < 1.0) throw std::invalid_argument("eakf_update: inflation must be >= 1");
  const int d2 = p.d2;
  if (meas.gamma.rows() != d2 || meas.gamma.cols() != d2 || meas.m.size() != d2)
    throw std::invalid_argument("eakf_update: gamma/m dimension mismatch");
  for (int i = 0; i < d2; ++i)
    for (int j = 0; j < d2; ++j)
      if (i != j && meas.gamma(i, j) != 0.0)
        throw std::invalid_argument(
            "eakf_update: serial processing requires diagonal gamma; "
            "use kalman_posterior_moments for correlated errors");

  std::vector<int> targets;
  if (scope == UpdateScope::FullState) {
    targets.resize(d);
    std::iota(targets.begin(), targets.end(), 0);
  } else {
    targets = p.observed_indices;
  }

  MemberMatrix X = ens.members;

  if (inflation != 1.0) {
    for (int c : targets) {
      const double mean = X.col(c).mean();
      X.col(c) = ((X.col(c).array() - mean) * inflation + mean).matrix();
    }
  }

  const double denom_k = static_cast<double>(K - 1);
  for (int j = 0; j < d2; ++j) {
    const int obs_col = p.observed_indices[j];
    const double gamma_j = meas.gamma(j, j);
    if (!(gamma_j > 0.0)) throw std::invalid_argument("eakf_update: gamma diagonal must be positive");

    const double mean_o = X.col(obs_col).mean();
    const Vector dev_o = (X.col(obs_col).array() - mean_o).matrix();
    const double var_o = dev_o.squaredNorm() / denom_k;
    if (var_o < 1e-300) continue;  // collapsed component carries no information

    const double denom = var_o + gamma_j;
    const double mean_a = (gamma_j * mean_o + var_o * meas.m[j]) / denom;
    const double shrink = std::sqrt(gamma_j / denom);

    // exact 1-D posterior in observation space: mean_a + shrink * deviation
    const Vector incr = Vector::Constant(K, mean_a - mean_o) + (shrink - 1.0) * dev_o;

    for (int c : targets) {
      if (c == obs_col) {
        X.col(c) += incr;
        continue;
      }
      double taper = 1.0;
      if (localization && localization->half_width > 0.0) {
        taper = gaspari_cohn_taper(index_distance(c, obs_col, *localization),
                                   localization->half_width);
        if (taper == 0.0) continue;
      }
      const double mean_c = X.col(c).mean();
      const double cov_co = (X.col(c).array() - mean_c).matrix().dot(dev_o) / denom_k;
      X.col(c) += (taper * cov_co / var_o) * incr;
    }
  }

  return Ensemble{std::move(X), ens.partition};
}

}  // namespace nlbu
