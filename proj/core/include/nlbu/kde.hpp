#pragma once

#include <cstdint>
#include <stdexcept>

#include "nlbu/ensemble.hpp"

namespace nlbu {

/// Thrown when every kernel log-density at the query falls below the
/// double-precision exp underflow floor (-700): the query lies so far
/// outside the centers that any regression would be pure extrapolation.
class DegenerateWeightsError : public std::runtime_error {
 public:
  explicit DegenerateWeightsError(double max_log_kernel);
  double max_log_kernel() const { return max_log_kernel_; }

 private:
  double max_log_kernel_;
};

/// Gaussian kernel density model over paired (u, v) samples with full
/// SPD bandwidth matrices, Cholesky-factored once at construction.
/// Immutable afterwards; queries are pure and thread-safe.
class KdeModel {
 public:
  KdeModel(Matrix centers_u, Matrix centers_v, Matrix bandwidth_u, Matrix bandwidth_v);

  /// Builds the model with Scott's-rule bandwidths estimated from the centers.
  static KdeModel fit(Matrix centers_u, Matrix centers_v);

  int size() const { return static_cast<int>(centers_v_.rows()); }
  int dim_u() const { return static_cast<int>(centers_u_.cols()); }
  int dim_v() const { return static_cast<int>(centers_v_.cols()); }

  const Matrix& centers_u() const { return centers_u_; }
  const Matrix& centers_v() const { return centers_v_; }
  const Matrix& bandwidth_u() const { return bandwidth_u_; }
  const Matrix& bandwidth_v() const { return bandwidth_v_; }
  const Matrix& chol_u() const { return chol_u_; }  // lower factor of bandwidth_u
  const Matrix& chol_v() const { return chol_v_; }

 private:
  Matrix centers_u_, centers_v_;
  Matrix bandwidth_u_, bandwidth_v_;
  Matrix chol_u_, chol_v_;
};

/// Normalized kernel weights of the conditional density at a fixed v-query.
struct ConditionalWeights {
  Vector weights;  // nonnegative, sums to 1
  Vector query_v;
};

/// Scott's-rule bandwidth: M^(-2/(n+4)) times the sample covariance, with a
/// relative ridge (1e-10 tr(S)/n) and a diagonal fallback for degenerate
/// sample sets.
Matrix scott_bandwidth(const Matrix& samples);

/// Kernel log-densities at v_query up to the shared normalization constant:
/// -0.5 * Mahalanobis^2 under bandwidth_v per center.
Vector kernel_log_densities(const KdeModel& model, const Vector& v_query);

/// Gaussian kernel weights at v_query, computed in log space with
/// log-sum-exp stabilization. Throws DegenerateWeightsError past the
/// underflow floor.
ConditionalWeights conditional_weights(const KdeModel& model, const Vector& v_query);

/// As conditional_weights but without the extrapolation floor; far queries
/// degrade to a one-hot weight on the nearest center instead of throwing.
ConditionalWeights conditional_weights_raw(const KdeModel& model, const Vector& v_query);

/// Kernel-weighted average of the u-centers at v_query; the regression
/// estimate of E[u | v = v_query]. Always inside the convex hull of the
/// u-centers.
Vector nadaraya_watson(const KdeModel& model, const Vector& v_query);
Vector nadaraya_watson(const KdeModel& model, const ConditionalWeights& weights);

/// Draws from the conditional mixture at v_query: component k is selected
/// with probability w_k, then a N(centers_u[k], bandwidth_u) draw is made.
/// Each draw consumes one uniform and dim_u Gaussians, in that order.
Matrix sample_conditional(const KdeModel& model, const Vector& v_query, int n_draws,
                          std::uint64_t seed);
Matrix sample_conditional(const KdeModel& model, const ConditionalWeights& weights, int n_draws,
                          std::uint64_t seed);

}  // namespace nlbu
