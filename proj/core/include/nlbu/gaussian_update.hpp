#pragma once

#include <optional>
#include <utility>

#include "nlbu/ensemble.hpp"

namespace nlbu {

/// Linear-projection measurement m = HU + eps with eps ~ N(0, gamma). The
/// projection H is the row selection induced by partition.observed_indices.
struct MeasurementModel {
  StatePartition partition;
  Matrix gamma;  // d2 x d2 symmetric positive definite
  Vector m;      // d2
};

struct GaussianPosterior {
  Vector mean;  // d, full-state order
  Matrix cov;   // d x d, symmetric PSD
};

/// Exact Gaussian posterior moments via the joint Kalman formula. Throws a
/// numerical error with a condition diagnostic when C_vv + gamma is singular.
GaussianPosterior kalman_posterior_moments(const Moments& prior, const MeasurementModel& meas);

/// Gaussian conditional of u given v = v_query: mean and covariance.
std::pair<Vector, Matrix> conditional_gaussian(const Moments& prior, const Vector& v_query);

/// Fifth-order piecewise-rational compactly supported correlation function:
/// 1 at distance 0, 0 beyond 2*half_width, monotone nonincreasing.
double gaspari_cohn_taper(double distance, double half_width);

/// Covariance taper specification for the serial update. Distance between
/// state indices i and j is |i-j|, or min(|i-j|, period-|i-j|) when cyclic.
struct Localization {
  double half_width = 0.0;
  bool cyclic = false;
  int period = 0;
};

enum class UpdateScope {
  FullState,     // regress observation increments onto every state dimension
  ObservedOnly,  // touch only the v-block; u-members pass through untouched
};

/// Deterministic ensemble-adjustment update processing scalar observations
/// serially: each observation contracts the observed component to its exact
/// 1-D Gaussian posterior, and the increments are regressed onto the target
/// state dimensions via (optionally tapered) sample covariances. Requires
/// diagonal gamma. Multiplicative inflation (>= 1) scales prior deviations
/// of the target dimensions before any observation is processed.
Ensemble eakf_update(const Ensemble& ens, const MeasurementModel& meas, double inflation,
                     const std::optional<Localization>& localization = std::nullopt,
                     UpdateScope scope = UpdateScope::FullState);

}  // namespace nlbu
