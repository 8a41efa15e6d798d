#pragma once

#include <cstdint>
#include <optional>

#include "nlbu/gaussian_update.hpp"
#include "nlbu/locality.hpp"

namespace nlbu {

struct NlbuConfig {
  double radius = 1.0;              // Mahalanobis subsampling threshold
  int m_min = 1;                    // minimum local sample count before fallback
  bool clustering_enabled = false;
  bool subsampling_enabled = true;
  int oversample_factor = 10;       // conditional draws per ensemble member
  double inflation = 1.0;           // embedded observed-block update
  double fallback_inflation = 1.0;  // full linear fallback update
  std::optional<Localization> localization;
};

struct UpdateOutcome {
  Ensemble posterior;
  Vector posterior_mean;  // (u_hat, v_hat) scattered into full-state order
  bool used_fallback = false;
  int M = 0;  // subsample count (K when subsampling is disabled)
  std::optional<ClusterResult> cluster_report;
};

/// Nonlinear Bayesian update of a prior ensemble:
///  1. denoise the observed block with the ensemble-adjustment update and
///     average it to get v_hat;
///  2. subsample the prior members inside the Mahalanobis ball around v_hat;
///  3. with fewer than m_min local samples, fall back to the full linear
///     update (the fallback posterior is bitwise the plain eakf_update);
///  4. estimate u_hat by Nadaraya-Watson regression at v_hat, or, with
///     clustering enabled, by the mean of the most populated single-linkage
///     cluster of oversampled conditional draws;
///  5. rebuild the u-members as u_hat plus N(0, sigma_o^2 I) noise, where
///     sigma_o^2 is the largest eigenvalue of gamma; v-members keep the
///     step-1 result.
/// Degenerate kernel weights at v_hat (extrapolation) also take the
/// fallback branch. Deterministic for a fixed seed.
UpdateOutcome nlbu_update(const Ensemble& prior, const MeasurementModel& meas,
                          const NlbuConfig& cfg, std::uint64_t seed);

/// K copies of u_hat perturbed with independent N(0, sigma_o2 I) noise.
MemberMatrix build_posterior_u_ensemble(const Vector& u_hat, int K, double sigma_o2,
                                        std::uint64_t seed);

}  // namespace nlbu
