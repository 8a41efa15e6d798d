#include "nlbu/nonlinear_update.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nlbu/kde.hpp"
#include "nlbu/rng.hpp"

namespace nlbu {

namespace {

Vector scatter_mean(const Vector& u_hat, const Vector& v_hat, const StatePartition& p) {
  Vector mean(p.dim());
  for (int i = 0; i < p.d1; ++i) mean[p.unobserved_indices[i]] = u_hat[i];
  for (int j = 0; j < p.d2; ++j) mean[p.observed_indices[j]] = v_hat[j];
  return mean;
}

}  // namespace

UpdateOutcome nlbu_update(const Ensemble& prior, const MeasurementModel& meas,
                          const NlbuConfig& cfg, std::uint64_t seed) {
  const auto& p = prior.partition;
  if (p.observed_indices != meas.partition.observed_indices || p.dim() != meas.partition.dim())
    throw std::invalid_argument("nlbu_update: prior/measurement partitions differ");
  if (!(cfg.radius > 0.0)) throw std::invalid_argument("nlbu_update: radius must be positive");
  if (cfg.m_min < 1) throw std::invalid_argument("nlbu_update: m_min must be at least 1");
  if (cfg.oversample_factor < 1)
    throw std::invalid_argument("nlbu_update: oversample_factor must be at least 1");

  const int K = prior.size();

  // Step 1: denoise the observed block only
  Ensemble step1 = eakf_update(prior, meas, cfg.inflation, cfg.localization,
                               UpdateScope::ObservedOnly);
  const auto [u_prior, v_prior] = split_uv(prior);
  const MemberMatrix v_post = split_uv(step1).second;
  const Vector v_hat = v_post.colwise().mean().transpose();

  const auto fallback = [&](int M) {
    UpdateOutcome out;
    out.posterior = eakf_update(prior, meas, cfg.fallback_inflation, cfg.localization,
                                UpdateScope::FullState);
    out.posterior_mean = out.posterior.members.colwise().mean().transpose();
    out.used_fallback = true;
    out.M = M;
    return out;
  };

  if (p.d1 == 0) {
    // fully observed state: nothing to regress
    UpdateOutcome out;
    out.posterior = std::move(step1);
    out.posterior_mean = scatter_mean(Vector(0), v_hat, p);
    out.M = K;
    return out;
  }

  // Step 2: subsample the prior ensemble around v_hat
  std::vector<int> selected;
  if (cfg.subsampling_enabled) {
    selected = subsample(prior, v_hat, meas.gamma, cfg.radius).indices;
  } else {
    selected.resize(K);
    std::iota(selected.begin(), selected.end(), 0);
  }
  const int M = static_cast<int>(selected.size());

  // Step 3: fall back to the full linear update on insufficient local samples
  // (bandwidth estimation additionally needs at least two of them)
  if (M < std::max(cfg.m_min, 2)) return fallback(M);

  Matrix centers_u(M, p.d1), centers_v(M, p.d2);
  for (int i = 0; i < M; ++i) {
    centers_u.row(i) = u_prior.row(selected[i]);
    centers_v.row(i) = v_prior.row(selected[i]);
  }

  // Step 4: conditional-mean estimate at v_hat. The extrapolation guard
  // (degenerate weights -> linear fallback) applies on the subsampled path;
  // without subsampling the raw log-sum-exp weights are used as-is, which
  // degrades to the nearest center instead of switching update rules.
  Vector u_hat;
  std::optional<ClusterResult> report;
  try {
    const KdeModel model = KdeModel::fit(std::move(centers_u), std::move(centers_v));
    const ConditionalWeights weights = cfg.subsampling_enabled
                                           ? conditional_weights(model, v_hat)
                                           : conditional_weights_raw(model, v_hat);
    if (cfg.clustering_enabled) {
      const long n_draws = static_cast<long>(cfg.oversample_factor) * K;
      const Matrix draws =
          sample_conditional(model, weights, static_cast<int>(n_draws), derive_seed(seed, 1));
      double threshold = cluster_threshold(model.centers_u());
      if (!(threshold > 0.0)) threshold = 1e-12;
      ClusterResult clusters = single_linkage_flat_clusters(draws, threshold);
      u_hat = clusters.cluster_means.row(clusters.selected).transpose();
      report = std::move(clusters);
    } else {
      u_hat = nadaraya_watson(model, weights);
    }
  } catch (const DegenerateWeightsError&) {
    return fallback(M);  // extrapolation guard
  }

  // Step 5: posterior ensemble; u gets fresh isotropic noise, v keeps step 1
  Eigen::SelfAdjointEigenSolver<Matrix> es(meas.gamma);
  const double sigma_o2 = es.eigenvalues().maxCoeff();
  const MemberMatrix u_post = build_posterior_u_ensemble(u_hat, K, sigma_o2, derive_seed(seed, 2));

  UpdateOutcome out;
  out.posterior = Ensemble{join_uv(u_post, v_post, p), p};
  out.posterior_mean = scatter_mean(u_hat, v_hat, p);
  out.used_fallback = false;
  out.M = M;
  out.cluster_report = std::move(report);
  return out;
}

MemberMatrix build_posterior_u_ensemble(const Vector& u_hat, int K, double sigma_o2,
                                        std::uint64_t seed) {
  if (sigma_o2 < 0.0)
    throw std::invalid_argument("build_posterior_u_ensemble: sigma_o2 must be nonnegative");
  const int d1 = static_cast<int>(u_hat.size());
  const double sd = std::sqrt(sigma_o2);
  Rng rng(seed);
  MemberMatrix out(K, d1);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < d1; ++j) out(k, j) = u_hat[j] + sd * rng.gaussian();
  return out;
}

}  // namespace nlbu
