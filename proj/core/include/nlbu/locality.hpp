#pragma once

#include <vector>

#include "nlbu/ensemble.hpp"

namespace nlbu {

/// Members whose observed block lies inside the Mahalanobis ball.
struct SubsampleResult {
  std::vector<int> indices;  // original member indices, order preserved
  int M = 0;
  double radius = 0.0;
};

/// Flat clusters with per-cluster means; `selected` is the most populated
/// cluster (ties broken toward the lowest id, ids in first-occurrence order).
struct ClusterResult {
  std::vector<int> labels;
  Matrix cluster_means;  // n_clusters x dim
  std::vector<int> cluster_sizes;
  int selected = 0;
};

/// sqrt((a-b)^T gamma^{-1} (a-b)), computed via a Cholesky solve.
double mahalanobis_distance(const Vector& a, const Vector& b, const Matrix& gamma);

/// Selects exactly the members with d_M(v_k, v_hat) <= radius under gamma.
/// An empty selection is valid.
SubsampleResult subsample(const Ensemble& ens, const Vector& v_hat, const Matrix& gamma,
                          double radius);

/// Single-linkage flat clusters under Euclidean distance: the clusters are
/// the connected components of the graph linking sample pairs at distance
/// <= threshold (equivalently, the dendrogram cut at that height). Exact;
/// O(N^2) time, O(N) memory via a minimum spanning tree.
ClusterResult single_linkage_flat_clusters(const Matrix& samples, double threshold);

/// RMS scalar standard deviation: sqrt of the mean over dimensions of the
/// per-dimension unbiased sample variance.
double cluster_threshold(const Matrix& samples);

}  // namespace nlbu
