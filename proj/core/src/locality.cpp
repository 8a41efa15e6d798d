#include "nlbu/locality.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nlbu {

namespace {

Eigen::LLT<Matrix> gamma_factor(const Matrix& gamma, const char* what) {
  Eigen::LLT<Matrix> llt(gamma);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) + ": gamma is not positive definite");
  return llt;
}

double whitened_norm(const Eigen::LLT<Matrix>& llt, Vector diff) {
  llt.matrixL().solveInPlace(diff);
  return diff.norm();
}

// union-find with path halving
int uf_find(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

void uf_union(std::vector<int>& parent, int a, int b) {
  parent[uf_find(parent, a)] = uf_find(parent, b);
}

}  // namespace

double mahalanobis_distance(const Vector& a, const Vector& b, const Matrix& gamma) {
  if (a.size() != b.size() || gamma.rows() != a.size() || gamma.cols() != a.size())
    throw std::invalid_argument("mahalanobis_distance: dimension mismatch");
  const auto llt = gamma_factor(gamma, "mahalanobis_distance");
  return whitened_norm(llt, a - b);
}

SubsampleResult subsample(const Ensemble& ens, const Vector& v_hat, const Matrix& gamma,
                          double radius) {
  const auto& p = ens.partition;
  if (!(radius > 0.0)) throw std::invalid_argument("subsample: radius must be positive");
  if (v_hat.size() != p.d2) throw std::invalid_argument("subsample: v_hat dimension mismatch");
  const auto llt = gamma_factor(gamma, "subsample");

  SubsampleResult result;
  result.radius = radius;
  Vector vk(p.d2);
  for (int k = 0; k < ens.size(); ++k) {
    for (int j = 0; j < p.d2; ++j) vk[j] = ens.members(k, p.observed_indices[j]);
    if (whitened_norm(llt, vk - v_hat) <= radius) result.indices.push_back(k);
  }
  result.M = static_cast<int>(result.indices.size());
  return result;
}

ClusterResult single_linkage_flat_clusters(const Matrix& samples, double threshold) {
  const int N = static_cast<int>(samples.rows());
  const int dim = static_cast<int>(samples.cols());
  if (N < 1) throw std::invalid_argument("single_linkage_flat_clusters: need at least one sample");
  if (!(threshold > 0.0))
    throw std::invalid_argument("single_linkage_flat_clusters: threshold must be positive");

  // row-major copy so the Prim scans below are cache-friendly
  MemberMatrix pts = samples;

  // Prim's MST over the complete Euclidean graph; cutting MST edges above
  // the threshold yields exactly the threshold-graph connected components.
  std::vector<int> parent(N);
  std::iota(parent.begin(), parent.end(), 0);

  if (N > 1) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<char> in_tree(N, 0);
    std::vector<double> best_dist(N, inf);
    std::vector<int> best_from(N, 0);
    int current = 0;
    in_tree[0] = 1;
    for (int added = 1; added < N; ++added) {
      // each k only writes its own slot, so the result is thread-count
      // independent
#pragma omp parallel for schedule(static) if (N > 2000)
      for (int k = 0; k < N; ++k) {
        if (in_tree[k]) continue;
        const double dist = (pts.row(k) - pts.row(current)).norm();
        if (dist < best_dist[k]) {
          best_dist[k] = dist;
          best_from[k] = current;
        }
      }
      int next = -1;
      double next_dist = inf;
      for (int k = 0; k < N; ++k) {
        if (!in_tree[k] && best_dist[k] < next_dist) {
          next_dist = best_dist[k];
          next = k;
        }
      }
      in_tree[next] = 1;
      if (next_dist <= threshold) uf_union(parent, next, best_from[next]);
      current = next;
    }
  }

  ClusterResult result;
  result.labels.assign(N, -1);
  std::vector<int> root_to_label(N, -1);
  int n_clusters = 0;
  for (int k = 0; k < N; ++k) {
    const int root = uf_find(parent, k);
    if (root_to_label[root] < 0) root_to_label[root] = n_clusters++;
    result.labels[k] = root_to_label[root];
  }

  result.cluster_sizes.assign(n_clusters, 0);
  result.cluster_means = Matrix::Zero(n_clusters, dim);
  for (int k = 0; k < N; ++k) {
    result.cluster_sizes[result.labels[k]] += 1;
    result.cluster_means.row(result.labels[k]) += samples.row(k);
  }
  for (int c = 0; c < n_clusters; ++c) result.cluster_means.row(c) /= result.cluster_sizes[c];

  result.selected = 0;
  for (int c = 1; c < n_clusters; ++c)
    if (result.cluster_sizes[c] > result.cluster_sizes[result.selected]) result.selected = c;
  return result;
}

double cluster_threshold(const Matrix& samples) {
  const int N = static_cast<int>(samples.rows());
  const int dim = static_cast<int>(samples.cols());
  if (N < 2) throw std::invalid_argument("cluster_threshold: need at least two samples");
  double total = 0.0;
  for (int j = 0; j < dim; ++j) {
    const double mean = samples.col(j).mean();
    total += (samples.col(j).array() - mean).square().sum() / static_cast<double>(N - 1);
  }
  return std::sqrt(total / dim);
}

}  // namespace nlbu
