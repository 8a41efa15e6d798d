#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace nlbu {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Member matrices are row-major with one member per row, so a member is
/// contiguous in memory.
using MemberMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Partition of a d-dimensional state into an unobserved u-block (d1 dims)
/// and an observed v-block (d2 dims) addressed by explicit indices. The
/// observed index list induces the row-selection operator mapping a full
/// state to its observed components; indices need not be contiguous.
struct StatePartition {
  int d1 = 0;
  int d2 = 0;
  std::vector<int> observed_indices;    // v-block column order
  std::vector<int> unobserved_indices;  // ascending complement

  int dim() const { return d1 + d2; }

  /// Builds the partition of a d-dimensional state from its observed index
  /// set. Throws std::invalid_argument on out-of-range or duplicate indices.
  static StatePartition from_observed(int d, std::vector<int> observed);
};

struct Ensemble {
  MemberMatrix members;  // K x d
  StatePartition partition;

  int size() const { return static_cast<int>(members.rows()); }
  int dim() const { return static_cast<int>(members.cols()); }
};

/// Sample mean and unbiased covariance of an ensemble, with partition-aware
/// block views (gathered copies; dimensions are small everywhere here).
struct Moments {
  Vector mean;
  Matrix cov;
  StatePartition partition;

  Vector mean_u() const;
  Vector mean_v() const;
  Matrix cov_uu() const;
  Matrix cov_uv() const;
  Matrix cov_vu() const;
  Matrix cov_vv() const;
};

/// Arithmetic member mean and unbiased (K-1) sample covariance.
Moments ensemble_moments(const Ensemble& ens);

/// K members equal to `value` plus independent N(0, variance I) noise.
/// Deterministic for a fixed seed.
Ensemble perturbed_constant_ensemble(const Vector& value, double variance, int K,
                                     std::uint64_t seed, StatePartition partition);

/// Gathers the u-block (K x d1) and v-block (K x d2) of an ensemble.
std::pair<MemberMatrix, MemberMatrix> split_uv(const Ensemble& ens);

/// Scatters u/v blocks back into full-state column order; inverse of split_uv.
MemberMatrix join_uv(const MemberMatrix& u, const MemberMatrix& v, const StatePartition& p);

}  // namespace nlbu
