#include "nlbu/ensemble.hpp"

#include <cmath>
#include <stdexcept>

#include "nlbu/rng.hpp"

namespace nlbu {

StatePartition StatePartition::from_observed(int d, std::vector<int> observed) {
  if (d <= 0) throw std::invalid_argument("state dimension must be positive");
  if (observed.empty()) throw std::invalid_argument("at least one observed index is required");
  std::vector<char> seen(d, 0);
  for (int idx : observed) {
    if (idx < 0 || idx >= d) throw std::invalid_argument("observed index out of range");
    if (seen[idx]) throw std::invalid_argument("duplicate observed index");
    seen[idx] = 1;
  }
  StatePartition p;
  p.d2 = static_cast<int>(observed.size());
  p.d1 = d - p.d2;
  p.observed_indices = std::move(observed);
  p.unobserved_indices.reserve(p.d1);
  for (int i = 0; i < d; ++i)
    if (!seen[i]) p.unobserved_indices.push_back(i);
  return p;
}

Vector Moments::mean_u() const {
  Vector out(partition.d1);
  for (int i = 0; i < partition.d1; ++i) out[i] = mean[partition.unobserved_indices[i]];
  return out;
}

Vector Moments::mean_v() const {
  Vector out(partition.d2);
  for (int i = 0; i < partition.d2; ++i) out[i] = mean[partition.observed_indices[i]];
  return out;
}

namespace {

Matrix gather_block(const Matrix& cov, const std::vector<int>& rows, const std::vector<int>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = cov(rows[i], cols[j]);
  return out;
}

}  // namespace

Matrix Moments::cov_uu() const {
  return gather_block(cov, partition.unobserved_indices, partition.unobserved_indices);
}
Matrix Moments::cov_uv() const {
  return gather_block(cov, partition.unobserved_indices, partition.observed_indices);
}
Matrix Moments::cov_vu() const {
  return gather_block(cov, partition.observed_indices, partition.unobserved_indices);
}
Matrix Moments::cov_vv() const {
  return gather_block(cov, partition.observed_indices, partition.observed_indices);
}

Moments ensemble_moments(const Ensemble& ens) {
  const int K = ens.size();
  if (K < 2) throw std::invalid_argument("ensemble_moments: need at least two members");
  Moments mom;
  mom.partition = ens.partition;
  mom.mean = ens.members.colwise().mean().transpose();
  Matrix centered = ens.members.rowwise() - mom.mean.transpose();
  mom.cov = centered.transpose() * centered / static_cast<double>(K - 1);
  Matrix sym = 0.5 * (mom.cov + mom.cov.transpose());
  mom.cov = sym;
  return mom;
}

Ensemble perturbed_constant_ensemble(const Vector& value, double variance, int K,
                                     std::uint64_t seed, StatePartition partition) {
  if (variance < 0.0) throw std::invalid_argument("perturbed_constant_ensemble: variance must be nonnegative");
  if (K < 2) throw std::invalid_argument("perturbed_constant_ensemble: need at least two members");
  if (value.size() != partition.dim())
    throw std::invalid_argument("perturbed_constant_ensemble: value/partition dimension mismatch");
  const double sd = std::sqrt(variance);
  Rng rng(seed);
  MemberMatrix members(K, value.size());
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < value.size(); ++j) members(k, j) = value[j] + sd * rng.gaussian();
  return Ensemble{std::move(members), std::move(partition)};
}

std::pair<MemberMatrix, MemberMatrix> split_uv(const Ensemble& ens) {
  const auto& p = ens.partition;
  const int K = ens.size();
  MemberMatrix u(K, p.d1), v(K, p.d2);
  for (int j = 0; j < p.d1; ++j) u.col(j) = ens.members.col(p.unobserved_indices[j]);
  for (int j = 0; j < p.d2; ++j) v.col(j) = ens.members.col(p.observed_indices[j]);
  return {std::move(u), std::move(v)};
}

MemberMatrix join_uv(const MemberMatrix& u, const MemberMatrix& v, const StatePartition& p) {
  if (u.cols() != p.d1 || v.cols() != p.d2 || u.rows() != v.rows())
    throw std::invalid_argument("join_uv: block shapes inconsistent with partition");
  MemberMatrix members(u.rows(), p.dim());
  for (int j = 0; j < p.d1; ++j) members.col(p.unobserved_indices[j]) = u.col(j);
  for (int j = 0; j < p.d2; ++j) members.col(p.observed_indices[j]) = v.col(j);
  return members;
}

}  // namespace nlbu
