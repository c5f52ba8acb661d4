#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ncp/partition.hpp"
#include "ncp/rng.hpp"

namespace ncp {

/// DPMM with a conjugate isotropic Gaussian base measure:
///   N ~ U{n_min..n_max}, c ~ CRP(alpha), mu_k ~ N(0, sigma_mu^2 I),
///   x_i ~ N(mu_{c_i}, sigma_x^2 I).
struct GenConfig {
  double alpha = 0.7;
  double sigma_mu = 10.0;
  double sigma_x = 1.0;
  int dim_x = 2;
  int n_min = 5;
  int n_max = 100;

  /// Throws ConfigError on a violated invariant.
  void validate() const;
};

/// N observations (one per row) plus optional generative ground truth.
struct Dataset {
  Eigen::MatrixXd points;  // N x dim_x
  std::optional<Assignment> true_assignment;
  std::optional<Eigen::MatrixXd> true_means;  // K x dim_x

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }

  /// Dataset whose row i is row order[i] of this one; the assignment is
  /// permuted alongside and re-canonicalized.
  Dataset permuted(std::span<const int> order) const;
  void validate() const;
};

/// Normalized distribution over all canonical partitions of a fixed N.
struct PartitionDistribution {
  std::vector<std::pair<Assignment, double>> entries;
  double total = 0.0;

  double probability_of(const Assignment& a) const;
  /// E[K] under the distribution.
  double expected_clusters() const;
};

/// Sufficient statistics of one cluster: count, coordinate sums and sums of
/// squares.
struct ClusterStats {
  int count = 0;
  Eigen::VectorXd sum;
  Eigen::VectorXd sum_sq;

  explicit ClusterStats(int dim = 0)
      : sum(Eigen::VectorXd::Zero(dim)), sum_sq(Eigen::VectorXd::Zero(dim)) {}

  template <typename Derived>
  void add(const Eigen::MatrixBase<Derived>& x) {
    ++count;
    sum += x;
    sum_sq += x.cwiseProduct(x);
  }
  template <typename Derived>
  void remove(const Eigen::MatrixBase<Derived>& x) {
    --count;
    sum -= x;
    sum_sq -= x.cwiseProduct(x);
  }
};

/// log of the integral over mu of N(mu; 0, sigma_mu^2 I) prod_i N(x_i; mu,
/// sigma_x^2 I), including every normalization constant.
double cluster_log_marginal(const ClusterStats& stats, const GenConfig& cfg);

/// Log posterior-predictive density of x given a cluster's statistics, as a
/// ratio of cluster marginals. An empty cluster gives the prior predictive.
double log_predictive(const ClusterStats& stats, const Eigen::Ref<const Eigen::VectorXd>& x,
                      const GenConfig& cfg);

Assignment sample_crp(double alpha, int n, Stream& rng);

/// log [ alpha^K prod_k (n_k - 1)! / prod_{i=1}^N (i - 1 + alpha) ].
double crp_log_prob(const Assignment& a, double alpha);
double crp_log_prob(std::span<const int> labels, int num_clusters, double alpha);

/// E[K] under CRP(alpha) for n points: sum_{i=1}^n alpha / (alpha + i - 1).
double crp_expected_clusters(double alpha, int n);

Dataset sample_dataset(const GenConfig& cfg, Stream& rng);
/// Same as sample_dataset with N fixed and the assignment given.
Dataset sample_dataset_given(const GenConfig& cfg, const Assignment& a, Stream& rng);

double marginal_log_lik(const Dataset& data, const Assignment& a, const GenConfig& cfg);
double marginal_log_lik(const Eigen::MatrixXd& points, std::span<const int> labels,
                        int num_clusters, const GenConfig& cfg);

double joint_log_prob(const Dataset& data, const Assignment& a, const GenConfig& cfg);

PartitionDistribution exact_posterior(const Dataset& data, const GenConfig& cfg);

/// p(c_n = k | c_{1:n-1}, x) for k = 0..K (K = clusters in the prefix),
/// summing over every completion of c_{n+1:N}. `prefix` covers points
/// 0..n-2 (one-based n = prefix.size() + 1). For the last point any N is
/// allowed; otherwise N must be within the enumeration guard.
Eigen::VectorXd exact_conditional(const Dataset& data, const Assignment& prefix,
                                  const GenConfig& cfg);

double log_sum_exp(std::span<const double> values);
/// Softmax of log-weights, computed with max subtraction.
Eigen::VectorXd normalize_log_weights(std::span<const double> log_weights);

}  // namespace ncp
