#include "ncp/gen_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ncp/errors.hpp"

namespace ncp {

void GenConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(sigma_mu > 0.0)) throw ConfigError("sigma_mu must be positive");
  if (!(sigma_x > 0.0)) throw ConfigError("sigma_x must be positive");
  if (dim_x < 1) throw ConfigError("dim_x must be at least 1");
  if (n_min < 1 || n_max < n_min) throw ConfigError("need 1 <= n_min <= n_max");
}

void Dataset::validate() const {
  if (true_assignment && static_cast<int>(true_assignment->size()) != size()) {
    throw ConfigError("assignment length does not match number of points");
  }
  if (true_means && true_means->cols() != points.cols()) {
    throw ConfigError("cluster means have the wrong dimension");
  }
  if (!points.allFinite()) throw ConfigError("dataset contains non-finite values");
}

Dataset Dataset::permuted(std::span<const int> order) const {
  if (static_cast<int>(order.size()) != size()) throw ConfigError("permutation length mismatch");
  Dataset out;
  out.points.resize(points.rows(), points.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.points.row(static_cast<Eigen::Index>(i)) = points.row(order[i]);
  if (true_assignment) out.true_assignment = true_assignment->permuted(order);
  // Means are indexed by cluster; reorder them to follow the new labels.
  if (true_means && true_assignment) {
    Eigen::MatrixXd means(true_means->rows(), true_means->cols());
    std::vector<bool> seen(static_cast<std::size_t>(true_means->rows()), false);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const int old_label = (*true_assignment)[static_cast<std::size_t>(order[i])];
      const int new_label = (*out.true_assignment)[i];
      if (!seen[static_cast<std::size_t>(new_label)]) {
        means.row(new_label) = true_means->row(old_label);
        seen[static_cast<std::size_t>(new_label)] = true;
      }
    }
    out.true_means = std::move(means);
  }
  return out;
}

double PartitionDistribution::probability_of(const Assignment& a) const {
  for (const auto& [assignment, p] : entries) {
    if (assignment == a) return p;
  }
  return 0.0;
}

double PartitionDistribution::expected_clusters() const {
  double e = 0.0;
  for (const auto& [assignment, p] : entries) e += p * assignment.num_clusters();
  return e;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

Eigen::VectorXd normalize_log_weights(std::span<const double> log_weights) {
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) throw NumericError("cannot normalize: no finite log weight");
  Eigen::VectorXd p(static_cast<Eigen::Index>(log_weights.size()));
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    p(static_cast<Eigen::Index>(i)) = std::exp(log_weights[i] - lse);
  }
  return p;
}

double cluster_log_marginal(const ClusterStats& stats, const GenConfig& cfg) {
  if (stats.count == 0) return 0.0;
  const double var_x = cfg.sigma_x * cfg.sigma_x;
  const double var_mu = cfg.sigma_mu * cfg.sigma_mu;
  const double n = stats.count;
  // Posterior variance of the cluster mean, per coordinate.
  const double var_post = 1.0 / (1.0 / var_mu + n / var_x);
  const auto dim = static_cast<double>(stats.sum.size());
  const double per_dim_const =
      -0.5 * n * std::log(2.0 * std::numbers::pi * var_x) + 0.5 * std::log(var_post / var_mu);
  return dim * per_dim_const + var_post * stats.sum.squaredNorm() / (2.0 * var_x * var_x) -
         stats.sum_sq.sum() / (2.0 * var_x);
}

double log_predictive(const ClusterStats& stats, const Eigen::Ref<const Eigen::VectorXd>& x,
                      const GenConfig& cfg) {
  ClusterStats grown = stats.count == 0 ? ClusterStats(static_cast<int>(x.size())) : stats;
  grown.add(x);
  return cluster_log_marginal(grown, cfg) - cluster_log_marginal(stats, cfg);
}

Assignment sample_crp(double alpha, int n, Stream& rng) {
  if (!(alpha > 0.0) || n < 1) throw ConfigError("sample_crp: need alpha > 0 and n >= 1");
  std::vector<int> labels;
  std::vector<double> weights;  // cluster sizes, then alpha
  labels.reserve(static_cast<std::size_t>(n));
  labels.push_back(0);
  weights.push_back(1.0);
  for (int i = 1; i < n; ++i) {
    weights.push_back(alpha);
    const auto k = static_cast<int>(rng.categorical(weights));
    weights.pop_back();
    if (k == static_cast<int>(weights.size())) {
      weights.push_back(1.0);
    } else {
      weights[static_cast<std::size_t>(k)] += 1.0;
    }
    labels.push_back(k);
  }
  return Assignment::from_labels(std::move(labels));
}

double crp_log_prob(std::span<const int> labels, int num_clusters, double alpha) {
  std::vector<int> sizes(static_cast<std::size_t>(num_clusters), 0);
  for (int c : labels) ++sizes[static_cast<std::size_t>(c)];
  double lp = num_clusters * std::log(alpha);
  for (int nk : sizes) lp += std::lgamma(static_cast<double>(nk));
  for (std::size_t i = 0; i < labels.size(); ++i) lp -= std::log(static_cast<double>(i) + alpha);
  return lp;
}

double crp_log_prob(const Assignment& a, double alpha) {
  return crp_log_prob(a.labels(), a.num_clusters(), alpha);
}

double crp_expected_clusters(double alpha, int n) {
  double e = 0.0;
  for (int i = 1; i <= n; ++i) e += alpha / (alpha + i - 1);
  return e;
}

Dataset sample_dataset_given(const GenConfig& cfg, const Assignment& a, Stream& rng) {
  Dataset d;
  const int k = a.num_clusters();
  Eigen::MatrixXd means(k, cfg.dim_x);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < cfg.dim_x; ++j) means(c, j) = rng.normal(0.0, cfg.sigma_mu);
  }
  d.points.resize(static_cast<Eigen::Index>(a.size()), cfg.dim_x);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int j = 0; j < cfg.dim_x; ++j) {
      d.points(static_cast<Eigen::Index>(i), j) = rng.normal(means(a[i], j), cfg.sigma_x);
    }
  }
  d.true_assignment = a;
  d.true_means = std::move(means);
  return d;
}

Dataset sample_dataset(const GenConfig& cfg, Stream& rng) {
  cfg.validate();
  const auto n = static_cast<int>(rng.uniform_int(cfg.n_min, cfg.n_max));
  const Assignment a = sample_crp(cfg.alpha, n, rng);
  return sample_dataset_given(cfg, a, rng);
}

double marginal_log_lik(const Eigen::MatrixXd& points, std::span<const int> labels,
                        int num_clusters, const GenConfig& cfg) {
  if (static_cast<Eigen::Index>(labels.size()) != points.rows()) {
    throw ConfigError("assignment length does not match number of points");
  }
  const int dim = static_cast<int>(points.cols());
  std::vector<ClusterStats> stats(static_cast<std::size_t>(num_clusters), ClusterStats(dim));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    stats[static_cast<std::size_t>(labels[i])].add(points.row(static_cast<Eigen::Index>(i)).transpose());
  }
  double ll = 0.0;
  for (const auto& s : stats) ll += cluster_log_marginal(s, cfg);
  return ll;
}

double marginal_log_lik(const Dataset& data, const Assignment& a, const GenConfig& cfg) {
  if (data.dim() != cfg.dim_x) throw ConfigError("dataset dimension differs from config dim_x");
  return marginal_log_lik(data.points, a.labels(), a.num_clusters(), cfg);
}

double joint_log_prob(const Dataset& data, const Assignment& a, const GenConfig& cfg) {
  return crp_log_prob(a, cfg.alpha) + marginal_log_lik(data, a, cfg);
}

PartitionDistribution exact_posterior(const Dataset& data, const GenConfig& cfg) {
  if (data.size() > kEnumerationGuard) {
    throw GuardError("exact_posterior: N=" + std::to_string(data.size()) +
                     " exceeds enumeration guard " + std::to_string(kEnumerationGuard));
  }
  if (data.dim() != cfg.dim_x) throw ConfigError("dataset dimension differs from config dim_x");
  std::vector<Assignment> parts = enumerate_assignments(data.size());
  std::vector<double> log_joint;
  log_joint.reserve(parts.size());
  for (const auto& a : parts) log_joint.push_back(joint_log_prob(data, a, cfg));
  const Eigen::VectorXd p = normalize_log_weights(log_joint);
  PartitionDistribution dist;
  dist.entries.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    dist.entries.emplace_back(std::move(parts[i]), p(static_cast<Eigen::Index>(i)));
  }
  dist.total = p.sum();
  return dist;
}

Eigen::VectorXd exact_conditional(const Dataset& data, const Assignment& prefix,
                                  const GenConfig& cfg) {
  const int n_total = data.size();
  const int assigned = static_cast<int>(prefix.size());
  if (assigned < 1 || assigned >= n_total) {
    throw ConfigError("exact_conditional: prefix must cover 1..N-1 points");
  }
  if (data.dim() != cfg.dim_x) throw ConfigError("dataset dimension differs from config dim_x");
  const int k = prefix.num_clusters();
  const bool last_point = assigned + 1 == n_total;
  if (!last_point && n_total > kEnumerationGuard) {
    throw GuardError("exact_conditional: N=" + std::to_string(n_total) +
                     " exceeds enumeration guard for a non-final point");
  }
  // Per-candidate log joints, then log-sum over completions per candidate.
  std::vector<std::vector<double>> per_candidate(static_cast<std::size_t>(k) + 1);
  for_each_completion(prefix.labels(), n_total, [&](std::span<const int> labels) {
    const int kk = *std::max_element(labels.begin(), labels.end()) + 1;
    const double lj = crp_log_prob(labels, kk, cfg.alpha) +
                      marginal_log_lik(data.points, labels, kk, cfg);
    per_candidate[static_cast<std::size_t>(labels[static_cast<std::size_t>(assigned)])].push_back(lj);
  });
  std::vector<double> log_marg;
  for (const auto& v : per_candidate) log_marg.push_back(log_sum_exp(v));
  return normalize_log_weights(log_marg);
}

}  // namespace ncp
