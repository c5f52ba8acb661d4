#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ncp/gen_model.hpp"
#include "ncp/ncp_model.hpp"
#include "ncp/rng.hpp"

namespace ncp {

struct GibbsConfig {
  /// Total sweeps, burn-in included.
  std::int64_t n_sweeps = 1000;
  std::int64_t burn_in = 0;
  std::int64_t thinning = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One collapsed Gibbs sweep over points 0..N-1 for the conjugate Gaussian
/// DPMM. Emptied clusters are deleted on the spot; the result is canonical.
Assignment gibbs_sweep(const Eigen::MatrixXd& points, const GenConfig& cfg, const Assignment& a,
                       Stream& rng);

struct GibbsRun {
  std::vector<Assignment> samples;
  std::vector<int> num_clusters;  // K of each emitted sample
};

/// Chain started from a single cluster; emits every `thinning`-th sweep
/// after `burn_in`.
GibbsRun run_gibbs(const Eigen::MatrixXd& points, const GenConfig& cfg, const GibbsConfig& gcfg);

/// Draw from a proposal together with its log probability.
using Proposal = std::function<std::pair<Assignment, double>(Stream&)>;
using Statistic = std::function<double(const Assignment&)>;

struct IsEstimate {
  double estimate = 0.0;
  Eigen::VectorXd weights;  // normalized, sum to 1
  double ess = 0.0;
  std::vector<double> values;       // r(c_s)
  std::vector<double> log_weights;  // log p(c_s, x) - log q(c_s | x)
};

/// Self-normalized importance sampling with S draws; draw s uses
/// base.split(s), so results do not depend on `threads`.
IsEstimate importance_estimate(const Proposal& proposal, const Eigen::MatrixXd& points,
                               const GenConfig& cfg, const Statistic& statistic, std::int64_t samples,
                               const Stream& base, int threads = 1);
IsEstimate importance_estimate(const NcpModel& model, const Eigen::MatrixXd& points,
                               const GenConfig& cfg, const Statistic& statistic, std::int64_t samples,
                               const Stream& base, int threads = 1);

/// Exact-posterior sampler over an enumerated distribution. log q is
/// expressed as log p(c, x) - log p(x) so the importance ratio is exactly
/// log p(x) whenever the two logs are within a factor of two.
Proposal exact_posterior_proposal(const Eigen::MatrixXd& points, const GenConfig& cfg);

/// Standard deviation of the self-normalized estimate over `resamples`
/// bootstrap resamples of the (weight, value) pairs.
double bootstrap_standard_error(const IsEstimate& est, int resamples, Stream& rng);

double num_clusters_statistic(const Assignment& a);

struct MeanKConfig {
  std::vector<std::int64_t> budgets{100, 1000};
  int repetitions = 8;
  std::int64_t gibbs_burn_in = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct MeanKRow {
  std::string method;  // "gibbs" or "ncp_is"
  std::int64_t budget = 0;
  int repetition = 0;
  double estimate = 0.0;
  double seconds = 0.0;
};

struct MeanKSummary {
  std::string method;
  std::int64_t budget = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double mean_seconds = 0.0;
};

struct MeanKTable {
  std::vector<MeanKRow> rows;
  std::vector<MeanKSummary> summary;
};

/// E[K] by Gibbs (burn-in plus `budget` sweeps) and by NCP importance
/// sampling (`budget` draws), repeated per budget.
MeanKTable mean_k_experiment(const NcpModel& model, const Eigen::MatrixXd& points,
                             const GenConfig& cfg, const MeanKConfig& mcfg);

/// Linear-interpolated quantile (type 7) of unsorted values.
double quantile(std::vector<double> values, double q);

}  // namespace ncp
