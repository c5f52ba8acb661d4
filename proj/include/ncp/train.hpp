#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ncp/checkpoint.hpp"
#include "ncp/gen_model.hpp"
#include "ncp/ncp_model.hpp"
#include "ncp/sequence_graph.hpp"

namespace ncp {

/// Monte Carlo structure of the expected-NLL objective plus optimizer and
/// bookkeeping settings. Every mini-batch draws `n_draws` values of N; for
/// each, `assignment_draws` CRP assignments; for each, `datasets` datasets
/// (fresh means and points); for each, `permutations` orderings.
struct TrainConfig {
  GenConfig gen;
  int n_draws = 1;
  int assignment_draws = 1;
  int datasets = 48;
  int permutations = 8;
  std::int64_t iterations = 20000;
  AdamConfig adam;
  /// Global-norm gradient clip; 0 disables.
  double grad_clip = 0.0;
  std::int64_t diag_every = 1;
  std::int64_t checkpoint_every = 0;
  bool rao_blackwell = false;
  int rb_tail_length = 3;
  /// Largest number of tail completions enumerated for one target sweep.
  std::uint64_t rb_budget = 50000;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;

  /// Batch recipe and step sizes of the original experiments.
  static TrainConfig paper(int dim_x);
  /// Single-core profile: smaller batches mixing four N values, larger early steps.
  static TrainConfig desk(int dim_x);
};

struct DiagnosticsRecord {
  std::int64_t iteration = 0;
  double nll = 0.0;
  double accuracy = 0.0;
  double perm_variance = 0.0;
  double seconds = 0.0;
};

struct MinibatchResult {
  /// Mean over sequences of -sum_n log q (or the cross-entropy at
  /// Rao-Blackwellized positions).
  double loss = 0.0;
  NcpGradients grads;
  double accuracy = 0.0;
  /// Mean over datasets of the sample variance of log q across orderings.
  double perm_variance = 0.0;
  int n = 0;
};

/// Thrown when a mini-batch produces a non-finite loss or gradient;
/// `dataset_text` holds the offending dataset in the dataset file format.
struct NonFiniteLoss : NumericError {
  NonFiniteLoss(const std::string& what, std::string text)
      : NumericError(what), dataset_text(std::move(text)) {}
  std::string dataset_text;
};

MinibatchResult nll_minibatch(const NcpModel& model, const TrainConfig& cfg, Stream& rng);

/// Exact p(c_m | c_{1:m-1}, x) for every m in [first, N) along `labels`,
/// from one enumeration of the completions of labels[0..first). Positions
/// are zero-based. Returns nullopt when the enumeration exceeds `budget`.
std::optional<std::vector<Eigen::VectorXd>> rb_targets(const Eigen::MatrixXd& points,
                                                       const Assignment& labels, int first,
                                                       const GenConfig& cfg,
                                                       std::uint64_t budget);

/// Cross-entropy sum_{m >= first} -sum_k t_mk log q(c_m = k | labels_{<m}, x)
/// in the identity ordering; gradients are added into `grads`.
double rb_loss(const NcpModel& model, const Eigen::MatrixXd& points, const Assignment& labels,
               int first, const std::vector<Eigen::VectorXd>& targets, NcpGradients& grads);

/// Sample variance of log q(c_pi | x_pi) over `n_perms` random global
/// orderings of a labelled dataset.
double permutation_variance(const NcpModel& model, const Eigen::MatrixXd& points,
                            const Assignment& labels, int n_perms, Stream& rng);

struct TrainHooks {
  std::function<void(const DiagnosticsRecord&)> on_record;
  std::function<void(const NcpModel&, const TrainerState&)> on_checkpoint;
};

/// Runs ADAM from `resume` (or from scratch) up to cfg.iterations total.
/// Iteration i draws from Stream(cfg.seed).split(i), so an interrupted and
/// resumed run reproduces the uninterrupted one exactly.
TrainerState train(NcpModel& model, const TrainConfig& cfg, std::optional<TrainerState> resume,
                   const TrainHooks& hooks = {});

/// Trailing-window means of a series (window clipped at the start).
std::vector<double> sliding_mean(const std::vector<double>& values, std::size_t window);

}  // namespace ncp
