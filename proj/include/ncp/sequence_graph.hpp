#pragma once

// Teacher-forced evaluation of the NCP conditionals along a fixed ordering
// and assignment, batched into one g pass and one f pass per sequence, with
// exact reverse-mode gradients back to the point encodings.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "ncp/ncp_model.hpp"

namespace ncp {

/// Flat gradients for the three networks, laid out like their parameters.
struct NcpGradients {
  Eigen::VectorXd h;
  Eigen::VectorXd g;
  Eigen::VectorXd f;

  NcpGradients() = default;
  explicit NcpGradients(const NcpModel& model);

  void set_zero();
  NcpGradients& operator+=(const NcpGradients& other);
  NcpGradients& operator*=(double s);
  double squared_norm() const;
  bool all_finite() const;
};

/// One ordering of a dataset: point `order[i]` is visited i-th and receives
/// label `labels[i]` (canonical in visiting order). `targets[i]`, when set,
/// replaces the one-hot target of step i (i >= 1) with a distribution over
/// that step's K_i + 1 candidates.
struct SequenceSpec {
  std::vector<int> order;
  Assignment labels;
  std::vector<std::optional<Eigen::VectorXd>> targets;
  /// Steps before this index are evaluated but excluded from the loss.
  int first_scored = 1;
};

struct SequenceResult {
  /// -sum_{i>=1} sum_k target_k log q_k
  double loss = 0.0;
  /// sum_{i>=1} log q(labels[i])
  double log_q = 0.0;
  /// Steps whose argmax equals the label.
  int correct = 0;
  int steps = 0;
  /// Per-step conditionals, when requested.
  std::vector<Eigen::VectorXd> probs;
};

/// Forward only.
SequenceResult evaluate_sequence(const NcpModel& model, const Eigen::MatrixXd& encodings,
                                 const SequenceSpec& seq, bool keep_probs = false);

/// Forward and backward. Adds d loss / d encodings (rows indexed like
/// `encodings`) into `d_encodings`, and g/f parameter gradients into
/// `grads` (the h part is untouched), all scaled by `weight`.
SequenceResult backprop_sequence(const NcpModel& model, const Eigen::MatrixXd& encodings,
                                 const SequenceSpec& seq, double weight,
                                 Eigen::MatrixXd& d_encodings, NcpGradients& grads);

struct DatasetResult {
  std::vector<SequenceResult> sequences;
};

/// Encodes `points` once, runs every sequence, and back-propagates through
/// h once with the accumulated encoding gradient. Each sequence's loss is
/// scaled by `weight` in the gradient.
DatasetResult backprop_dataset(const NcpModel& model, const Eigen::MatrixXd& points,
                               std::span<const SequenceSpec> sequences, double weight,
                               NcpGradients& grads);

}  // namespace ncp
