#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ncp/gen_model.hpp"
#include "ncp/ndnet.hpp"
#include "ncp/partition.hpp"
#include "ncp/rng.hpp"

namespace ncp {

/// Shapes of the three networks:
///   h: R^{d_x} -> R^{d_h}            point encoder
///   g: R^{d_h} -> R^{d_g}            cluster encoder
///   f: R^{d_g + 2 d_h} -> R          logit of (G_k, Q, h_n), concatenated in that order
struct NcpArchitecture {
  MlpSpec h;
  MlpSpec g;
  MlpSpec f;
  /// Fixed factor applied to raw points before h.
  double input_scale = 1.0;
  /// Fixed factor applied to pooled encodings H_k before g.
  double pool_scale = 1.0;

  int dim_x() const { return h.in_dim; }
  int dim_h() const { return h.out_dim; }
  int dim_g() const { return g.out_dim; }
  void validate() const;

  /// Five-layer h (four hidden of 128, d_h = 256) and six-layer g and f
  /// (five hidden of 128, d_g = 512).
  static NcpArchitecture paper(int dim_x);
  /// Reduced widths suitable for single-core training in minutes, with
  /// inputs scaled by 0.1 and pooled encodings by 0.05.
  static NcpArchitecture desk(int dim_x);
  /// `depth` hidden layers of `width` in every network.
  static NcpArchitecture uniform(int dim_x, int dim_h, int dim_g, int width, int depth);
};

struct NcpModel {
  Mlpd h_net;
  Mlpd g_net;
  Mlpd f_net;
  double input_scale = 1.0;
  double pool_scale = 1.0;

  NcpModel() = default;
  explicit NcpModel(const NcpArchitecture& arch);

  NcpArchitecture architecture() const {
    return {h_net.spec(), g_net.spec(), f_net.spec(), input_scale, pool_scale};
  }
  int dim_x() const { return h_net.spec().in_dim; }
  int dim_h() const { return h_net.spec().out_dim; }
  int dim_g() const { return g_net.spec().out_dim; }
};

/// Fresh model with He-initialized networks; h, g, f use independent
/// child streams.
NcpModel make_model(const NcpArchitecture& arch, Stream& rng);

/// Row i = h(input_scale * x_i).
Eigen::MatrixXd encode_points(const NcpModel& model, const Eigen::MatrixXd& points);

/// Incrementally maintained invariants of a partial assignment.
///
/// With n points assigned (labels.size() == n) and K clusters:
///   cluster_sums.row(k) = H_k = sum of h_i over assigned i with c_i = k
///   cluster_codes.row(k) = g(pool_scale * H_k)
///   global = G = sum_k g(H_k)
///   unassigned = Q = sum_{i >= n} h_i
/// Only the first K rows of cluster_sums/cluster_codes are meaningful.
struct SamplerState {
  Eigen::MatrixXd encodings;
  Eigen::MatrixXd cluster_sums;
  Eigen::MatrixXd cluster_codes;
  Eigen::VectorXd global;
  Eigen::VectorXd unassigned;
  int num_clusters = 0;
  std::vector<int> labels;
  int assignments_since_refresh = 0;

  int size() const { return static_cast<int>(encodings.rows()); }
  int num_assigned() const { return static_cast<int>(labels.size()); }
  bool complete() const { return num_assigned() == size(); }
};

/// Incremental drift is bounded by rebuilding the state from scratch after
/// this many assignments.
inline constexpr int kStateRefreshInterval = 512;

/// First point in cluster 0: H_0 = h_0, G = g(h_0), Q = sum_{i>=1} h_i.
SamplerState init_state(const NcpModel& model, Eigen::MatrixXd encodings);

/// Logits f(G_k, Q_n, h_n) for the next point n and candidates k = 0..K,
/// where G_k = G - g(H_k) + g(H_k + h_n), with H_K = 0 and g(0) = 0, and
/// Q_n = Q - h_n. The state is not modified.
Eigen::VectorXd candidate_logits(const NcpModel& model, const SamplerState& state);
/// Softmax of candidate_logits.
Eigen::VectorXd conditional_probs(const NcpModel& model, const SamplerState& state);

/// Assigns the next point to cluster k (k == K opens a new cluster).
void assign_point(const NcpModel& model, SamplerState& state, int k);

/// Rebuilds H, g(H), G and Q by direct summation in ascending index order.
/// `labels` must be a non-empty canonical prefix.
SamplerState recompute_state(const NcpModel& model, const Eigen::MatrixXd& encodings,
                             std::span<const int> labels);

struct SampleTrace {
  Assignment assignment;
  std::vector<Eigen::VectorXd> step_probs;  // one per point n >= 1
  double log_q = 0.0;
  std::int64_t f_evaluations = 0;
};

struct SampleOptions {
  /// Take the argmax instead of sampling.
  bool greedy = false;
  /// Keep per-step probability vectors in the trace.
  bool record_probs = true;
};

SampleTrace sample_assignment(const NcpModel& model, const Eigen::MatrixXd& points, Stream& rng,
                              const SampleOptions& options = {});

/// Teacher-forced sum_n log q(c_n = a_n | a_{<n}, x) along the incremental
/// state path.
double log_prob_of(const NcpModel& model, const Eigen::MatrixXd& points, const Assignment& a);

/// q(c_N = k | c_{1:N-1}, x) for the last point given a full prefix.
Eigen::VectorXd last_point_conditional(const NcpModel& model, const Eigen::MatrixXd& points,
                                       const Assignment& prefix);

}  // namespace ncp
