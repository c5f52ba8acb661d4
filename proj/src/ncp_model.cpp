#include "ncp/ncp_model.hpp"

#include <cmath>

#include "ncp/errors.hpp"

namespace ncp {

void NcpArchitecture::validate() const {
  h.validate();
  g.validate();
  f.validate();
  if (g.in_dim != h.out_dim) throw ConfigError("architecture: g input must equal d_h");
  if (f.in_dim != g.out_dim + 2 * h.out_dim) {
    throw ConfigError("architecture: f input must equal d_g + 2 d_h");
  }
  if (f.out_dim != 1) throw ConfigError("architecture: f must output a scalar logit");
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) {
    throw ConfigError("architecture: input_scale must be positive and finite");
  }
  if (!(pool_scale > 0.0) || !std::isfinite(pool_scale)) {
    throw ConfigError("architecture: pool_scale must be positive and finite");
  }
}

NcpArchitecture NcpArchitecture::paper(int dim_x) {
  NcpArchitecture a;
  a.h = {dim_x, 256, std::vector<int>(4, 128)};
  a.g = {256, 512, std::vector<int>(5, 128)};
  a.f = {512 + 2 * 256, 1, std::vector<int>(5, 128)};
  return a;
}

NcpArchitecture NcpArchitecture::desk(int dim_x) {
  NcpArchitecture a = uniform(dim_x, 32, 64, 64, 3);
  a.input_scale = 0.1;  // prior spread of the default model is about 10
  // Keeps g's first layer out of its homogeneous regime for clusters of
  // up to ~50 points, so cluster sizes stay visible to f.
  a.pool_scale = 0.05;
  return a;
}

NcpArchitecture NcpArchitecture::uniform(int dim_x, int dim_h, int dim_g, int width, int depth) {
  const std::vector<int> hidden(static_cast<std::size_t>(depth), width);
  NcpArchitecture a;
  a.h = {dim_x, dim_h, hidden};
  a.g = {dim_h, dim_g, hidden};
  a.f = {dim_g + 2 * dim_h, 1, hidden};
  return a;
}

NcpModel::NcpModel(const NcpArchitecture& arch)
    : h_net((arch.validate(), arch.h)), g_net(arch.g), f_net(arch.f), input_scale(arch.input_scale),
      pool_scale(arch.pool_scale) {}

NcpModel make_model(const NcpArchitecture& arch, Stream& rng) {
  NcpModel model(arch);
  Stream h_rng = rng.split(0), g_rng = rng.split(1), f_rng = rng.split(2);
  init_params(model.h_net, h_rng);
  init_params(model.g_net, g_rng);
  init_params(model.f_net, f_rng);
  return model;
}

Eigen::MatrixXd encode_points(const NcpModel& model, const Eigen::MatrixXd& points) {
  if (points.cols() != model.dim_x()) {
    throw ConfigError("encode_points: point dimension " + std::to_string(points.cols()) +
                      " differs from model d_x " + std::to_string(model.dim_x()));
  }
  if (points.rows() == 0) return Eigen::MatrixXd(0, model.dim_h());
  return model.h_net.forward(points * model.input_scale);
}

SamplerState init_state(const NcpModel& model, Eigen::MatrixXd encodings) {
  if (encodings.rows() < 1) throw ConfigError("init_state: need at least one point");
  std::vector<int> first{0};
  return recompute_state(model, encodings, first);
}

SamplerState recompute_state(const NcpModel& model, const Eigen::MatrixXd& encodings,
                             std::span<const int> labels) {
  if (labels.empty()) throw ConfigError("recompute_state: empty prefix");
  if (static_cast<Eigen::Index>(labels.size()) > encodings.rows()) {
    throw ConfigError("recompute_state: prefix longer than dataset");
  }
  const Assignment checked = Assignment::from_labels({labels.begin(), labels.end()});
  const auto n = static_cast<Eigen::Index>(encodings.rows());
  SamplerState s;
  s.encodings = encodings;
  s.labels.assign(labels.begin(), labels.end());
  s.num_clusters = checked.num_clusters();
  s.cluster_sums = Eigen::MatrixXd::Zero(n, model.dim_h());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s.cluster_sums.row(labels[i]) += encodings.row(static_cast<Eigen::Index>(i));
  }
  s.cluster_codes = Eigen::MatrixXd::Zero(n, model.dim_g());
  s.cluster_codes.topRows(s.num_clusters) = model.g_net.forward(s.cluster_sums.topRows(s.num_clusters) * model.pool_scale);
  s.global = Eigen::VectorXd::Zero(model.dim_g());
  for (int k = 0; k < s.num_clusters; ++k) s.global += s.cluster_codes.row(k).transpose();
  s.unassigned = Eigen::VectorXd::Zero(model.dim_h());
  for (auto i = static_cast<Eigen::Index>(labels.size()); i < n; ++i) {
    s.unassigned += encodings.row(i).transpose();
  }
  return s;
}

Eigen::VectorXd candidate_logits(const NcpModel& model, const SamplerState& state) {
  if (state.complete()) throw ConfigError("candidate_logits: every point is already assigned");
  const int n = state.num_assigned();
  const int k_count = state.num_clusters;
  const int dh = model.dim_h();
  const int dg = model.dim_g();
  const auto h_n = state.encodings.row(n);

  Eigen::MatrixXd grown(k_count + 1, dh);
  grown.topRows(k_count) = state.cluster_sums.topRows(k_count).rowwise() + h_n;
  grown.row(k_count) = h_n;
  const Eigen::MatrixXd grown_codes = model.g_net.forward(grown * model.pool_scale);

  Eigen::MatrixXd f_in(k_count + 1, dg + 2 * dh);
  const Eigen::RowVectorXd q = state.unassigned.transpose() - h_n;
  for (int k = 0; k <= k_count; ++k) {
    if (k < k_count) {
      f_in.row(k).head(dg) = state.global.transpose() - state.cluster_codes.row(k) + grown_codes.row(k);
    } else {
      f_in.row(k).head(dg) = state.global.transpose() + grown_codes.row(k);
    }
    f_in.row(k).segment(dg, dh) = q;
    f_in.row(k).tail(dh) = h_n;
  }
  return model.f_net.forward(f_in).col(0);
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp();
  return p / p.sum();
}

}  // namespace

Eigen::VectorXd conditional_probs(const NcpModel& model, const SamplerState& state) {
  const Eigen::VectorXd logits = candidate_logits(model, state);
  if (!logits.allFinite()) throw NumericError("conditional_probs: non-finite logit");
  return softmax(logits);
}

void assign_point(const NcpModel& model, SamplerState& state, int k) {
  if (state.complete()) throw ConfigError("assign_point: every point is already assigned");
  if (k < 0 || k > state.num_clusters) {
    throw ConfigError("assign_point: cluster " + std::to_string(k + 1) + " is not a valid choice");
  }
  const int n = state.num_assigned();
  const auto h_n = state.encodings.row(n);
  state.unassigned -= h_n.transpose();
  if (k == state.num_clusters) {
    ++state.num_clusters;
    state.cluster_sums.row(k) = h_n;
  } else {
    state.cluster_sums.row(k) += h_n;
    state.global -= state.cluster_codes.row(k).transpose();
  }
  state.cluster_codes.row(k) = model.g_net.forward(state.cluster_sums.row(k) * model.pool_scale);
  state.global += state.cluster_codes.row(k).transpose();
  state.labels.push_back(k);
  if (++state.assignments_since_refresh >= kStateRefreshInterval) {
    state = recompute_state(model, state.encodings, state.labels);
  }
}

SampleTrace sample_assignment(const NcpModel& model, const Eigen::MatrixXd& points, Stream& rng,
                              const SampleOptions& options) {
  if (points.rows() < 1) throw ConfigError("sample_assignment: need at least one point");
  SamplerState state = init_state(model, encode_points(model, points));
  SampleTrace trace;
  while (!state.complete()) {
    const Eigen::VectorXd p = conditional_probs(model, state);
    trace.f_evaluations += p.size();
    int k;
    if (options.greedy) {
      p.maxCoeff(&k);
    } else {
      k = static_cast<int>(rng.categorical({p.data(), static_cast<std::size_t>(p.size())}));
    }
    trace.log_q += std::log(p(k));
    if (options.record_probs) trace.step_probs.push_back(p);
    assign_point(model, state, k);
  }
  trace.assignment = Assignment::from_labels(std::move(state.labels));
  return trace;
}

double log_prob_of(const NcpModel& model, const Eigen::MatrixXd& points, const Assignment& a) {
  if (static_cast<Eigen::Index>(a.size()) != points.rows()) {
    throw ConfigError("log_prob_of: assignment length does not match dataset");
  }
  if (a.empty()) return 0.0;
  SamplerState state = init_state(model, encode_points(model, points));
  double lq = 0.0;
  for (std::size_t n = 1; n < a.size(); ++n) {
    const Eigen::VectorXd p = conditional_probs(model, state);
    lq += std::log(p(a[n]));
    assign_point(model, state, a[n]);
  }
  return lq;
}

Eigen::VectorXd last_point_conditional(const NcpModel& model, const Eigen::MatrixXd& points,
                                       const Assignment& prefix) {
  if (prefix.empty() || static_cast<Eigen::Index>(prefix.size()) + 1 != points.rows()) {
    throw ConfigError("last_point_conditional: prefix must cover all but the last point");
  }
  SamplerState state = recompute_state(model, encode_points(model, points), prefix.labels());
  return conditional_probs(model, state);
}

}  // namespace ncp
