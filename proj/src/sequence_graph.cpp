#include "ncp/sequence_graph.hpp"

#include <algorithm>
#include <cmath>

#include "ncp/errors.hpp"

namespace ncp {

NcpGradients::NcpGradients(const NcpModel& model)
    : h(Eigen::VectorXd::Zero(model.h_net.params().size())),
      g(Eigen::VectorXd::Zero(model.g_net.params().size())),
      f(Eigen::VectorXd::Zero(model.f_net.params().size())) {}

void NcpGradients::set_zero() {
  h.setZero();
  g.setZero();
  f.setZero();
}

NcpGradients& NcpGradients::operator+=(const NcpGradients& other) {
  h += other.h;
  g += other.g;
  f += other.f;
  return *this;
}

NcpGradients& NcpGradients::operator*=(double s) {
  h *= s;
  g *= s;
  f *= s;
  return *this;
}

double NcpGradients::squared_norm() const {
  return h.squaredNorm() + g.squaredNorm() + f.squaredNorm();
}

bool NcpGradients::all_finite() const { return h.allFinite() && g.allFinite() && f.allFinite(); }

namespace {

// Row bookkeeping for one sequence. Step 0 owns g row 0 (its single
// candidate, the first cluster). Step i >= 1 owns g rows
// [g_first[i], g_first[i] + cand[i]) holding H_k + h_i for k = 0..K_i, and
// f rows [f_first[i], f_first[i] + cand[i]).
struct Plan {
  int length = 0;
  std::vector<int> cand;
  std::vector<int> g_first;
  std::vector<int> f_first;
  // Rows of g(H_k) for the K_i existing clusters at step i.
  std::vector<int> state_offset;
  std::vector<int> state_rows;
  Eigen::MatrixXd g_in;
  Eigen::MatrixXd suffix;  // row i = Q_i = sum_{j>i} h_{order[j]}
  int f_rows = 0;
};

void check_sequence(const NcpModel& model, const Eigen::MatrixXd& enc, const SequenceSpec& seq) {
  const auto n = static_cast<std::size_t>(enc.rows());
  if (enc.cols() != model.dim_h()) throw ConfigError("sequence: encoding width differs from d_h");
  if (seq.order.size() != n || seq.labels.size() != n) {
    throw ConfigError("sequence: order/labels length differs from dataset");
  }
  std::vector<bool> seen(n, false);
  for (int p : seq.order) {
    if (p < 0 || static_cast<std::size_t>(p) >= n || seen[static_cast<std::size_t>(p)]) {
      throw ConfigError("sequence: order is not a permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  if (!seq.targets.empty() && seq.targets.size() != n) {
    throw ConfigError("sequence: targets must be empty or one per step");
  }
}

Plan make_plan(const Eigen::MatrixXd& enc, const SequenceSpec& seq) {
  Plan plan;
  const int n = static_cast<int>(seq.order.size());
  plan.length = n;
  plan.cand.assign(static_cast<std::size_t>(n), 1);
  plan.g_first.assign(static_cast<std::size_t>(n), 0);
  plan.f_first.assign(static_cast<std::size_t>(n), 0);
  plan.state_offset.assign(static_cast<std::size_t>(n) + 1, 0);

  int rows = 1;
  int k_count = 1;
  for (int i = 1; i < n; ++i) {
    plan.cand[static_cast<std::size_t>(i)] = k_count + 1;
    rows += k_count + 1;
    if (seq.labels[static_cast<std::size_t>(i)] == k_count) ++k_count;
  }
  const auto dh = enc.cols();
  plan.g_in.resize(rows, dh);
  plan.suffix = Eigen::MatrixXd::Zero(n, dh);
  for (int i = n - 2; i >= 0; --i) {
    plan.suffix.row(i) = plan.suffix.row(i + 1) + enc.row(seq.order[static_cast<std::size_t>(i) + 1]);
  }

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(std::max(k_count, 1), dh);
  std::vector<int> state_row(static_cast<std::size_t>(k_count), -1);
  const auto h0 = enc.row(seq.order[0]);
  plan.g_in.row(0) = h0;
  sums.row(0) = h0;
  state_row[0] = 0;
  k_count = 1;
  int row = 1;
  int f_row = 0;
  for (int i = 1; i < n; ++i) {
    const auto hi = enc.row(seq.order[static_cast<std::size_t>(i)]);
    plan.state_offset[static_cast<std::size_t>(i)] = static_cast<int>(plan.state_rows.size());
    plan.state_rows.insert(plan.state_rows.end(), state_row.begin(), state_row.begin() + k_count);
    plan.g_first[static_cast<std::size_t>(i)] = row;
    plan.f_first[static_cast<std::size_t>(i)] = f_row;
    for (int k = 0; k < k_count; ++k) plan.g_in.row(row + k) = sums.row(k) + hi;
    plan.g_in.row(row + k_count) = hi;
    const int c = seq.labels[static_cast<std::size_t>(i)];
    sums.row(c) += hi;
    state_row[static_cast<std::size_t>(c)] = row + c;
    if (c == k_count) ++k_count;
    row += plan.cand[static_cast<std::size_t>(i)];
    f_row += plan.cand[static_cast<std::size_t>(i)];
  }
  plan.state_offset[static_cast<std::size_t>(n)] = static_cast<int>(plan.state_rows.size());
  plan.f_rows = f_row;
  return plan;
}

Eigen::MatrixXd make_f_input(const Plan& plan, const Eigen::MatrixXd& enc, const SequenceSpec& seq,
                             const Eigen::MatrixXd& g_out) {
  const auto dg = g_out.cols();
  const auto dh = enc.cols();
  Eigen::MatrixXd f_in(plan.f_rows, dg + 2 * dh);
  Eigen::RowVectorXd global(dg);
  for (int i = 1; i < plan.length; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const int k_count = plan.cand[si] - 1;
    const int* states = plan.state_rows.data() + plan.state_offset[si];
    global.setZero();
    for (int k = 0; k < k_count; ++k) global += g_out.row(states[k]);
    const auto hi = enc.row(seq.order[si]);
    for (int k = 0; k <= k_count; ++k) {
      const int r = plan.f_first[si] + k;
      const int gr = plan.g_first[si] + k;
      if (k < k_count) {
        f_in.row(r).head(dg) = global - g_out.row(states[k]) + g_out.row(gr);
      } else {
        f_in.row(r).head(dg) = global + g_out.row(gr);
      }
      f_in.row(r).segment(dg, dh) = plan.suffix.row(i);
      f_in.row(r).tail(dh) = hi;
    }
  }
  return f_in;
}

// Fills per-step results and, when `d_logits` is given, d loss / d logit.
SequenceResult score(const Plan& plan, const SequenceSpec& seq, const Eigen::VectorXd& logits,
                     bool keep_probs, Eigen::VectorXd* d_logits) {
  SequenceResult res;
  if (d_logits) d_logits->setZero(logits.size());
  for (int i = 1; i < plan.length; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const int first = plan.f_first[si];
    const int m = plan.cand[si];
    const auto z = logits.segment(first, m);
    const double zmax = z.maxCoeff();
    const Eigen::VectorXd e = (z.array() - zmax).exp();
    const double log_norm = zmax + std::log(e.sum());
    const Eigen::VectorXd logp = z.array() - log_norm;
    const Eigen::VectorXd p = logp.array().exp();
    const int label = seq.labels[si];
    res.log_q += logp(label);
    int best;
    p.maxCoeff(&best);
    if (best == label) ++res.correct;
    ++res.steps;
    if (keep_probs) res.probs.push_back(p);
    if (i < seq.first_scored) continue;
    const bool soft = !seq.targets.empty() && seq.targets[si].has_value();
    if (soft) {
      const Eigen::VectorXd& t = *seq.targets[si];
      if (t.size() != m) throw ConfigError("sequence: target length differs from candidate count");
      res.loss -= t.dot(logp);
      if (d_logits) d_logits->segment(first, m) = p - t;
    } else {
      res.loss -= logp(label);
      if (d_logits) {
        d_logits->segment(first, m) = p;
        (*d_logits)(first + label) -= 1.0;
      }
    }
  }
  return res;
}

}  // namespace

SequenceResult evaluate_sequence(const NcpModel& model, const Eigen::MatrixXd& encodings,
                                 const SequenceSpec& seq, bool keep_probs) {
  check_sequence(model, encodings, seq);
  if (seq.order.size() <= 1) return {};
  const Plan plan = make_plan(encodings, seq);
  const Eigen::MatrixXd g_out = model.g_net.forward(plan.g_in * model.pool_scale);
  const Eigen::VectorXd logits = model.f_net.forward(make_f_input(plan, encodings, seq, g_out)).col(0);
  return score(plan, seq, logits, keep_probs, nullptr);
}

SequenceResult backprop_sequence(const NcpModel& model, const Eigen::MatrixXd& encodings,
                                 const SequenceSpec& seq, double weight,
                                 Eigen::MatrixXd& d_encodings, NcpGradients& grads) {
  check_sequence(model, encodings, seq);
  if (seq.order.size() <= 1) return {};
  if (d_encodings.rows() != encodings.rows() || d_encodings.cols() != encodings.cols()) {
    throw ConfigError("backprop_sequence: d_encodings shape mismatch");
  }
  const Plan plan = make_plan(encodings, seq);
  MlpCache<double> g_cache, f_cache;
  const Eigen::MatrixXd g_out = model.g_net.forward(plan.g_in * model.pool_scale, g_cache);
  const Eigen::MatrixXd f_in = make_f_input(plan, encodings, seq, g_out);
  const Eigen::VectorXd logits = model.f_net.forward(f_in, f_cache).col(0);
  Eigen::VectorXd d_logits;
  SequenceResult res = score(plan, seq, logits, false, &d_logits);
  d_logits *= weight;

  const Eigen::MatrixXd d_f_in = model.f_net.backward(f_cache, d_logits, grads.f);
  const auto dg = g_out.cols();
  const auto dh = encodings.cols();
  const int n = plan.length;

  // f input -> g outputs, Q and h_i.
  Eigen::MatrixXd d_g_out = Eigen::MatrixXd::Zero(g_out.rows(), dg);
  Eigen::RowVectorXd d_global_sum(dg);
  Eigen::RowVectorXd d_q_running = Eigen::RowVectorXd::Zero(dh);
  for (int i = 1; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const int k_count = plan.cand[si] - 1;
    const int* states = plan.state_rows.data() + plan.state_offset[si];
    const auto block = d_f_in.middleRows(plan.f_first[si], plan.cand[si]);
    d_global_sum = block.leftCols(dg).colwise().sum();
    for (int k = 0; k < k_count; ++k) {
      d_g_out.row(states[k]) += d_global_sum - block.row(k).head(dg);
    }
    for (int k = 0; k <= k_count; ++k) d_g_out.row(plan.g_first[si] + k) += block.row(k).head(dg);
    // Q_i covers points visited after i; h_i enters directly.
    d_encodings.row(seq.order[si]) += d_q_running + block.middleCols(dg + dh, dh).colwise().sum();
    d_q_running += block.middleCols(dg, dh).colwise().sum();
  }

  // g inputs are pool_scale * (H_k + h_i): every candidate row at step i
  // contains h_i, and candidate k at step i contains every earlier member of cluster k.
  const Eigen::MatrixXd d_g_in = model.g_net.backward(g_cache, d_g_out, grads.g) * model.pool_scale;
  const int max_k = *std::max_element(plan.cand.begin(), plan.cand.end());
  Eigen::MatrixXd later = Eigen::MatrixXd::Zero(max_k + 1, dh);
  for (int i = n - 1; i >= 0; --i) {
    const auto si = static_cast<std::size_t>(i);
    const int c = seq.labels[si];
    auto d_point = d_encodings.row(seq.order[si]);
    d_point += later.row(c);
    const auto own = d_g_in.middleRows(plan.g_first[si], plan.cand[si]);
    d_point += own.colwise().sum();
    if (i >= 1) {
      for (int k = 0; k < plan.cand[si]; ++k) later.row(k) += own.row(k);
    }
  }
  return res;
}

DatasetResult backprop_dataset(const NcpModel& model, const Eigen::MatrixXd& points,
                               std::span<const SequenceSpec> sequences, double weight,
                               NcpGradients& grads) {
  MlpCache<double> h_cache;
  const Eigen::MatrixXd enc = model.h_net.forward(points * model.input_scale, h_cache);
  Eigen::MatrixXd d_enc = Eigen::MatrixXd::Zero(enc.rows(), enc.cols());
  DatasetResult out;
  out.sequences.reserve(sequences.size());
  for (const auto& seq : sequences) {
    out.sequences.push_back(backprop_sequence(model, enc, seq, weight, d_enc, grads));
  }
  model.h_net.backward(h_cache, d_enc, grads.h);
  return out;
}

}  // namespace ncp
