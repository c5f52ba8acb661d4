#include "ncp/train.hpp"

#include <chrono>
#include <cmath>
#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include "ncp/dataset_io.hpp"
#include "ncp/errors.hpp"
#include "ncp/parallel.hpp"

namespace ncp {

void TrainConfig::validate() const {
  gen.validate();
  if (n_draws < 1 || assignment_draws < 1 || datasets < 1 || permutations < 1) {
    throw ConfigError("train: batch counts must be at least 1");
  }
  if (iterations < 0) throw ConfigError("train: iterations must be nonnegative");
  if (diag_every < 1) throw ConfigError("train: diag_every must be at least 1");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be nonnegative");
  if (rb_tail_length < 0) throw ConfigError("train: rb_tail_length must be nonnegative");
  if (grad_clip < 0.0) throw ConfigError("train: grad_clip must be nonnegative");
  if (threads < 1) throw ConfigError("train: threads must be at least 1");
  adam.schedule.validate();
}

TrainConfig TrainConfig::paper(int dim_x) {
  TrainConfig cfg;
  cfg.gen.dim_x = dim_x;
  cfg.gen.n_min = 5;
  cfg.gen.n_max = 100;
  return cfg;
}

TrainConfig TrainConfig::desk(int dim_x) {
  TrainConfig cfg;
  cfg.gen.dim_x = dim_x;
  cfg.gen.n_min = 5;
  cfg.gen.n_max = 50;
  cfg.n_draws = 4;
  cfg.datasets = 2;
  cfg.permutations = 4;
  cfg.iterations = 8000;
  cfg.adam.schedule.breakpoints = {4000};
  cfg.adam.schedule.lrs = {1e-3, 1e-4};
  return cfg;
}

namespace {

std::string dataset_text(const Eigen::MatrixXd& points, const Assignment& labels,
                         const GenConfig& gen) {
  std::ostringstream out;
  DatasetFile file{gen, Dataset{points, labels, std::nullopt}};
  write_dataset(out, file, Provenance{});
  return out.str();
}

struct DatasetJob {
  Eigen::MatrixXd points;
  Assignment labels;
  std::vector<SequenceSpec> sequences;
};

struct DatasetOutcome {
  NcpGradients grads;
  double loss = 0.0;
  int correct = 0;
  int steps = 0;
  double variance = 0.0;
};

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

MinibatchResult nll_minibatch(const NcpModel& model, const TrainConfig& cfg, Stream& rng) {
  // Build every job serially so the draws do not depend on thread count.
  std::vector<DatasetJob> jobs;
  int n_total = 0;
  for (int a = 0; a < cfg.n_draws; ++a) {
    const auto n = static_cast<int>(rng.uniform_int(cfg.gen.n_min, cfg.gen.n_max));
    n_total = n;
    for (int b = 0; b < cfg.assignment_draws; ++b) {
      const Assignment assignment = sample_crp(cfg.gen.alpha, n, rng);
      for (int d = 0; d < cfg.datasets; ++d) {
        Dataset data = sample_dataset_given(cfg.gen, assignment, rng);
        DatasetJob job{std::move(data.points), assignment, {}};
        for (int p = 0; p < cfg.permutations; ++p) {
          SequenceSpec seq;
          seq.order = rng.permutation(n);
          seq.labels = assignment.permuted(seq.order);
          job.sequences.push_back(std::move(seq));
        }
        jobs.push_back(std::move(job));
      }
    }
  }
  const double per_sequence = 1.0 / static_cast<double>(jobs.size() * static_cast<std::size_t>(cfg.permutations));

  if (cfg.rao_blackwell && cfg.rb_tail_length > 0) {
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
      DatasetJob& job = jobs[j];
      for (auto& seq : job.sequences) {
        const int n = static_cast<int>(seq.order.size());
        const int first = std::max(1, n - cfg.rb_tail_length);
        if (first >= n) continue;
        Eigen::MatrixXd ordered(n, job.points.cols());
        for (int i = 0; i < n; ++i) ordered.row(i) = job.points.row(seq.order[static_cast<std::size_t>(i)]);
        auto targets = rb_targets(ordered, seq.labels, first, cfg.gen, cfg.rb_budget);
        if (!targets) continue;
        seq.targets.assign(static_cast<std::size_t>(n), std::nullopt);
        for (int m = first; m < n; ++m) {
          seq.targets[static_cast<std::size_t>(m)] = std::move((*targets)[static_cast<std::size_t>(m - first)]);
        }
      }
    });
  }

  std::vector<DatasetOutcome> outcomes(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
    DatasetOutcome& out = outcomes[j];
    out.grads = NcpGradients(model);
    const DatasetResult res = backprop_dataset(model, jobs[j].points, jobs[j].sequences, per_sequence, out.grads);
    std::vector<double> log_qs;
    for (const auto& s : res.sequences) {
      out.loss += s.loss;
      out.correct += s.correct;
      out.steps += s.steps;
      log_qs.push_back(s.log_q);
    }
    out.variance = sample_variance(log_qs);
  });

  MinibatchResult result;
  result.grads = NcpGradients(model);
  result.n = n_total;
  int correct = 0, steps = 0;
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    const auto& out = outcomes[j];
    if (!std::isfinite(out.loss) || !out.grads.all_finite()) {
      throw NonFiniteLoss("non-finite loss or gradient in mini-batch",
                          dataset_text(jobs[j].points, jobs[j].labels, cfg.gen));
    }
    result.loss += out.loss;
    result.grads += out.grads;
    correct += out.correct;
    steps += out.steps;
    result.perm_variance += out.variance;
  }
  result.loss *= per_sequence;
  result.perm_variance /= static_cast<double>(outcomes.size());
  result.accuracy = steps > 0 ? static_cast<double>(correct) / steps : 1.0;
  return result;
}

std::optional<std::vector<Eigen::VectorXd>> rb_targets(const Eigen::MatrixXd& points,
                                                       const Assignment& labels, int first,
                                                       const GenConfig& cfg,
                                                       std::uint64_t budget) {
  const int n = static_cast<int>(points.rows());
  if (static_cast<int>(labels.size()) != n) throw ConfigError("rb_targets: labels/points mismatch");
  if (first < 1 || first >= n) throw ConfigError("rb_targets: first must lie in [1, N)");
  if (points.cols() != cfg.dim_x) throw ConfigError("rb_targets: dimension mismatch");
  const Assignment prefix = labels.prefix(static_cast<std::size_t>(first));
  if (completion_count(prefix.num_clusters(), n - first) > budget) return std::nullopt;

  // Candidates at position m along the conditioning labels: K_m + 1.
  std::vector<int> k_before(static_cast<std::size_t>(n), 0);
  {
    int k = 0;
    for (int m = 0; m < n; ++m) {
      k_before[static_cast<std::size_t>(m)] = k;
      k = std::max(k, labels[static_cast<std::size_t>(m)] + 1);
    }
  }
  std::vector<std::vector<std::vector<double>>> terms(static_cast<std::size_t>(n - first));
  for (int m = first; m < n; ++m) {
    terms[static_cast<std::size_t>(m - first)].resize(static_cast<std::size_t>(k_before[static_cast<std::size_t>(m)]) + 1);
  }
  for_each_completion(prefix.labels(), n, [&](std::span<const int> c) {
    const int kk = *std::max_element(c.begin(), c.end()) + 1;
    const double lj = crp_log_prob(c, kk, cfg.alpha) + marginal_log_lik(points, c, kk, cfg);
    // Contributes to every position whose conditioning labels it matches.
    for (int m = first; m < n; ++m) {
      terms[static_cast<std::size_t>(m - first)][static_cast<std::size_t>(c[static_cast<std::size_t>(m)])].push_back(lj);
      if (c[static_cast<std::size_t>(m)] != labels[static_cast<std::size_t>(m)]) break;
    }
  });
  std::vector<Eigen::VectorXd> out;
  for (auto& per_pos : terms) {
    std::vector<double> log_marg;
    for (const auto& v : per_pos) log_marg.push_back(log_sum_exp(v));
    out.push_back(normalize_log_weights(log_marg));
  }
  return out;
}

double rb_loss(const NcpModel& model, const Eigen::MatrixXd& points, const Assignment& labels,
               int first, const std::vector<Eigen::VectorXd>& targets, NcpGradients& grads) {
  const int n = static_cast<int>(points.rows());
  if (first < 1 || first + static_cast<int>(targets.size()) != n) {
    throw ConfigError("rb_loss: targets must cover positions first..N-1");
  }
  SequenceSpec seq;
  seq.order.resize(static_cast<std::size_t>(n));
  std::iota(seq.order.begin(), seq.order.end(), 0);
  seq.labels = labels;
  seq.first_scored = first;
  seq.targets.assign(static_cast<std::size_t>(n), std::nullopt);
  for (int m = first; m < n; ++m) seq.targets[static_cast<std::size_t>(m)] = targets[static_cast<std::size_t>(m - first)];
  const DatasetResult res = backprop_dataset(model, points, {&seq, 1}, 1.0, grads);
  return res.sequences.front().loss;
}

double permutation_variance(const NcpModel& model, const Eigen::MatrixXd& points,
                            const Assignment& labels, int n_perms, Stream& rng) {
  const int n = static_cast<int>(points.rows());
  if (n < 2 || n_perms < 2) return 0.0;
  const Eigen::MatrixXd enc = encode_points(model, points);
  std::vector<double> log_qs;
  for (int p = 0; p < n_perms; ++p) {
    SequenceSpec seq;
    seq.order = rng.permutation(n);
    seq.labels = labels.permuted(seq.order);
    log_qs.push_back(evaluate_sequence(model, enc, seq).log_q);
  }
  return sample_variance(log_qs);
}

TrainerState train(NcpModel& model, const TrainConfig& cfg, std::optional<TrainerState> resume,
                   const TrainHooks& hooks) {
  cfg.validate();
  TrainerState state;
  if (resume) {
    state = std::move(*resume);
    if (state.seed != cfg.seed) throw ConfigError("train: resume seed differs from config seed");
  } else {
    state.seed = cfg.seed;
    state.h = AdamState<double>(model.h_net.params().size());
    state.g = AdamState<double>(model.g_net.params().size());
    state.f = AdamState<double>(model.f_net.params().size());
  }
  const Stream master(cfg.seed);
  const auto start = std::chrono::steady_clock::now();
  while (state.iteration < cfg.iterations) {
    const std::int64_t it = state.iteration + 1;
    Stream rng = master.split(static_cast<std::uint64_t>(it));
    MinibatchResult batch = nll_minibatch(model, cfg, rng);
    if (cfg.grad_clip > 0.0) {
      const double norm = std::sqrt(batch.grads.squared_norm());
      if (norm > cfg.grad_clip) batch.grads *= cfg.grad_clip / norm;
    }
    adam_step<double>(model.h_net.mutable_params(), batch.grads.h, state.h, cfg.adam);
    adam_step<double>(model.g_net.mutable_params(), batch.grads.g, state.g, cfg.adam);
    adam_step<double>(model.f_net.mutable_params(), batch.grads.f, state.f, cfg.adam);
    state.iteration = it;
    if (hooks.on_record && it % cfg.diag_every == 0) {
      DiagnosticsRecord rec;
      rec.iteration = it;
      rec.nll = batch.loss;
      rec.accuracy = batch.accuracy;
      rec.perm_variance = batch.perm_variance;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      hooks.on_record(rec);
    }
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(model, state);
    }
  }
  return state;
}

std::vector<double> sliding_mean(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out;
  out.reserve(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out.push_back(acc / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

}  // namespace ncp
