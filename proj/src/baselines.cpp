#include "ncp/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "ncp/errors.hpp"
#include "ncp/parallel.hpp"

namespace ncp {

void GibbsConfig::validate() const {
  if (n_sweeps < 1) throw ConfigError("gibbs: n_sweeps must be at least 1");
  if (burn_in < 0) throw ConfigError("gibbs: burn_in must be nonnegative");
  if (thinning < 1) throw ConfigError("gibbs: thinning must be at least 1");
}

Assignment gibbs_sweep(const Eigen::MatrixXd& points, const GenConfig& cfg, const Assignment& a,
                       Stream& rng) {
  const int n = static_cast<int>(points.rows());
  const int dim = static_cast<int>(points.cols());
  if (static_cast<int>(a.size()) != n) throw ConfigError("gibbs_sweep: assignment length mismatch");
  std::vector<int> labels = a.labels();
  std::vector<ClusterStats> clusters(static_cast<std::size_t>(a.num_clusters()), ClusterStats(dim));
  for (int i = 0; i < n; ++i) clusters[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].add(points.row(i).transpose());

  const ClusterStats empty(dim);
  const double log_alpha = std::log(cfg.alpha);
  std::vector<double> log_w;
  for (int i = 0; i < n; ++i) {
    const auto x = points.row(i).transpose();
    const int old = labels[static_cast<std::size_t>(i)];
    clusters[static_cast<std::size_t>(old)].remove(x);
    if (clusters[static_cast<std::size_t>(old)].count == 0) {
      clusters.erase(clusters.begin() + old);
      for (int& c : labels) {
        if (c > old) --c;
      }
    }
    const auto k_count = clusters.size();
    log_w.resize(k_count + 1);
    for (std::size_t k = 0; k < k_count; ++k) {
      log_w[k] = std::log(static_cast<double>(clusters[k].count)) + log_predictive(clusters[k], x, cfg);
    }
    log_w[k_count] = log_alpha + log_predictive(empty, x, cfg);
    const Eigen::VectorXd p = normalize_log_weights(log_w);
    const std::size_t k = rng.categorical({p.data(), static_cast<std::size_t>(p.size())});
    if (k == k_count) clusters.emplace_back(dim);
    clusters[k].add(x);
    labels[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return Assignment::canonicalize(labels);
}

GibbsRun run_gibbs(const Eigen::MatrixXd& points, const GenConfig& cfg, const GibbsConfig& gcfg) {
  gcfg.validate();
  Stream rng(gcfg.seed);
  Assignment state = Assignment::from_labels(std::vector<int>(static_cast<std::size_t>(points.rows()), 0));
  GibbsRun run;
  for (std::int64_t sweep = 0; sweep < gcfg.n_sweeps; ++sweep) {
    state = gibbs_sweep(points, cfg, state, rng);
    if (sweep >= gcfg.burn_in && (sweep - gcfg.burn_in) % gcfg.thinning == 0) {
      run.num_clusters.push_back(state.num_clusters());
      run.samples.push_back(state);
    }
  }
  return run;
}

IsEstimate importance_estimate(const Proposal& proposal, const Eigen::MatrixXd& points,
                               const GenConfig& cfg, const Statistic& statistic, std::int64_t samples,
                               const Stream& base, int threads) {
  if (samples < 1) throw ConfigError("importance_estimate: need at least one sample");
  const auto count = static_cast<std::size_t>(samples);
  IsEstimate est;
  est.values.resize(count);
  est.log_weights.resize(count);
  Dataset view{points, std::nullopt, std::nullopt};
  parallel_for(count, threads, [&](std::size_t s) {
    Stream rng = base.split(s);
    auto [c, log_q] = proposal(rng);
    est.log_weights[s] = joint_log_prob(view, c, cfg) - log_q;
    est.values[s] = statistic(c);
  });
  const double max_lw = *std::max_element(est.log_weights.begin(), est.log_weights.end());
  if (!std::isfinite(max_lw)) {
    throw NumericError("importance_estimate: degenerate proposal, no finite importance weight");
  }
  est.weights.resize(static_cast<Eigen::Index>(count));
  for (std::size_t s = 0; s < count; ++s) est.weights(static_cast<Eigen::Index>(s)) = std::exp(est.log_weights[s] - max_lw);
  // Both sums run in the same order, so r == 1 gives exactly 1.
  double total = 0.0, weighted = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    const double u = est.weights(static_cast<Eigen::Index>(s));
    total += u;
    weighted += u * est.values[s];
  }
  est.weights /= total;
  est.estimate = weighted / total;
  est.ess = 1.0 / est.weights.squaredNorm();
  return est;
}

IsEstimate importance_estimate(const NcpModel& model, const Eigen::MatrixXd& points,
                               const GenConfig& cfg, const Statistic& statistic, std::int64_t samples,
                               const Stream& base, int threads) {
  Proposal ncp = [&](Stream& rng) {
    SampleOptions opts;
    opts.record_probs = false;
    SampleTrace t = sample_assignment(model, points, rng, opts);
    return std::make_pair(std::move(t.assignment), t.log_q);
  };
  return importance_estimate(ncp, points, cfg, statistic, samples, base, threads);
}

Proposal exact_posterior_proposal(const Eigen::MatrixXd& points, const GenConfig& cfg) {
  Dataset view{points, std::nullopt, std::nullopt};
  auto dist = std::make_shared<PartitionDistribution>(exact_posterior(view, cfg));
  std::vector<double> log_joint;
  for (const auto& [a, p] : dist->entries) log_joint.push_back(joint_log_prob(view, a, cfg));
  const double log_evidence = log_sum_exp(log_joint);
  auto probs = std::make_shared<std::vector<double>>();
  for (const auto& [a, p] : dist->entries) probs->push_back(p);
  auto joints = std::make_shared<std::vector<double>>(std::move(log_joint));
  return [dist, probs, joints, log_evidence](Stream& rng) {
    const std::size_t i = rng.categorical(*probs);
    return std::make_pair(dist->entries[i].first, (*joints)[i] - log_evidence);
  };
}

double bootstrap_standard_error(const IsEstimate& est, int resamples, Stream& rng) {
  const auto s = static_cast<std::int64_t>(est.values.size());
  if (s < 2 || resamples < 2) return 0.0;
  const double max_lw = *std::max_element(est.log_weights.begin(), est.log_weights.end());
  std::vector<double> w(est.log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(est.log_weights[i] - max_lw);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    double num = 0.0, den = 0.0;
    for (std::int64_t i = 0; i < s; ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, s - 1));
      num += w[j] * est.values[j];
      den += w[j];
    }
    stats.push_back(num / den);
  }
  double mean = 0.0;
  for (double v : stats) mean += v;
  mean /= resamples;
  double ss = 0.0;
  for (double v : stats) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (resamples - 1));
}

double num_clusters_statistic(const Assignment& a) { return a.num_clusters(); }

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

MeanKTable mean_k_experiment(const NcpModel& model, const Eigen::MatrixXd& points,
                             const GenConfig& cfg, const MeanKConfig& mcfg) {
  if (mcfg.budgets.empty() || mcfg.repetitions < 1) throw ConfigError("mean_k: need budgets and repetitions");
  using clock = std::chrono::steady_clock;
  const Stream master(mcfg.seed);
  MeanKTable table;
  for (std::size_t b = 0; b < mcfg.budgets.size(); ++b) {
    const std::int64_t budget = mcfg.budgets[b];
    if (budget < 1) throw ConfigError("mean_k: budgets must be positive");
    std::vector<double> gibbs_est, is_est, gibbs_sec, is_sec;
    for (int r = 0; r < mcfg.repetitions; ++r) {
      const Stream rep = master.split(b).split(static_cast<std::uint64_t>(r));
      GibbsConfig gcfg;
      gcfg.burn_in = mcfg.gibbs_burn_in;
      gcfg.n_sweeps = mcfg.gibbs_burn_in + budget;
      gcfg.seed = rep.split(0).next_u64();
      auto t0 = clock::now();
      const GibbsRun run = run_gibbs(points, cfg, gcfg);
      double mean_k = 0.0;
      for (int k : run.num_clusters) mean_k += k;
      mean_k /= static_cast<double>(run.num_clusters.size());
      const double g_sec = std::chrono::duration<double>(clock::now() - t0).count();
      table.rows.push_back({"gibbs", budget, r, mean_k, g_sec});
      gibbs_est.push_back(mean_k);
      gibbs_sec.push_back(g_sec);

      t0 = clock::now();
      const IsEstimate est =
          importance_estimate(model, points, cfg, num_clusters_statistic, budget, rep.split(1), mcfg.threads);
      const double i_sec = std::chrono::duration<double>(clock::now() - t0).count();
      table.rows.push_back({"ncp_is", budget, r, est.estimate, i_sec});
      is_est.push_back(est.estimate);
      is_sec.push_back(i_sec);
    }
    auto summarize = [&](const std::string& method, const std::vector<double>& est,
                         const std::vector<double>& sec) {
      double mean_sec = 0.0;
      for (double s : sec) mean_sec += s;
      table.summary.push_back({method, budget, quantile(est, 0.5), quantile(est, 0.25),
                               quantile(est, 0.75), mean_sec / static_cast<double>(sec.size())});
    };
    summarize("gibbs", gibbs_est, gibbs_sec);
    summarize("ncp_is", is_est, is_sec);
  }
  return table;
}

}  // namespace ncp
