#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ncp/baselines.hpp"
#include "ncp/checkpoint.hpp"
#include "ncp/dataset_io.hpp"
#include "ncp/parallel.hpp"
#include "ncp/train.hpp"

namespace ncp::cli {

namespace {

namespace fs = std::filesystem;

void ensure_parent(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
}

/// Delimited text output: provenance line, tab-separated column names, rows.
class Table {
 public:
  Table(const fs::path& path, const Provenance& prov, const std::vector<std::string>& columns)
      : path_(path) {
    ensure_parent(path);
    out_.open(path, std::ios::binary);
    if (!out_) throw IoError("cannot write " + path.string());
    write_provenance(out_, prov);
    row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "\t" : "") << cells[i];
    out_ << '\n';
  }

  std::ostream& stream() { return out_; }

  void close() {
    out_.close();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::string num(double v) { return format_double(v); }

/// Writes to a sibling temporary file first so a crash never leaves a
/// truncated checkpoint behind.
void save_checkpoint_atomic(const fs::path& path, const Checkpoint& ckpt, const Provenance& prov) {
  ensure_parent(path);
  fs::path tmp = path;
  tmp += ".tmp";
  save_checkpoint(tmp, ckpt, prov);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

struct Loaded {
  Dataset data;
  GenConfig gen;
};

Loaded load_data(const RunConfig& cfg, const Section& s) {
  DatasetFile file = load_dataset(s.require<std::string>("dataset"));
  return {std::move(file.data), cfg.gen_over(file.config)};
}

NcpModel load_model(const Section& s, int dim_x) {
  NcpModel model = load_checkpoint(s.require<std::string>("checkpoint")).model;
  if (model.dim_x() != dim_x) {
    throw ConfigError("checkpoint d_x " + std::to_string(model.dim_x()) + " does not match dataset d_x " +
                      std::to_string(dim_x));
  }
  return model;
}

Eigen::MatrixXd reorder_rows(const Eigen::MatrixXd& x, const std::vector<int>& order) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(order[i]);
  return out;
}

NcpArchitecture architecture_from(const Section& s, const NcpArchitecture& base, int dim_x) {
  if (!s.has("architecture")) return base;
  const Section a = s.child("architecture");
  NcpArchitecture arch = base;
  if (a.has("h") || a.has("g") || a.has("f")) {
    arch.h = MlpSpec::parse(a.require<std::string>("h"));
    arch.g = MlpSpec::parse(a.require<std::string>("g"));
    arch.f = MlpSpec::parse(a.require<std::string>("f"));
  } else if (a.has("width") || a.has("depth") || a.has("dim_h") || a.has("dim_g")) {
    arch = NcpArchitecture::uniform(dim_x, a.require<int>("dim_h"), a.require<int>("dim_g"),
                                    a.require<int>("width"), a.require<int>("depth"));
  }
  arch.input_scale = a.get("input_scale", base.input_scale);
  arch.pool_scale = a.get("pool_scale", base.pool_scale);
  a.finish();
  arch.validate();
  if (arch.dim_x() != dim_x) throw ConfigError("train.architecture: h input must equal gen.dim_x");
  return arch;
}

}  // namespace

void cmd_generate(const RunConfig& cfg) {
  const Section s = cfg.section();
  const int count = s.get("count", 1);
  const fs::path dir = s.require<std::string>("out_dir");
  const std::string prefix = s.get<std::string>("prefix", "dataset");
  s.finish();
  if (count < 1) throw ConfigError("generate.count must be >= 1");

  std::vector<Dataset> sets(static_cast<std::size_t>(count));
  const Stream master(cfg.seed);
  parallel_for(sets.size(), cfg.threads, [&](std::size_t i) {
    Stream rng = master.split(i);
    sets[i] = sample_dataset(cfg.gen, rng);
  });

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const int width = std::max<int>(4, static_cast<int>(std::to_string(count - 1).size()));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::string index = std::to_string(i);
    index.insert(0, static_cast<std::size_t>(width) - std::min<std::size_t>(index.size(), width), '0');
    save_dataset(dir / (prefix + "_" + index + ".txt"), DatasetFile{cfg.gen, std::move(sets[i])},
                 cfg.provenance);
  }
  std::cerr << "generate: wrote " << count << " dataset(s) to " << dir.string() << '\n';
}

void cmd_train(const RunConfig& cfg) {
  const Section s = cfg.section();
  const int dim_x = cfg.gen.dim_x;
  const bool paper = cfg.profile == "paper";
  TrainConfig tc = paper ? TrainConfig::paper(dim_x) : TrainConfig::desk(dim_x);
  tc.gen = cfg.gen;
  tc.seed = cfg.seed;
  tc.threads = cfg.threads;
  tc.iterations = s.get("iterations", tc.iterations);
  tc.n_draws = s.get("n_draws", tc.n_draws);
  tc.assignment_draws = s.get("assignment_draws", tc.assignment_draws);
  tc.datasets = s.get("datasets", tc.datasets);
  tc.permutations = s.get("permutations", tc.permutations);
  tc.adam.schedule.lrs = s.get("lrs", tc.adam.schedule.lrs);
  tc.adam.schedule.breakpoints = s.get("breakpoints", tc.adam.schedule.breakpoints);
  tc.adam.beta1 = s.get("beta1", tc.adam.beta1);
  tc.adam.beta2 = s.get("beta2", tc.adam.beta2);
  tc.adam.epsilon = s.get("epsilon", tc.adam.epsilon);
  tc.grad_clip = s.get("grad_clip", tc.grad_clip);
  tc.diag_every = s.get("diag_every", tc.diag_every);
  tc.checkpoint_every = s.get("checkpoint_every", tc.checkpoint_every);
  tc.rao_blackwell = s.get("rao_blackwell", tc.rao_blackwell);
  tc.rb_tail_length = s.get("rb_tail_length", tc.rb_tail_length);
  tc.rb_budget = s.get("rb_budget", tc.rb_budget);
  const NcpArchitecture arch =
      architecture_from(s, paper ? NcpArchitecture::paper(dim_x) : NcpArchitecture::desk(dim_x), dim_x);
  const fs::path ckpt_path = s.require<std::string>("checkpoint");
  const fs::path diag_path = s.require<std::string>("diagnostics");
  const std::optional<std::string> resume_path =
      s.has("resume") ? std::optional(s.require<std::string>("resume")) : std::nullopt;
  s.finish();
  tc.validate();

  NcpModel model;
  std::optional<TrainerState> resume;
  if (resume_path) {
    Checkpoint ck = load_checkpoint(*resume_path);
    if (!ck.trainer) throw ConfigError("train.resume: checkpoint holds no optimizer state");
    if (ck.model.dim_x() != dim_x) throw ConfigError("train.resume: checkpoint d_x differs from gen.dim_x");
    model = std::move(ck.model);
    resume = std::move(ck.trainer);
  } else {
    Stream init = Stream(cfg.seed).split(0);
    model = make_model(arch, init);
  }

  const bool append = resume_path && fs::exists(diag_path);
  ensure_parent(diag_path);
  std::ofstream diag(diag_path, append ? std::ios::app | std::ios::binary : std::ios::binary);
  if (!diag) throw IoError("cannot write " + diag_path.string());
  if (!append) {
    write_provenance(diag, cfg.provenance);
    diag << "iteration\tnll\taccuracy\tperm_variance\tseconds\n";
  }

  TrainHooks hooks;
  hooks.on_record = [&](const DiagnosticsRecord& r) {
    diag << r.iteration << '\t' << num(r.nll) << '\t' << num(r.accuracy) << '\t' << num(r.perm_variance)
         << '\t' << num(r.seconds) << '\n';
  };
  hooks.on_checkpoint = [&](const NcpModel& m, const TrainerState& st) {
    diag.flush();
    save_checkpoint_atomic(ckpt_path, Checkpoint{m, st}, cfg.provenance);
  };

  TrainerState final_state;
  try {
    final_state = train(model, tc, std::move(resume), hooks);
  } catch (const NonFiniteLoss& e) {
    fs::path dump = ckpt_path;
    dump += ".nonfinite.txt";
    std::ofstream out(dump, std::ios::binary);
    out << e.dataset_text;
    std::cerr << "train: offending dataset written to " << dump.string() << '\n';
    throw;
  }
  diag.close();
  if (!diag) throw IoError("write failed for " + diag_path.string());
  save_checkpoint_atomic(ckpt_path, Checkpoint{model, final_state}, cfg.provenance);
  std::cerr << "train: " << final_state.iteration << " iterations, checkpoint " << ckpt_path.string()
            << '\n';
}

void cmd_sample(const RunConfig& cfg) {
  const Section s = cfg.section();
  const Loaded in = load_data(cfg, s);
  const NcpModel model = load_model(s, in.data.dim());
  const std::int64_t count = s.get<std::int64_t>("samples", 1);
  const bool shuffle = s.get("shuffle", false);
  const fs::path out_path = s.require<std::string>("output");
  s.finish();
  if (count < 1) throw ConfigError("sample.samples must be >= 1");
  if (in.data.size() < 1) throw ConfigError("sample: dataset is empty");

  struct Row {
    std::uint64_t seed;
    double nll;
    Assignment assignment;
  };
  std::vector<Row> rows(static_cast<std::size_t>(count));
  const Stream master(cfg.seed);
  const int n = in.data.size();
  const auto start = std::chrono::steady_clock::now();
  parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = master.split(i).next_u64();
    Stream rng(seed);
    SampleOptions opts;
    opts.record_probs = false;
    if (!shuffle) {
      const SampleTrace t = sample_assignment(model, in.data.points, rng, opts);
      rows[i] = {seed, 0.0 - t.log_q, t.assignment};
      return;
    }
    const std::vector<int> order = rng.permutation(n);
    const SampleTrace t = sample_assignment(model, reorder_rows(in.data.points, order), rng, opts);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) labels[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = t.assignment[static_cast<std::size_t>(j)];
    rows[i] = {seed, 0.0 - t.log_q, Assignment::canonicalize(labels)};
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Table out(out_path, cfg.provenance, {"sample", "seed", "nll", "assignment"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row({std::to_string(i), std::to_string(rows[i].seed), num(rows[i].nll), rows[i].assignment.to_string()});
  }
  out.close();
  std::cerr << "sample: " << count << " samples in " << secs << " s ("
            << static_cast<double>(count) / std::max(secs, 1e-9) << " samples/s)\n";
}

void cmd_exact(const RunConfig& cfg) {
  const Section s = cfg.section();
  const std::string mode = s.get<std::string>("mode", "posterior");
  const fs::path out_path = s.require<std::string>("output");

  if (mode == "crp") {
    const double alpha = cfg.gen.alpha;
    Table out(out_path, cfg.provenance, {"assignment", "log_prob"});
    if (s.has("assignment")) {
      const Assignment a = Assignment::parse(s.require<std::string>("assignment"));
      s.finish();
      out.row({a.to_string(), num(crp_log_prob(a, alpha))});
    } else {
      const int n = s.require<int>("n");
      s.finish();
      for (const auto& a : enumerate_assignments(n)) out.row({a.to_string(), num(crp_log_prob(a, alpha))});
    }
    out.close();
    return;
  }

  const Loaded in = load_data(cfg, s);
  if (mode == "posterior") {
    s.finish();
    const PartitionDistribution dist = exact_posterior(in.data, in.gen);
    Table out(out_path, cfg.provenance, {"assignment", "probability"});
    for (const auto& [a, p] : dist.entries) out.row({a.to_string(), num(p)});
    out.close();
  } else if (mode == "conditional") {
    const Assignment prefix = Assignment::parse(s.require<std::string>("prefix"));
    s.finish();
    const Eigen::VectorXd p = exact_conditional(in.data, prefix, in.gen);
    Table out(out_path, cfg.provenance, {"cluster", "probability"});
    for (Eigen::Index k = 0; k < p.size(); ++k) out.row({std::to_string(k + 1), num(p(k))});
    out.close();
  } else if (mode == "marginal") {
    Assignment a;
    if (s.has("assignment")) {
      a = Assignment::parse(s.require<std::string>("assignment"));
    } else if (in.data.true_assignment) {
      a = *in.data.true_assignment;
    } else {
      throw ConfigError("exact.marginal: no assignment given and the dataset has none");
    }
    s.finish();
    const double lml = marginal_log_lik(in.data, a, in.gen);
    Table out(out_path, cfg.provenance, {"assignment", "log_marginal"});
    out.row({a.to_string(), num(lml)});
    out.close();
  } else {
    throw ConfigError("exact.mode must be posterior, conditional, crp or marginal");
  }
}

void cmd_gibbs(const RunConfig& cfg) {
  const Section s = cfg.section();
  const Loaded in = load_data(cfg, s);
  GibbsConfig g;
  g.n_sweeps = s.get("n_sweeps", g.n_sweeps);
  g.burn_in = s.get("burn_in", g.burn_in);
  g.thinning = s.get("thinning", g.thinning);
  g.seed = cfg.seed;
  const fs::path out_path = s.require<std::string>("output");
  const fs::path stats_path = s.require<std::string>("stats");
  s.finish();
  g.validate();
  if (g.burn_in >= g.n_sweeps) {
    std::cerr << "gibbs: warning: burn_in (" << g.burn_in << ") >= n_sweeps (" << g.n_sweeps
              << "); no samples are emitted\n";
  }

  const GibbsRun run = run_gibbs(in.data.points, in.gen, g);
  Table out(out_path, cfg.provenance, {"sweep", "num_clusters", "assignment"});
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    const std::int64_t sweep = g.burn_in + static_cast<std::int64_t>(i) * g.thinning + 1;
    out.row({std::to_string(sweep), std::to_string(run.num_clusters[i]), run.samples[i].to_string()});
  }
  out.close();

  double mean = 0.0, var = 0.0;
  const double count = static_cast<double>(run.num_clusters.size());
  for (int k : run.num_clusters) mean += k;
  if (count > 0) mean /= count;
  for (int k : run.num_clusters) var += (k - mean) * (k - mean);
  if (count > 1) var /= count - 1;
  Table stats(stats_path, cfg.provenance, {"statistic", "value"});
  stats.row({"samples", std::to_string(run.samples.size())});
  stats.row({"mean_num_clusters", count > 0 ? num(mean) : "nan"});
  stats.row({"var_num_clusters", count > 1 ? num(var) : "nan"});
  stats.close();
}

namespace {

void compare_sweep(const RunConfig& cfg, const Section& s) {
  const Loaded in = load_data(cfg, s);
  const NcpModel model = load_model(s, in.data.dim());
  const int d = in.data.dim();
  const auto from = s.require<std::vector<double>>("from");
  const auto to = s.require<std::vector<double>>("to");
  const int points = s.get("points", 101);
  Assignment prefix;
  if (s.has("prefix")) {
    prefix = Assignment::parse(s.require<std::string>("prefix"));
  } else if (in.data.true_assignment) {
    prefix = *in.data.true_assignment;
  } else {
    throw ConfigError("compare.sweep: no prefix given and the dataset has no assignment");
  }
  const fs::path out_path = s.require<std::string>("output");
  s.finish();
  if (static_cast<int>(from.size()) != d || static_cast<int>(to.size()) != d) {
    throw ConfigError("compare.sweep: from/to must have d_x entries");
  }
  if (points < 2) throw ConfigError("compare.sweep: points must be >= 2");
  if (static_cast<int>(prefix.size()) != in.data.size()) {
    throw ConfigError("compare.sweep: prefix must label every dataset point");
  }

  const int k1 = prefix.num_clusters() + 1;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(points));
  parallel_for(rows.size(), cfg.threads, [&](std::size_t j) {
    const double t = static_cast<double>(j) / (points - 1);
    Eigen::MatrixXd x(in.data.size() + 1, d);
    x.topRows(in.data.size()) = in.data.points;
    for (int c = 0; c < d; ++c) {
      x(in.data.size(), c) = from[static_cast<std::size_t>(c)] +
                             t * (to[static_cast<std::size_t>(c)] - from[static_cast<std::size_t>(c)]);
    }
    const Eigen::VectorXd exact = exact_conditional(Dataset{x, std::nullopt, std::nullopt}, prefix, in.gen);
    const Eigen::VectorXd ncp = last_point_conditional(model, x, prefix);
    std::vector<double>& r = rows[j];
    r.push_back(t);
    for (int c = 0; c < d; ++c) r.push_back(x(in.data.size(), c));
    for (int k = 0; k < k1; ++k) r.push_back(exact(k));
    for (int k = 0; k < k1; ++k) r.push_back(ncp(k));
    r.push_back((exact - ncp).cwiseAbs().mean());
  });

  std::vector<std::string> cols{"t"};
  for (int c = 0; c < d; ++c) cols.push_back("x" + std::to_string(c + 1));
  for (int k = 0; k < k1; ++k) cols.push_back("exact_" + std::to_string(k + 1));
  for (int k = 0; k < k1; ++k) cols.push_back("ncp_" + std::to_string(k + 1));
  cols.push_back("abs_dev");
  Table out(out_path, cfg.provenance, cols);
  double mad = 0.0;
  for (const auto& r : rows) {
    std::vector<std::string> cells;
    for (double v : r) cells.push_back(num(v));
    out.row(cells);
    mad += r.back();
  }
  out.stream() << "# mean_abs_dev " << num(mad / points) << '\n';
  out.close();
}

void compare_diagnostics(const RunConfig& cfg, const Section& s) {
  const fs::path in_path = s.require<std::string>("diagnostics");
  const int window = s.get("window", 100);
  const fs::path out_path = s.require<std::string>("output");
  s.finish();
  if (window < 1) throw ConfigError("compare.window must be >= 1");

  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + in_path.string());
  std::vector<std::int64_t> iters;
  std::vector<double> nll, acc, pv;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("iteration", 0) == 0) continue;
    }
    std::istringstream row(line);
    std::int64_t it;
    double a, b, c, secs;
    if (!(row >> it >> a >> b >> c >> secs)) throw IoError("malformed diagnostics row: " + line);
    iters.push_back(it);
    nll.push_back(a);
    acc.push_back(b);
    pv.push_back(c);
  }
  const auto w = static_cast<std::size_t>(window);
  const auto nll_s = sliding_mean(nll, w), acc_s = sliding_mean(acc, w), pv_s = sliding_mean(pv, w);
  Table out(out_path, cfg.provenance, {"iteration", "nll", "nll_smooth", "accuracy_smooth", "perm_variance_smooth"});
  for (std::size_t i = 0; i < iters.size(); ++i) {
    out.row({std::to_string(iters[i]), num(nll[i]), num(nll_s[i]), num(acc_s[i]), num(pv_s[i])});
  }
  out.close();
}

void compare_mean_k(const RunConfig& cfg, const Section& s) {
  const Loaded in = load_data(cfg, s);
  const NcpModel model = load_model(s, in.data.dim());
  MeanKConfig mk;
  mk.budgets = s.get("budgets", mk.budgets);
  mk.repetitions = s.get("repetitions", mk.repetitions);
  mk.gibbs_burn_in = s.get("burn_in", mk.gibbs_burn_in);
  mk.seed = cfg.seed;
  mk.threads = cfg.threads;
  const fs::path out_path = s.require<std::string>("output");
  const fs::path summary_path = s.require<std::string>("summary");
  s.finish();

  const MeanKTable t = mean_k_experiment(model, in.data.points, in.gen, mk);
  Table out(out_path, cfg.provenance, {"method", "budget", "repetition", "estimate", "seconds"});
  for (const auto& r : t.rows) {
    out.row({r.method, std::to_string(r.budget), std::to_string(r.repetition), num(r.estimate), num(r.seconds)});
  }
  out.close();
  Table sum(summary_path, cfg.provenance, {"method", "budget", "median", "q25", "q75", "mean_seconds"});
  for (const auto& r : t.summary) {
    sum.row({r.method, std::to_string(r.budget), num(r.median), num(r.q25), num(r.q75), num(r.mean_seconds)});
  }
  sum.close();
}

}  // namespace

void cmd_compare(const RunConfig& cfg) {
  const Section s = cfg.section();
  const std::string mode = s.require<std::string>("mode");
  if (mode == "sweep") {
    compare_sweep(cfg, s);
  } else if (mode == "diagnostics") {
    compare_diagnostics(cfg, s);
  } else if (mode == "mean-k") {
    compare_mean_k(cfg, s);
  } else {
    throw ConfigError("compare.mode must be sweep, diagnostics or mean-k");
  }
}

}  // namespace ncp::cli
