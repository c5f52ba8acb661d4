// Acceptance runner: one PASS/FAIL line per criterion.
//
//   ncp_acceptance [--criterion N] [--train-only] --workdir DIR --cli PATH
//
// Exit status: 0 all requested criteria pass, 1 a criterion failed,
// 77 the only non-passing criteria cannot be measured on this machine.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "ncp/baselines.hpp"
#include "ncp/checkpoint.hpp"
#include "ncp/errors.hpp"
#include "ncp/parallel.hpp"
#include "ncp/train.hpp"

namespace fs = std::filesystem;
using namespace ncp;

namespace {

constexpr int kSkipCode = 77;
constexpr std::uint64_t kTrainSeed = 20240;
constexpr std::uint64_t kHeldOutSeed = 777001;

enum class Outcome { kPass, kFail, kUnattainable };

struct Verdict {
  Outcome outcome = Outcome::kFail;
  std::string detail;
};

struct Context {
  fs::path workdir;
  fs::path cli;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Verdict verdict(bool ok, std::string detail) {
  return {ok ? Outcome::kPass : Outcome::kFail, std::move(detail)};
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

// CLI chatter goes to cli.log in the run directory.
int run_cli(const Context& ctx, const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd " + quote(cwd.string()) + " && " + quote(ctx.cli.string()) + " " + args +
                          " >>cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

double quantile_of(std::vector<double> v, double q) { return quantile(std::move(v), q); }

// ---------------------------------------------------------------- training

fs::path model_path(const Context& ctx) { return ctx.workdir / "model.ckpt"; }
fs::path init_path(const Context& ctx) { return ctx.workdir / "init.ckpt"; }
fs::path diag_path(const Context& ctx) { return ctx.workdir / "diagnostics.tsv"; }

bool train_model(const Context& ctx) {
  fs::create_directories(ctx.workdir);
  const std::string common = R"({"profile": "desk", "seed": )" + std::to_string(kTrainSeed) + ", ";
  write_text(ctx.workdir / "train_init.json",
             common + R"("train": {"iterations": 0, "checkpoint": "init.ckpt", "diagnostics": "init_diag.tsv"}})");
  write_text(ctx.workdir / "train.json",
             common + R"("train": {"checkpoint": "model.ckpt", "diagnostics": "diagnostics.tsv",
                                   "checkpoint_every": 500}})");
  if (run_cli(ctx, ctx.workdir, "train -c train_init.json") != 0) return false;
  return run_cli(ctx, ctx.workdir, "train -c train.json") == 0;
}

struct TrainedModels {
  NcpModel init;
  NcpModel trained;
  std::int64_t iterations = 0;
};

TrainedModels load_models(const Context& ctx) {
  if (!fs::exists(model_path(ctx)) || !fs::exists(init_path(ctx))) {
    throw IoError("no trained model in " + ctx.workdir.string() + "; run with --train-only first");
  }
  Checkpoint trained = load_checkpoint(model_path(ctx));
  return {load_checkpoint(init_path(ctx)).model, trained.model, trained.trainer ? trained.trainer->iteration : 0};
}

GenConfig desk_gen() {
  GenConfig g;
  g.dim_x = 1;
  g.n_min = 5;
  g.n_max = 50;
  return g;
}

// -------------------------------------------------------------- criteria

Verdict criterion_1(const Context&) {
  double worst = 0.0;
  for (double alpha : {0.5, 0.7, 2.0}) {
    for (int n = 2; n <= 8; ++n) {
      std::vector<double> logs;
      for (const auto& a : enumerate_assignments(n)) logs.push_back(crp_log_prob(a, alpha));
      double total = 0.0;
      for (double l : logs) total += std::exp(l);
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  return verdict(worst < 1e-10, "max |sum - 1| = " + fmt(worst));
}

Verdict criterion_2(const Context&) {
  Stream master(2002);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    Stream rng = master.split(static_cast<std::uint64_t>(rep));
    GenConfig g;
    g.dim_x = 1 + rep % 2;
    g.n_min = g.n_max = 2 + rep % 7;
    const Dataset d = sample_dataset(g, rng);
    const PartitionDistribution post = exact_posterior(d, g);
    std::map<std::vector<int>, Eigen::VectorXd> cache;
    for (const auto& [a, p] : post.entries) {
      double product = 1.0;
      for (std::size_t n = 1; n < a.size(); ++n) {
        const Assignment prefix = a.prefix(n);
        auto it = cache.find(prefix.labels());
        if (it == cache.end()) it = cache.emplace(prefix.labels(), exact_conditional(d, prefix, g)).first;
        product *= it->second(a[n]);
      }
      worst = std::max(worst, std::abs(product - p));
    }
  }
  return verdict(worst < 1e-10, "max |prod conditionals - posterior| = " + fmt(worst));
}

Verdict criterion_3(const Context&) {
  double worst = 0.0;
  int restepped = 0;
  for (int model_index = 0; model_index < 10; ++model_index) {
    Stream rng(3000 + static_cast<std::uint64_t>(model_index));
    NcpArchitecture arch = NcpArchitecture::uniform(1 + model_index % 2, 4, 4, 5, 2);
    arch.input_scale = model_index % 3 == 0 ? 0.1 : 1.0;
    arch.pool_scale = model_index % 4 == 1 ? 0.05 : 1.0;
    NcpModel m = make_model(arch, rng);
    for (Mlpd* net : {&m.h_net, &m.g_net, &m.f_net}) {
      for (Eigen::Index j = 0; j < net->params().size(); ++j) net->mutable_params()(j) = rng.normal(0.0, 0.3);
    }
    TrainConfig cfg = TrainConfig::desk(arch.dim_x());
    cfg.gen.n_min = 2;
    cfg.gen.n_max = 4;
    cfg.n_draws = 1;
    cfg.datasets = 2;
    cfg.permutations = 2;
    cfg.rao_blackwell = model_index % 2 == 1;
    const std::uint64_t batch_seed = 31 + static_cast<std::uint64_t>(model_index);
    auto loss_at = [&] {
      Stream r(batch_seed);
      return nll_minibatch(m, cfg, r);
    };
    const MinibatchResult base = loss_at();
    // A PReLU kink inside the stencil shows up as disagreeing one-sided
    // slopes; the step is then shrunk so the stencil stays on one side.
    auto check = [&](Mlpd& net, const Eigen::VectorXd& grad) {
      for (Eigen::Index j = 0; j < grad.size(); ++j) {
        const double old = net.params()(j);
        double fd = 0.0;
        for (double h = 1e-5;; h = 1e-6) {
          net.mutable_params()(j) = old + h;
          const double up = loss_at().loss;
          net.mutable_params()(j) = old - h;
          const double down = loss_at().loss;
          net.mutable_params()(j) = old;
          const double fwd = (up - base.loss) / h, bwd = (base.loss - down) / h;
          fd = (up - down) / (2 * h);
          if (h < 1e-5 || std::abs(fwd - bwd) <= 1e-3 * std::abs(fd) + 50 * h) break;
          ++restepped;
        }
        worst = std::max(worst, std::abs(fd - grad(j)) / std::max({std::abs(fd), std::abs(grad(j)), 1e-6}));
      }
    };
    check(m.h_net, base.grads.h);
    check(m.g_net, base.grads.g);
    check(m.f_net, base.grads.f);
  }
  return verdict(worst < 1e-4, "max relative error = " + fmt(worst) + ", steps shrunk at " +
                                    std::to_string(restepped) + " kinks");
}

double state_error(const SamplerState& inc, const SamplerState& ref) {
  const int k = inc.num_clusters;
  double err = (inc.cluster_sums.topRows(k) - ref.cluster_sums.topRows(k)).cwiseAbs().maxCoeff();
  err = std::max(err, (inc.cluster_codes.topRows(k) - ref.cluster_codes.topRows(k)).cwiseAbs().maxCoeff());
  err = std::max(err, (inc.global - ref.global).cwiseAbs().maxCoeff());
  if (inc.unassigned.size() > 0) err = std::max(err, (inc.unassigned - ref.unassigned).cwiseAbs().maxCoeff());
  return err;
}

Verdict criterion_4(const Context&) {
  Stream master(4004);
  Stream init = master.split(0);
  const NcpModel m = make_model(NcpArchitecture::desk(1), init);
  GenConfig g = desk_gen();
  g.n_min = 1;
  g.n_max = 100;
  double worst = 0.0;
  std::int64_t checks = 0;
  for (int run = 0; run < 1000; ++run) {
    Stream rng = master.split(1 + static_cast<std::uint64_t>(run));
    const Dataset d = sample_dataset(g, rng);
    SamplerState s = init_state(m, encode_points(m, d.points));
    while (!s.complete()) {
      const Eigen::VectorXd p = conditional_probs(m, s);
      assign_point(m, s, static_cast<int>(rng.categorical(std::span<const double>(p.data(), p.size()))));
      worst = std::max(worst, state_error(s, recompute_state(m, s.encodings, s.labels)));
      ++checks;
    }
  }
  return verdict(worst < 1e-8, std::to_string(checks) + " states, max abs error = " + fmt(worst));
}

double total_variation(const PartitionDistribution& exact, const std::vector<Assignment>& samples) {
  std::map<Assignment, double> freq;
  for (const auto& a : samples) freq[a] += 1.0 / static_cast<double>(samples.size());
  double tv = 0.0;
  for (const auto& [a, p] : exact.entries) {
    const auto it = freq.find(a);
    tv += std::abs(p - (it == freq.end() ? 0.0 : it->second));
  }
  return 0.5 * tv;
}

Verdict criterion_5(const Context&) {
  GenConfig g = desk_gen();
  g.n_min = g.n_max = 6;
  Stream rng(5005);
  const Dataset d = sample_dataset(g, rng);
  GibbsConfig gc;
  gc.burn_in = 1000;
  gc.n_sweeps = 1000 + 50000;
  gc.seed = 5005;
  const GibbsRun run = run_gibbs(d.points, g, gc);
  const double tv = total_variation(exact_posterior(d, g), run.samples);
  return verdict(tv < 0.05 && run.samples.size() == 50000, "TV = " + fmt(tv));
}

Verdict criterion_6(const Context& ctx) {
  const TrainedModels models = load_models(ctx);
  GenConfig g = desk_gen();
  g.n_min = g.n_max = 6;
  Stream rng(6006);
  const Dataset d = sample_dataset(g, rng);

  const std::int64_t s_exact = 10000;
  const IsEstimate ex = importance_estimate(exact_posterior_proposal(d.points, g), d.points, g,
                                            num_clusters_statistic, s_exact, Stream(6007));
  std::int64_t off = 0;
  for (Eigen::Index s = 0; s < ex.weights.size(); ++s) {
    if (ex.weights(s) != 1.0 / static_cast<double>(s_exact)) ++off;
  }

  const IsEstimate est = importance_estimate(models.trained, d.points, g, num_clusters_statistic, 100000,
                                             Stream(6008), static_cast<int>(std::thread::hardware_concurrency()));
  Stream boot(6009);
  const double se = bootstrap_standard_error(est, 200, boot);
  const double truth = exact_posterior(d, g).expected_clusters();
  const bool ok = off == 0 && std::abs(est.estimate - truth) < 3.0 * se;
  return verdict(ok, "exact-proposal weights != 1/S: " + std::to_string(off) + "; NCP E[K] = " +
                         fmt(est.estimate, 6) + " vs truth " + fmt(truth, 6) + " (3 SE = " + fmt(3 * se) +
                         ", ESS = " + fmt(est.ess, 6) + ")");
}

struct Diagnostics {
  std::vector<std::int64_t> iteration;
  std::vector<double> nll;
  std::vector<double> seconds;
};

Diagnostics read_diagnostics(const fs::path& path) {
  std::istringstream in(read_text(path));
  Diagnostics d;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("iteration", 0) == 0) continue;
    std::istringstream row(line);
    std::int64_t it;
    double nll, acc, pv, secs;
    if (!(row >> it >> nll >> acc >> pv >> secs)) throw IoError("bad diagnostics row: " + line);
    d.iteration.push_back(it);
    d.nll.push_back(nll);
    d.seconds.push_back(secs);
  }
  return d;
}

Verdict criterion_7(const Context& ctx) {
  const TrainedModels models = load_models(ctx);
  const GenConfig g = desk_gen();
  const Stream held(kHeldOutSeed);

  double tv = 0.0;
  for (int i = 0; i < 200; ++i) {
    Stream rng = held.split(static_cast<std::uint64_t>(i));
    const Dataset d = sample_dataset(g, rng);
    const Assignment prefix = d.true_assignment->prefix(static_cast<std::size_t>(d.size() - 1));
    const Eigen::VectorXd exact = exact_conditional(d, prefix, g);
    const Eigen::VectorXd q = last_point_conditional(models.trained, d.points, prefix);
    tv += 0.5 * (exact - q).cwiseAbs().sum();
  }
  tv /= 200.0;

  std::vector<double> pv_init, pv_trained;
  for (int i = 0; i < 100; ++i) {
    Stream rng = held.split(1000 + static_cast<std::uint64_t>(i));
    const Dataset d = sample_dataset(g, rng);
    Stream a = rng.split(0), b = rng.split(0);
    pv_init.push_back(permutation_variance(models.init, d.points, *d.true_assignment, 10, a));
    pv_trained.push_back(permutation_variance(models.trained, d.points, *d.true_assignment, 10, b));
  }
  const double med_init = quantile_of(pv_init, 0.5), med_trained = quantile_of(pv_trained, 0.5);

  const Diagnostics diag = read_diagnostics(diag_path(ctx));
  const auto smooth = sliding_mean(diag.nll, 100);
  const auto at100 = std::find(diag.iteration.begin(), diag.iteration.end(), 100);
  const bool have100 = at100 != diag.iteration.end();
  const double nll100 = have100 ? smooth[static_cast<std::size_t>(at100 - diag.iteration.begin())] : NAN;
  const double nll_end = smooth.empty() ? NAN : smooth.back();
  const double train_secs = diag.seconds.empty() ? NAN : diag.seconds.back();

  const bool a = tv < 0.08;
  const bool b = med_trained < 0.01 * med_init;
  const bool c = have100 && nll_end < nll100;
  const bool budget = models.iterations <= 20000 && train_secs <= 4 * 3600.0;
  return verdict(a && b && c && budget,
                 std::string("(a) ") + (a ? "ok" : "FAIL") + " mean TV = " + fmt(tv) + "; (b) " +
                     (b ? "ok" : "FAIL") + " median perm variance " + fmt(med_trained) + " vs init " +
                     fmt(med_init) + " (ratio " + fmt(med_trained / med_init) + "); (c) " + (c ? "ok" : "FAIL") +
                     " smoothed NLL " + fmt(nll_end) + " vs " + fmt(nll100) + " at iteration 100; " +
                     std::to_string(models.iterations) + " iterations in " + fmt(train_secs / 60.0) + " min");
}

Verdict criterion_8(const Context& ctx) {
  const TrainedModels models = load_models(ctx);
  GenConfig g = desk_gen();
  g.n_min = g.n_max = 20;
  Stream rng(8008);
  const Dataset d = sample_dataset(g, rng);

  GibbsConfig ref;
  ref.burn_in = 1000;
  ref.n_sweeps = 1000 + 200000;
  ref.seed = 8009;
  const GibbsRun long_run = run_gibbs(d.points, g, ref);
  double truth = 0.0;
  for (int k : long_run.num_clusters) truth += k;
  truth /= static_cast<double>(long_run.num_clusters.size());

  MeanKConfig mk;
  mk.budgets = {10, 100, 1000, 10000};
  mk.repetitions = 8;
  mk.gibbs_burn_in = 1000;
  mk.seed = 8010;
  const MeanKTable table = mean_k_experiment(models.trained, d.points, g, mk);
  const MeanKSummary* gibbs = nullptr;
  const MeanKSummary* ncp = nullptr;
  for (const auto& s : table.summary) {
    if (s.budget != mk.budgets.back()) continue;
    (s.method == "gibbs" ? gibbs : ncp) = &s;
  }
  const bool overlap = gibbs && ncp && gibbs->q25 <= ncp->q75 && ncp->q25 <= gibbs->q75;

  // Throughput: S = 10^4 samples of an N = 50 dataset at 1 and 4 threads.
  GenConfig g50 = desk_gen();
  g50.n_min = g50.n_max = 50;
  Stream rng50(8011);
  const Dataset d50 = sample_dataset(g50, rng50);
  auto throughput = [&](int threads) {
    const Stream base(8012);
    std::vector<double> nll(10000);
    Clock clock;
    parallel_for(nll.size(), threads, [&](std::size_t i) {
      Stream r = base.split(i);
      nll[i] = -sample_assignment(models.trained, d50.points, r, {false, false}).log_q;
    });
    return static_cast<double>(nll.size()) / clock.seconds();
  };
  const double t1 = throughput(1), t4 = throughput(4);
  const double scaling = t4 / t1;
  const unsigned hw = std::thread::hardware_concurrency();

  std::string detail = "E[K] at budget " + std::to_string(mk.budgets.back()) + ": gibbs median " +
                       fmt(gibbs ? gibbs->median : NAN) + " IQR [" + fmt(gibbs ? gibbs->q25 : NAN) + ", " +
                       fmt(gibbs ? gibbs->q75 : NAN) + "], ncp-is median " + fmt(ncp ? ncp->median : NAN) +
                       " IQR [" + fmt(ncp ? ncp->q25 : NAN) + ", " + fmt(ncp ? ncp->q75 : NAN) +
                       "], long-Gibbs truth " + fmt(truth) + " (" + (overlap ? "overlap" : "NO overlap") +
                       "); throughput " + fmt(t1) + " -> " + fmt(t4) + " samples/s, scaling " + fmt(scaling) +
                       "x on " + std::to_string(hw) + " hardware thread(s)";
  if (!overlap) return {Outcome::kFail, detail};
  if (scaling >= 3.0) return {Outcome::kPass, detail};
  if (hw < 4) return {Outcome::kUnattainable, detail + "; 3x scaling needs >= 4 hardware threads"};
  return {Outcome::kFail, detail};
}

// Result payload with timing columns removed; non-tabular files verbatim.
std::string payload(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line, out;
  std::vector<bool> keep;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    if (line_no == 2 && line.find('\t') != std::string::npos) {
      for (const auto& c : cells) keep.push_back(c != "seconds" && c != "mean_seconds");
    }
    if (keep.empty() || line[0] == '#') {
      out += line + '\n';
      continue;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i >= keep.size() || keep[i]) out += cells[i] + '\t';
    }
    out += '\n';
  }
  return out;
}

Verdict criterion_9(const Context& ctx) {
  const fs::path root = ctx.workdir / "determinism";
  fs::remove_all(root);
  const std::string config = R"({
  "profile": "desk", "seed": 99,
  "gen": {"n_min": 6, "n_max": 6},
  "generate": {"count": 5, "out_dir": "data"},
  "train": {"iterations": 20, "datasets": 4, "permutations": 2, "checkpoint_every": 10,
            "architecture": {"dim_h": 8, "dim_g": 8, "width": 16, "depth": 2, "input_scale": 0.1},
            "checkpoint": "model.ckpt", "diagnostics": "diag.tsv"},
  "sample": {"checkpoint": "model.ckpt", "dataset": "data/dataset_0000.txt", "samples": 300,
             "shuffle": true, "output": "samples.tsv"},
  "exact": {"dataset": "data/dataset_0001.txt", "mode": "posterior", "output": "posterior.tsv"},
  "gibbs": {"dataset": "data/dataset_0002.txt", "n_sweeps": 3000, "burn_in": 100, "thinning": 2,
            "output": "gibbs.tsv", "stats": "gibbs_stats.tsv"}
})";
  const std::string sweep = R"({"seed": 99, "compare": {"mode": "sweep", "checkpoint": "model.ckpt",
    "dataset": "data/dataset_0003.txt", "from": [-25.0], "to": [25.0], "points": 21, "output": "sweep.tsv"}})";
  const std::string smooth = R"({"seed": 99, "compare": {"mode": "diagnostics", "diagnostics": "diag.tsv",
    "window": 5, "output": "diag_smooth.tsv"}})";
  const std::string meank = R"({"seed": 99, "compare": {"mode": "mean-k", "checkpoint": "model.ckpt",
    "dataset": "data/dataset_0004.txt", "budgets": [10, 200], "repetitions": 3, "burn_in": 50,
    "output": "meank.tsv", "summary": "meank_summary.tsv"}})";
  const std::vector<std::string> steps = {"generate -c run.json", "train -c run.json",
                                          "sample -c run.json",   "exact -c run.json",
                                          "gibbs -c run.json",    "compare -c sweep.json",
                                          "compare -c smooth.json", "compare -c meank.json"};
  for (int threads : {1, 3}) {
    const fs::path dir = root / ("threads" + std::to_string(threads));
    write_text(dir / "run.json", config);
    write_text(dir / "sweep.json", sweep);
    write_text(dir / "smooth.json", smooth);
    write_text(dir / "meank.json", meank);
    for (const auto& step : steps) {
      const int code = run_cli(ctx, dir, step + " --threads " + std::to_string(threads));
      if (code != 0) return verdict(false, "'ncp " + step + "' exited with " + std::to_string(code) + ", see cli.log");
    }
  }
  const fs::path a = root / "threads1", b = root / "threads3";
  int compared = 0;
  std::string mismatches;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().extension() == ".json") continue;
    if (entry.path().filename() == "cli.log") continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || payload(a / rel) != payload(b / rel)) mismatches += " " + rel.string();
  }
  return verdict(mismatches.empty() && compared >= 14,
                 std::to_string(compared) + " output files compared at 1 vs 3 threads" +
                     (mismatches.empty() ? "" : "; differing:" + mismatches));
}

struct Criterion {
  int id;
  std::function<Verdict(const Context&)> run;
  double limit_seconds;  // 0: no separate runtime limit
};

const std::vector<Criterion> kCriteria = {
    {1, criterion_1, 10},   {2, criterion_2, 60},  {3, criterion_3, 60},
    {4, criterion_4, 120},  {5, criterion_5, 120}, {6, criterion_6, 300},
    {7, criterion_7, 0},    {8, criterion_8, 0},   {9, criterion_9, 300},
};

Outcome run_one(const Criterion& c, const Context& ctx) {
  Clock clock;
  Verdict v;
  try {
    v = c.run(ctx);
  } catch (const std::exception& e) {
    v = {Outcome::kFail, std::string("error: ") + e.what()};
  }
  const double secs = clock.seconds();
  if (c.limit_seconds > 0 && secs > c.limit_seconds && v.outcome == Outcome::kPass) {
    v.outcome = Outcome::kFail;
    v.detail += "; runtime over the " + fmt(c.limit_seconds) + " s limit";
  }
  std::cout << (v.outcome == Outcome::kPass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << v.detail
            << " [" << fmt(secs) << " s]" << std::endl;
  return v.outcome;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx{fs::current_path() / "acceptance", ""};
  int only = 0;
  bool train_only = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (arg == "--workdir" && i + 1 < argc) {
      ctx.workdir = argv[++i];
    } else if (arg == "--cli" && i + 1 < argc) {
      ctx.cli = argv[++i];
    } else if (arg == "--train-only") {
      train_only = true;
    } else {
      std::cerr << "usage: ncp_acceptance [--criterion N] [--train-only] --workdir DIR --cli PATH\n";
      return 2;
    }
  }
  if (ctx.cli.empty()) {
    std::cerr << "ncp_acceptance: --cli is required\n";
    return 2;
  }
  ctx.cli = fs::absolute(ctx.cli);
  ctx.workdir = fs::absolute(ctx.workdir);

  if (train_only || (only == 0 && !fs::exists(model_path(ctx)))) {
    Clock clock;
    const bool ok = train_model(ctx);
    std::cout << (ok ? "trained" : "training FAILED (see cli.log)") << " in " << fmt(clock.seconds() / 60.0) << " min\n";
    if (!ok) return 1;
    if (train_only) return 0;
  }

  bool failed = false, unattainable = false;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    const Outcome o = run_one(c, ctx);
    failed |= o == Outcome::kFail;
    unattainable |= o == Outcome::kUnattainable;
  }
  if (failed) return 1;
  return unattainable ? kSkipCode : 0;
}
