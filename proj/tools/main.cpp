#include <functional>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

enum ExitCode { kOk = 0, kUnexpected = 1, kConfig = 2, kNumeric = 3, kIo = 4 };

struct Invocation {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::map<std::string, std::string> paths;
};

// Path flags and the section key each one replaces.
const std::map<std::string, std::map<std::string, std::string>> kPathFlags = {
    {"generate", {{"out", "out_dir"}}},
    {"train", {{"out", "checkpoint"}, {"diagnostics", "diagnostics"}, {"resume", "resume"}}},
    {"sample", {{"out", "output"}, {"checkpoint", "checkpoint"}, {"dataset", "dataset"}}},
    {"exact", {{"out", "output"}, {"dataset", "dataset"}}},
    {"gibbs", {{"out", "output"}, {"stats", "stats"}, {"dataset", "dataset"}}},
    {"compare",
     {{"out", "output"},
      {"checkpoint", "checkpoint"},
      {"dataset", "dataset"},
      {"diagnostics", "diagnostics"},
      {"summary", "summary"}}},
};

const std::map<std::string, std::string> kDescriptions = {
    {"generate", "sample datasets from the mixture model"},
    {"train", "train a clustering network"},
    {"sample", "draw clusterings of a dataset from a trained network"},
    {"exact", "enumeration oracles on small datasets"},
    {"gibbs", "collapsed Gibbs sampler baseline"},
    {"compare", "figure data: sweep, diagnostics or mean-k"},
};

const std::map<std::string, std::function<void(const ncp::cli::RunConfig&)>> kCommands = {
    {"generate", ncp::cli::cmd_generate}, {"train", ncp::cli::cmd_train},
    {"sample", ncp::cli::cmd_sample},     {"exact", ncp::cli::cmd_exact},
    {"gibbs", ncp::cli::cmd_gibbs},       {"compare", ncp::cli::cmd_compare},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Amortized clustering with neural clustering processes"};
  app.require_subcommand(1);
  std::map<std::string, Invocation> inv;
  std::map<std::string, std::map<std::string, std::string>> path_values;
  for (const auto& [name, flags] : kPathFlags) {
    CLI::App* sub = app.add_subcommand(name, kDescriptions.at(name));
    Invocation& i = inv[name];
    sub->add_option("-c,--config", i.config, "JSON run configuration")->required();
    sub->add_option("--seed", i.seed, "override the master seed");
    sub->add_option("--threads", i.threads, "worker threads")->check(CLI::PositiveNumber);
    for (const auto& [flag, key] : flags) {
      sub->add_option("--" + flag, path_values[name][flag], "override " + name + "." + key);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const Invocation& i = inv.at(name);
  ncp::cli::Overrides ov;
  ov.seed = i.seed;
  ov.threads = i.threads;
  for (const auto& [flag, key] : kPathFlags.at(name)) {
    const std::string& v = path_values[name][flag];
    if (!v.empty()) ov.paths[key] = v;
  }

  try {
    kCommands.at(name)(ncp::cli::load_run_config(i.config, name, ov));
  } catch (const ncp::ConfigError& e) {
    std::cerr << "ncp " << name << ": config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ncp::NumericError& e) {
    std::cerr << "ncp " << name << ": numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const ncp::IoError& e) {
    std::cerr << "ncp " << name << ": io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "ncp " << name << ": " << e.what() << '\n';
    return kUnexpected;
  }
  return kOk;
}
