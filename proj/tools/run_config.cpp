#include "run_config.hpp"

#include <fstream>
#include <sstream>

namespace ncp::cli {

namespace {

const std::set<std::string> kTopLevel = {"profile", "seed",   "threads", "gen",    "generate",
                                         "train",   "sample", "exact",   "gibbs",  "compare"};

}  // namespace

Section::Section(nlohmann::json object, std::string name)
    : object_(std::move(object)), name_(std::move(name)) {
  if (object_.is_null()) object_ = nlohmann::json::object();
  if (!object_.is_object()) throw ConfigError(name_ + ": expected a JSON object");
}

bool Section::has(const std::string& key) const { return object_.contains(key); }

Section Section::child(const std::string& key) const {
  used_.insert(key);
  return Section(has(key) ? object_.at(key) : nlohmann::json::object(), name_ + "." + key);
}

void Section::finish() const {
  std::string unknown;
  for (const auto& item : object_.items()) {
    if (!used_.count(item.key())) unknown += (unknown.empty() ? "" : ", ") + item.key();
  }
  if (!unknown.empty()) throw ConfigError(name_ + ": unknown key(s) " + unknown);
}

Section RunConfig::section() const {
  return Section(document.contains(subcommand) ? document.at(subcommand) : nlohmann::json::object(),
                 subcommand);
}

GenConfig RunConfig::gen_over(const GenConfig& base) const {
  const Section s(document.contains("gen") ? document.at("gen") : nlohmann::json::object(), "gen");
  GenConfig g = base;
  g.alpha = s.get("alpha", g.alpha);
  g.sigma_mu = s.get("sigma_mu", g.sigma_mu);
  g.sigma_x = s.get("sigma_x", g.sigma_x);
  g.dim_x = s.get("dim_x", g.dim_x);
  g.n_min = s.get("n_min", g.n_min);
  g.n_max = s.get("n_max", g.n_max);
  s.finish();
  g.validate();
  return g;
}

GenConfig profile_gen(const std::string& profile) {
  GenConfig g;
  if (profile == "desk") {
    g.dim_x = 1;
    g.n_min = 5;
    g.n_max = 50;
  } else if (profile == "paper") {
    g.dim_x = 2;
    g.n_min = 5;
    g.n_max = 100;
  } else {
    throw ConfigError("profile must be \"desk\" or \"paper\", got \"" + profile + "\"");
  }
  return g;
}

RunConfig make_run_config(nlohmann::json document, const std::string& subcommand,
                          const Overrides& overrides) {
  if (!document.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& item : document.items()) {
    if (!kTopLevel.count(item.key())) throw ConfigError("config: unknown key " + item.key());
  }
  if (overrides.seed) document["seed"] = *overrides.seed;
  if (overrides.threads) document["threads"] = *overrides.threads;
  for (const auto& [key, path] : overrides.paths) document[subcommand][key] = path;

  RunConfig cfg;
  cfg.subcommand = subcommand;
  const Section top(document, "config");
  if (!top.has("seed")) throw ConfigError("config: seed is mandatory");
  if (!document.at("seed").is_number_unsigned()) {
    throw ConfigError("config: seed must be a non-negative integer");
  }
  cfg.seed = top.get<std::uint64_t>("seed", 0);
  cfg.threads = top.get("threads", 1);
  if (cfg.threads < 1) throw ConfigError("config: threads must be >= 1");
  cfg.profile = top.get<std::string>("profile", "desk");

  nlohmann::json digest_doc = document;
  digest_doc.erase("threads");
  cfg.provenance = Provenance{digest_hex(digest_doc.dump()), cfg.seed};
  cfg.document = std::move(document);
  cfg.gen = cfg.gen_over(profile_gen(cfg.profile));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file, const std::string& subcommand,
                          const Overrides& overrides) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config file " + file.string());
  std::stringstream text;
  text << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  return make_run_config(std::move(doc), subcommand, overrides);
}

}  // namespace ncp::cli
