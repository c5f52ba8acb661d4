#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncp/errors.hpp"
#include "ncp/gen_model.hpp"
#include "ncp/provenance.hpp"

namespace ncp::cli {

/// Read-only view of one JSON object that remembers which keys were read,
/// so misspelled keys are reported instead of silently ignored.
class Section {
 public:
  Section(nlohmann::json object, std::string name);

  bool has(const std::string& key) const;

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  T require(const std::string& key) const {
    if (!has(key)) throw ConfigError(name_ + ": missing required key '" + key + "'");
    return convert<T>(key);
  }

  Section child(const std::string& key) const;
  /// Throws ConfigError naming every key that was never read.
  void finish() const;

  const std::string& name() const { return name_; }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    used_.insert(key);
    try {
      return object_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  nlohmann::json object_;
  std::string name_;
  mutable std::set<std::string> used_;
};

/// Command-line values that replace entries of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  /// Section key -> path, applied to the subcommand's section.
  std::map<std::string, std::string> paths;
};

struct RunConfig {
  nlohmann::json document;
  std::string subcommand;
  std::string profile = "desk";
  std::uint64_t seed = 0;
  int threads = 1;
  GenConfig gen;
  Provenance provenance;

  /// The subcommand's own section (empty when absent).
  Section section() const;
  /// `base` with every key present in the "gen" section replaced.
  GenConfig gen_over(const GenConfig& base) const;
};

/// Parses the file, applies overrides and validates the common fields. The
/// digest covers the effective document except the thread count.
RunConfig load_run_config(const std::filesystem::path& file, const std::string& subcommand,
                          const Overrides& overrides);
RunConfig make_run_config(nlohmann::json document, const std::string& subcommand,
                          const Overrides& overrides);

GenConfig profile_gen(const std::string& profile);

}  // namespace ncp::cli
