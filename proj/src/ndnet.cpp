#include "ncp/ndnet.hpp"

#include <sstream>

namespace ncp {

std::size_t MlpSpec::layer_offset(int l) const {
  std::size_t off = 0;
  for (int i = 0; i < l; ++i) {
    off += static_cast<std::size_t>(layer_out(i)) * static_cast<std::size_t>(layer_in(i)) +
           static_cast<std::size_t>(layer_out(i)) + (has_activation(i) ? 1 : 0);
  }
  return off;
}

std::size_t MlpSpec::param_count() const { return layer_offset(num_layers()); }

void MlpSpec::validate() const {
  if (in_dim < 1 || out_dim < 1) throw ConfigError("MlpSpec: dimensions must be positive");
  for (int w : hidden) {
    if (w < 1) throw ConfigError("MlpSpec: hidden widths must be positive");
  }
}

std::string MlpSpec::to_string() const {
  std::ostringstream out;
  out << in_dim;
  for (int w : hidden) out << ' ' << w;
  out << ' ' << out_dim;
  return out.str();
}

MlpSpec MlpSpec::parse(const std::string& text) {
  std::istringstream in(text);
  std::vector<int> dims;
  int v;
  while (in >> v) dims.push_back(v);
  if (!in.eof() || dims.size() < 2) throw ConfigError("MlpSpec: cannot parse '" + text + "'");
  MlpSpec spec;
  spec.in_dim = dims.front();
  spec.out_dim = dims.back();
  spec.hidden.assign(dims.begin() + 1, dims.end() - 1);
  spec.validate();
  return spec;
}

double LrSchedule::at(std::int64_t step) const {
  std::size_t i = 0;
  while (i < breakpoints.size() && step > breakpoints[i]) ++i;
  return lrs[i];
}

void LrSchedule::validate() const {
  if (lrs.size() != breakpoints.size() + 1) {
    throw ConfigError("lr schedule needs one more rate than breakpoints");
  }
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (breakpoints[i] <= breakpoints[i - 1]) throw ConfigError("lr breakpoints must increase");
  }
  for (double lr : lrs) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
}

}  // namespace ncp
