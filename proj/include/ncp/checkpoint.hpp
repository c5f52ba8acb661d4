#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "ncp/ncp_model.hpp"
#include "ncp/ndnet.hpp"
#include "ncp/provenance.hpp"

namespace ncp {

inline constexpr std::string_view kCheckpointMagic = "NCP-CKPT-1";

/// Optimizer state needed to resume training bit-exactly. Per-iteration
/// randomness is derived from (seed, iteration), so no generator state is
/// stored.
struct TrainerState {
  std::int64_t iteration = 0;
  std::uint64_t seed = 0;
  AdamState<double> h;
  AdamState<double> g;
  AdamState<double> f;
};

struct Checkpoint {
  NcpModel model;
  std::optional<TrainerState> trainer;
};

/// Layout (one token group per line, numbers at 17 significant digits):
///   # ncp <version> config=<digest> seed=<seed>
///   NCP-CKPT-1
///   net h|g|f <in> <hidden...> <out>
///   input_scale <value>
///   pool_scale <value>
///   params h|g|f <count>   followed by <count> lines
///   [trainer <iteration> <seed>
///    adam h|g|f <step> <count>  followed by <count> lines "m v"]
///   end
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt, const Provenance& prov);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                     const Provenance& prov);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ncp
