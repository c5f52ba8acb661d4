#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace ncp {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// FNV-1a 64-bit digest, printed as 16 hex digits.
std::string digest_hex(std::string_view text);

/// Identifies the run that produced an output file.
struct Provenance {
  std::string config_digest = "0000000000000000";
  std::uint64_t seed = 0;

  /// "# ncp <version> config=<digest> seed=<seed>"
  std::string header_line() const;
};

void write_provenance(std::ostream& out, const Provenance& p);

/// Formats a double with 17 significant digits (lossless round trip).
std::string format_double(double v);

}  // namespace ncp
