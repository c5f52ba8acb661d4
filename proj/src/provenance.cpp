#include "ncp/provenance.hpp"

#include <cstdio>
#include <ostream>

namespace ncp {

std::string digest_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Provenance::header_line() const {
  return "# ncp " + std::string(kToolVersion) + " config=" + config_digest +
         " seed=" + std::to_string(seed);
}

void write_provenance(std::ostream& out, const Provenance& p) { out << p.header_line() << '\n'; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace ncp
