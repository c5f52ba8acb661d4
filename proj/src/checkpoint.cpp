#include "ncp/checkpoint.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ncp/errors.hpp"

namespace ncp {

namespace {

constexpr std::array<std::string_view, 3> kNetNames = {"h", "g", "f"};

std::string content_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    return line;
  }
  throw IoError("checkpoint ended early");
}

double parse_number(std::string_view tok) {
  // strtod round-trips %.17g output exactly.
  std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError("bad number in checkpoint: '" + s + "'");
  return v;
}

void expect_tag(std::istringstream& in, std::string_view tag, std::string_view net) {
  std::string t, n;
  in >> t >> n;
  if (t != tag || n != net) {
    throw IoError("checkpoint: expected '" + std::string(tag) + " " + std::string(net) + "', got '" +
                  t + " " + n + "'");
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt, const Provenance& prov) {
  write_provenance(out, prov);
  out << kCheckpointMagic << '\n';
  const std::array<const Mlpd*, 3> nets = {&ckpt.model.h_net, &ckpt.model.g_net, &ckpt.model.f_net};
  for (std::size_t i = 0; i < nets.size(); ++i) {
    out << "net " << kNetNames[i] << ' ' << nets[i]->spec().to_string() << '\n';
  }
  out << "input_scale " << format_double(ckpt.model.input_scale) << '\n';
  out << "pool_scale " << format_double(ckpt.model.pool_scale) << '\n';
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const auto& p = nets[i]->params();
    out << "params " << kNetNames[i] << ' ' << p.size() << '\n';
    for (Eigen::Index j = 0; j < p.size(); ++j) out << format_double(p(j)) << '\n';
  }
  if (ckpt.trainer) {
    const TrainerState& t = *ckpt.trainer;
    out << "trainer " << t.iteration << ' ' << t.seed << '\n';
    const std::array<const AdamState<double>*, 3> states = {&t.h, &t.g, &t.f};
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto& s = *states[i];
      out << "adam " << kNetNames[i] << ' ' << s.step << ' ' << s.first_moment.size() << '\n';
      for (Eigen::Index j = 0; j < s.first_moment.size(); ++j) {
        out << format_double(s.first_moment(j)) << ' ' << format_double(s.second_moment(j)) << '\n';
      }
    }
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  if (content_line(in) != kCheckpointMagic) throw IoError("missing NCP-CKPT-1 magic line");
  NcpArchitecture arch;
  std::array<MlpSpec*, 3> specs = {&arch.h, &arch.g, &arch.f};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    std::istringstream line(content_line(in));
    expect_tag(line, "net", kNetNames[i]);
    std::string rest;
    std::getline(line, rest);
    try {
      *specs[i] = MlpSpec::parse(rest);
    } catch (const ConfigError& e) {
      throw IoError(std::string("checkpoint: ") + e.what());
    }
  }
  {
    std::istringstream line(content_line(in));
    std::string tag, value;
    line >> tag >> value;
    if (tag != "input_scale") throw IoError("checkpoint: expected input_scale line");
    arch.input_scale = parse_number(value);
  }
  {
    std::istringstream line(content_line(in));
    std::string tag, value;
    line >> tag >> value;
    if (tag != "pool_scale") throw IoError("checkpoint: expected pool_scale line");
    arch.pool_scale = parse_number(value);
  }
  try {
    arch.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
  Checkpoint ckpt{NcpModel(arch), std::nullopt};
  std::array<Mlpd*, 3> nets = {&ckpt.model.h_net, &ckpt.model.g_net, &ckpt.model.f_net};
  for (std::size_t i = 0; i < nets.size(); ++i) {
    std::istringstream line(content_line(in));
    expect_tag(line, "params", kNetNames[i]);
    Eigen::Index count = -1;
    line >> count;
    auto& p = nets[i]->mutable_params();
    if (count != p.size()) throw IoError("checkpoint: parameter count does not match architecture");
    for (Eigen::Index j = 0; j < count; ++j) p(j) = parse_number(content_line(in));
  }
  std::string line_text = content_line(in);
  if (line_text.rfind("trainer", 0) == 0) {
    TrainerState t;
    std::istringstream line(line_text);
    std::string tag;
    line >> tag >> t.iteration >> t.seed;
    if (!line) throw IoError("checkpoint: malformed trainer line");
    std::array<AdamState<double>*, 3> states = {&t.h, &t.g, &t.f};
    for (std::size_t i = 0; i < states.size(); ++i) {
      std::istringstream head(content_line(in));
      expect_tag(head, "adam", kNetNames[i]);
      std::int64_t step = 0;
      Eigen::Index count = -1;
      head >> step >> count;
      if (count != nets[i]->params().size()) throw IoError("checkpoint: optimizer size mismatch");
      AdamState<double> s(count);
      s.step = step;
      for (Eigen::Index j = 0; j < count; ++j) {
        std::istringstream row(content_line(in));
        std::string a, b;
        row >> a >> b;
        s.first_moment(j) = parse_number(a);
        s.second_moment(j) = parse_number(b);
      }
      *states[i] = std::move(s);
    }
    ckpt.trainer = std::move(t);
    line_text = content_line(in);
  }
  if (line_text != "end") throw IoError("checkpoint: missing end marker");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                     const Provenance& prov) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_checkpoint(out, ckpt, prov);
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace ncp
