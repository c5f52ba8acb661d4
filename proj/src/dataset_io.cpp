#include "ncp/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ncp/errors.hpp"

namespace ncp {

namespace {

std::string next_content_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    return line;
  }
  throw IoError("dataset file ended early");
}

Eigen::RowVectorXd parse_row(const std::string& line, int dim) {
  std::istringstream in(line);
  Eigen::RowVectorXd row(dim);
  for (int j = 0; j < dim; ++j) {
    std::string tok;
    if (!(in >> tok)) throw IoError("dataset row has fewer than " + std::to_string(dim) + " values");
    try {
      std::size_t used = 0;
      row(j) = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw IoError("bad number in dataset row: '" + tok + "'");
    }
  }
  std::string extra;
  if (in >> extra) throw IoError("dataset row has more than " + std::to_string(dim) + " values");
  return row;
}

}  // namespace

void write_dataset(std::ostream& out, const DatasetFile& file, const Provenance& prov) {
  const Dataset& d = file.data;
  const GenConfig& c = file.config;
  write_provenance(out, prov);
  out << kDatasetMagic << '\n';
  nlohmann::ordered_json header = {
      {"alpha", c.alpha},   {"sigma_mu", c.sigma_mu}, {"sigma_x", c.sigma_x},
      {"dim_x", c.dim_x},   {"n_min", c.n_min},       {"n_max", c.n_max},
      {"N", d.size()},      {"has_assignment", d.true_assignment.has_value()},
      {"num_means", d.true_means ? d.true_means->rows() : 0}};
  out << header.dump() << '\n';
  for (int i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.dim(); ++j) {
      if (j) out << ' ';
      out << format_double(d.points(i, j));
    }
    out << '\n';
  }
  if (d.true_assignment) out << "assignment " << d.true_assignment->to_string() << '\n';
  if (d.true_means) {
    for (Eigen::Index k = 0; k < d.true_means->rows(); ++k) {
      out << "mean";
      for (Eigen::Index j = 0; j < d.true_means->cols(); ++j) out << ' ' << format_double((*d.true_means)(k, j));
      out << '\n';
    }
  }
}

DatasetFile read_dataset(std::istream& in) {
  if (next_content_line(in) != kDatasetMagic) throw IoError("missing NCP-DATASET-1 magic line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(next_content_line(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad dataset header: ") + e.what());
  }
  DatasetFile file;
  try {
    file.config.alpha = header.at("alpha").get<double>();
    file.config.sigma_mu = header.at("sigma_mu").get<double>();
    file.config.sigma_x = header.at("sigma_x").get<double>();
    file.config.dim_x = header.at("dim_x").get<int>();
    file.config.n_min = header.at("n_min").get<int>();
    file.config.n_max = header.at("n_max").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad dataset header: ") + e.what());
  }
  file.config.validate();
  const int n = header.at("N").get<int>();
  const bool has_assignment = header.value("has_assignment", false);
  const int num_means = header.value("num_means", 0);
  if (n < 0) throw IoError("negative N in dataset header");
  Dataset& d = file.data;
  d.points.resize(n, file.config.dim_x);
  for (int i = 0; i < n; ++i) d.points.row(i) = parse_row(next_content_line(in), file.config.dim_x);
  if (has_assignment) {
    const std::string line = next_content_line(in);
    constexpr std::string_view tag = "assignment";
    if (line.rfind(tag, 0) != 0) throw IoError("expected assignment line");
    d.true_assignment = Assignment::parse(line.substr(tag.size()));
  }
  if (num_means > 0) {
    Eigen::MatrixXd means(num_means, file.config.dim_x);
    for (int k = 0; k < num_means; ++k) {
      const std::string line = next_content_line(in);
      if (line.rfind("mean", 0) != 0) throw IoError("expected mean line");
      means.row(k) = parse_row(line.substr(4), file.config.dim_x);
    }
    d.true_means = std::move(means);
  }
  d.validate();
  return file;
}

void save_dataset(const std::filesystem::path& path, const DatasetFile& file,
                  const Provenance& prov) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_dataset(out, file, prov);
  if (!out) throw IoError("write failed for " + path.string());
}

DatasetFile load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace ncp
