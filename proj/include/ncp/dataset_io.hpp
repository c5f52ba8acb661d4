#pragma once

#include <filesystem>
#include <iosfwd>

#include "ncp/gen_model.hpp"
#include "ncp/provenance.hpp"

namespace ncp {

inline constexpr std::string_view kDatasetMagic = "NCP-DATASET-1";

struct DatasetFile {
  GenConfig config;
  Dataset data;
};

/// Text layout:
///   # ncp <version> config=<digest> seed=<seed>
///   NCP-DATASET-1
///   {"alpha":..,"sigma_mu":..,"sigma_x":..,"dim_x":..,"n_min":..,"n_max":..,
///    "N":..,"has_assignment":..,"num_means":..}
///   N rows of dim_x numbers (17 significant digits)
///   assignment <one-based labels>          (if has_assignment)
///   num_means rows "mean <dim_x numbers>"
void write_dataset(std::ostream& out, const DatasetFile& file, const Provenance& prov);
DatasetFile read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const DatasetFile& file,
                  const Provenance& prov);
DatasetFile load_dataset(const std::filesystem::path& path);

}  // namespace ncp
