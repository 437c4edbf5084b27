#ifndef DMTLR_DATASET_HPP
#define DMTLR_DATASET_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dmtlr/simulation.hpp"
#include "dmtlr/tensor.hpp"

namespace dmtlr::data {

// Raw image container: magic "DMIM", u32 height, u32 width, u32 channels
// (little-endian), then row-major little-endian 32-bit reals.
void write_image(const std::string& path, const nn::Tensor& image);
nn::Tensor read_image(const std::string& path);

// Linear map of the field onto [0, 255], replicated across 3 channels.
// Constant fields map to mid-gray 127.5.
nn::Tensor render_image(const sim::PhaseField& field);

struct ManifestRow {
  std::int64_t sample_id = 0;
  std::string image_file;  // relative to the manifest directory
  std::array<double, 18> params{};
  std::array<double, 6> targets{};
};

struct DatasetManifest {
  std::string directory;  // resolved at load/generate time
  std::vector<ManifestRow> rows;
  // Samples whose characteristic length was undefined (constant field) and
  // fell back to the grid size; echoed in the manifest comment block.
  std::vector<std::int64_t> flagged_ids;
};

// Comma-separated column names: sample_id,image_file,p01..p18,t1..t6.
std::string manifest_header();

void write_manifest(const DatasetManifest& manifest, const std::string& path);

// Parses a manifest; '#' lines are comments, the first non-comment line must
// equal manifest_header(). Malformed rows are reported with their line number.
DatasetManifest load_manifest(const std::string& path);

// Runs `count` independent simulations and writes images plus manifest.csv
// under output_dir. Each sample owns its rng stream derived from (seed, id),
// so outputs are reproducible and order-independent.
DatasetManifest generate_dataset(int count, sim::Regime regime, int grid,
                                 std::uint64_t seed, const std::string& output_dir);

}  // namespace dmtlr::data

#endif  // DMTLR_DATASET_HPP
