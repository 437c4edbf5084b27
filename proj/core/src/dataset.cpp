#include "dmtlr/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dmtlr/rng.hpp"

namespace dmtlr::data {

namespace {

constexpr char kImageMagic[4] = {'D', 'M', 'I', 'M'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& path, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty())
    throw std::runtime_error(path + ":" + std::to_string(line) +
                             ": malformed numeric field '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_image(const std::string& path, const nn::Tensor& image) {
  if (image.rank() != 3)
    throw std::invalid_argument("write_image: expected (h,w,c) tensor, got " +
                                image.shape_string());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_image: cannot open " + path);
  os.write(kImageMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(image.dim(0)));
  put_u32(os, static_cast<std::uint32_t>(image.dim(1)));
  put_u32(os, static_cast<std::uint32_t>(image.dim(2)));
  std::vector<float> buf(image.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<float>(image.data[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw std::runtime_error("write_image: write failed for " + path);
}

nn::Tensor read_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_image: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kImageMagic, 4) != 0)
    throw std::runtime_error("read_image: bad magic in " + path);
  const int h = static_cast<int>(get_u32(is));
  const int w = static_cast<int>(get_u32(is));
  const int c = static_cast<int>(get_u32(is));
  if (!is || h <= 0 || w <= 0 || c <= 0)
    throw std::runtime_error("read_image: bad header in " + path);
  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  std::vector<float> buf(count);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!is) throw std::runtime_error("read_image: truncated data in " + path);
  nn::Tensor image({h, w, c});
  for (std::size_t i = 0; i < count; ++i)
    image.data[i] = static_cast<double>(buf[i]);
  return image;
}

nn::Tensor render_image(const sim::PhaseField& field) {
  const int n = field.n;
  nn::Tensor image({n, n, 3});
  const auto [min_it, max_it] =
      std::minmax_element(field.values.begin(), field.values.end());
  const double lo = *min_it, hi = *max_it;
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    const double v = hi > lo ? (field.values[i] - lo) * scale : 127.5;
    image.data[3 * i + 0] = v;
    image.data[3 * i + 1] = v;
    image.data[3 * i + 2] = v;
  }
  return image;
}

std::string manifest_header() {
  std::string header = "sample_id,image_file";
  for (const auto& range : sim::param_ranges()) {
    header += ',';
    header += range.column;
  }
  for (const char* column : sim::kTargetColumns) {
    header += ',';
    header += column;
  }
  return header;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_manifest: cannot open " + path);
  for (const auto& range : sim::param_ranges()) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "# %s: %s, range [%g, %g]\n", range.column,
                  range.doc, range.lo, range.hi);
    os << buf;
  }
  for (std::size_t i = 0; i < sim::kTargetColumns.size(); ++i)
    os << "# " << sim::kTargetColumns[i] << ": " << sim::kTargetDocs[i] << "\n";
  if (!manifest.flagged_ids.empty()) {
    os << "# flagged_constant_field:";
    for (std::size_t i = 0; i < manifest.flagged_ids.size(); ++i)
      os << (i ? "," : " ") << manifest.flagged_ids[i];
    os << "\n";
  }
  os << manifest_header() << "\n";
  for (const ManifestRow& row : manifest.rows) {
    os << row.sample_id << ',' << row.image_file;
    for (double v : row.params) os << ',' << format_double(v);
    for (double v : row.targets) os << ',' << format_double(v);
    os << "\n";
  }
  if (!os) throw std::runtime_error("write_manifest: write failed for " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_manifest: cannot open " + path);
  DatasetManifest manifest;
  manifest.directory = std::filesystem::path(path).parent_path().string();
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  const std::string expected = manifest_header();
  const std::string flag_prefix = "# flagged_constant_field:";
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind(flag_prefix, 0) == 0) {
        std::istringstream fs(line.substr(flag_prefix.size()));
        std::string token;
        while (std::getline(fs, token, ','))
          if (!token.empty()) manifest.flagged_ids.push_back(std::stoll(token));
      }
      continue;
    }
    if (!header_seen) {
      if (line != expected)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": header mismatch, expected '" + expected + "'");
      header_seen = true;
      continue;
    }
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != 2 + 18 + 6)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 26 columns, got " +
                               std::to_string(fields.size()));
    ManifestRow row;
    try {
      row.sample_id = std::stoll(fields[0]);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed sample_id '" + fields[0] + "'");
    }
    row.image_file = fields[1];
    for (int i = 0; i < 18; ++i)
      row.params[static_cast<std::size_t>(i)] =
          parse_double(fields[static_cast<std::size_t>(2 + i)], path, line_no);
    for (int i = 0; i < 6; ++i)
      row.targets[static_cast<std::size_t>(i)] =
          parse_double(fields[static_cast<std::size_t>(20 + i)], path, line_no);
    manifest.rows.push_back(std::move(row));
  }
  if (!header_seen)
    throw std::runtime_error(path + ": missing header line");
  return manifest;
}

DatasetManifest generate_dataset(int count, sim::Regime regime, int grid,
                                 std::uint64_t seed, const std::string& output_dir) {
  if (count < 1)
    throw std::invalid_argument("generate_dataset: count must be >= 1");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(output_dir) / "images", ec);
  if (ec)
    throw std::runtime_error("generate_dataset: cannot create " + output_dir +
                             ": " + ec.message());

  DatasetManifest manifest;
  manifest.directory = output_dir;
  manifest.rows.reserve(static_cast<std::size_t>(count));
  for (int id = 0; id < count; ++id) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(id)));
    const sim::SimParams params = sim::sample_params(rng, regime);
    const sim::PhaseField field = sim::run_simulation(params, grid, rng);
    const sim::TargetVector targets = sim::extract_targets(field, params);

    char name[64];
    std::snprintf(name, sizeof(name), "images/sample_%06d.dmim", id);
    write_image((fs::path(output_dir) / name).string(), render_image(field));

    ManifestRow row;
    row.sample_id = id;
    row.image_file = name;
    row.params = params.to_array();
    row.targets = targets.to_array();
    manifest.rows.push_back(std::move(row));
    if (targets.length_defaulted) manifest.flagged_ids.push_back(id);
  }
  write_manifest(manifest, (fs::path(output_dir) / "manifest.csv").string());
  return manifest;
}

}  // namespace dmtlr::data
