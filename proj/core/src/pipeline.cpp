#include "dmtlr/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "dmtlr/dataset.hpp"
#include "dmtlr/rng.hpp"

namespace dmtlr::data {

void StandardScaler::fit(const nn::Tensor& rows) {
  if (rows.rank() != 2 || rows.dim(0) < 1)
    throw std::invalid_argument("StandardScaler::fit: expected non-empty (n,d)");
  const int n = rows.dim(0), d = rows.dim(1);
  means_.assign(static_cast<std::size_t>(d), 0.0);
  stddevs_.assign(static_cast<std::size_t>(d), 0.0);
  constant_.assign(static_cast<std::size_t>(d), false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) means_[static_cast<std::size_t>(j)] += rows.at2(i, j);
  for (double& m : means_) m /= n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      const double e = rows.at2(i, j) - means_[static_cast<std::size_t>(j)];
      stddevs_[static_cast<std::size_t>(j)] += e * e;
    }
  for (int j = 0; j < d; ++j) {
    auto& s = stddevs_[static_cast<std::size_t>(j)];
    s = std::sqrt(s / n);  // population standard deviation
    const double floor = 1e-12 * std::max(1.0, std::abs(means_[static_cast<std::size_t>(j)]));
    if (s < floor) {
      s = 1.0;
      constant_[static_cast<std::size_t>(j)] = true;
    }
  }
  fitted_ = true;
}

void StandardScaler::require_fitted(const nn::Tensor& rows) const {
  if (!fitted_)
    throw std::logic_error("StandardScaler: transform before fit");
  if (rows.rank() != 2 || rows.dim(1) != static_cast<int>(means_.size()))
    throw std::invalid_argument("StandardScaler: column count " +
                                rows.shape_string() + " does not match fit");
}

nn::Tensor StandardScaler::transform(const nn::Tensor& rows) const {
  require_fitted(rows);
  nn::Tensor out(rows.shape);
  const int n = rows.dim(0), d = rows.dim(1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out.at2(i, j) = (rows.at2(i, j) - means_[static_cast<std::size_t>(j)]) /
                      stddevs_[static_cast<std::size_t>(j)];
  return out;
}

nn::Tensor StandardScaler::inverse_transform(const nn::Tensor& rows) const {
  require_fitted(rows);
  nn::Tensor out(rows.shape);
  const int n = rows.dim(0), d = rows.dim(1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out.at2(i, j) = rows.at2(i, j) * stddevs_[static_cast<std::size_t>(j)] +
                      means_[static_cast<std::size_t>(j)];
  return out;
}

RawDataset load_dataset(const std::string& manifest_path) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  if (manifest.rows.empty())
    throw std::runtime_error(manifest_path + ": manifest has no rows");
  namespace fs = std::filesystem;

  RawDataset ds;
  const int n = static_cast<int>(manifest.rows.size());
  ds.sample_ids.reserve(manifest.rows.size());
  ds.descriptors = nn::Tensor({n, 18});
  ds.targets = nn::Tensor({n, 6});
  for (int i = 0; i < n; ++i) {
    const ManifestRow& row = manifest.rows[static_cast<std::size_t>(i)];
    const std::string path = (fs::path(manifest.directory) / row.image_file).string();
    nn::Tensor image = read_image(path);
    if (image.dim(2) != 3)
      throw std::runtime_error(path + ": expected 3 channels, got " +
                               std::to_string(image.dim(2)));
    if (i == 0) {
      ds.images = nn::Tensor({n, image.dim(0), image.dim(1), 3});
    } else if (image.dim(0) != ds.images.dim(1) || image.dim(1) != ds.images.dim(2)) {
      throw std::runtime_error(path + ": image size " + image.shape_string() +
                               " differs from the first sample");
    }
    std::copy(image.data.begin(), image.data.end(),
              ds.images.data.begin() + static_cast<std::ptrdiff_t>(i) * image.numel());
    ds.sample_ids.push_back(row.sample_id);
    for (int j = 0; j < 18; ++j) ds.descriptors.at2(i, j) = row.params[static_cast<std::size_t>(j)];
    for (int j = 0; j < 6; ++j) ds.targets.at2(i, j) = row.targets[static_cast<std::size_t>(j)];
  }
  return ds;
}

nn::Tensor resize_images(const nn::Tensor& images, int target_h, int target_w) {
  if (images.rank() != 4)
    throw std::invalid_argument("resize_images: expected (n,h,w,c)");
  const int n = images.dim(0), h = images.dim(1), w = images.dim(2), c = images.dim(3);
  if (h == target_h && w == target_w) return images;
  if (target_h < 1 || target_w < 1 || h % target_h != 0 || w % target_w != 0)
    throw std::invalid_argument(
        "resize_images: source " + std::to_string(h) + "x" + std::to_string(w) +
        " is not an integer multiple of target " + std::to_string(target_h) + "x" +
        std::to_string(target_w));
  const int fh = h / target_h, fw = w / target_w;
  const double inv_area = 1.0 / (fh * fw);
  nn::Tensor out({n, target_h, target_w, c});
  for (int i = 0; i < n; ++i) {
    const double* src = &images.data[static_cast<std::size_t>(i) * h * w * c];
    double* dst = &out.data[static_cast<std::size_t>(i) * target_h * target_w * c];
    for (int oy = 0; oy < target_h; ++oy)
      for (int ox = 0; ox < target_w; ++ox)
        for (int ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (int dy = 0; dy < fh; ++dy)
            for (int dx = 0; dx < fw; ++dx)
              acc += src[(static_cast<std::size_t>(oy * fh + dy) * w + (ox * fw + dx)) * c + ch];
          dst[(static_cast<std::size_t>(oy) * target_w + ox) * c + ch] = acc * inv_area;
        }
  }
  return out;
}

std::array<double, 3> fit_channel_means(const nn::Tensor& images) {
  if (images.rank() != 4 || images.dim(3) != 3)
    throw std::invalid_argument("fit_channel_means: expected (n,h,w,3)");
  std::array<double, 3> means{};
  const std::size_t pixels = images.data.size() / 3;
  for (std::size_t i = 0; i < pixels; ++i)
    for (int ch = 0; ch < 3; ++ch) means[static_cast<std::size_t>(ch)] += images.data[3 * i + ch];
  for (double& m : means) m /= static_cast<double>(pixels);
  return means;
}

nn::Tensor remove_channel_means(const nn::Tensor& images,
                                const std::array<double, 3>& means) {
  if (images.rank() != 4 || images.dim(3) != 3)
    throw std::invalid_argument("remove_channel_means: expected (n,h,w,3)");
  nn::Tensor out = images;
  const std::size_t pixels = out.data.size() / 3;
  for (std::size_t i = 0; i < pixels; ++i)
    for (int ch = 0; ch < 3; ++ch) out.data[3 * i + ch] -= means[static_cast<std::size_t>(ch)];
  return out;
}

nn::Tensor prepare_images(const nn::Tensor& images,
                          const std::array<double, 3>& train_means) {
  nn::Tensor out = remove_channel_means(images, train_means);
  for (double& v : out.data) v *= kPixelScale;
  return out;
}

SplitPlan split(int n, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("split: need at least 3 samples");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5eed0517ULL));
  rng.shuffle(order);
  const int train_count = static_cast<int>(std::llround(2.0 * n / 3.0));
  SplitPlan plan;
  plan.seed = seed;
  plan.train_indices.assign(order.begin(), order.begin() + train_count);
  plan.test_indices.assign(order.begin() + train_count, order.end());
  return plan;
}

std::vector<std::vector<int>> epoch_batches(int n, int batch_size,
                                            std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw std::invalid_argument("epoch_batches: batch_size < 1");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0xba7c0000ULL + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);
  std::vector<std::vector<int>> result;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(start + batch_size, n);
    result.emplace_back(order.begin() + start, order.begin() + end);
  }
  return result;
}

nn::Tensor gather_rows(const nn::Tensor& t, std::span<const int> rows) {
  if (t.rank() < 1) throw std::invalid_argument("gather_rows: rank-0 tensor");
  std::int64_t row_size = 1;
  for (int d = 1; d < t.rank(); ++d) row_size *= t.dim(d);
  std::vector<int> shape = t.shape;
  shape[0] = static_cast<int>(rows.size());
  nn::Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(rows[i]) * row_size;
    std::copy(t.data.begin() + src, t.data.begin() + src + row_size,
              out.data.begin() + static_cast<std::ptrdiff_t>(i) * row_size);
  }
  return out;
}

}  // namespace dmtlr::data
