#ifndef DMTLR_PIPELINE_HPP
#define DMTLR_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmtlr/tensor.hpp"

namespace dmtlr::data {

// Per-column standardization fitted on the training split only. Uses the
// population standard deviation; constant columns keep divisor 1 and are
// flagged.
class StandardScaler {
 public:
  void fit(const nn::Tensor& rows);  // (n, d)
  nn::Tensor transform(const nn::Tensor& rows) const;
  nn::Tensor inverse_transform(const nn::Tensor& rows) const;

  bool fitted() const { return fitted_; }
  std::span<const double> means() const { return means_; }
  std::span<const double> stddevs() const { return stddevs_; }
  const std::vector<bool>& constant_columns() const { return constant_; }

 private:
  void require_fitted(const nn::Tensor& rows) const;

  std::vector<double> means_;
  std::vector<double> stddevs_;
  std::vector<bool> constant_;
  bool fitted_ = false;
};

// In-memory dataset as loaded from a manifest: aligned ids, images (n,h,w,3),
// descriptors (n,18) and targets (n,6).
struct RawDataset {
  std::vector<std::int64_t> sample_ids;
  nn::Tensor images;
  nn::Tensor descriptors;
  nn::Tensor targets;

  int size() const { return images.rank() > 0 ? images.dim(0) : 0; }
};

RawDataset load_dataset(const std::string& manifest_path);

// Area-average downscaling by integer factors; identity when sizes match.
nn::Tensor resize_images(const nn::Tensor& images, int target_h, int target_w);

std::array<double, 3> fit_channel_means(const nn::Tensor& images);
nn::Tensor remove_channel_means(const nn::Tensor& images,
                                const std::array<double, 3>& means);

// Fixed rescale applied after centering so pixel activations enter the
// network at roughly unit range; pretrained ImageNet weights absorb this
// factor implicitly, a from-scratch backbone needs it spelled out.
inline constexpr double kPixelScale = 1.0 / 127.5;

// remove_channel_means followed by the kPixelScale rescale: the image-side
// preparation every model input goes through.
nn::Tensor prepare_images(const nn::Tensor& images,
                          const std::array<double, 3>& train_means);

// Disjoint covering split with |train| = round(2n/3).
struct SplitPlan {
  std::vector<int> train_indices;
  std::vector<int> test_indices;
  std::uint64_t seed = 0;
};

SplitPlan split(int n, std::uint64_t seed);

// Shuffled index batches for one epoch, reshuffled per (seed, epoch); the
// final partial batch is kept.
std::vector<std::vector<int>> epoch_batches(int n, int batch_size,
                                            std::uint64_t seed, int epoch);

// First-axis gather used to assemble batches and splits.
nn::Tensor gather_rows(const nn::Tensor& t, std::span<const int> rows);

}  // namespace dmtlr::data

#endif  // DMTLR_PIPELINE_HPP
