#ifndef DMTLR_TENSOR_HPP
#define DMTLR_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmtlr::nn {

// Dense row-major array of 64-bit reals. Carrier for images, descriptors,
// activations, weights and gradients alike.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(count(shape)), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != static_cast<std::size_t>(count(shape)))
      throw std::invalid_argument("Tensor: data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape " + shape_string());
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
      n *= d;
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  // (row, col) accessor for rank-2 tensors.
  double& at2(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  double at2(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  std::string shape_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i)
      os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
  }
};

// FNV-1a over the raw byte representation; used for frozen-weight audits.
inline std::uint64_t byte_hash(const Tensor& t, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* bytes =
      reinterpret_cast<const unsigned char*>(t.data.data());
  const std::size_t n = t.data.size() * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dmtlr::nn

#endif  // DMTLR_TENSOR_HPP
