#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cgate {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& s);

// Dense float32 array, rank 1..4, row-major. Feature maps are C x H x W.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Tensor() = default;
  // Zero-filled.
  explicit Tensor(Shape shape);
  // Throws ValidationError when any value is non-finite, SizeError on a
  // length mismatch.
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> values() noexcept { return data_; }
  const float* data() const noexcept { return data_.data(); }
  float* data() noexcept { return data_.data(); }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  // (c, y, x) access for rank-3 maps; (y, x) for rank 2.
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  float at(std::size_t y, std::size_t x) const { return data_[y * shape_[1] + x]; }
  float& at(std::size_t y, std::size_t x) { return data_[y * shape_[1] + x]; }

  bool all_finite() const noexcept;
  // Throws ValidationError naming `what` if any value is NaN/Inf.
  void require_finite(const char* what) const;

  // Channel c of a C x H x W map as an H x W tensor.
  Tensor channel(std::size_t c) const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

std::size_t shape_volume(const Shape& s);

// Centered kernel with odd extents.
struct Kernel2D {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> weights;

  Kernel2D() = default;
  Kernel2D(std::size_t h, std::size_t w, std::vector<float> wts);

  float at(std::size_t r, std::size_t c) const { return weights[r * width + c]; }

  // [[0,1,0],[1,-4,1],[0,1,0]]
  static Kernel2D laplacian4();
};

enum class Padding { replicate, periodic };

// Each channel of a C x H x W (or H x W) map convolved with the same kernel.
// Output has the input's shape. Periodic mode exists for spectral checks.
Tensor depthwise_conv2d(const Tensor& t, const Kernel2D& k,
                        Padding padding = Padding::replicate);

// |DFT|^2 of an H x W channel, unnormalized forward transform, computed
// directly in O((HW)^2). Slow on purpose: this is a reference, not a kernel.
Tensor power_spectrum(const Tensor& channel);

}  // namespace cgate
