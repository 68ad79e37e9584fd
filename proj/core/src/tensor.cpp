#include "cgate/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cgate/errors.hpp"

namespace cgate {

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_volume(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

namespace {

void check_shape(const Shape& s) {
  if (s.empty() || s.size() > Tensor::kMaxRank)
    throw SizeError("tensor rank must be 1..4, got " + std::to_string(s.size()));
  for (auto e : s)
    if (e == 0) throw SizeError("zero extent in shape " + shape_string(s));
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_volume(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_volume(shape_))
    throw SizeError("payload of " + std::to_string(data_.size()) +
                    " values does not fit shape " + shape_string(shape_));
  require_finite("tensor payload");
}

bool Tensor::all_finite() const noexcept {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::require_finite(const char* what) const {
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (!std::isfinite(data_[i]))
      throw ValidationError(std::string(what) + ": non-finite value at index " +
                            std::to_string(i));
}

Tensor Tensor::channel(std::size_t c) const {
  if (rank() != 3) throw SizeError("channel() needs a C x H x W tensor");
  if (c >= shape_[0]) throw SizeError("channel index out of range");
  const std::size_t hw = shape_[1] * shape_[2];
  Tensor out({shape_[1], shape_[2]});
  std::copy(data_.begin() + c * hw, data_.begin() + (c + 1) * hw, out.data_.begin());
  return out;
}

Kernel2D::Kernel2D(std::size_t h, std::size_t w, std::vector<float> wts)
    : height(h), width(w), weights(std::move(wts)) {
  if (h == 0 || w == 0 || h % 2 == 0 || w % 2 == 0)
    throw SizeError("kernel extents must be odd and positive");
  if (weights.size() != h * w) throw SizeError("kernel weight count mismatch");
}

Kernel2D Kernel2D::laplacian4() {
  return Kernel2D(3, 3, {0, 1, 0, 1, -4, 1, 0, 1, 0});
}

namespace {

inline std::size_t clamp_index(long i, std::size_t n) {
  if (i < 0) return 0;
  if (i >= static_cast<long>(n)) return n - 1;
  return static_cast<std::size_t>(i);
}

inline std::size_t wrap_index(long i, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

}  // namespace

Tensor depthwise_conv2d(const Tensor& t, const Kernel2D& k, Padding padding) {
  std::size_t C, H, W;
  if (t.rank() == 3) {
    C = t.extent(0), H = t.extent(1), W = t.extent(2);
  } else if (t.rank() == 2) {
    C = 1, H = t.extent(0), W = t.extent(1);
  } else {
    throw SizeError("depthwise_conv2d expects C x H x W or H x W, got " +
                    shape_string(t.shape()));
  }
  if (H < k.height || W < k.width)
    throw SizeError("feature map " + std::to_string(H) + "x" + std::to_string(W) +
                    " is smaller than kernel " + std::to_string(k.height) + "x" +
                    std::to_string(k.width));

  const long rh = static_cast<long>(k.height / 2);
  const long rw = static_cast<long>(k.width / 2);
  auto index = padding == Padding::replicate ? clamp_index : wrap_index;

  // Pad one channel at a time so the inner loop is a plain stencil.
  const std::size_t PW = W + 2 * static_cast<std::size_t>(rw);
  const std::size_t PH = H + 2 * static_cast<std::size_t>(rh);
  std::vector<float> pad(PH * PW);
  std::vector<double> acc(W);
  std::vector<std::size_t> col(PW);
  for (std::size_t px = 0; px < PW; ++px) col[px] = index(static_cast<long>(px) - rw, W);

  Tensor out(t.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const float* src = t.data() + c * H * W;
    float* dst = out.data() + c * H * W;
    for (std::size_t py = 0; py < PH; ++py) {
      const float* row = src + index(static_cast<long>(py) - rh, H) * W;
      float* prow = pad.data() + py * PW;
      for (std::size_t px = 0; px < PW; ++px) prow[px] = row[col[px]];
    }
    // x innermost: one accumulator per output pixel, taps added in kernel order
    for (std::size_t y = 0; y < H; ++y) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < k.height; ++i)
        for (std::size_t j = 0; j < k.width; ++j) {
          const double w = k.at(i, j);
          const float* p = pad.data() + (y + i) * PW + j;
          for (std::size_t x = 0; x < W; ++x) acc[x] += w * p[x];
        }
      for (std::size_t x = 0; x < W; ++x) dst[y * W + x] = static_cast<float>(acc[x]);
    }
  }
  return out;
}

Tensor power_spectrum(const Tensor& channel) {
  if (channel.rank() != 2) throw SizeError("power_spectrum expects an H x W tensor");
  const std::size_t H = channel.extent(0), W = channel.extent(1);
  if (H < 2 || W < 2) throw SizeError("power_spectrum needs H, W >= 2");

  // twiddle tables; the sum itself is the plain double loop
  std::vector<double> ch(H), sh(H), cw(W), sw(W);
  for (std::size_t i = 0; i < H; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(H);
    ch[i] = std::cos(a), sh[i] = std::sin(a);
  }
  for (std::size_t i = 0; i < W; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(W);
    cw[i] = std::cos(a), sw[i] = std::sin(a);
  }

  Tensor out({H, W});
  for (std::size_t u = 0; u < H; ++u) {
    for (std::size_t v = 0; v < W; ++v) {
      double re = 0.0, im = 0.0;
      for (std::size_t y = 0; y < H; ++y) {
        const std::size_t py = (u * y) % H;
        for (std::size_t x = 0; x < W; ++x) {
          const std::size_t px = (v * x) % W;
          // exp(-i(a+b)) = (cos a cos b - sin a sin b) - i(sin a cos b + cos a sin b)
          const double c = ch[py] * cw[px] - sh[py] * sw[px];
          const double s = sh[py] * cw[px] + ch[py] * sw[px];
          const double f = channel.at(y, x);
          re += f * c;
          im -= f * s;
        }
      }
      out.at(u, v) = static_cast<float>(re * re + im * im);
    }
  }
  return out;
}

}  // namespace cgate
