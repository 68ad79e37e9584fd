#include "cgate/backbone.hpp"

#include <cmath>

#include "cgate/errors.hpp"
#include "cgate/rng.hpp"

namespace cgate {

Extents Extents::of(const Tensor& t) {
  if (t.rank() != 3) throw SizeError("expected C x H x W, got " + shape_string(t.shape()));
  return {t.extent(0), t.extent(1), t.extent(2)};
}

std::string extents_string(const Extents& e) {
  return std::to_string(e.channels) + "x" + std::to_string(e.height) + "x" +
         std::to_string(e.width);
}

namespace {

void fill_uniform(Rng& rng, std::vector<float>& v, std::size_t n, double s) {
  v.resize(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-s, s));
}

std::size_t strided(std::size_t n, std::size_t stride) { return (n - 1) / stride + 1; }

}  // namespace

Backbone::Backbone(std::uint64_t seed, std::size_t classes, Extents input,
                   const BackboneOptions& opts)
    : seed_(seed), input_(input) {
  if (input.volume() == 0) throw SizeError("zero-extent backbone input " + extents_string(input));
  if (classes < 2) throw ConfigError("backbone needs at least 2 classes", "classes");
  if (opts.widths.empty()) throw ConfigError("backbone needs at least one stage", "widths");
  if (opts.stride != 1 && opts.stride != 2) throw ConfigError("stride must be 1 or 2", "stride");

  Rng rng(seed);
  Extents cur = input;
  for (std::size_t w : opts.widths) {
    if (w == 0) throw ConfigError("stage width must be positive", "widths");
    if (cur.height < 3 || cur.width < 3)
      throw SizeError("stage input " + extents_string(cur) + " smaller than a 3x3 kernel");
    ConvStage st;
    st.spec = {cur.channels, w, 3, opts.stride};
    st.in = cur;
    st.out = {w, strided(cur.height, opts.stride), strided(cur.width, opts.stride)};
    const double s = 1.0 / std::sqrt(static_cast<double>(cur.channels * 9));
    fill_uniform(rng, st.weights, w * cur.channels * 9, s);
    fill_uniform(rng, st.bias, w, s);
    if (opts.zero_bias) std::fill(st.bias.begin(), st.bias.end(), 0.0f);
    cur = st.out;
    stages_.push_back(std::move(st));
  }
  head_.in = cur.channels;
  head_.out = classes;
  const double s = 1.0 / std::sqrt(static_cast<double>(cur.channels));
  fill_uniform(rng, head_.weights, classes * cur.channels, s);
  fill_uniform(rng, head_.bias, classes, s);
  if (opts.zero_bias) std::fill(head_.bias.begin(), head_.bias.end(), 0.0f);
}

Tensor Backbone::forward_stage(std::size_t i, const Tensor& z_prev) const {
  if (i >= stages_.size()) throw SizeError("stage index " + std::to_string(i) + " out of range");
  const ConvStage& st = stages_[i];
  if (z_prev.rank() != 3 || Extents::of(z_prev) != st.in)
    throw SizeError("stage " + std::to_string(i) + " expects input " + extents_string(st.in) +
                    ", got " +
                    (z_prev.rank() == 3 ? extents_string(Extents::of(z_prev))
                                        : shape_string(z_prev.shape())));

  const std::size_t IC = st.in.channels, H = st.in.height, W = st.in.width;
  const std::size_t OC = st.out.channels, OH = st.out.height, OW = st.out.width;
  const std::size_t S = st.spec.stride;

  // Gather the replicate-padded source offsets once per stage geometry.
  std::vector<std::size_t> row_idx(OH * 3), col_idx(OW * 3);
  for (std::size_t y = 0; y < OH; ++y)
    for (int d = -1; d <= 1; ++d) {
      long r = static_cast<long>(y * S) + d;
      r = r < 0 ? 0 : (r >= static_cast<long>(H) ? static_cast<long>(H) - 1 : r);
      row_idx[y * 3 + static_cast<std::size_t>(d + 1)] = static_cast<std::size_t>(r);
    }
  for (std::size_t x = 0; x < OW; ++x)
    for (int d = -1; d <= 1; ++d) {
      long c = static_cast<long>(x * S) + d;
      c = c < 0 ? 0 : (c >= static_cast<long>(W) ? static_cast<long>(W) - 1 : c);
      col_idx[x * 3 + static_cast<std::size_t>(d + 1)] = static_cast<std::size_t>(c);
    }

  // im2col-lite: for each (ic, ky, kx) the shifted/strided input plane.
  const std::size_t P = OH * OW;
  std::vector<float> cols(IC * 9 * P);
  const float* in = z_prev.data();
  for (std::size_t ic = 0; ic < IC; ++ic)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        float* dst = cols.data() + ((ic * 3 + ky) * 3 + kx) * P;
        const float* plane = in + ic * H * W;
        for (std::size_t y = 0; y < OH; ++y) {
          const float* row = plane + row_idx[y * 3 + ky] * W;
          for (std::size_t x = 0; x < OW; ++x) dst[y * OW + x] = row[col_idx[x * 3 + kx]];
        }
      }

  Tensor out(st.out.shape());
  std::vector<double> acc(P);
  const std::size_t taps = IC * 9;
  for (std::size_t oc = 0; oc < OC; ++oc) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(st.bias[oc]));
    const float* w = st.weights.data() + oc * taps;
    for (std::size_t t = 0; t < taps; ++t) {
      const double wt = w[t];
      const float* src = cols.data() + t * P;
      for (std::size_t p = 0; p < P; ++p) acc[p] += wt * src[p];
    }
    float* dst = out.data() + oc * P;
    for (std::size_t p = 0; p < P; ++p) dst[p] = acc[p] > 0.0 ? static_cast<float>(acc[p]) : 0.0f;
  }
  return out;
}

std::vector<float> global_average_pool(const Tensor& z) {
  const Extents e = Extents::of(z);
  const std::size_t hw = e.height * e.width;
  std::vector<float> out(e.channels);
  for (std::size_t c = 0; c < e.channels; ++c) {
    double s = 0.0;
    const float* p = z.data() + c * hw;
    for (std::size_t i = 0; i < hw; ++i) s += p[i];
    out[c] = static_cast<float>(s / static_cast<double>(hw));
  }
  return out;
}

std::vector<float> Backbone::logits(const Tensor& z_last) const {
  if (Extents::of(z_last) != stages_.back().out)
    throw SizeError("head expects " + extents_string(stages_.back().out) + ", got " +
                    shape_string(z_last.shape()));
  const auto pooled = global_average_pool(z_last);
  std::vector<float> out(head_.out);
  for (std::size_t j = 0; j < head_.out; ++j) {
    double s = head_.bias[j];
    const float* w = head_.weights.data() + j * head_.in;
    for (std::size_t i = 0; i < head_.in; ++i) s += static_cast<double>(w[i]) * pooled[i];
    out[j] = static_cast<float>(s);
  }
  return out;
}

std::vector<float> Backbone::forward(const Tensor& x) const {
  Tensor z = x;
  for (std::size_t i = 0; i < stages_.size(); ++i) z = forward_stage(i, z);
  return logits(z);
}

std::vector<std::uint64_t> Backbone::flops_ledger() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i <= stages_.size(); ++i) out.push_back(stage_flops(*this, i));
  return out;
}

std::uint64_t conv_flops(const StageSpec& s, const Extents& out) {
  return 2ULL * out.channels * out.height * out.width * s.in_channels * s.kernel * s.kernel;
}

std::uint64_t head_flops(std::size_t in, std::size_t out) { return 2ULL * in * out; }

std::uint64_t ses_gate_flops(const Extents& z) { return 2ULL * 9 * z.volume() + z.volume(); }

std::uint64_t she_gate_flops(const Extents& z, std::size_t classes) {
  return z.volume() + 2ULL * classes * z.channels;
}

std::uint64_t stage_flops(const Backbone& b, std::size_t i, GateCost gate) {
  if (i > b.stage_count()) throw SizeError("stage index " + std::to_string(i) + " out of range");
  if (i == b.stage_count()) return head_flops(b.head().in, b.head().out);
  const ConvStage& st = b.stage(i);
  std::uint64_t f = conv_flops(st.spec, st.out);
  if (gate == GateCost::ses) f += ses_gate_flops(st.out);
  if (gate == GateCost::she) f += she_gate_flops(st.out, b.classes());
  return f;
}

}  // namespace cgate
