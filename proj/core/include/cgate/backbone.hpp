#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cgate/tensor.hpp"

namespace cgate {

struct Extents {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  Shape shape() const { return {channels, height, width}; }
  std::size_t volume() const { return channels * height * width; }
  static Extents of(const Tensor& t);
  friend bool operator==(const Extents&, const Extents&) = default;
};

std::string extents_string(const Extents& e);

// 3x3 conv + ReLU.
struct StageSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 2;
};

struct ConvStage {
  StageSpec spec;
  Extents in;
  Extents out;
  std::vector<float> weights;  // out x in x k x k
  std::vector<float> bias;     // out
};

struct LinearHead {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weights;  // out x in
  std::vector<float> bias;
};

struct BackboneOptions {
  std::vector<std::size_t> widths{16, 32, 64};
  std::size_t stride = 2;
  bool zero_bias = false;
};

// Which rejection module sits on a stage's output, for cost accounting.
enum class GateCost { none, ses, she };

// Staged extractor: conv stages, then global average pool and a linear head.
// Parameters are U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from a seeded stream and
// never change after construction.
class Backbone {
 public:
  Backbone(std::uint64_t seed, std::size_t classes, Extents input,
           const BackboneOptions& opts = {});

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t classes() const noexcept { return head_.out; }
  Extents input() const noexcept { return input_; }
  std::size_t stage_count() const noexcept { return stages_.size(); }
  const ConvStage& stage(std::size_t i) const { return stages_.at(i); }
  const LinearHead& head() const noexcept { return head_; }
  Extents stage_input(std::size_t i) const { return stages_.at(i).in; }
  Extents stage_output(std::size_t i) const { return stages_.at(i).out; }

  Tensor forward_stage(std::size_t i, const Tensor& z_prev) const;
  // Pool the last stage and apply the head.
  std::vector<float> logits(const Tensor& z_last) const;
  // All stages then the head.
  std::vector<float> forward(const Tensor& x) const;

  // Per-stage 2*MAC counts, stages then head; every entry > 0.
  std::vector<std::uint64_t> flops_ledger() const;

 private:
  std::uint64_t seed_;
  Extents input_;
  std::vector<ConvStage> stages_;
  LinearHead head_;
};

inline Backbone init_backbone(std::uint64_t seed, std::size_t classes, Extents input,
                              const BackboneOptions& opts = {}) {
  return Backbone(seed, classes, input, opts);
}

std::vector<float> global_average_pool(const Tensor& z);

// 2 * out_ch * out_H * out_W * in_ch * k * k
std::uint64_t conv_flops(const StageSpec& s, const Extents& out);
// 2 * in * out
std::uint64_t head_flops(std::size_t in, std::size_t out);
// Depthwise 3x3 pass (2 * 9 * CHW) plus |.| and pooling (CHW).
std::uint64_t ses_gate_flops(const Extents& z);
// Pooling (CHW) plus one dot product per class.
std::uint64_t she_gate_flops(const Extents& z, std::size_t classes);

// Stage i < stage_count() is a conv stage; i == stage_count() is the head.
// With a gate, the gate's cost on that stage's output is added.
std::uint64_t stage_flops(const Backbone& b, std::size_t i, GateCost gate = GateCost::none);

}  // namespace cgate
