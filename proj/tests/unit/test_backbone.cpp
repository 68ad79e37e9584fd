#include <gtest/gtest.h>

#include "cgate/backbone.hpp"
#include "cgate/errors.hpp"
#include "cgate/rng.hpp"
#include "reference.hpp"

using namespace cgate;

namespace {

Tensor noise_image(std::uint64_t seed, Extents e = {3, 32, 32}) {
  Rng rng(seed);
  Tensor t(e.shape());
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  return t;
}

bool same_params(const Backbone& a, const Backbone& b) {
  for (std::size_t i = 0; i < a.stage_count(); ++i)
    if (a.stage(i).weights != b.stage(i).weights || a.stage(i).bias != b.stage(i).bias) return false;
  return a.head().weights == b.head().weights && a.head().bias == b.head().bias;
}

}  // namespace

TEST(Backbone, SameSeedSameParameters) {
  EXPECT_TRUE(same_params(init_backbone(42, 4, {3, 32, 32}), init_backbone(42, 4, {3, 32, 32})));
}

TEST(Backbone, DifferentSeedsDiffer) {
  EXPECT_FALSE(same_params(init_backbone(1, 4, {3, 32, 32}), init_backbone(2, 4, {3, 32, 32})));
}

TEST(Backbone, TenClassHead) {
  const Backbone b = init_backbone(3, 10, {3, 32, 32});
  EXPECT_EQ(b.forward(noise_image(1)).size(), 10u);
  EXPECT_EQ(b.head().in, 64u);
}

TEST(Backbone, ZeroExtentIsSizeError) {
  EXPECT_THROW(init_backbone(1, 4, {3, 0, 32}), SizeError);
  EXPECT_THROW(init_backbone(1, 0, {3, 32, 32}), ConfigError);
}

TEST(Backbone, ZeroInputZeroBiasGivesZeros) {
  BackboneOptions o;
  o.zero_bias = true;
  const Backbone b(5, 4, {3, 32, 32}, o);
  const Tensor out = b.forward_stage(0, Tensor(Shape{3, 32, 32}));
  for (float v : out.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Backbone, StrideHalvesExtents) {
  const Backbone b = init_backbone(5, 4, {3, 32, 32});
  EXPECT_EQ(b.stage_output(0), (Extents{16, 16, 16}));
  EXPECT_EQ(b.stage_output(1), (Extents{32, 8, 8}));
  EXPECT_EQ(b.stage_output(2), (Extents{64, 4, 4}));
  EXPECT_EQ(b.forward_stage(0, noise_image(2)).shape(), (Shape{16, 16, 16}));
}

TEST(Backbone, ExtentMismatchNamesBoth) {
  const Backbone b = init_backbone(5, 4, {3, 32, 32});
  try {
    b.forward_stage(1, noise_image(2));
    FAIL();
  } catch (const SizeError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("3x32x32"), std::string::npos) << m;
    EXPECT_NE(m.find("16x16x16"), std::string::npos) << m;
  }
}

TEST(Backbone, StagesMatchNaiveConvolution) {
  const Backbone b = init_backbone(9, 4, {3, 32, 32});
  for (std::uint64_t s = 0; s < 5; ++s) {
    Tensor z = noise_image(100 + s);
    for (std::size_t i = 0; i < b.stage_count(); ++i) {
      const Tensor want = ref::conv_stage(b.stage(i), z);
      z = b.forward_stage(i, z);
      for (std::size_t j = 0; j < z.size(); ++j) ASSERT_NEAR(z.values()[j], want.values()[j], 1e-5);
    }
  }
}

TEST(Backbone, ComposedStagesEqualMonolith) {
  const Backbone b = init_backbone(9, 4, {3, 32, 32});
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Tensor x = noise_image(200 + s);
    const auto mono = ref::monolithic(b, x);
    Tensor z = x;
    for (std::size_t i = 0; i < b.stage_count(); ++i) z = b.forward_stage(i, z);
    const auto logits = b.logits(z);
    ASSERT_EQ(logits.size(), mono.logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) EXPECT_NEAR(logits[k], mono.logits[k], 1e-4);
    EXPECT_EQ(b.forward(x), logits);
  }
}

TEST(Flops, ClosedForms) {
  EXPECT_EQ(conv_flops({3, 8, 3, 1}, {8, 32, 32}), 442368u);
  EXPECT_EQ(head_flops(64, 10), 1280u);
}

TEST(Flops, LedgerOfDefaultBackbone) {
  const Backbone b = init_backbone(1, 10, {3, 32, 32});
  const auto ledger = b.flops_ledger();
  ASSERT_EQ(ledger.size(), 4u);
  EXPECT_EQ(ledger[0], 2ull * 16 * 16 * 16 * 3 * 9);
  EXPECT_EQ(ledger[1], 2ull * 32 * 8 * 8 * 16 * 9);
  EXPECT_EQ(ledger[2], 2ull * 64 * 4 * 4 * 32 * 9);
  EXPECT_EQ(ledger[3], 1280u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(stage_flops(b, i), ledger[i]);
  EXPECT_EQ(stage_flops(b, 0, GateCost::ses), ledger[0] + ses_gate_flops({16, 16, 16}));
  EXPECT_EQ(stage_flops(b, 1, GateCost::she), ledger[1] + she_gate_flops({32, 8, 8}, 10));
  EXPECT_THROW(stage_flops(b, 4), SizeError);
}
