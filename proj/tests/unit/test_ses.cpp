#include <gtest/gtest.h>

#include <cmath>

#include "cgate/backbone.hpp"
#include "cgate/datagen.hpp"
#include "cgate/errors.hpp"
#include "cgate/metrics.hpp"
#include "cgate/rng.hpp"
#include "cgate/ses.hpp"

using namespace cgate;

namespace {

Tensor checkerboard(std::size_t C, std::size_t H, std::size_t W, float amp) {
  Tensor t({C, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) t.at(c, y, x) = ((x + y) % 2 ? -amp : amp);
  return t;
}

Tensor noise(Rng& rng, Shape s, double amp = 1.0) {
  Tensor t(s);
  for (float& v : t.values()) v = static_cast<float>(amp * rng.normal());
  return t;
}

}  // namespace

TEST(Ses, ConstantMapHasZeroResponse) {
  Tensor t({3, 8, 8});
  for (float& v : t.values()) v = -2.5f;
  for (const Tensor r = laplacian_response(t); float v : r.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Ses, CheckerboardInteriorIsEight) {
  const Tensor h = laplacian_response(checkerboard(1, 8, 8, 1.0f));
  for (std::size_t y = 1; y < 7; ++y)
    for (std::size_t x = 1; x < 7; ++x) EXPECT_FLOAT_EQ(h.at(0, y, x), 8.0f);
}

TEST(Ses, RampInteriorIsZero) {
  Tensor t({1, 8, 8});
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) t.at(0, y, x) = 0.5f * x + 0.25f * y;
  const Tensor h = laplacian_response(t);
  for (std::size_t y = 1; y < 7; ++y)
    for (std::size_t x = 1; x < 7; ++x) EXPECT_NEAR(h.at(0, y, x), 0.0f, 1e-6);
}

TEST(Ses, ResponseIsNonNegative) {
  Rng rng(1);
  for (const Tensor r = laplacian_response(noise(rng, {4, 10, 10})); float v : r.values()) EXPECT_GE(v, 0.0f);
}

TEST(Ses, ChannelEnergyFloorAndUnit) {
  const auto zero = channel_energy(Tensor({1, 4, 4}), 1e-6);
  EXPECT_NEAR(zero[0], -13.8155, 1e-4);
  Tensor one({1, 4, 4});
  for (float& v : one.values()) v = 1.0f;
  EXPECT_NEAR(channel_energy(one, 1e-6)[0], 0.0, 1e-5);
}

TEST(Ses, TopKPooling) {
  const std::vector<double> e{-1, -5, -3};
  EXPECT_DOUBLE_EQ(ses_score_from_energies(e, 1), -1.0);
  EXPECT_DOUBLE_EQ(ses_score_from_energies(e, 3), -3.0);
  EXPECT_THROW(ses_score_from_energies(e, 4), ConfigError);
  EXPECT_THROW(ses_score_from_energies(e, 0), ConfigError);
}

TEST(Ses, TopKTiesGoToLowerIndex) {
  const std::vector<double> e{-2, -1, -1, -3};
  EXPECT_EQ(top_k_channels(e, 2), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(top_k_channels(e, 1), (std::vector<std::size_t>{1}));
}

TEST(Ses, TopKLargerThanChannelsIsConfigError) {
  SesConfig c;
  c.top_k = 5;
  EXPECT_THROW(ses_score(Tensor({4, 8, 8}), c), ConfigError);
  EXPECT_EQ(SesConfig::default_top_k(16), 2u);
  EXPECT_EQ(SesConfig::default_top_k(4), 1u);
  EXPECT_EQ(SesConfig::default_top_k(10), 1u);
}

TEST(Ses, ContrastGainIdenticalChannelsIsOne) {
  Rng rng(2);
  const Tensor one = noise(rng, {1, 8, 8});
  Tensor t({4, 8, 8});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 64; ++i) t.values()[c * 64 + i] = one.values()[i];
  EXPECT_DOUBLE_EQ(spectral_contrast_gain(t, {}), 1.0);
}

TEST(Ses, ContrastGainOneHotChannel) {
  // periodic +-1.25 checkerboard responds with exactly 10 everywhere
  Tensor t({4, 8, 8});
  const Tensor hot = checkerboard(1, 8, 8, 1.25f);
  std::copy(hot.values().begin(), hot.values().end(), t.values().begin());
  SesConfig c;
  c.padding = Padding::periodic;
  const double want = (10.0 + 1e-6) / ((10.0 + 4e-6) / 4.0);
  EXPECT_NEAR(spectral_contrast_gain(t, c), want, 1e-9);
  EXPECT_NEAR(spectral_contrast_gain(t, c), 4.0, 1e-5);
}

TEST(Ses, ShiftCovariantUnderPeriodicPadding) {
  Rng rng(3);
  SesConfig c;
  c.padding = Padding::periodic;
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor t = noise(rng, {8, 12, 12});
    const std::size_t dy = rng.below(12), dx = rng.below(12);
    Tensor s(t.shape());
    for (std::size_t ch = 0; ch < 8; ++ch)
      for (std::size_t y = 0; y < 12; ++y)
        for (std::size_t x = 0; x < 12; ++x) s.at(ch, (y + dy) % 12, (x + dx) % 12) = t.at(ch, y, x);
    EXPECT_NEAR(ses_score(s, c), ses_score(t, c), 1e-5);
  }
}

TEST(Ses, NoiseAmplitudeIncreasesScore) {
  Rng rng(4);
  Tensor base({4, 16, 16});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        base.at(c, y, x) = static_cast<float>(std::sin(0.3 * x + c) * std::cos(0.2 * y));
  const Tensor n = noise(rng, base.shape());
  double prev = -INFINITY;
  for (double amp : {0.1, 0.2, 0.4, 0.7, 1.0}) {
    Tensor t(base.shape());
    for (std::size_t i = 0; i < t.size(); ++i)
      t.values()[i] = base.values()[i] + static_cast<float>(amp) * n.values()[i];
    const double s = ses_score(t, {});
    EXPECT_GT(s, prev) << "amplitude " << amp;
    prev = s;
  }
}

TEST(Ses, SpectralIdentityIsExactUnderPeriodicPadding) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t({16, 16});
    for (float& v : t.values()) v = static_cast<float>(rng.uniform());
    const double r = frequency_weighting_ratio(t);
    EXPECT_GE(r, 0.999);
    EXPECT_LE(r, 1.001);
  }
}

TEST(Ses, SpectralIdentityDcOnlyReturnsOne) {
  Tensor t({16, 16});
  for (float& v : t.values()) v = 0.3f;
  EXPECT_EQ(frequency_weighting_ratio(t), 1.0);
  EXPECT_EQ(frequency_weighting_ratio(Tensor({8, 8})), 1.0);
}

// The replicate-padded response only approximates the periodic identity;
// the 5% band is the documented tolerance for 16x16 random fields.
TEST(Ses, ReplicatePaddingWithinFivePercent) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t({16, 16});
    for (float& v : t.values()) v = static_cast<float>(rng.uniform());
    const double r = frequency_weighting_ratio(t, Padding::replicate);
    EXPECT_NEAR(r, 1.0, 0.05) << "field " << trial;
  }
}

TEST(Ses, WhiteNoiseOutweighsSmoothedNoise) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor w({16, 16}), s({16, 16});
    for (float& v : w.values()) v = static_cast<float>(rng.normal());
    // 3x3 periodic box blur
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        double a = 0;
        for (int i = -1; i <= 1; ++i)
          for (int j = -1; j <= 1; ++j) a += w.at((y + 16 + i) % 16, (x + 16 + j) % 16);
        s.at(y, x) = static_cast<float>(a / 9);
      }
    auto var = [](const Tensor& t) {
      double m = 0, q = 0;
      for (float v : t.values()) m += v;
      m /= t.size();
      for (float v : t.values()) q += (v - m) * (v - m);
      return q / t.size();
    };
    const float k = static_cast<float>(std::sqrt(var(w) / var(s)));
    for (float& v : s.values()) v *= k;
    EXPECT_GT(symbol_weighted_energy(power_spectrum(w), 2), symbol_weighted_energy(power_spectrum(s), 2));
    EXPECT_GT(symbol_weighted_energy(power_spectrum(w), 1), symbol_weighted_energy(power_spectrum(s), 1));
  }
}

TEST(Ses, GlobalOmegaPicksHighestMeanChannels) {
  const std::vector<std::vector<double>> e{{-1, -5, -3, -2}, {-2, -4, -1, -3}};
  EXPECT_EQ(fit_global_omega(e, 2), (std::vector<std::size_t>{0, 2}));
  SesConfig c;
  c.global_omega = {0, 2};
  EXPECT_EQ(c.effective_k(4), 2u);
  c.global_omega = {7};
  EXPECT_THROW(c.validate(4), ConfigError);
}

TEST(Ses, CorpusOrderingOnFirstStage) {
  const Backbone b = init_backbone(7, 4, {3, 32, 32});
  auto scores = [&](CorpusKind k) {
    std::vector<double> out;
    for (const auto& s : generate_corpus({k, 4, 200, {3, 32, 32}, 31}, 4))
      out.push_back(ses_score(b.forward_stage(0, s.image), {}));
    return out;
  };
  const auto id = scores(CorpusKind::id_natural), white = scores(CorpusKind::ood_white_noise),
             flat = scores(CorpusKind::ood_flat);
  // white noise sits above ID, flat below, essentially without overlap
  EXPECT_GT(auroc({white, id}), 0.99);
  EXPECT_GT(auroc({id, flat}), 0.99);
}
