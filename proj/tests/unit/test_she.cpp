#include <gtest/gtest.h>

#include <cmath>

#include "cgate/errors.hpp"
#include "cgate/rng.hpp"
#include "cgate/she.hpp"
#include "tmpdir.hpp"

using namespace cgate;

namespace {

PrototypeBank bank_of(std::vector<FeatureVec> mus, std::vector<double> kappas) {
  PrototypeBank b;
  b.dim = mus.front().size();
  b.prototypes = std::move(mus);
  b.kappas = std::move(kappas);
  return b;
}

FeatureVec unit(Rng& rng, std::size_t d) {
  FeatureVec v(d);
  double n = 0;
  for (float& x : v) x = static_cast<float>(rng.normal()), n += double(x) * x;
  for (float& x : v) x = static_cast<float>(x / std::sqrt(n));
  return v;
}

// Unit vectors at angle ~ N(0, sd) around the x axis, in 2-D.
std::vector<FeatureVec> cone2d(Rng& rng, double sd_deg, std::size_t n) {
  std::vector<FeatureVec> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal() * sd_deg * M_PI / 180.0;
    out.push_back({static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))});
  }
  return out;
}

}  // namespace

TEST(She, IdenticalVectorsNormalize) {
  const auto b = fit_prototypes({{{3, 0}, {3, 0}}});
  EXPECT_FLOAT_EQ(b.prototypes[0][0], 1.0f);
  EXPECT_FLOAT_EQ(b.prototypes[0][1], 0.0f);
}

TEST(She, SymmetricPairGivesDiagonal) {
  const auto b = fit_prototypes({{{1, 0}, {0, 1}}});
  EXPECT_NEAR(b.prototypes[0][0], 1 / std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(b.prototypes[0][1], 1 / std::sqrt(2.0), 1e-7);
}

TEST(She, PrototypesAreUnitNorm) {
  Rng rng(1);
  ClassFeatures f(5);
  for (auto& cls : f)
    for (int i = 0; i < 20; ++i) {
      FeatureVec z(16);
      for (float& v : z) v = static_cast<float>(rng.uniform(0, 3));
      cls.push_back(z);
    }
  for (auto w : {Weighting::uniform, Weighting::self_consistent}) {
    const auto b = fit_bank(f, w, KappaMode::vmf);
    for (const auto& mu : b.prototypes) {
      double n = 0;
      for (float v : mu) n += double(v) * v;
      EXPECT_NEAR(std::sqrt(n), 1.0, 1e-5);
    }
    for (double k : b.kappas) EXPECT_GT(k, 0.0);
  }
}

TEST(She, EmptyClassIsNamed) {
  try {
    fit_prototypes({{{1, 0}}, {}});
    FAIL();
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(She, ZeroResultantIsDegenerate) {
  EXPECT_THROW(fit_prototypes({{{1, 0}, {-1, 0}}}), FitError);
}

TEST(She, AlignedClassHitsUpperClamp) {
  const ClassFeatures f{{{1, 0}, {2, 0}, {5, 0}}};
  const auto b = fit_bank(f, Weighting::uniform, KappaMode::vmf);
  EXPECT_EQ(b.kappas[0], kKappaMax);
  EXPECT_FALSE(b.provenance.warnings.empty());
}

TEST(She, SingleSampleClassClampsWithWarning) {
  const auto b = fit_bank({{{0.3f, 0.4f}}, {{1, 0}, {0.9f, 0.1f}}}, Weighting::uniform, KappaMode::vmf);
  EXPECT_EQ(b.kappas[0], kKappaMax);
  ASSERT_FALSE(b.provenance.warnings.empty());
  EXPECT_NE(b.provenance.warnings[0].find("class 0"), std::string::npos);
}

TEST(She, IsotropicClassHasTinyKappa) {
  Rng rng(2);
  ClassFeatures f(1);
  for (int i = 0; i < 1000; ++i) f[0].push_back(unit(rng, 2));
  std::vector<double> acc(2, 0.0);
  for (const auto& z : f[0]) acc[0] += z[0], acc[1] += z[1];
  const double rbar = std::hypot(acc[0], acc[1]) / 1000.0;
  EXPECT_LT(vmf_kappa(rbar, 2), 0.2);
  const auto b = fit_bank(f, Weighting::uniform, KappaMode::vmf);
  EXPECT_LT(b.kappas[0], 0.2);
  EXPECT_GE(b.kappas[0], kKappaMin);
}

TEST(She, TighterClusterLargerKappa) {
  Rng rng(3);
  const ClassFeatures f{cone2d(rng, 5, 500), cone2d(rng, 30, 500)};
  const auto b = fit_bank(f, Weighting::uniform, KappaMode::vmf);
  EXPECT_GT(b.kappas[0], b.kappas[1]);
}

TEST(She, UniformModeKeepsKappaOne) {
  const auto b = fit_bank({{{1, 0}}, {{0, 1}}}, Weighting::uniform, KappaMode::uniform);
  EXPECT_EQ(b.kappas, (std::vector<double>{1.0, 1.0}));
}

TEST(She, EnergyAtPrototype) {
  const auto b = bank_of({{1, 0}, {0, 1}}, {1, 1});
  const FeatureVec z{1, 0};
  EXPECT_NEAR(she_energy(z, b), -std::log(std::exp(1.0) + 1.0), 1e-9);
  EXPECT_NEAR(she_energy(z, b), -1.3133, 1e-4);
}

TEST(She, OrthogonalInputGivesLogC) {
  const auto b = bank_of({{1, 0, 0}, {0, 1, 0}}, {3, 3});
  EXPECT_NEAR(she_energy(FeatureVec{0, 0, 2}, b), -std::log(2.0), 1e-12);
}

TEST(She, ZeroVectorIsDomainError) {
  const auto b = bank_of({{1, 0}}, {1});
  EXPECT_THROW(she_energy(FeatureVec{0, 0}, b), DomainError);
  EXPECT_THROW(she_energy(FeatureVec{1, 0, 0}, b), SizeError);
}

TEST(She, ScaleInvariantUpToRounding) {
  // moderate concentrations: the rounding of alpha * z stays far below 1e-5
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<FeatureVec> mus;
    std::vector<double> ks;
    for (int k = 0; k < 4; ++k) mus.push_back(unit(rng, 32)), ks.push_back(std::exp(rng.uniform(std::log(1e-3), std::log(10.0))));
    const auto b = bank_of(mus, ks);
    FeatureVec z(32);
    for (float& v : z) v = static_cast<float>(rng.normal());
    const double alpha = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
    FeatureVec az(z);
    for (float& v : az) v = static_cast<float>(alpha * v);
    EXPECT_LE(std::fabs(she_energy(az, b) - she_energy(z, b)), 1e-5);
  }
}

TEST(She, PrototypeMinimizesSingleClassEnergy) {
  Rng rng(5);
  const FeatureVec mu = unit(rng, 8);
  const auto b = bank_of({mu}, {2.5});
  const double best = she_energy(mu, b);
  for (int i = 0; i < 200; ++i) EXPECT_LE(best, she_energy(unit(rng, 8), b) + 1e-12);
}

TEST(She, ClassOrderDoesNotChangeEnergies) {
  Rng rng(6);
  ClassFeatures f(3);
  for (auto& cls : f)
    for (int i = 0; i < 30; ++i) {
      FeatureVec z = unit(rng, 6);
      for (float& v : z) v = std::fabs(v) + 0.1f * static_cast<float>(&cls - f.data());
      cls.push_back(z);
    }
  const ClassFeatures g{f[2], f[0], f[1]};
  const auto bf = fit_bank(f, Weighting::self_consistent, KappaMode::vmf);
  const auto bg = fit_bank(g, Weighting::self_consistent, KappaMode::vmf);
  EXPECT_EQ(bg.prototypes[0], bf.prototypes[2]);
  EXPECT_EQ(bg.prototypes[1], bf.prototypes[0]);
  for (int i = 0; i < 50; ++i) {
    const FeatureVec z = unit(rng, 6);
    EXPECT_NEAR(she_energy(z, bf), she_energy(z, bg), 1e-12);
  }
}

TEST(She, LargeKappaStaysFinite) {
  const auto b = bank_of({{1, 0}, {0, 1}, {-1, 0}}, {kKappaMax, kKappaMax, kKappaMax});
  for (FeatureVec z : {FeatureVec{1, 0}, FeatureVec{-1, 1e-3f}, FeatureVec{0.6f, -0.8f}}) {
    const double e = she_energy(z, b);
    EXPECT_TRUE(std::isfinite(e));
  }
  EXPECT_NEAR(she_energy(FeatureVec{1, 0}, b), -kKappaMax, 1e-6);
}

TEST(She, RawDotProductDependsOnScale) {
  const auto b = bank_of({{1, 0}, {0, 1}}, {1, 1});
  EXPECT_NE(she_energy(FeatureVec{2, 0}, b, false), she_energy(FeatureVec{1, 0}, b, false));
}

TEST(Magnitude, OriginAndLinearity) {
  EXPECT_NEAR(magnitude_energy(FeatureVec(4, 0.0f), 1.0, 10), -2.302585, 1e-6);
  const FeatureVec z{3, 4};
  const FeatureVec z2{6, 8};
  EXPECT_NEAR(magnitude_energy(z, 0.7, 5) - magnitude_energy(z2, 0.7, 5), 0.7 * 5, 1e-12);
  EXPECT_THROW(magnitude_energy(z, 0.0, 5), DomainError);
}

TEST(Magnitude, ParadoxFlipsOrdering) {
  Rng rng(7);
  const auto b = bank_of({{1, 0, 0, 0}, {0, 1, 0, 0}}, {10, 10});
  // loud noise looks more normal by magnitude, the quiet aligned vector by direction
  const FeatureVec noise{-3, -3, 20, 20};
  const FeatureVec aligned{0.5f, 0.01f, 0, 0};
  EXPECT_LT(magnitude_energy(noise, 1.0, 2), magnitude_energy(aligned, 1.0, 2));
  EXPECT_GT(she_energy(noise, b), she_energy(aligned, b));
}

TEST(She, BankRoundTrip) {
  TempDir dir;
  const auto b = fit_bank({{{1, 0.2f}, {0.9f, 0.1f}}, {{0, 1}, {0.1f, 1}}, {{0.5f, 0.5f}}},
                          Weighting::self_consistent, KappaMode::vmf);
  save_bank(b, dir.path());
  const auto back = load_bank(dir.path());
  EXPECT_EQ(back.dim, b.dim);
  EXPECT_EQ(back.prototypes, b.prototypes);
  EXPECT_EQ(back.kappas, b.kappas);
  EXPECT_EQ(back.provenance.counts, b.provenance.counts);
  EXPECT_EQ(back.provenance.weighting, b.provenance.weighting);
  EXPECT_EQ(back.provenance.warnings, b.provenance.warnings);
}
