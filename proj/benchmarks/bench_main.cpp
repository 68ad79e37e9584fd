#include <benchmark/benchmark.h>

#include "cgate/backbone.hpp"
#include "cgate/cascade.hpp"
#include "cgate/datagen.hpp"
#include "cgate/metrics.hpp"
#include "cgate/rng.hpp"
#include "cgate/ses.hpp"
#include "cgate/she.hpp"

using namespace cgate;

namespace {

const Backbone& desk() {
  static const Backbone b = init_backbone(7, 4, {3, 32, 32});
  return b;
}

Tensor image(std::uint64_t seed) {
  return generate_sample({CorpusKind::id_natural, 4, 1, {3, 32, 32}, seed}, 0).image;
}

// Model with gates wide open so every sample runs to the end, or shut so
// every sample stops at the first gate.
CascadeModel model(bool reject_early) {
  const Backbone& b = desk();
  ClassFeatures f(4);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto s = generate_sample({CorpusKind::id_natural, 4, 40, {3, 32, 32}, 3}, i);
    f[static_cast<std::size_t>(s.label)].push_back(
        global_average_pool(b.forward_stage(1, b.forward_stage(0, s.image))));
  }
  CascadeModel m;
  m.bank = fit_bank(f, Weighting::uniform, KappaMode::vmf);
  m.gates.resize(3);
  m.gates[0].stage = 0, m.gates[0].kind = ScoreKind::ses;
  m.gates[1].stage = 1, m.gates[1].kind = ScoreKind::she;
  m.gates[2].stage = 3, m.gates[2].kind = ScoreKind::final_energy;
  if (reject_early) m.gates[0].lo = m.gates[0].hi = 1e9;
  m.cost = CostModel::from_backbone(b, m.gates);
  return m;
}

}  // namespace

static void BM_Stage0(benchmark::State& st) {
  const Tensor x = image(1);
  for (auto _ : st) benchmark::DoNotOptimize(desk().forward_stage(0, x));
}
BENCHMARK(BM_Stage0);

static void BM_FullForward(benchmark::State& st) {
  const Tensor x = image(1);
  for (auto _ : st) benchmark::DoNotOptimize(desk().forward(x));
}
BENCHMARK(BM_FullForward);

static void BM_SesScore(benchmark::State& st) {
  const Tensor z = desk().forward_stage(0, image(2));
  for (auto _ : st) benchmark::DoNotOptimize(ses_score(z, {}));
}
BENCHMARK(BM_SesScore);

static void BM_SheEnergy(benchmark::State& st) {
  const CascadeModel m = model(false);
  const auto z = global_average_pool(desk().forward_stage(1, desk().forward_stage(0, image(4))));
  for (auto _ : st) benchmark::DoNotOptimize(she_energy(z, m.bank));
}
BENCHMARK(BM_SheEnergy);

// The saving the cascade exists for: a first-gate exit against a full pass.
static void BM_CascadeEarlyExit(benchmark::State& st) {
  const CascadeModel m = model(true);
  const Tensor x = image(5);
  for (auto _ : st) benchmark::DoNotOptimize(run_cascade(x, desk(), m));
}
BENCHMARK(BM_CascadeEarlyExit);

static void BM_CascadeFullPass(benchmark::State& st) {
  const CascadeModel m = model(false);
  const Tensor x = image(5);
  for (auto _ : st) benchmark::DoNotOptimize(run_cascade(x, desk(), m));
}
BENCHMARK(BM_CascadeFullPass);

static void BM_GenerateSample(benchmark::State& st) {
  std::size_t i = 0;
  for (auto _ : st)
    benchmark::DoNotOptimize(generate_sample({CorpusKind::id_natural, 4, 1u << 30, {3, 32, 32}, 9}, i++));
}
BENCHMARK(BM_GenerateSample);

static void BM_Auroc(benchmark::State& st) {
  Rng rng(1);
  ScoreSet s;
  for (std::int64_t i = 0; i < st.range(0); ++i) s.id.push_back(rng.normal() + 1), s.ood.push_back(rng.normal());
  for (auto _ : st) benchmark::DoNotOptimize(auroc(s));
  st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_Auroc)->Range(1 << 8, 1 << 16)->Complexity();

static void BM_PowerSpectrum16(benchmark::State& st) {
  Tensor t({16, 16});
  Rng rng(2);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  for (auto _ : st) benchmark::DoNotOptimize(power_spectrum(t));
}
BENCHMARK(BM_PowerSpectrum16);

// the distro's benchmark_main archive carries LTO bytecode from another compiler
BENCHMARK_MAIN();
