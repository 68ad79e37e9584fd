#include <gtest/gtest.h>

#include "cgate/config.hpp"
#include "cgate/errors.hpp"
#include "cgate/manifest.hpp"
#include "cgate/pipeline.hpp"
#include "tmpdir.hpp"

using namespace cgate;

namespace {

std::string field_of(const std::string& json) {
  try {
    RunConfig::from_json(json).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip) {
  RunConfig c;
  c.validate();
  c.ses.top_k = 3;
  c.she.weighting = Weighting::self_consistent;
  c.final_scorer = ScoreKind::final_msp;
  c.budget.early_retention = {0.99, 1.0};
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.model_json(), c.model_json());
}

TEST(Config, SplitIsNotPartOfTheModel) {
  RunConfig a, b;
  b.split.seed = 99;
  EXPECT_EQ(a.model_json(), b.model_json());
  EXPECT_NE(a.to_json(), b.to_json());
  b.ses.epsilon = 1e-5;
  EXPECT_NE(a.model_json(), b.model_json());
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of(R"({"backbone": {"classes": 1}})"), "backbone.classes");
  EXPECT_EQ(field_of(R"({"ses": {"top_k": 17}})"), "ses.top_k");
  EXPECT_EQ(field_of(R"({"ses": {"epsilon": 0}})"), "ses.epsilon");
  EXPECT_EQ(field_of(R"({"she": {"weighting": "iterative"}})"), "she.weighting");
  EXPECT_EQ(field_of(R"({"budget": {"early_retention": [0.9, 0.9]}})"), "budget");
  EXPECT_EQ(field_of(R"({"final_scorer": "odin"})"), "final_scorer");
  EXPECT_EQ(field_of(R"({"split": {"validation_fraction": 1.0}})"), "split.validation_fraction");
  EXPECT_EQ(field_of(R"({"ses": {"topk": 1}})"), "ses.topk");
  EXPECT_EQ(field_of(R"({"backbone": {"seed": "seven"}})"), "backbone.seed");
  EXPECT_EQ(field_of("{"), "config");
  EXPECT_EQ(field_of(R"({"she": {"stage": 0}})"), "she.stage");
}

TEST(Split, NinetyTenAndSeeded) {
  const Split a = split_indices(1000, 0.1, 5), b = split_indices(1000, 0.1, 5), c = split_indices(1000, 0.1, 6);
  EXPECT_EQ(a.validation.size(), 100u);
  EXPECT_EQ(a.fit.size(), 900u);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_NE(a.validation, c.validation);
  std::vector<bool> seen(1000, false);
  for (auto i : a.fit) seen[i] = true;
  for (auto i : a.validation) {
    EXPECT_FALSE(seen[i]);
    seen[i] = true;
  }
  EXPECT_EQ(std::count(seen.begin(), seen.end(), true), 1000);
}

TEST(Manifest, RoundTripAndValidation) {
  TempDir dir;
  Manifest m;
  m.dir = dir.path();
  ManifestEntry e;
  e.sample_id = "a";
  e.label = 2;
  e.stage_paths = {"a_s0.tzr", "a_s1.tzr"};
  e.logits_path = "a_logits.tzr";
  m.entries.push_back(e);
  e.sample_id = "b";
  m.entries.push_back(e);
  write_manifest(m, dir.path() / "manifest.json");
  const Manifest back = read_manifest(dir.path() / "manifest.json");
  EXPECT_TRUE(back.is_feature_manifest());
  EXPECT_EQ(back.stage_count(), 2u);
  EXPECT_EQ(manifest_json(back), manifest_json(m));
  EXPECT_NO_THROW(back.validate(false));
  EXPECT_THROW(back.validate(true), DataError);  // the tensors do not exist

  Manifest dup = m;
  dup.entries[1].sample_id = "a";
  EXPECT_THROW(dup.validate(), DataError);
  Manifest ragged = m;
  ragged.entries[1].stage_paths.pop_back();
  EXPECT_THROW(ragged.validate(), DataError);
  EXPECT_THROW(read_manifest(dir.path() / "missing.json"), IoError);
}
