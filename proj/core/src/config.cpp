#include "cgate/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cgate/errors.hpp"
#include "json.hpp"

namespace cgate {

using nlohmann::ordered_json;

void RunConfig::validate() const {
  if (backbone.classes < 2) throw ConfigError("classes must be >= 2", "backbone.classes");
  if (backbone.extents.volume() == 0)
    throw ConfigError("extents must be positive", "backbone.extents");
  if (backbone.widths.empty()) throw ConfigError("at least one stage", "backbone.widths");
  for (auto w : backbone.widths)
    if (w == 0) throw ConfigError("stage widths must be positive", "backbone.widths");
  const std::size_t stages = backbone.widths.size();
  if (ses.stage >= stages) throw ConfigError("ses stage out of range", "ses.stage");
  if (she.stage >= stages) throw ConfigError("she stage out of range", "she.stage");
  if (she.stage <= ses.stage)
    throw ConfigError("she must attach after ses", "she.stage");
  if (!(ses.epsilon > 0.0)) throw ConfigError("epsilon must be positive", "ses.epsilon");
  if (ses.top_k > backbone.widths[ses.stage])
    throw ConfigError("top_k exceeds the channels of the ses stage", "ses.top_k");
  if (budget.early_retention.size() != 2)
    throw ConfigError("two early retention targets expected (ses, she)", "budget.early_retention");
  budget.validate();
  if (!is_final(final_scorer)) throw ConfigError("final scorer must be energy or msp", "final_scorer");
  if (!(split.validation_fraction > 0.0 && split.validation_fraction < 1.0))
    throw ConfigError("validation fraction must lie in (0, 1)", "split.validation_fraction");
}

namespace {

ordered_json model_part(const RunConfig& c) {
  ordered_json j;
  j["backbone"] = {{"seed", c.backbone.seed},
                   {"classes", c.backbone.classes},
                   {"extents", {c.backbone.extents.channels, c.backbone.extents.height,
                                c.backbone.extents.width}},
                   {"widths", c.backbone.widths}};
  j["ses"] = {{"stage", c.ses.stage},
              {"top_k", c.ses.top_k},
              {"epsilon", c.ses.epsilon},
              {"global_omega", c.ses.global_omega}};
  j["she"] = {{"stage", c.she.stage},
              {"weighting", to_string(c.she.weighting)},
              {"kappa_mode", to_string(c.she.kappa_mode)},
              {"l2_normalize", c.she.l2_normalize}};
  j["budget"] = {{"early_retention", c.budget.early_retention},
                 {"final_tpr", c.budget.final_tpr}};
  j["final_scorer"] = c.final_scorer == ScoreKind::final_msp ? "msp" : "energy";
  return j;
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for " + path + key, path + key);
  }
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + " must be an object", path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok |= it.key() == a;
    if (!ok) throw ConfigError("unknown config key " + path + it.key(), path + it.key());
  }
}

}  // namespace

std::string RunConfig::model_json() const { return model_part(*this).dump(); }

std::string RunConfig::to_json() const {
  ordered_json j = model_part(*this);
  j["split"] = {{"seed", split.seed}, {"validation_fraction", split.validation_fraction}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(), "config");
  }
  RunConfig c;
  check_keys(j, {"backbone", "ses", "she", "budget", "final_scorer", "split"}, "");
  if (j.contains("backbone")) {
    const auto& b = j["backbone"];
    check_keys(b, {"seed", "classes", "extents", "widths"}, "backbone.");
    take(b, "seed", c.backbone.seed, "backbone.");
    take(b, "classes", c.backbone.classes, "backbone.");
    take(b, "widths", c.backbone.widths, "backbone.");
    if (b.contains("extents")) {
      std::vector<std::size_t> e;
      take(b, "extents", e, "backbone.");
      if (e.size() != 3) throw ConfigError("extents must be [C, H, W]", "backbone.extents");
      c.backbone.extents = {e[0], e[1], e[2]};
    }
  }
  if (j.contains("ses")) {
    const auto& s = j["ses"];
    check_keys(s, {"stage", "top_k", "epsilon", "global_omega"}, "ses.");
    take(s, "stage", c.ses.stage, "ses.");
    take(s, "top_k", c.ses.top_k, "ses.");
    take(s, "epsilon", c.ses.epsilon, "ses.");
    take(s, "global_omega", c.ses.global_omega, "ses.");
  }
  if (j.contains("she")) {
    const auto& s = j["she"];
    check_keys(s, {"stage", "weighting", "kappa_mode", "l2_normalize"}, "she.");
    take(s, "stage", c.she.stage, "she.");
    take(s, "l2_normalize", c.she.l2_normalize, "she.");
    std::string w = to_string(c.she.weighting), k = to_string(c.she.kappa_mode);
    take(s, "weighting", w, "she.");
    take(s, "kappa_mode", k, "she.");
    if (w == "uniform") c.she.weighting = Weighting::uniform;
    else if (w == "self_consistent") c.she.weighting = Weighting::self_consistent;
    else throw ConfigError("weighting must be uniform or self_consistent", "she.weighting");
    if (k == "vmf") c.she.kappa_mode = KappaMode::vmf;
    else if (k == "uniform") c.she.kappa_mode = KappaMode::uniform;
    else throw ConfigError("kappa_mode must be vmf or uniform", "she.kappa_mode");
  }
  if (j.contains("budget")) {
    const auto& b = j["budget"];
    check_keys(b, {"early_retention", "final_tpr"}, "budget.");
    take(b, "early_retention", c.budget.early_retention, "budget.");
    take(b, "final_tpr", c.budget.final_tpr, "budget.");
  }
  if (j.contains("final_scorer")) {
    std::string f;
    take(j, "final_scorer", f, "");
    if (f == "energy") c.final_scorer = ScoreKind::final_energy;
    else if (f == "msp") c.final_scorer = ScoreKind::final_msp;
    else throw ConfigError("final_scorer must be energy or msp", "final_scorer");
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, {"seed", "validation_fraction"}, "split.");
    take(s, "seed", c.split.seed, "split.");
    take(s, "validation_fraction", c.split.validation_fraction, "split.");
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path, "config");
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace cgate
