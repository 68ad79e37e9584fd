#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgate/config.hpp"
#include "cgate/corruptions.hpp"
#include "cgate/datagen.hpp"
#include "cgate/errors.hpp"
#include "cgate/pipeline.hpp"
#include "cgate/tzr.hpp"
#include "json.hpp"

namespace cgate::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// config field -> command-line flag, for error lines
const std::map<std::string, std::string> kFlagFor{
    {"backbone.seed", "--seed"},         {"backbone.classes", "--classes"},
    {"classes", "--classes"},            {"ses.top_k", "--top-k"},
    {"ses.epsilon", "--epsilon"},        {"ses.stage", "--ses-stage"},
    {"she.stage", "--she-stage"},        {"she.weighting", "--weighting"},
    {"she.kappa_mode", "--kappa-mode"},  {"budget.early_retention", "--retention"},
    {"budget.final_tpr", "--final-tpr"}, {"budget", "--retention"},
    {"final_scorer", "--final-scorer"},  {"split.seed", "--split-seed"},
    {"kind", "--kind"},                  {"n", "--n"},
    {"family", "--family"},              {"severity", "--severity"},
    {"jobs", "--jobs"},                  {"config", "--config"},
    {"extents", "--extents"},            {"ood", "--ood"},
    {"backbone.extents", "--extents"},   {"backbone.widths", "--widths"},
    {"ses.global_omega", "--global-omega"},
    {"split.validation_fraction", "--validation-fraction"},
};

// Unknown config fields come from the --config file itself.
std::string flag_for(const std::string& field) {
  const auto it = kFlagFor.find(field);
  if (it != kFlagFor.end()) return it->second;
  return field.empty() ? "-" : "--config";
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

int fail(std::ostream& err, int code, const std::string& flag, const std::string& msg) {
  const char* kind = code == kConfigError ? "config" : code == kDataError ? "data" : "internal";
  err << "error kind=" << kind << " flag=" << (flag.empty() ? "-" : flag)
      << " message=" << quote(msg) << "\n";
  return code;
}

std::size_t resolve_jobs(int flag_value) {
  if (flag_value > 0) return static_cast<std::size_t>(flag_value);
  if (flag_value < 0) throw ConfigError("--jobs must be positive", "jobs");
  if (const char* env = std::getenv("CASCADE_GATE_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (!*env || *end || v < 1) throw ConfigError("CASCADE_GATE_JOBS must be a positive integer", "jobs");
    return static_cast<std::size_t>(v);
  }
  return 1;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + p.string());
  f << text;
}

// Flags that overlay a RunConfig loaded from --config.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> classes, top_k, ses_stage, she_stage;
  std::optional<double> epsilon, final_tpr;
  std::optional<std::string> weighting, kappa_mode, final_scorer;
  std::vector<double> retention;
  bool global_omega = false, no_l2 = false;
  std::optional<std::uint64_t> split_seed;
  std::optional<double> validation_fraction;
  std::vector<std::size_t> extents, widths;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "RunConfig JSON file");
    app->add_option("--seed", seed, "backbone seed");
    app->add_option("--classes", classes, "number of ID classes");
    app->add_option("--top-k", top_k, "SES top-K channels (0 = default)");
    app->add_option("--epsilon", epsilon, "SES epsilon");
    app->add_flag("--global-omega", global_omega, "fix the SES channel set from ID statistics");
    app->add_option("--ses-stage", ses_stage, "stage index SES attaches to");
    app->add_option("--she-stage", she_stage, "stage index SHE attaches to");
    app->add_option("--weighting", weighting, "uniform | self_consistent");
    app->add_option("--kappa-mode", kappa_mode, "vmf | uniform");
    app->add_flag("--no-l2-normalize", no_l2, "use raw z.mu in SHE");
    app->add_option("--retention", retention, "early-gate retention targets")->delimiter(',');
    app->add_option("--final-tpr", final_tpr, "final ID acceptance target");
    app->add_option("--final-scorer", final_scorer, "energy | msp");
    app->add_option("--split-seed", split_seed, "seed of the 90/10 split");
    app->add_option("--validation-fraction", validation_fraction, "share of ID held out for calibration");
    app->add_option("--extents", extents, "input C,H,W")->delimiter(',');
    app->add_option("--widths", widths, "conv stage widths")->delimiter(',');
  }

  bool any() const {
    return !config_path.empty() || seed || classes || top_k || ses_stage || she_stage || epsilon ||
           final_tpr || weighting || kappa_mode || final_scorer || !retention.empty() ||
           global_omega || no_l2 || split_seed || validation_fraction || !extents.empty() ||
           !widths.empty();
  }

  RunConfig build() const {
    RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    nlohmann::json j = nlohmann::json::parse(c.to_json());
    if (seed) j["backbone"]["seed"] = *seed;
    if (classes) j["backbone"]["classes"] = *classes;
    if (top_k) j["ses"]["top_k"] = *top_k;
    if (epsilon) j["ses"]["epsilon"] = *epsilon;
    if (global_omega) j["ses"]["global_omega"] = true;
    if (ses_stage) j["ses"]["stage"] = *ses_stage;
    if (she_stage) j["she"]["stage"] = *she_stage;
    if (weighting) j["she"]["weighting"] = *weighting;
    if (kappa_mode) j["she"]["kappa_mode"] = *kappa_mode;
    if (no_l2) j["she"]["l2_normalize"] = false;
    if (!retention.empty()) j["budget"]["early_retention"] = retention;
    if (final_tpr) j["budget"]["final_tpr"] = *final_tpr;
    if (final_scorer) j["final_scorer"] = *final_scorer;
    if (split_seed) j["split"]["seed"] = *split_seed;
    if (validation_fraction) j["split"]["validation_fraction"] = *validation_fraction;
    if (!extents.empty()) j["backbone"]["extents"] = extents;
    if (!widths.empty()) j["backbone"]["widths"] = widths;
    return RunConfig::from_json(j.dump());
  }
};

int cmd_gen(const std::string& kind, std::size_t classes, std::size_t n, std::uint64_t seed,
            std::vector<std::size_t> extents, const std::string& out, std::size_t jobs,
            std::ostream& os) {
  if (extents.size() != 3) throw ConfigError("extents take C,H,W", "extents");
  CorpusSpec spec;
  spec.kind = parse_corpus_kind(kind);
  spec.classes = classes;
  spec.n = n;
  spec.seed = seed;
  spec.extents = {extents[0], extents[1], extents[2]};
  spec.validate();
  const auto samples = generate_corpus(spec, jobs);
  const Manifest m = write_corpus(spec, samples, out);
  ordered_json prov;
  prov["command"] = "gen";
  prov["kind"] = kind;
  prov["classes"] = classes;
  prov["n"] = n;
  prov["seed"] = seed;
  prov["extents"] = extents;
  write_text(fs::path(out) / "manifest.provenance.json", prov.dump(2) + "\n");
  os << "wrote " << m.entries.size() << " samples to " << out << "\n";
  return kOk;
}

int cmd_corrupt(const std::string& manifest, std::vector<std::string> families,
                std::vector<int> severities, std::uint64_t seed, const std::string& out,
                std::ostream& os) {
  const Manifest src = read_manifest(manifest);
  if (src.is_feature_manifest()) throw DataError("corrupt needs an image manifest");
  if (families.empty())
    for (auto f : kAllFamilies) families.push_back(to_string(f));
  if (severities.empty()) severities = {1, 2, 3, 4, 5};
  std::vector<CorruptionSpec> specs;
  for (const auto& f : families)
    for (int s : severities) {
      if (s < 1 || s > 5) throw ConfigError("severity must be 1..5", "severity");
      specs.push_back({parse_corruption_family(f), s, seed});
    }
  std::vector<CorpusImage> imgs;
  for (const auto& e : src.entries) imgs.push_back({e.sample_id, read_tensor(src.resolve(*e.path))});
  const Manifest m = build_corrupted_corpus(imgs, specs, out);
  ordered_json prov;
  prov["command"] = "corrupt";
  prov["source_manifest"] = manifest;
  prov["families"] = families;
  prov["severities"] = severities;
  prov["seed"] = seed;
  write_text(fs::path(out) / "manifest.provenance.json", prov.dump(2) + "\n");
  os << "wrote " << m.entries.size() << " corrupted samples to " << out << "\n";
  return kOk;
}

int cmd_calibrate(const ConfigFlags& flags, const std::string& id_manifest, const std::string& out,
                  std::size_t jobs, std::ostream& os) {
  const RunConfig cfg = flags.build();
  const Backbone b = make_backbone(cfg);
  ManifestSet id(read_manifest(id_manifest));
  const Artifacts a = calibrate(cfg, b, id, jobs);
  save_artifacts(a, out);
  write_text(fs::path(out) / "run_config.json", cfg.to_json() + "\n");
  os << "calibrated " << a.gates.size() << " gates on " << a.gates.front().calibration.validation_size
     << " validation samples; wrote " << out << "\n";
  return kOk;
}

int cmd_evaluate(const ConfigFlags& flags, const std::string& artifacts,
                 const std::string& id_manifest, const std::vector<std::string>& ood_args,
                 const std::string& out, bool all_pass, std::size_t jobs, std::ostream& os) {
  Artifacts a = load_artifacts(artifacts);
  if (flags.any()) {
    const RunConfig given = flags.build();
    if (given.model_json() != a.config.model_json())
      throw ConfigError("configuration differs from the one the artifacts were calibrated with",
                        "config");
  }
  if (all_pass)
    for (auto& g : a.gates) g.lo = -kInf, g.hi = kInf;
  if (ood_args.empty()) throw ConfigError("at least one --ood name=manifest is required", "ood");

  const Backbone b = make_backbone(a.config);
  ManifestSet id(read_manifest(id_manifest));
  const CorpusResult rid = run_corpus(a, b, id, "id", jobs);
  std::vector<CorpusResult> ood;
  ordered_json inputs;
  inputs["id"] = id_manifest;
  for (const auto& arg : ood_args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--ood takes name=manifest, got '" + arg + "'", "ood");
    const std::string name = arg.substr(0, eq), path = arg.substr(eq + 1);
    if (name.find(',') != std::string::npos) throw ConfigError("dataset names cannot contain ','", "ood");
    ManifestSet s(read_manifest(path));
    ood.push_back(run_corpus(a, b, s, name, jobs));
    inputs["ood"][name] = path;
  }

  fs::create_directories(out);
  const auto rows = build_report(a, rid, ood);
  write_text(fs::path(out) / "report.csv", report_csv(rows));
  write_text(fs::path(out) / "exits.csv", exits_csv(a, rid, ood));
  write_text(fs::path(out) / "score_hist.csv", score_histogram_csv(a, rid, ood));
  ordered_json prov;
  prov["command"] = "evaluate";
  prov["run_config"] = ordered_json::parse(a.config.to_json());
  prov["artifacts"] = artifacts;
  prov["all_pass"] = all_pass;
  prov["gates"] = ordered_json::parse(gates_to_json(a.gates));
  prov["inputs"] = inputs;
  write_text(fs::path(out) / "report.provenance.json", prov.dump(2) + "\n");
  os << report_csv(rows);
  return kOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out, std::ostream& os) {
  std::vector<ReportRow> rows;
  for (const auto& p : inputs) {
    std::ifstream f(p);
    if (!f) throw IoError("cannot open " + p);
    std::stringstream ss;
    ss << f.rdbuf();
    for (auto& r : parse_report_csv(ss.str())) rows.push_back(r);
  }
  if (rows.empty()) throw DataError("no report rows");

  std::ostringstream t;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-13s %8s %8s %12s %9s %8s\n", "dataset", "score_kind",
                "AUROC", "FPR95", "avg_flops", "saved%", "exit@1");
  t << line;
  std::map<std::string, std::vector<const ReportRow*>> by_kind;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-28s %-13s %8.2f %8.2f %12.0f %9.2f %8.3f\n",
                  r.dataset.c_str(), r.score_kind.c_str(), 100 * r.auroc, 100 * r.fpr95,
                  r.avg_flops, r.savings_pct, r.exit_ses);
    t << line;
    if (!by_kind.count(r.score_kind)) order.push_back(r.score_kind);
    by_kind[r.score_kind].push_back(&r);
  }
  for (const auto& k : order) {
    double au = 0, fp = 0, fl = 0, sv = 0, ex = 0;
    for (auto* r : by_kind[k]) au += r->auroc, fp += r->fpr95, fl += r->avg_flops, sv += r->savings_pct, ex += r->exit_ses;
    const double n = static_cast<double>(by_kind[k].size());
    std::snprintf(line, sizeof line, "%-28s %-13s %8.2f %8.2f %12.0f %9.2f %8.3f\n", "average",
                  k.c_str(), 100 * au / n, 100 * fp / n, fl / n, sv / n, ex / n);
    t << line;
  }
  if (out.empty()) os << t.str();
  else write_text(out, t.str());
  return kOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cascaded early-rejection OOD gating"};
  app.require_subcommand(1);
  int jobs_flag = 0;
  app.add_option("--jobs", jobs_flag, "worker threads (default: $CASCADE_GATE_JOBS or 1)");

  std::string kind, out_dir;
  std::size_t classes = 4, n = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> extents{3, 32, 32};
  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--kind", kind, "id_natural | ood_white_noise | ood_flat | ood_semantic_shift")->required();
  gen->add_option("--classes", classes, "ID classes");
  gen->add_option("--n", n, "samples")->required();
  gen->add_option("--seed", seed, "corpus seed");
  gen->add_option("--extents", extents, "C,H,W")->delimiter(',');
  gen->add_option("--out", out_dir, "output directory")->required();

  std::string manifest;
  std::vector<std::string> families;
  std::vector<int> severities;
  auto* cor = app.add_subcommand("corrupt", "apply corruption families to an image corpus");
  cor->add_option("--manifest", manifest, "source image manifest")->required();
  cor->add_option("--family", families, "families (default: all)")->delimiter(',');
  cor->add_option("--severity", severities, "severities 1..5 (default: all)")->delimiter(',');
  cor->add_option("--seed", seed, "corruption seed");
  cor->add_option("--out", out_dir, "output directory")->required();

  ConfigFlags cal_flags, eval_flags;
  std::string id_manifest, artifacts;
  auto* cal = app.add_subcommand("calibrate", "fit prototypes and calibrate gates");
  cal_flags.add_to(cal);
  cal->add_option("--id-manifest", id_manifest, "labelled ID manifest")->required();
  cal->add_option("--out", out_dir, "artifact directory")->required();

  std::vector<std::string> ood;
  bool all_pass = false;
  auto* ev = app.add_subcommand("evaluate", "run the cascade and write reports");
  eval_flags.add_to(ev);
  ev->add_option("--artifacts", artifacts, "directory written by calibrate")->required();
  ev->add_option("--id-manifest", id_manifest, "held-out ID manifest")->required();
  ev->add_option("--ood", ood, "name=manifest, repeatable")->required();
  ev->add_option("--out", out_dir, "report directory")->required();
  ev->add_flag("--all-pass", all_pass, "open every gate (no early exit)");

  std::vector<std::string> report_in;
  std::string report_out;
  auto* rep = app.add_subcommand("report", "tabulate report CSVs with per-kind averages");
  rep->add_option("--in", report_in, "report.csv files")->required();
  rep->add_option("--out", report_out, "write the table here instead of stdout");

  for (auto* sub : {gen, cor, cal, ev, rep}) sub->add_option("--jobs", jobs_flag, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    std::string msg = e.what();
    std::string flag = "-";
    const auto dash = msg.find("--");
    if (dash != std::string::npos) {
      const auto end = msg.find_first_of(" :,=", dash);
      flag = msg.substr(dash, end == std::string::npos ? std::string::npos : end - dash);
    }
    return fail(err, kConfigError, flag, msg);
  }

  try {
    const std::size_t jobs = resolve_jobs(jobs_flag);
    if (*gen) return cmd_gen(kind, classes, n, seed, extents, out_dir, jobs, out);
    if (*cor) return cmd_corrupt(manifest, families, severities, seed, out_dir, out);
    if (*cal) return cmd_calibrate(cal_flags, id_manifest, out_dir, jobs, out);
    if (*ev) return cmd_evaluate(eval_flags, artifacts, id_manifest, ood, out_dir, all_pass, jobs, out);
    if (*rep) return cmd_report(report_in, report_out, out);
    return fail(err, kConfigError, "-", "no command given");
  } catch (const ConfigError& e) {
    return fail(err, kConfigError, flag_for(e.field()), e.what());
  } catch (const DataError& e) {
    return fail(err, kDataError, "-", e.what());
  } catch (const FormatError& e) {
    return fail(err, kDataError, "-", e.what());
  } catch (const ValidationError& e) {
    return fail(err, kDataError, "-", e.what());
  } catch (const CalibrationError& e) {
    return fail(err, kDataError, "-", e.what());
  } catch (const FitError& e) {
    return fail(err, kDataError, "-", e.what());
  } catch (const SizeError& e) {
    return fail(err, kDataError, "-", e.what());
  } catch (const std::exception& e) {
    return fail(err, kInternalError, "-", e.what());
  }
}

}  // namespace cgate::cli
