// mrieval: command-line front end for the evaluation toolkit.
//
// Exit codes: 0 success, 2 input/validation error, 3 model too unreliable for
// assessment, 4 internal error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrieval/anatomy.hpp"
#include "mrieval/config.hpp"
#include "mrieval/error.hpp"
#include "mrieval/nifti.hpp"
#include "mrieval/protocol.hpp"
#include "mrieval/qc_gate.hpp"
#include "mrieval/report.hpp"

namespace fs = std::filesystem;
using namespace mrieval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitUnreliable = 3;
constexpr int kExitInternal = 4;

struct Common {
  std::string config;
  std::string real;
  std::string synth;
  std::string out;
  std::string format = "json";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI configuration file");
  cmd->add_option("--real", c.real, "real reference set directory");
  cmd->add_option("--synth", c.synth, "synthetic set directory");
  cmd->add_option("--out", c.out, "output directory (default: stdout)");
  cmd->add_option("--format", c.format, "json | csv | markdown")->check(CLI::IsMember({"json", "csv", "markdown"}));
  cmd->add_option("--seed", c.seed, "seed override");
  cmd->add_option("--threads", c.threads, "worker threads (speed only)")->check(CLI::PositiveNumber);
}

EvalConfig resolve_config(const Common& c) {
  EvalConfig cfg = c.config.empty() ? EvalConfig{} : load_config(c.config);
  if (!c.real.empty()) cfg.real_dir = c.real;
  if (!c.synth.empty()) cfg.synth_dir = c.synth;
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  return cfg;
}

fs::path require_dir(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(std::string("--") + what + " is required");
  if (!fs::is_directory(p)) throw Error(std::string(what) + " directory not found: " + p.string());
  return p;
}

void write_outputs(const std::vector<EmittedFile>& files, const std::string& out) {
  if (out.empty()) {
    for (const auto& f : files) {
      if (files.size() > 1) std::cout << "==> " << f.name << " <==\n";
      std::cout << f.content;
      if (!f.content.ends_with("\n")) std::cout << "\n";
    }
    return;
  }
  fs::create_directories(out);
  for (const auto& f : files)
    write_file(fs::path(out) / f.name, std::span(reinterpret_cast<const std::uint8_t*>(f.content.data()), f.content.size()));
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

int cmd_validate(const Common& c, bool standardize) {
  const EvalConfig cfg = resolve_config(c);
  std::vector<fs::path> roots;
  if (!cfg.real_dir.empty()) roots.push_back(cfg.real_dir);
  if (!cfg.synth_dir.empty()) roots.push_back(cfg.synth_dir);
  if (roots.empty()) throw Error("validate needs --real and/or --synth");

  nlohmann::json report = nlohmann::json::object();
  bool all_ok = true;
  for (const auto& root : roots) {
    require_dir(root, "input");
    for (const char* sub : {"images", "labels"}) {
      for (const auto& f : list_nifti(root / sub)) {
        nlohmann::json entry;
        try {
          const ParsedImage img = read_nifti(f);
          const GeometryReport g = std::holds_alternative<Volume>(img)
                                       ? validate_geometry(std::get<Volume>(img), cfg.shape, cfg.spacing, cfg.intensity_tolerance)
                                       : validate_geometry(std::get<LabelMap>(img), cfg.shape, cfg.spacing);
          entry["conforms"] = g.conforms();
          nlohmann::json issues = nlohmann::json::array();
          for (const auto& i : g.issues) issues.push_back({{"field", i.field}, {"expected", i.expected}, {"observed", i.observed}});
          entry["issues"] = issues;
          all_ok = all_ok && g.conforms();

          if (standardize && !c.out.empty() && std::holds_alternative<Volume>(img)) {
            const Volume v = pad_to_shape(normalize_intensity(std::get<Volume>(img)), cfg.shape);
            const fs::path dst = fs::path(c.out) / f.lexically_relative(root.parent_path());
            fs::create_directories(dst.parent_path());
            write_nifti_file(dst, v);
          }
        } catch (const Error& e) {
          entry["conforms"] = false;
          entry["error"] = e.what();
          all_ok = false;
        }
        report[f.generic_string()] = entry;
      }
    }
  }
  std::cout << dump(report);
  return all_ok ? kExitOk : kExitInput;
}

int cmd_metrics(const Common& c) {
  const EvalConfig cfg = resolve_config(c);
  require_dir(cfg.real_dir, "real");
  require_dir(cfg.synth_dir, "synth");
  const auto real = load_images(cfg.real_dir, cfg, true);
  const auto synth = load_images(cfg.synth_dir, cfg, false);
  Provenance prov;
  std::vector<std::string> warnings = synth.warnings;
  const auto metrics = classic_metrics(real, synth, load_embedding_dir(cfg.real_dir), load_embedding_dir(cfg.synth_dir),
                                       cfg, prov, warnings);
  nlohmann::json j;
  for (const auto& [k, v] : metrics) j["metrics"][k] = v;
  j["settings"] = prov.settings;
  j["skipped_files"] = synth.skipped.size();
  j["warnings"] = warnings;
  write_outputs({{"metrics.json", dump(j)}}, c.out);
  return kExitOk;
}

int cmd_calibrate(const Common& c) {
  const EvalConfig cfg = resolve_config(c);
  const auto records = load_qc(require_dir(cfg.real_dir, "real"), cfg.qc_regions);
  const Calibration cal = calibrate_threshold(records, cfg.target_real_fail_fraction, cfg.grid_step, cfg.qc_regions);
  nlohmann::json j{{"threshold", cal.threshold},
                   {"failed", cal.failed},
                   {"total", cal.total},
                   {"realized_fail_fraction", cal.realized_fail_fraction},
                   {"target_fail_fraction", cfg.target_real_fail_fraction},
                   {"grid_step", cal.grid_step}};
  nlohmann::json dist;
  for (const auto& [region, s] : qc_distribution(records, cal.threshold, cfg.qc_regions))
    dist[region] = {{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max},
                    {"fraction_below", s.fraction_below}};
  j["distribution"] = dist;
  write_outputs({{"calibration.json", dump(j)}}, c.out);
  return kExitOk;
}

int cmd_gate(const Common& c, std::optional<double> threshold) {
  EvalConfig cfg = resolve_config(c);
  if (threshold) cfg.qc_threshold = threshold;
  const auto synth = load_qc(require_dir(cfg.synth_dir, "synth"), cfg.qc_regions);
  double t = 0.0;
  std::string source;
  if (cfg.qc_threshold) {
    t = *cfg.qc_threshold;
    source = "fixed";
  } else {
    const auto real = load_qc(require_dir(cfg.real_dir, "real"), cfg.qc_regions);
    t = calibrate_threshold(real, cfg.target_real_fail_fraction, cfg.grid_step, cfg.qc_regions).threshold;
    source = "calibrated";
  }
  const ModelGateResult g =
      gate_model(synth, GateConfig{t, cfg.target_real_fail_fraction, cfg.min_model_pass_rate, cfg.qc_regions});
  nlohmann::json j{{"model_name", cfg.model_name},
                   {"total", g.total},
                   {"failed_mris", g.failed_mris},
                   {"failed_roi_events", g.failed_roi_events},
                   {"pass_rate", g.pass_rate},
                   {"pass_rate_percent", format_percent(g.pass_rate)},
                   {"threshold", g.threshold},
                   {"threshold_source", source},
                   {"min_pass_rate", g.min_pass_rate},
                   {"verdict", std::string(to_string(g.verdict))},
                   {"per_region_fail_counts", g.per_region_fail_counts}};
  write_outputs({{"gate.json", dump(j)}}, c.out);
  return g.verdict == Verdict::Assessable ? kExitOk : kExitUnreliable;
}

int cmd_anatomy(const Common& c, const std::string& effect_matrix, std::optional<double> flag) {
  EvalConfig cfg = resolve_config(c);
  if (flag) cfg.flag_threshold = *flag;

  // Ranking mode: compare models from a precomputed region x model d matrix.
  if (!effect_matrix.empty()) {
    const auto tables = effect_tables_from_csv(load_csv(effect_matrix), cfg.flag_threshold);
    nlohmann::json j;
    for (const auto& [model, counts] : best_region_counts(tables)) {
      j[model]["best_regions_strict"] = counts.strict;
      j[model]["best_regions_with_ties"] = counts.tied;
    }
    for (const auto& [model, t] : tables) {
      j[model]["flagged_regions"] = t.flagged_count();
      j[model]["regions"] = t.rows.size();
    }
    write_outputs({{"ranking.json", dump(j)}}, c.out);
    return kExitOk;
  }

  require_dir(cfg.real_dir, "real");
  require_dir(cfg.synth_dir, "synth");
  const RegionTable table = load_region_table(cfg);
  std::vector<std::string> warnings;
  const auto real = load_region_volumes(cfg.real_dir, cfg, table, true, warnings);
  const auto synth = load_region_volumes(cfg.synth_dir, cfg, table, false, warnings);
  std::vector<RegionVolumes> fit_set = real;
  if (cfg.icv_fit == "pooled") fit_set.insert(fit_set.end(), synth.begin(), synth.end());
  const IcvFit fit = fit_icv(fit_set, cfg.icv_fit);
  const auto t = plausibility_table(residualize(real, fit), residualize(synth, fit), cfg.flag_threshold);

  CsvTable csv;
  csv.header = {"region", "d", "n_real", "n_synth", "flagged"};
  for (const auto& r : t.rows)
    csv.rows.push_back({r.region, format_real(r.d), std::to_string(r.n_real), std::to_string(r.n_synth),
                        r.flagged ? "1" : "0"});
  std::vector<EmittedFile> files{{"effect_sizes.csv", write_csv(csv)},
                                 {"region_volumes_real.csv", region_volumes_to_csv(real)},
                                 {"region_volumes_synth.csv", region_volumes_to_csv(synth)}};
  if (c.out.empty()) files.resize(1);
  write_outputs(files, c.out);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_evaluate(const Common& c) {
  const EvalConfig cfg = resolve_config(c);
  const EvaluationReport r = run_protocol(cfg);
  write_outputs(emit(std::span(&r, 1), parse_report_format(c.format)), c.out);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return r.gate().verdict == Verdict::Assessable ? kExitOk : kExitUnreliable;
}

int cmd_phantom(const Common& c, std::optional<std::size_t> count, const std::vector<std::string>& scales,
                std::optional<std::size_t> qc_fail) {
  EvalConfig cfg = resolve_config(c);
  if (c.out.empty()) throw Error("phantom needs --out");
  if (count) cfg.phantom.count = *count;
  if (qc_fail) cfg.phantom.qc_fail = *qc_fail;
  for (const auto& s : scales) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("--scale expects key=factor, got '" + s + "'");
    cfg.phantom.region_scale[s.substr(0, eq)] = parse_real(s.substr(eq + 1), "--scale");
  }
  cfg.validate();
  const auto ids = write_phantom_set(c.out, cfg);
  std::cout << "wrote " << ids.size() << " phantoms to " << c.out << "\n";
  return kExitOk;
}

int cmd_report(const Common& c, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw Error("report needs at least one json report");
  std::vector<EvaluationReport> reports;
  for (const auto& in : inputs) {
    const auto bytes = read_file(in);
    reports.push_back(report_from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
  }
  write_outputs(emit(reports, parse_report_format(c.format)), c.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation of generated 3D brain MRI sets against a real reference set"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  Common common;
  auto* validate = app.add_subcommand("validate", "check volume and label-map geometry");
  bool standardize = false;
  validate->add_flag("--standardize", standardize, "write normalized, center-padded copies of the volumes to --out");
  auto* metrics = app.add_subcommand("metrics", "classic metrics only (FID, MMD, image MMD, MS-SSIM)");
  auto* calibrate = app.add_subcommand("calibrate-qc", "calibrate the QC threshold on the real set");
  auto* gate = app.add_subcommand("gate", "gate a synthetic set on its QC scores");
  std::optional<double> threshold;
  gate->add_option("--threshold", threshold, "fixed QC threshold (default: calibrate on --real)");
  auto* anatomy = app.add_subcommand("anatomy", "ICV-residualized regional volumes and Cohen's d");
  std::string effect_matrix;
  std::optional<double> flag;
  anatomy->add_option("--effect-matrix", effect_matrix, "rank models from a region,<model>... d matrix instead");
  anatomy->add_option("--flag-threshold", flag, "|d| above which a region is flagged");
  auto* evaluate = app.add_subcommand("evaluate", "full protocol: geometry, metrics, gate, plausibility");
  auto* phantom = app.add_subcommand("phantom", "write a synthetic phantom family with analytic ground truth");
  std::optional<std::size_t> count, qc_fail;
  std::vector<std::string> scales;
  phantom->add_option("--count", count, "number of subjects");
  phantom->add_option("--scale", scales, "region scale factor, key=factor (repeatable)");
  phantom->add_option("--qc-fail", qc_fail, "subjects given a failing QC score");
  auto* report = app.add_subcommand("report", "re-render json reports");
  std::vector<std::string> inputs;
  report->add_option("inputs", inputs, "json reports")->required();

  for (auto* cmd : {validate, metrics, calibrate, gate, anatomy, evaluate, phantom, report}) add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*validate) return cmd_validate(common, standardize);
    if (*metrics) return cmd_metrics(common);
    if (*calibrate) return cmd_calibrate(common);
    if (*gate) return cmd_gate(common, threshold);
    if (*anatomy) return cmd_anatomy(common, effect_matrix, flag);
    if (*evaluate) return cmd_evaluate(common);
    if (*phantom) return cmd_phantom(common, count, scales, qc_fail);
    if (*report) return cmd_report(common, inputs);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
