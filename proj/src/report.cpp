#include "mrieval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mrieval/csv.hpp"
#include "mrieval/error.hpp"

namespace mrieval {

using nlohmann::json;

EvaluationReport::EvaluationReport(std::string model_name, ModelGateResult gate,
                                   std::optional<EffectSizeTable> effect_sizes)
    : model_name_(std::move(model_name)), gate_(std::move(gate)), effect_sizes_(std::move(effect_sizes)) {
  if (model_name_.empty()) throw Error("report needs a model name");
}

EvaluationReport EvaluationReport::unreliable(std::string model_name, ModelGateResult gate) {
  if (gate.verdict != Verdict::TooUnreliable)
    throw Error("unreliable report requires a too-unreliable verdict");
  return EvaluationReport(std::move(model_name), std::move(gate), std::nullopt);
}

EvaluationReport EvaluationReport::assessed(std::string model_name, ModelGateResult gate,
                                            EffectSizeTable effect_sizes) {
  if (gate.verdict != Verdict::Assessable)
    throw Error("effect sizes are only reported for an assessable model");
  return EvaluationReport(std::move(model_name), std::move(gate), std::move(effect_sizes));
}

EvaluationReport EvaluationReport::from_parts(std::string model_name, ModelGateResult gate,
                                              std::optional<EffectSizeTable> effect_sizes) {
  if (gate.verdict == Verdict::Assessable) {
    if (!effect_sizes) throw Error("assessable model '" + model_name + "' has no effect-size table");
    return assessed(std::move(model_name), std::move(gate), std::move(*effect_sizes));
  }
  if (effect_sizes) throw Error("too-unreliable model '" + model_name + "' must not carry effect sizes");
  return unreliable(std::move(model_name), std::move(gate));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json real_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double real_from_json(const json& j, std::string_view what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw Error("report field '" + std::string(what) + "' is not a number");
}

const json& member(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(std::string("report is missing '") + key + "'");
  return j.at(key);
}

std::size_t count_from_json(const json& j, const char* what) {
  if (!j.is_number_unsigned()) throw Error(std::string("report field '") + what + "' is not a count");
  return j.get<std::size_t>();
}

json gate_to_json(const ModelGateResult& g) {
  json j;
  j["total"] = g.total;
  j["failed_mris"] = g.failed_mris;
  j["failed_roi_events"] = g.failed_roi_events;
  j["pass_rate"] = real_to_json(g.pass_rate);
  j["verdict"] = std::string(to_string(g.verdict));
  j["per_region_fail_counts"] = g.per_region_fail_counts;
  j["threshold"] = real_to_json(g.threshold);
  j["min_pass_rate"] = real_to_json(g.min_pass_rate);
  return j;
}

ModelGateResult gate_from_json(const json& j) {
  ModelGateResult g;
  g.total = count_from_json(member(j, "total"), "total");
  g.failed_mris = count_from_json(member(j, "failed_mris"), "failed_mris");
  g.failed_roi_events = count_from_json(member(j, "failed_roi_events"), "failed_roi_events");
  g.pass_rate = real_from_json(member(j, "pass_rate"), "pass_rate");
  g.verdict = parse_verdict(member(j, "verdict").get<std::string>());
  for (const auto& [k, v] : member(j, "per_region_fail_counts").items())
    g.per_region_fail_counts[k] = count_from_json(v, "per_region_fail_counts");
  g.threshold = real_from_json(member(j, "threshold"), "threshold");
  g.min_pass_rate = real_from_json(member(j, "min_pass_rate"), "min_pass_rate");
  return g;
}

json effects_to_json(const EffectSizeTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"region", r.region},
                    {"d", real_to_json(r.d)},
                    {"n_real", r.n_real},
                    {"n_synth", r.n_synth},
                    {"flagged", r.flagged}});
  return {{"flag_threshold", real_to_json(t.flag_threshold)}, {"rows", rows}};
}

EffectSizeTable effects_from_json(const json& j) {
  EffectSizeTable t;
  t.flag_threshold = real_from_json(member(j, "flag_threshold"), "flag_threshold");
  for (const auto& r : member(j, "rows")) {
    EffectSizeRow row;
    row.region = member(r, "region").get<std::string>();
    row.d = real_from_json(member(r, "d"), "d");
    row.n_real = count_from_json(member(r, "n_real"), "n_real");
    row.n_synth = count_from_json(member(r, "n_synth"), "n_synth");
    row.flagged = member(r, "flagged").get<bool>();
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

std::string to_json(const EvaluationReport& r) {
  json j;
  j["model_name"] = r.model_name();
  json classic = json::object();
  for (const auto& [k, v] : r.classic) classic[k] = real_to_json(v);
  j["classic"] = classic;
  j["gate"] = gate_to_json(r.gate());
  j["effect_sizes"] = r.effect_sizes() ? effects_to_json(*r.effect_sizes()) : json(nullptr);
  if (r.qc_threshold) {
    const auto& q = *r.qc_threshold;
    j["qc_threshold"] = {{"value", real_to_json(q.value)},
                         {"source", q.source},
                         {"target_real_fail_fraction", real_to_json(q.target_real_fail_fraction)},
                         {"grid_step", real_to_json(q.grid_step)},
                         {"real_failed", q.real_failed},
                         {"real_total", q.real_total}};
  } else {
    j["qc_threshold"] = nullptr;
  }
  json dist = json::object();
  for (const auto& [region, s] : r.qc_distribution)
    dist[region] = {{"min", real_to_json(s.min)},       {"q1", real_to_json(s.q1)},
                    {"median", real_to_json(s.median)}, {"q3", real_to_json(s.q3)},
                    {"max", real_to_json(s.max)},       {"fraction_below", real_to_json(s.fraction_below)}};
  j["qc_distribution"] = dist;
  j["skipped_files"] = r.skipped_files;
  j["warnings"] = r.warnings;
  const auto& p = r.provenance;
  j["provenance"] = {{"toolkit_version", p.toolkit_version},
                     {"config_hash", p.config_hash},
                     {"seeds", p.seeds},
                     {"manifests", p.manifests},
                     {"settings", p.settings}};
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("report json: ") + e.what());
  }
  try {
    std::optional<EffectSizeTable> effects;
    if (!member(j, "effect_sizes").is_null()) effects = effects_from_json(j.at("effect_sizes"));
    auto r = EvaluationReport::from_parts(member(j, "model_name").get<std::string>(), gate_from_json(member(j, "gate")),
                                          std::move(effects));
    for (const auto& [k, v] : member(j, "classic").items()) r.classic[k] = real_from_json(v, k);
    if (const auto& q = member(j, "qc_threshold"); !q.is_null()) {
      QcThreshold t;
      t.value = real_from_json(member(q, "value"), "value");
      t.source = member(q, "source").get<std::string>();
      t.target_real_fail_fraction = real_from_json(member(q, "target_real_fail_fraction"), "target_real_fail_fraction");
      t.grid_step = real_from_json(member(q, "grid_step"), "grid_step");
      t.real_failed = count_from_json(member(q, "real_failed"), "real_failed");
      t.real_total = count_from_json(member(q, "real_total"), "real_total");
      r.qc_threshold = t;
    }
    for (const auto& [region, s] : member(j, "qc_distribution").items())
      r.qc_distribution[region] = {real_from_json(member(s, "min"), "min"),
                                   real_from_json(member(s, "q1"), "q1"),
                                   real_from_json(member(s, "median"), "median"),
                                   real_from_json(member(s, "q3"), "q3"),
                                   real_from_json(member(s, "max"), "max"),
                                   real_from_json(member(s, "fraction_below"), "fraction_below")};
    r.skipped_files = count_from_json(member(j, "skipped_files"), "skipped_files");
    r.warnings = member(j, "warnings").get<std::vector<std::string>>();
    const auto& p = member(j, "provenance");
    r.provenance.toolkit_version = member(p, "toolkit_version").get<std::string>();
    r.provenance.config_hash = member(p, "config_hash").get<std::string>();
    r.provenance.seeds = member(p, "seeds").get<std::map<std::string, std::uint64_t>>();
    r.provenance.manifests = member(p, "manifests").get<std::map<std::string, std::vector<std::string>>>();
    r.provenance.settings = member(p, "settings").get<std::map<std::string, std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("report json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Rendering

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  throw Error("unknown report format '" + std::string(s) + "' (json, csv, markdown)");
}

std::string safe_file_stem(std::string_view name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out;
}

std::string format_percent(double fraction) { return format_fixed(100.0 * fraction, 2) + "%"; }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Column order: fid@*, mmd@*, image_mmd, then MS-SSIM.
std::vector<std::string> metric_columns(std::span<const EvaluationReport> reports) {
  std::set<std::string> fid, mmd;
  bool image = false, ssim = false;
  for (const auto& r : reports)
    for (const auto& [k, _] : r.classic) {
      if (k.starts_with("fid@")) fid.insert(k);
      else if (k.starts_with("mmd@")) mmd.insert(k);
      else if (k == "image_mmd") image = true;
      else if (k == "ms_ssim_mean") ssim = true;
    }
  std::vector<std::string> cols(fid.begin(), fid.end());
  cols.insert(cols.end(), mmd.begin(), mmd.end());
  if (image) cols.push_back("image_mmd");
  if (ssim) cols.push_back("ms_ssim_mean");
  return cols;
}

std::string column_title(const std::string& key) {
  if (key.starts_with("fid@")) return "FID (" + key.substr(4) + ")";
  if (key.starts_with("mmd@")) return "MMD (" + key.substr(4) + ")";
  if (key == "image_mmd") return "Image MMD";
  return "MS-SSIM";
}

std::optional<double> lookup(const std::map<std::string, double>& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

// Lower is better for distances; MS-SSIM is best closest to the real set.
std::optional<double> badness(const EvaluationReport& r, const std::string& key) {
  if (key == "ms_ssim_mean") {
    const auto gap = lookup(r.classic, "ms_ssim_gap_to_real");
    if (!gap || !std::isfinite(*gap)) return std::nullopt;
    return std::abs(*gap);
  }
  const auto v = lookup(r.classic, key);
  if (!v || !std::isfinite(*v)) return std::nullopt;
  return *v;
}

std::string bold_if(std::string cell, bool best) { return best ? "**" + cell + "**" : cell; }

std::string md_row(const std::vector<std::string>& cells) {
  std::string s = "|";
  for (const auto& c : cells) s += " " + c + " |";
  return s + "\n";
}

std::string md_rule(std::size_t n) {
  std::string s = "|";
  for (std::size_t i = 0; i < n; ++i) s += "---|";
  return s + "\n";
}

std::string format_d(double d) { return format_fixed(d, 2); }

std::string render_markdown(std::span<const EvaluationReport> reports) {
  std::ostringstream md;
  md << "# Evaluation report\n\n";

  const auto cols = metric_columns(reports);
  if (!cols.empty()) {
    md << "## Classic metrics\n\n";
    std::vector<std::string> head{"Model"};
    for (const auto& c : cols) head.push_back(column_title(c));
    md << md_row(head) << md_rule(head.size());

    std::map<std::string, double> best;
    for (const auto& c : cols)
      for (const auto& r : reports)
        if (const auto b = badness(r, c); b && (!best.count(c) || *b < best[c])) best[c] = *b;

    // A reference row for the real set's own within-set MS-SSIM.
    for (const auto& r : reports)
      if (const auto real = lookup(r.classic, "ms_ssim_real_mean")) {
        std::vector<std::string> row{"Real"};
        for (const auto& c : cols) row.push_back(c == "ms_ssim_mean" ? format_fixed(*real, 3) : "");
        md << md_row(row);
        break;
      }
    for (const auto& r : reports) {
      std::vector<std::string> row{r.model_name()};
      for (const auto& c : cols) {
        const auto v = lookup(r.classic, c);
        if (!v) {
          row.push_back("n/a");
          continue;
        }
        std::string cell = format_fixed(*v, 3);
        if (c == "ms_ssim_mean")
          if (const auto sd = lookup(r.classic, "ms_ssim_stddev")) cell += " (" + format_fixed(*sd, 3) + ")";
        const auto b = badness(r, c);
        row.push_back(bold_if(cell, b && best.count(c) && *b == best[c]));
      }
      md << md_row(row);
    }
    md << "\nBest value per column in bold: lowest FID/MMD, MS-SSIM closest to the real set. "
          "MS-SSIM is the mean over sampled within-set pairs (standard deviation in parentheses).\n\n";
  }

  md << "## Segmentation QC gate\n\n";
  md << md_row({"Model", "MRIs", "Failed", "Pass rate", "Threshold", "Verdict"}) << md_rule(6);
  for (const auto& r : reports) {
    const auto& g = r.gate();
    md << md_row({r.model_name(), std::to_string(g.total), std::to_string(g.failed_mris), format_percent(g.pass_rate),
                  format_fixed(g.threshold, 3), std::string(to_string(g.verdict))});
  }
  md << "\nAn MRI fails when any QC score is below the threshold; a model needs a pass rate of at least "
     << (reports.empty() ? std::string("95.00%") : format_percent(reports.front().gate().min_pass_rate))
     << " to be assessed.\n\n";

  std::vector<const EvaluationReport*> assessed;
  for (const auto& r : reports)
    if (r.effect_sizes()) assessed.push_back(&r);
  if (!assessed.empty()) {
    const double thr = assessed.front()->effect_sizes()->flag_threshold;
    md << "## Anatomical plausibility (Cohen's d, synthetic vs real)\n\n";
    std::vector<std::string> head{"Region"};
    for (const auto* r : assessed) head.push_back(r->model_name());
    md << md_row(head) << md_rule(head.size());
    std::set<std::string> regions;
    for (const auto* r : assessed)
      for (const auto& row : r->effect_sizes()->rows) regions.insert(row.region);
    for (const auto& region : regions) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto* r : assessed)
        if (const auto* row = r->effect_sizes()->find(region)) best = std::min(best, std::abs(row->d));
      std::vector<std::string> line{region};
      for (const auto* r : assessed) {
        const auto* row = r->effect_sizes()->find(region);
        if (!row) {
          line.push_back("n/a");
          continue;
        }
        std::string cell = format_d(row->d) + (row->flagged ? "*" : "");
        line.push_back(bold_if(cell, std::abs(row->d) == best));
      }
      md << md_row(line);
    }
    md << "\nSmallest |d| per region in bold; * marks |d| > " << format_fixed(thr, 2) << ".\n\n";
  }
  std::vector<std::string> skipped;
  for (const auto& r : reports)
    if (!r.effect_sizes()) skipped.push_back(r.model_name());
  if (!skipped.empty()) {
    md << "Too unreliable for anatomical assessment:";
    for (std::size_t i = 0; i < skipped.size(); ++i) md << (i ? ", " : " ") << skipped[i];
    md << ".\n\n";
  }

  for (const auto& r : reports) {
    if (r.qc_distribution.empty()) continue;
    md << "## QC score distribution: " << r.model_name() << "\n\n";
    md << md_row({"Region", "Min", "Q1", "Median", "Q3", "Max", "Below threshold"}) << md_rule(7);
    for (const auto& [region, s] : r.qc_distribution)
      md << md_row({region, format_fixed(s.min, 3), format_fixed(s.q1, 3), format_fixed(s.median, 3),
                    format_fixed(s.q3, 3), format_fixed(s.max, 3), format_percent(s.fraction_below)});
    md << "\n";
  }

  for (const auto& r : reports) {
    if (r.warnings.empty() && r.skipped_files == 0) continue;
    md << "## Notes: " << r.model_name() << "\n\n";
    md << "- skipped synthetic files: " << r.skipped_files << "\n";
    for (const auto& w : r.warnings) md << "- " << w << "\n";
    md << "\n";
  }
  std::string out = md.str();
  while (out.size() >= 2 && out.ends_with("\n\n")) out.pop_back();
  return out;
}

std::vector<EmittedFile> render_csv(std::span<const EvaluationReport> reports) {
  std::vector<EmittedFile> files;

  std::set<std::string> keys;
  for (const auto& r : reports)
    for (const auto& [k, _] : r.classic) keys.insert(k);
  if (!keys.empty()) {
    CsvTable t;
    t.header = {"model"};
    t.header.insert(t.header.end(), keys.begin(), keys.end());
    for (const auto& r : reports) {
      std::vector<std::string> row{r.model_name()};
      for (const auto& k : keys) {
        const auto v = lookup(r.classic, k);
        row.push_back(v ? format_real(*v) : "");
      }
      t.rows.push_back(std::move(row));
    }
    files.push_back({"classic_metrics.csv", write_csv(t)});
  }

  {
    CsvTable t;
    t.header = {"model", "total", "failed_mris", "failed_roi_events", "pass_rate", "threshold", "min_pass_rate", "verdict"};
    for (const auto& r : reports) {
      const auto& g = r.gate();
      t.rows.push_back({r.model_name(), std::to_string(g.total), std::to_string(g.failed_mris),
                        std::to_string(g.failed_roi_events), format_real(g.pass_rate), format_real(g.threshold),
                        format_real(g.min_pass_rate), std::string(to_string(g.verdict))});
    }
    files.push_back({"gate.csv", write_csv(t)});
  }

  {
    CsvTable t;
    t.header = {"model", "region", "failed"};
    for (const auto& r : reports)
      for (const auto& [region, n] : r.gate().per_region_fail_counts)
        t.rows.push_back({r.model_name(), region, std::to_string(n)});
    files.push_back({"gate_regions.csv", write_csv(t)});
  }

  // Same shape as an ingestible `region,<model>...` d matrix.
  std::vector<const EvaluationReport*> assessed;
  for (const auto& r : reports)
    if (r.effect_sizes()) assessed.push_back(&r);
  if (!assessed.empty()) {
    CsvTable t;
    t.header = {"region"};
    std::set<std::string> regions;
    for (const auto* r : assessed) {
      t.header.push_back(r->model_name());
      for (const auto& row : r->effect_sizes()->rows) regions.insert(row.region);
    }
    for (const auto& region : regions) {
      std::vector<std::string> row{region};
      for (const auto* r : assessed) {
        const auto* e = r->effect_sizes()->find(region);
        row.push_back(e ? format_real(e->d) : "");
      }
      t.rows.push_back(std::move(row));
    }
    files.push_back({"effect_sizes.csv", write_csv(t)});
  }

  {
    CsvTable t;
    t.header = {"model", "region", "min", "q1", "median", "q3", "max", "fraction_below"};
    for (const auto& r : reports)
      for (const auto& [region, s] : r.qc_distribution)
        t.rows.push_back({r.model_name(), region, format_real(s.min), format_real(s.q1), format_real(s.median),
                          format_real(s.q3), format_real(s.max), format_real(s.fraction_below)});
    files.push_back({"qc_distribution.csv", write_csv(t)});
  }
  return files;
}

}  // namespace

std::vector<EmittedFile> emit(std::span<const EvaluationReport> reports, ReportFormat format) {
  if (reports.empty()) throw Error("no reports to emit");
  std::set<std::string> names;
  for (const auto& r : reports)
    if (!names.insert(safe_file_stem(r.model_name())).second)
      throw Error("duplicate model name '" + r.model_name() + "' in report set");
  switch (format) {
    case ReportFormat::Json: {
      std::vector<EmittedFile> files;
      for (const auto& r : reports) files.push_back({safe_file_stem(r.model_name()) + ".json", to_json(r)});
      return files;
    }
    case ReportFormat::Csv:
      return render_csv(reports);
    case ReportFormat::Markdown:
      return {{"report.md", render_markdown(reports)}};
  }
  throw Error("unknown report format");
}

}  // namespace mrieval
