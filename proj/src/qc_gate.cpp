#include "mrieval/qc_gate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mrieval/error.hpp"

namespace mrieval {
namespace {

constexpr double kEps = 1e-12;

bool fails(const QcRecord& r, double threshold) {
  return std::any_of(r.scores.begin(), r.scores.end(), [&](const auto& kv) { return kv.second < threshold; });
}

}  // namespace

const std::vector<std::string>& default_qc_regions() {
  static const std::vector<std::string> names{
      "general_white_matter", "general_grey_matter", "general_csf", "cerebellum",
      "brainstem",            "thalamus",            "putamen_pallidum", "hippocampus_amygdala",
  };
  return names;
}

void GateConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("QC threshold must lie in (0, 1)");
  if (!(target_real_fail_fraction > 0.0 && target_real_fail_fraction < 1.0))
    throw Error("target real fail fraction must lie in (0, 1)");
  if (!(min_model_pass_rate > 0.0 && min_model_pass_rate <= 1.0)) throw Error("min model pass rate must lie in (0, 1]");
  if (region_names.empty()) throw Error("QC region list is empty");
  if (std::set<std::string>(region_names.begin(), region_names.end()).size() != region_names.size())
    throw Error("QC region names must be unique");
}

void validate_record(const QcRecord& r, const std::vector<std::string>& regions) {
  for (const auto& name : regions)
    if (!r.scores.count(name)) throw Error("QC record '" + r.subject_id + "' is missing region '" + name + "'");
  if (r.scores.size() != regions.size())
    throw Error("QC record '" + r.subject_id + "' has " + std::to_string(r.scores.size()) + " regions, expected " +
                std::to_string(regions.size()));
  for (const auto& [name, s] : r.scores)
    if (!(s >= 0.0 && s <= 1.0))
      throw Error("QC score for '" + r.subject_id + "'/" + name + " is outside [0,1]: " + format_real(s));
}

MriGate gate_mri(const QcRecord& r, const GateConfig& cfg) {
  validate_record(r, cfg.region_names);
  MriGate g;
  for (const auto& name : cfg.region_names)
    if (r.scores.at(name) < cfg.threshold) g.failing_regions.push_back(name);
  g.pass = g.failing_regions.empty();
  return g;
}

double grid_value(std::size_t k, double grid_step) {
  const double inv = std::round(1.0 / grid_step);
  if (std::abs(inv * grid_step - 1.0) < 1e-9) return static_cast<double>(k) / inv;
  return static_cast<double>(k) * grid_step;
}

std::size_t count_failed_mris(std::span<const QcRecord> records, double threshold) {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const QcRecord& r) { return fails(r, threshold); }));
}

Calibration calibrate_threshold(std::span<const QcRecord> real, double target_fail, double grid_step,
                                const std::vector<std::string>& regions) {
  if (real.empty()) throw Error("QC calibration needs at least one real record");
  if (!(target_fail > 0.0 && target_fail < 1.0)) throw Error("target fail fraction must lie in (0, 1)");
  if (!(grid_step > 0.0 && grid_step < 1.0)) throw Error("grid step must lie in (0, 1)");
  for (const auto& r : real) validate_record(r, regions);

  const double n = static_cast<double>(real.size());
  auto acceptable = [&](std::size_t failed) { return static_cast<double>(failed) / n <= target_fail + kEps; };

  Calibration best;
  best.total = real.size();
  best.grid_step = grid_step;
  bool found = false;
  // Fail counts are monotone in t, so the scan stops at the first violation.
  for (std::size_t k = 1;; ++k) {
    const double t = grid_value(k, grid_step);
    if (!(t < 1.0)) break;
    const std::size_t failed = count_failed_mris(real, t);
    if (!acceptable(failed)) break;
    best.threshold = t;
    best.failed = failed;
    found = true;
  }
  if (!found)
    throw Error("QC calibration failed: more than " + format_real(100.0 * target_fail) +
                "% of real records fail even at threshold " + format_real(grid_value(1, grid_step)));
  best.realized_fail_fraction = static_cast<double>(best.failed) / n;
  return best;
}

std::string_view to_string(Verdict v) { return v == Verdict::Assessable ? "assessable" : "too-unreliable"; }

Verdict parse_verdict(std::string_view s) {
  if (s == "assessable") return Verdict::Assessable;
  if (s == "too-unreliable") return Verdict::TooUnreliable;
  throw Error("unknown verdict '" + std::string(s) + "'");
}

ModelGateResult gate_model(std::span<const QcRecord> records, const GateConfig& cfg) {
  cfg.validate();
  if (records.empty()) throw Error("cannot gate an empty record set");
  ModelGateResult res;
  res.total = records.size();
  res.threshold = cfg.threshold;
  res.min_pass_rate = cfg.min_model_pass_rate;
  for (const auto& name : cfg.region_names) res.per_region_fail_counts[name] = 0;
  for (const auto& r : records) {
    const MriGate g = gate_mri(r, cfg);
    if (!g.pass) ++res.failed_mris;
    res.failed_roi_events += g.failing_regions.size();
    for (const auto& name : g.failing_regions) ++res.per_region_fail_counts[name];
  }
  res.pass_rate = static_cast<double>(res.total - res.failed_mris) / static_cast<double>(res.total);
  res.verdict = res.pass_rate >= cfg.min_model_pass_rate - kEps ? Verdict::Assessable : Verdict::TooUnreliable;
  return res;
}

double quantile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw Error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

std::map<std::string, RegionQcSummary> qc_distribution(std::span<const QcRecord> records, double threshold,
                                                       const std::vector<std::string>& regions) {
  if (records.empty()) throw Error("QC distribution of an empty record set");
  std::map<std::string, RegionQcSummary> out;
  for (const auto& name : regions) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) {
      const auto it = r.scores.find(name);
      if (it == r.scores.end()) throw Error("QC record '" + r.subject_id + "' is missing region '" + name + "'");
      v.push_back(it->second);
    }
    RegionQcSummary s;
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    s.q1 = quantile_linear(v, 0.25);
    s.median = quantile_linear(v, 0.5);
    s.q3 = quantile_linear(v, 0.75);
    s.fraction_below = static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x < threshold; })) /
                       static_cast<double>(v.size());
    out[name] = s;
  }
  return out;
}

std::vector<QcRecord> qc_records_from_csv(const CsvTable& t, const std::vector<std::string>& regions) {
  if (t.header.empty() || t.header[0] != "subject_id") throw Error("QC CSV header must start with subject_id");
  const std::set<std::string> expected(regions.begin(), regions.end());
  const std::set<std::string> got(t.header.begin() + 1, t.header.end());
  if (got != expected || got.size() + 1 != t.header.size())
    throw Error("QC CSV region columns do not match the configured " + std::to_string(regions.size()) + " regions");

  std::vector<QcRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size())
      throw Error("QC CSV row " + std::to_string(r + 2) + " has " + std::to_string(row.size()) + " fields, expected " +
                  std::to_string(t.header.size()));
    QcRecord rec{row[0], {}};
    for (std::size_t c = 1; c < row.size(); ++c) rec.scores[t.header[c]] = parse_real(row[c], "QC score");
    validate_record(rec, regions);
    out.push_back(std::move(rec));
  }
  return out;
}

std::string qc_records_to_csv(std::span<const QcRecord> records, const std::vector<std::string>& regions) {
  CsvTable t;
  t.header.push_back("subject_id");
  t.header.insert(t.header.end(), regions.begin(), regions.end());
  for (const auto& r : records) {
    std::vector<std::string> row{r.subject_id};
    for (const auto& name : regions) row.push_back(format_real(r.scores.at(name)));
    t.rows.push_back(std::move(row));
  }
  return write_csv(t);
}

}  // namespace mrieval
