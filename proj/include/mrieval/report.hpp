#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrieval/anatomy.hpp"
#include "mrieval/qc_gate.hpp"

namespace mrieval {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

struct Provenance {
  std::string toolkit_version{kToolkitVersion};
  std::string config_hash;                                    // FNV-1a 64, hex
  std::map<std::string, std::uint64_t> seeds;                 // every seed a stage consumed
  std::map<std::string, std::vector<std::string>> manifests;  // input set -> sorted file names
  std::map<std::string, std::string> settings;                // resolved choices (kernels, fit set, ...)
};

/// How the QC threshold was obtained. `real_*` describe the threshold applied
/// to the real reference set.
struct QcThreshold {
  double value = 0.0;
  std::string source;  // "calibrated" or "fixed"
  double target_real_fail_fraction = 0.0;
  double grid_step = 0.0;
  std::size_t real_failed = 0;
  std::size_t real_total = 0;
};

/// Outcome of one model's evaluation. A plausibility table exists only for
/// an assessable gate verdict; the two factories are the only way to set the
/// gate, so the invalid combination cannot be constructed.
class EvaluationReport {
 public:
  static EvaluationReport unreliable(std::string model_name, ModelGateResult gate);
  static EvaluationReport assessed(std::string model_name, ModelGateResult gate, EffectSizeTable effect_sizes);
  /// Picks the factory matching gate.verdict; `effect_sizes` must be present
  /// exactly when the verdict is assessable.
  static EvaluationReport from_parts(std::string model_name, ModelGateResult gate,
                                     std::optional<EffectSizeTable> effect_sizes);

  const std::string& model_name() const { return model_name_; }
  const ModelGateResult& gate() const { return gate_; }
  const std::optional<EffectSizeTable>& effect_sizes() const { return effect_sizes_; }

  /// fid@TAG, mmd@TAG, image_mmd, ms_ssim_mean, ms_ssim_stddev,
  /// ms_ssim_real_mean, ms_ssim_gap_to_real.
  std::map<std::string, double> classic;
  std::optional<QcThreshold> qc_threshold;
  std::map<std::string, RegionQcSummary> qc_distribution;
  std::size_t skipped_files = 0;
  std::vector<std::string> warnings;
  Provenance provenance;

 private:
  EvaluationReport(std::string model_name, ModelGateResult gate, std::optional<EffectSizeTable> effect_sizes);

  std::string model_name_;
  ModelGateResult gate_;
  std::optional<EffectSizeTable> effect_sizes_;
};

/// Canonical JSON: sorted keys, two-space indent, shortest round-trip reals,
/// infinities as the strings "inf" / "-inf".
std::string to_json(const EvaluationReport& r);
/// Throws Error for malformed documents or a verdict/table mismatch.
EvaluationReport report_from_json(std::string_view text);

enum class ReportFormat { Json, Csv, Markdown };
ReportFormat parse_report_format(std::string_view s);

struct EmittedFile {
  std::string name;
  std::string content;
};

/// json: one <model>.json per report. csv: one file per table, models as
/// rows or columns. markdown: a single report.md with the metric, gate and
/// plausibility tables, best entries in bold.
std::vector<EmittedFile> emit(std::span<const EvaluationReport> reports, ReportFormat format);

/// File-name-safe form of a model name.
std::string safe_file_stem(std::string_view name);

/// "95.25%" for a fraction of 0.9525.
std::string format_percent(double fraction);

/// 64-bit FNV-1a as 16 lower-case hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace mrieval
