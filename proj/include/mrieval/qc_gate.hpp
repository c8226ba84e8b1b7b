#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mrieval/csv.hpp"

namespace mrieval {

/// Region names of the segmenter's eight QC outputs. Configuration, not a
/// fixed part of the gate rule.
const std::vector<std::string>& default_qc_regions();

struct QcRecord {
  std::string subject_id;
  std::map<std::string, double> scores;
};

struct GateConfig {
  double threshold = 0.65;
  double target_real_fail_fraction = 0.05;
  double min_model_pass_rate = 0.95;
  std::vector<std::string> region_names = default_qc_regions();

  void validate() const;
};

/// Throws Error unless the record holds exactly `regions`, each in [0, 1].
void validate_record(const QcRecord& r, const std::vector<std::string>& regions);

struct MriGate {
  bool pass = true;
  std::vector<std::string> failing_regions;  // scores strictly below threshold
};

MriGate gate_mri(const QcRecord& r, const GateConfig& cfg);

struct Calibration {
  double threshold = 0.0;
  std::size_t failed = 0;
  std::size_t total = 0;
  double realized_fail_fraction = 0.0;
  double grid_step = 0.0;
};

/// Largest grid value t in {step, 2 step, ...}, t < 1, whose real-set fail
/// fraction stays <= target_fail. Throws Error when even the first grid value
/// fails too many records.
Calibration calibrate_threshold(std::span<const QcRecord> real, double target_fail, double grid_step = 0.01,
                                const std::vector<std::string>& regions = default_qc_regions());

/// k-th grid value; k/(1/step) when 1/step is integral so that 0.65 is the
/// same double a parser produces for "0.65".
double grid_value(std::size_t k, double grid_step);

std::size_t count_failed_mris(std::span<const QcRecord> records, double threshold);

enum class Verdict { Assessable, TooUnreliable };
std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view s);

struct ModelGateResult {
  std::size_t total = 0;
  std::size_t failed_mris = 0;
  std::size_t failed_roi_events = 0;
  double pass_rate = 0.0;
  Verdict verdict = Verdict::Assessable;
  std::map<std::string, std::size_t> per_region_fail_counts;
  double threshold = 0.0;
  double min_pass_rate = 0.0;
};

ModelGateResult gate_model(std::span<const QcRecord> records, const GateConfig& cfg);

struct RegionQcSummary {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double fraction_below = 0.0;
};

/// Linear-interpolation order statistics per region.
std::map<std::string, RegionQcSummary> qc_distribution(std::span<const QcRecord> records, double threshold,
                                                       const std::vector<std::string>& regions = default_qc_regions());

double quantile_linear(std::vector<double> values, double p);

/// Header `subject_id,<region>...`; region columns may come in any order but
/// must match `regions` exactly.
std::vector<QcRecord> qc_records_from_csv(const CsvTable& t,
                                          const std::vector<std::string>& regions = default_qc_regions());
std::string qc_records_to_csv(std::span<const QcRecord> records,
                              const std::vector<std::string>& regions = default_qc_regions());

}  // namespace mrieval
