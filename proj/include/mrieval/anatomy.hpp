#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mrieval/csv.hpp"
#include "mrieval/volume.hpp"

namespace mrieval {

/// Voxel counts per merge key (every table key, icv-only ones included), plus
/// codes missing from the table. Sum of `by_key` + `unknown` == `nonzero`.
struct RegionCounts {
  std::map<std::string, std::size_t> by_key;
  std::map<std::int32_t, std::size_t> unknown_codes;
  std::size_t unknown = 0;
  std::size_t nonzero = 0;
  std::size_t icv = 0;
};

RegionCounts count_regions(const LabelMap& m);

struct RegionVolumes {
  std::string subject_id;
  std::map<std::string, double> volumes_mm3;  // reported ROIs only
  double icv_mm3 = 0.0;
  std::vector<std::string> warnings;
};

/// Throws Error when the map has no table or no labeled voxels. Unknown codes
/// count toward ICV and are listed in `warnings`.
RegionVolumes region_volumes(const LabelMap& m, std::string subject_id);

/// `subject_id,icv_mm3,<merge_key>...`
std::string region_volumes_to_csv(std::span<const RegionVolumes> rows);
std::vector<RegionVolumes> region_volumes_from_csv(const CsvTable& t);

struct LinearCoef {
  double intercept = 0.0;
  double slope = 0.0;
};

struct IcvFit {
  std::map<std::string, LinearCoef> coefs;
  std::string fitted_on;
  std::size_t n = 0;
};

/// Per-region OLS volume = intercept + slope * ICV. Needs >= 3 subjects with
/// identical key sets and non-constant ICV.
IcvFit fit_icv(std::span<const RegionVolumes> reference, std::string fitted_on = "real");

struct ResidualizedVolumes {
  std::string subject_id;
  std::map<std::string, double> residuals;
  std::string fit_tag;
};

ResidualizedVolumes residualize(const RegionVolumes& v, const IcvFit& fit);
std::vector<ResidualizedVolumes> residualize(std::span<const RegionVolumes> vs, const IcvFit& fit);

/// (mean(x) - mean(y)) / pooled SD with n-1 sample variances. Zero pooled SD
/// returns 0 for equal means and +-infinity ("infinite effect") otherwise.
double cohens_d(std::span<const double> x, std::span<const double> y);

inline constexpr double kDefaultFlagThreshold = 0.8;

struct EffectSizeRow {
  std::string region;
  double d = 0.0;
  std::size_t n_real = 0;
  std::size_t n_synth = 0;
  bool flagged = false;
};

struct EffectSizeTable {
  std::vector<EffectSizeRow> rows;  // sorted by region
  double flag_threshold = kDefaultFlagThreshold;

  const EffectSizeRow* find(const std::string& region) const;
  std::size_t flagged_count() const;
};

/// Per-region cohens_d(synthetic, real) over the shared region keys.
EffectSizeTable plausibility_table(std::span<const ResidualizedVolumes> real,
                                   std::span<const ResidualizedVolumes> synth,
                                   double flag_threshold = kDefaultFlagThreshold);

/// Rebuilds the flags of a table for a different threshold.
EffectSizeTable reflag(EffectSizeTable t, double flag_threshold);

struct BestRegionCount {
  std::size_t strict = 0;  // regions where this model alone has the smallest |d|
  std::size_t tied = 0;    // strict wins plus regions where it shares the minimum
};

/// Ranks models region by region on |d| over the regions every table has.
std::map<std::string, BestRegionCount> best_region_counts(const std::map<std::string, EffectSizeTable>& by_model);

/// Reads a `region,<model>,...` matrix of signed d values into one table per
/// model (sample counts left at 0).
std::map<std::string, EffectSizeTable> effect_tables_from_csv(const CsvTable& t,
                                                              double flag_threshold = kDefaultFlagThreshold);

}  // namespace mrieval
