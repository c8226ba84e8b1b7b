#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mrieval {

enum class RegionGroup { Subcortical, Cortical };

std::string_view to_string(RegionGroup g);

/// How a code participates in volume accounting.
///  - Roi:        counted into its merged ROI and into ICV.
///  - ExcludeIcv: counted into its merged ROI but left out of ICV (e.g. CSF).
///  - IcvOnly:    known tissue that is not a reported ROI (insula, ventral DC).
enum class IcvRole { Roi, ExcludeIcv, IcvOnly };

struct RegionEntry {
  std::int32_t code = 0;
  std::string name;
  RegionGroup group = RegionGroup::Subcortical;
  std::string merge_key;
  IcvRole role = IcvRole::Roi;
};

/// Maps label codes to named regions. Left/right hemisphere codes share a
/// merge_key so they aggregate into one ROI.
class RegionTable {
 public:
  RegionTable() = default;
  /// Throws Error on duplicate codes, empty merge keys, code 0, or a merge key
  /// assigned to two groups.
  explicit RegionTable(std::vector<RegionEntry> entries);

  const std::vector<RegionEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  const RegionEntry* find(std::int32_t code) const;

  /// Sorted merge keys of reported ROIs (entries with role IcvOnly excluded).
  std::vector<std::string> roi_keys() const;
  std::vector<std::string> roi_keys(RegionGroup g) const;
  std::optional<RegionGroup> group_of(const std::string& merge_key) const;

  /// Parses `code<TAB>name<TAB>group<TAB>merge_key[<TAB>role]` lines; `#`
  /// starts a comment. role is one of roi (default), exclude-icv, icv-only.
  static RegionTable parse(std::string_view text);
  static RegionTable load(const std::string& path);
  std::string serialize() const;

 private:
  std::vector<RegionEntry> entries_;
  std::map<std::int32_t, std::size_t> by_code_;
};

/// SynthSeg-style parcellation codes (FreeSurfer LUT numbering). After merging
/// hemispheres it yields 16 subcortical and 33 cortical ROIs.
const RegionTable& default_region_table();
std::string_view default_region_table_text();

}  // namespace mrieval
