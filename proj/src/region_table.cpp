#include "mrieval/region_table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "mrieval/error.hpp"

namespace mrieval {
namespace {

constexpr std::string_view kDefaultTable =
    "# code\tname\tgroup\tmerge_key[\trole]\n"
    "2\tLeft-Cerebral-White-Matter\tsubcortical\tcerebral_wm\n"
    "41\tRight-Cerebral-White-Matter\tsubcortical\tcerebral_wm\n"
    "4\tLeft-Lateral-Ventricle\tsubcortical\tlateral_ventricle\n"
    "43\tRight-Lateral-Ventricle\tsubcortical\tlateral_ventricle\n"
    "5\tLeft-Inf-Lat-Vent\tsubcortical\tinferior_lateral_ventricle\n"
    "44\tRight-Inf-Lat-Vent\tsubcortical\tinferior_lateral_ventricle\n"
    "7\tLeft-Cerebellum-White-Matter\tsubcortical\tcerebellum_wm\n"
    "46\tRight-Cerebellum-White-Matter\tsubcortical\tcerebellum_wm\n"
    "8\tLeft-Cerebellum-Cortex\tsubcortical\tcerebellum_gm\n"
    "47\tRight-Cerebellum-Cortex\tsubcortical\tcerebellum_gm\n"
    "10\tLeft-Thalamus\tsubcortical\tthalamus\n"
    "49\tRight-Thalamus\tsubcortical\tthalamus\n"
    "11\tLeft-Caudate\tsubcortical\tcaudate\n"
    "50\tRight-Caudate\tsubcortical\tcaudate\n"
    "12\tLeft-Putamen\tsubcortical\tputamen\n"
    "51\tRight-Putamen\tsubcortical\tputamen\n"
    "13\tLeft-Pallidum\tsubcortical\tpallidum\n"
    "52\tRight-Pallidum\tsubcortical\tpallidum\n"
    "14\t3rd-Ventricle\tsubcortical\tthird_ventricle\n"
    "15\t4th-Ventricle\tsubcortical\tfourth_ventricle\n"
    "16\tBrain-Stem\tsubcortical\tbrainstem\n"
    "17\tLeft-Hippocampus\tsubcortical\thippocampus\n"
    "53\tRight-Hippocampus\tsubcortical\thippocampus\n"
    "18\tLeft-Amygdala\tsubcortical\tamygdala\n"
    "54\tRight-Amygdala\tsubcortical\tamygdala\n"
    "26\tLeft-Accumbens-area\tsubcortical\taccumbens\n"
    "58\tRight-Accumbens-area\tsubcortical\taccumbens\n"
    "24\tCSF\tsubcortical\tcsf\n"
    "28\tLeft-VentralDC\tsubcortical\tventral_dc\ticv-only\n"
    "60\tRight-VentralDC\tsubcortical\tventral_dc\ticv-only\n"
    "3\tLeft-Cerebral-Cortex\tcortical\tcerebral_cortex_unparcellated\ticv-only\n"
    "42\tRight-Cerebral-Cortex\tcortical\tcerebral_cortex_unparcellated\ticv-only\n"
    "1001\tctx-lh-bankssts\tcortical\tbankssts\n"
    "2001\tctx-rh-bankssts\tcortical\tbankssts\n"
    "1002\tctx-lh-caudalanteriorcingulate\tcortical\tcaudal_anterior_cingulate\n"
    "2002\tctx-rh-caudalanteriorcingulate\tcortical\tcaudal_anterior_cingulate\n"
    "1003\tctx-lh-caudalmiddlefrontal\tcortical\tcaudal_middle_frontal\n"
    "2003\tctx-rh-caudalmiddlefrontal\tcortical\tcaudal_middle_frontal\n"
    "1005\tctx-lh-cuneus\tcortical\tcuneus\n"
    "2005\tctx-rh-cuneus\tcortical\tcuneus\n"
    "1006\tctx-lh-entorhinal\tcortical\tentorhinal\n"
    "2006\tctx-rh-entorhinal\tcortical\tentorhinal\n"
    "1007\tctx-lh-fusiform\tcortical\tfusiform\n"
    "2007\tctx-rh-fusiform\tcortical\tfusiform\n"
    "1008\tctx-lh-inferiorparietal\tcortical\tinferior_parietal\n"
    "2008\tctx-rh-inferiorparietal\tcortical\tinferior_parietal\n"
    "1009\tctx-lh-inferiortemporal\tcortical\tinferior_temporal\n"
    "2009\tctx-rh-inferiortemporal\tcortical\tinferior_temporal\n"
    "1010\tctx-lh-isthmuscingulate\tcortical\tisthmus_cingulate\n"
    "2010\tctx-rh-isthmuscingulate\tcortical\tisthmus_cingulate\n"
    "1011\tctx-lh-lateraloccipital\tcortical\tlateral_occipital\n"
    "2011\tctx-rh-lateraloccipital\tcortical\tlateral_occipital\n"
    "1012\tctx-lh-lateralorbitofrontal\tcortical\tlateral_orbitofrontal\n"
    "2012\tctx-rh-lateralorbitofrontal\tcortical\tlateral_orbitofrontal\n"
    "1013\tctx-lh-lingual\tcortical\tlingual\n"
    "2013\tctx-rh-lingual\tcortical\tlingual\n"
    "1014\tctx-lh-medialorbitofrontal\tcortical\tmedial_orbitofrontal\n"
    "2014\tctx-rh-medialorbitofrontal\tcortical\tmedial_orbitofrontal\n"
    "1015\tctx-lh-middletemporal\tcortical\tmiddle_temporal\n"
    "2015\tctx-rh-middletemporal\tcortical\tmiddle_temporal\n"
    "1016\tctx-lh-parahippocampal\tcortical\tparahippocampal\n"
    "2016\tctx-rh-parahippocampal\tcortical\tparahippocampal\n"
    "1017\tctx-lh-paracentral\tcortical\tparacentral\n"
    "2017\tctx-rh-paracentral\tcortical\tparacentral\n"
    "1018\tctx-lh-parsopercularis\tcortical\tpars_opercularis\n"
    "2018\tctx-rh-parsopercularis\tcortical\tpars_opercularis\n"
    "1019\tctx-lh-parsorbitalis\tcortical\tpars_orbitalis\n"
    "2019\tctx-rh-parsorbitalis\tcortical\tpars_orbitalis\n"
    "1020\tctx-lh-parstriangularis\tcortical\tpars_triangularis\n"
    "2020\tctx-rh-parstriangularis\tcortical\tpars_triangularis\n"
    "1021\tctx-lh-pericalcarine\tcortical\tpericalcarine\n"
    "2021\tctx-rh-pericalcarine\tcortical\tpericalcarine\n"
    "1022\tctx-lh-postcentral\tcortical\tpostcentral\n"
    "2022\tctx-rh-postcentral\tcortical\tpostcentral\n"
    "1023\tctx-lh-posteriorcingulate\tcortical\tposterior_cingulate\n"
    "2023\tctx-rh-posteriorcingulate\tcortical\tposterior_cingulate\n"
    "1024\tctx-lh-precentral\tcortical\tprecentral\n"
    "2024\tctx-rh-precentral\tcortical\tprecentral\n"
    "1025\tctx-lh-precuneus\tcortical\tprecuneus\n"
    "2025\tctx-rh-precuneus\tcortical\tprecuneus\n"
    "1026\tctx-lh-rostralanteriorcingulate\tcortical\trostral_anterior_cingulate\n"
    "2026\tctx-rh-rostralanteriorcingulate\tcortical\trostral_anterior_cingulate\n"
    "1027\tctx-lh-rostralmiddlefrontal\tcortical\trostral_middle_frontal\n"
    "2027\tctx-rh-rostralmiddlefrontal\tcortical\trostral_middle_frontal\n"
    "1028\tctx-lh-superiorfrontal\tcortical\tsuperior_frontal\n"
    "2028\tctx-rh-superiorfrontal\tcortical\tsuperior_frontal\n"
    "1029\tctx-lh-superiorparietal\tcortical\tsuperior_parietal\n"
    "2029\tctx-rh-superiorparietal\tcortical\tsuperior_parietal\n"
    "1030\tctx-lh-superiortemporal\tcortical\tsuperior_temporal\n"
    "2030\tctx-rh-superiortemporal\tcortical\tsuperior_temporal\n"
    "1031\tctx-lh-supramarginal\tcortical\tsupramarginal\n"
    "2031\tctx-rh-supramarginal\tcortical\tsupramarginal\n"
    "1032\tctx-lh-frontalpole\tcortical\tfrontal_pole\n"
    "2032\tctx-rh-frontalpole\tcortical\tfrontal_pole\n"
    "1033\tctx-lh-temporalpole\tcortical\ttemporal_pole\n"
    "2033\tctx-rh-temporalpole\tcortical\ttemporal_pole\n"
    "1034\tctx-lh-transversetemporal\tcortical\ttransverse_temporal\n"
    "2034\tctx-rh-transversetemporal\tcortical\ttransverse_temporal\n"
    "1035\tctx-lh-insula\tcortical\tinsula\ticv-only\n"
    "2035\tctx-rh-insula\tcortical\tinsula\ticv-only\n";

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

RegionGroup parse_group(std::string_view s, std::size_t line_no) {
  if (s == "subcortical") return RegionGroup::Subcortical;
  if (s == "cortical") return RegionGroup::Cortical;
  throw Error("region table line " + std::to_string(line_no) + ": unknown group '" + std::string(s) + "'");
}

IcvRole parse_role(std::string_view s, std::size_t line_no) {
  if (s.empty() || s == "roi") return IcvRole::Roi;
  if (s == "exclude-icv") return IcvRole::ExcludeIcv;
  if (s == "icv-only") return IcvRole::IcvOnly;
  throw Error("region table line " + std::to_string(line_no) + ": unknown role '" + std::string(s) + "'");
}

std::string_view role_name(IcvRole r) {
  switch (r) {
    case IcvRole::Roi: return "roi";
    case IcvRole::ExcludeIcv: return "exclude-icv";
    case IcvRole::IcvOnly: return "icv-only";
  }
  return "roi";
}

}  // namespace

std::string_view to_string(RegionGroup g) {
  return g == RegionGroup::Subcortical ? "subcortical" : "cortical";
}

RegionTable::RegionTable(std::vector<RegionEntry> entries) : entries_(std::move(entries)) {
  std::map<std::string, RegionGroup> key_group;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.code <= 0) throw Error("region table: code must be positive, got " + std::to_string(e.code));
    if (e.merge_key.empty()) throw Error("region table: empty merge_key for code " + std::to_string(e.code));
    if (!by_code_.emplace(e.code, i).second)
      throw Error("region table: duplicate code " + std::to_string(e.code));
    auto [it, inserted] = key_group.emplace(e.merge_key, e.group);
    if (!inserted && it->second != e.group)
      throw Error("region table: merge_key '" + e.merge_key + "' assigned to two groups");
  }
}

const RegionEntry* RegionTable::find(std::int32_t code) const {
  const auto it = by_code_.find(code);
  return it == by_code_.end() ? nullptr : &entries_[it->second];
}

std::vector<std::string> RegionTable::roi_keys() const {
  std::set<std::string> keys;
  for (const auto& e : entries_)
    if (e.role != IcvRole::IcvOnly) keys.insert(e.merge_key);
  return {keys.begin(), keys.end()};
}

std::vector<std::string> RegionTable::roi_keys(RegionGroup g) const {
  std::set<std::string> keys;
  for (const auto& e : entries_)
    if (e.role != IcvRole::IcvOnly && e.group == g) keys.insert(e.merge_key);
  return {keys.begin(), keys.end()};
}

std::optional<RegionGroup> RegionTable::group_of(const std::string& merge_key) const {
  for (const auto& e : entries_)
    if (e.merge_key == merge_key) return e.group;
  return std::nullopt;
}

RegionTable RegionTable::parse(std::string_view text) {
  std::vector<RegionEntry> entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;

    const auto fields = split_tabs(line);
    if (fields.size() != 4 && fields.size() != 5)
      throw Error("region table line " + std::to_string(line_no) + ": expected 4 or 5 tab-separated fields");
    RegionEntry e;
    const auto code = fields[0];
    if (std::from_chars(code.data(), code.data() + code.size(), e.code).ec != std::errc{})
      throw Error("region table line " + std::to_string(line_no) + ": bad code '" + std::string(code) + "'");
    e.name = std::string(fields[1]);
    e.group = parse_group(fields[2], line_no);
    e.merge_key = std::string(fields[3]);
    e.role = parse_role(fields.size() == 5 ? fields[4] : std::string_view{}, line_no);
    entries.push_back(std::move(e));
  }
  return RegionTable(std::move(entries));
}

RegionTable RegionTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open region table '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RegionTable::serialize() const {
  std::string out = "# code\tname\tgroup\tmerge_key\trole\n";
  for (const auto& e : entries_) {
    out += std::to_string(e.code) + '\t' + e.name + '\t' + std::string(to_string(e.group)) + '\t' +
           e.merge_key + '\t' + std::string(role_name(e.role)) + '\n';
  }
  return out;
}

std::string_view default_region_table_text() { return kDefaultTable; }

const RegionTable& default_region_table() {
  static const RegionTable table = RegionTable::parse(kDefaultTable);
  return table;
}

}  // namespace mrieval
