#include "mrieval/anatomy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "mrieval/detail/numeric.hpp"
#include "mrieval/error.hpp"

namespace mrieval {
namespace {

double mean_of(std::span<const double> xs) { return detail::compensated_sum(xs) / static_cast<double>(xs.size()); }

/// Sum of squared deviations from `mean`.
double centered_ss(std::span<const double> xs, double mean) {
  detail::CompensatedSum s;
  for (double x : xs) s.add((x - mean) * (x - mean));
  return s.value();
}

}  // namespace

RegionCounts count_regions(const LabelMap& m) {
  const RegionTable& table = m.table();
  RegionCounts c;
  for (const auto& e : table.entries()) c.by_key.emplace(e.merge_key, 0);

  // Codes are sparse; tally them once, then map through the table.
  std::map<std::int32_t, std::size_t> per_code;
  for (const auto code : m.data())
    if (code != 0) ++per_code[code];

  for (const auto& [code, count] : per_code) {
    c.nonzero += count;
    const RegionEntry* e = table.find(code);
    if (!e) {
      c.unknown_codes[code] = count;
      c.unknown += count;
      c.icv += count;
      continue;
    }
    c.by_key[e->merge_key] += count;
    if (e->role != IcvRole::ExcludeIcv) c.icv += count;
  }
  return c;
}

RegionVolumes region_volumes(const LabelMap& m, std::string subject_id) {
  if (m.table().empty()) throw Error("label map for '" + subject_id + "' has no region table attached");
  const RegionCounts c = count_regions(m);
  if (c.nonzero == 0) throw Error("label map for '" + subject_id + "' has no labeled voxels");

  const double voxel = m.voxel_volume_mm3();
  RegionVolumes rv;
  rv.subject_id = std::move(subject_id);
  for (const auto& key : m.table().roi_keys()) rv.volumes_mm3[key] = static_cast<double>(c.by_key.at(key)) * voxel;
  rv.icv_mm3 = static_cast<double>(c.icv) * voxel;
  for (const auto& [code, count] : c.unknown_codes)
    rv.warnings.push_back(rv.subject_id + ": code " + std::to_string(code) + " not in region table (" +
                          std::to_string(count) + " voxels counted toward ICV only)");
  return rv;
}

std::string region_volumes_to_csv(std::span<const RegionVolumes> rows) {
  CsvTable t;
  t.header = {"subject_id", "icv_mm3"};
  if (!rows.empty())
    for (const auto& [key, _] : rows.front().volumes_mm3) t.header.push_back(key);
  for (const auto& r : rows) {
    std::vector<std::string> row{r.subject_id, format_real(r.icv_mm3)};
    for (std::size_t i = 2; i < t.header.size(); ++i) {
      const auto it = r.volumes_mm3.find(t.header[i]);
      if (it == r.volumes_mm3.end()) throw Error("subject '" + r.subject_id + "' lacks region " + t.header[i]);
      row.push_back(format_real(it->second));
    }
    t.rows.push_back(std::move(row));
  }
  return write_csv(t);
}

std::vector<RegionVolumes> region_volumes_from_csv(const CsvTable& t) {
  if (t.header.size() < 3 || t.header[0] != "subject_id" || t.header[1] != "icv_mm3")
    throw Error("region volume CSV header must be subject_id,icv_mm3,<regions...>");
  std::vector<RegionVolumes> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size())
      throw Error("region volume CSV row " + std::to_string(r + 2) + " has " + std::to_string(row.size()) +
                  " fields, expected " + std::to_string(t.header.size()));
    RegionVolumes rv;
    rv.subject_id = row[0];
    rv.icv_mm3 = parse_real(row[1], "icv_mm3");
    for (std::size_t c = 2; c < row.size(); ++c) {
      const double v = parse_real(row[c], t.header[c]);
      if (!(v >= 0.0)) throw Error("negative volume for " + rv.subject_id + "/" + t.header[c]);
      rv.volumes_mm3[t.header[c]] = v;
    }
    if (!(rv.icv_mm3 > 0.0)) throw Error("non-positive ICV for " + rv.subject_id);
    out.push_back(std::move(rv));
  }
  return out;
}

IcvFit fit_icv(std::span<const RegionVolumes> reference, std::string fitted_on) {
  if (reference.size() < 3)
    throw Error("ICV regression needs at least 3 subjects, got " + std::to_string(reference.size()));
  const auto& keys = reference.front().volumes_mm3;
  for (const auto& r : reference) {
    if (r.volumes_mm3.size() != keys.size() ||
        !std::equal(keys.begin(), keys.end(), r.volumes_mm3.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; }))
      throw Error("subject '" + r.subject_id + "' has a different region set than '" +
                  reference.front().subject_id + "'");
  }

  std::vector<double> icv;
  for (const auto& r : reference) icv.push_back(r.icv_mm3);
  const double icv_mean = mean_of(icv);
  std::vector<double> centered(icv.size());
  for (std::size_t i = 0; i < icv.size(); ++i) centered[i] = icv[i] - icv_mean;
  const double var = centered_ss(icv, icv_mean);
  if (!(var > 0.0)) throw Error("ICV regression is degenerate: all reference ICVs are identical");

  IcvFit fit;
  fit.fitted_on = std::move(fitted_on);
  fit.n = reference.size();
  std::vector<double> vol(reference.size());
  for (const auto& [key, _] : keys) {
    for (std::size_t i = 0; i < reference.size(); ++i) vol[i] = reference[i].volumes_mm3.at(key);
    const double vol_mean = mean_of(vol);
    detail::CompensatedSum cov;
    for (std::size_t i = 0; i < vol.size(); ++i) cov.add(centered[i] * (vol[i] - vol_mean));
    const double slope = cov.value() / var;
    fit.coefs[key] = {vol_mean - slope * icv_mean, slope};
  }
  return fit;
}

ResidualizedVolumes residualize(const RegionVolumes& v, const IcvFit& fit) {
  ResidualizedVolumes out{v.subject_id, {}, fit.fitted_on};
  for (const auto& [key, volume] : v.volumes_mm3) {
    const auto it = fit.coefs.find(key);
    if (it == fit.coefs.end()) throw Error("region '" + key + "' missing from the ICV fit");
    out.residuals[key] = volume - (it->second.intercept + it->second.slope * v.icv_mm3);
  }
  return out;
}

std::vector<ResidualizedVolumes> residualize(std::span<const RegionVolumes> vs, const IcvFit& fit) {
  std::vector<ResidualizedVolumes> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(residualize(v, fit));
  return out;
}

double cohens_d(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2)
    throw Error("Cohen's d needs at least 2 values per sample, got " + std::to_string(x.size()) + " and " +
                std::to_string(y.size()));
  const double mx = mean_of(x), my = mean_of(y);
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  const double pooled = std::sqrt((centered_ss(x, mx) + centered_ss(y, my)) / (nx + ny - 2.0));
  const double diff = mx - my;
  if (pooled == 0.0) {
    if (diff == 0.0) return 0.0;
    return diff > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return diff / pooled;
}

const EffectSizeRow* EffectSizeTable::find(const std::string& region) const {
  const auto it = std::lower_bound(rows.begin(), rows.end(), region,
                                   [](const EffectSizeRow& r, const std::string& key) { return r.region < key; });
  return it != rows.end() && it->region == region ? &*it : nullptr;
}

std::size_t EffectSizeTable::flagged_count() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.flagged; }));
}

EffectSizeTable plausibility_table(std::span<const ResidualizedVolumes> real,
                                   std::span<const ResidualizedVolumes> synth, double flag_threshold) {
  if (real.empty() || synth.empty()) throw Error("plausibility table needs non-empty real and synthetic sets");
  if (!(flag_threshold >= 0.0)) throw Error("flag threshold must be non-negative");

  auto key_set = [](std::span<const ResidualizedVolumes> set) {
    std::set<std::string> keys;
    for (const auto& [k, _] : set.front().residuals) keys.insert(k);
    for (const auto& s : set)
      for (auto it = keys.begin(); it != keys.end();)
        it = s.residuals.count(*it) ? std::next(it) : keys.erase(it);
    return keys;
  };
  const auto real_keys = key_set(real);
  const auto synth_keys = key_set(synth);
  std::vector<std::string> shared;
  std::set_intersection(real_keys.begin(), real_keys.end(), synth_keys.begin(), synth_keys.end(),
                        std::back_inserter(shared));
  if (shared.empty()) throw Error("real and synthetic sets share no region keys");

  EffectSizeTable t;
  t.flag_threshold = flag_threshold;
  std::vector<double> xr, xs;
  for (const auto& key : shared) {
    xr.clear();
    xs.clear();
    for (const auto& r : real) xr.push_back(r.residuals.at(key));
    for (const auto& s : synth) xs.push_back(s.residuals.at(key));
    const double d = cohens_d(xs, xr);
    t.rows.push_back({key, d, xr.size(), xs.size(), std::abs(d) > flag_threshold});
  }
  return t;
}

EffectSizeTable reflag(EffectSizeTable t, double flag_threshold) {
  t.flag_threshold = flag_threshold;
  for (auto& r : t.rows) r.flagged = std::abs(r.d) > flag_threshold;
  return t;
}

std::map<std::string, BestRegionCount> best_region_counts(const std::map<std::string, EffectSizeTable>& by_model) {
  std::map<std::string, BestRegionCount> out;
  if (by_model.empty()) return out;
  for (const auto& [model, _] : by_model) out[model];

  for (const auto& row : by_model.begin()->second.rows) {
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& [model, table] : by_model) {
      const auto* r = table.find(row.region);
      if (!r) break;
      scores.emplace_back(model, std::abs(r->d));
    }
    if (scores.size() != by_model.size()) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [_, s] : scores) best = std::min(best, s);
    const auto winners = std::count_if(scores.begin(), scores.end(), [&](const auto& p) { return p.second == best; });
    for (const auto& [model, s] : scores) {
      if (s != best) continue;
      ++out[model].tied;
      if (winners == 1) ++out[model].strict;
    }
  }
  return out;
}

std::map<std::string, EffectSizeTable> effect_tables_from_csv(const CsvTable& t, double flag_threshold) {
  if (t.header.size() < 2 || t.header[0] != "region") throw Error("effect size CSV header must be region,<models...>");
  std::map<std::string, EffectSizeTable> out;
  for (std::size_t c = 1; c < t.header.size(); ++c) out[t.header[c]].flag_threshold = flag_threshold;
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw Error("effect size CSV row for '" + row[0] + "' has the wrong width");
    for (std::size_t c = 1; c < row.size(); ++c) {
      const double d = parse_real(row[c], "Cohen's d");
      out[t.header[c]].rows.push_back({row[0], d, 0, 0, std::abs(d) > flag_threshold});
    }
  }
  for (auto& [_, table] : out)
    std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) { return a.region < b.region; });
  return out;
}

}  // namespace mrieval
