#include "mrieval/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "mrieval/csv.hpp"
#include "mrieval/detail/parallel.hpp"
#include "mrieval/error.hpp"

namespace mrieval {
namespace {

/// Deterministic across standard libraries, unlike std::*_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::size_t below(std::size_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do r = engine_();
    while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool inside(const EllipsoidRegion& e, double x, double y, double z) {
  const double dx = (x - e.center_mm[0]) / e.semi_axes_mm[0];
  const double dy = (y - e.center_mm[1]) / e.semi_axes_mm[1];
  const double dz = (z - e.center_mm[2]) / e.semi_axes_mm[2];
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

bool boxes_overlap(const EllipsoidRegion& a, const EllipsoidRegion& b) {
  for (std::size_t k = 0; k < 3; ++k)
    if (a.center_mm[k] + a.semi_axes_mm[k] < b.center_mm[k] - b.semi_axes_mm[k] ||
        b.center_mm[k] + b.semi_axes_mm[k] < a.center_mm[k] - a.semi_axes_mm[k])
      return false;
  return true;
}

/// Lattice test over a's bounding box; exact enough to keep labeled voxels of
/// different regions from competing.
bool ellipsoids_overlap(const EllipsoidRegion& a, const EllipsoidRegion& b) {
  if (!boxes_overlap(a, b)) return false;
  constexpr int kSteps = 40;
  for (int i = 0; i <= kSteps; ++i)
    for (int j = 0; j <= kSteps; ++j)
      for (int k = 0; k <= kSteps; ++k) {
        const double x = a.center_mm[0] + a.semi_axes_mm[0] * (2.0 * i / kSteps - 1.0);
        const double y = a.center_mm[1] + a.semi_axes_mm[1] * (2.0 * j / kSteps - 1.0);
        const double z = a.center_mm[2] + a.semi_axes_mm[2] * (2.0 * k / kSteps - 1.0);
        if (inside(a, x, y, z) && inside(b, x, y, z)) return true;
      }
  return false;
}

// Surface sampling of `inner`; both shapes are convex, so a surface inside
// `outer` means the whole ellipsoid is.
bool contained_in(const EllipsoidRegion& inner, const EllipsoidRegion& outer) {
  constexpr int kSteps = 48;
  for (int i = 0; i <= kSteps; ++i) {
    const double theta = std::numbers::pi * i / kSteps;
    for (int j = 0; j < 2 * kSteps; ++j) {
      const double phi = std::numbers::pi * j / kSteps;
      const double x = inner.center_mm[0] + inner.semi_axes_mm[0] * std::sin(theta) * std::cos(phi);
      const double y = inner.center_mm[1] + inner.semi_axes_mm[1] * std::sin(theta) * std::sin(phi);
      const double z = inner.center_mm[2] + inner.semi_axes_mm[2] * std::cos(theta);
      if (!inside(outer, x, y, z)) return false;
    }
  }
  return true;
}

double ellipsoid_volume(const EllipsoidRegion& e) {
  return 4.0 / 3.0 * std::numbers::pi * e.semi_axes_mm[0] * e.semi_axes_mm[1] * e.semi_axes_mm[2];
}

std::vector<double> gaussian_taps(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    w[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    total += w[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace

void PhantomSpec::validate() const {
  if (shape.voxels() == 0) throw Error("phantom shape must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("phantom noise_sigma must be finite and >= 0");
  std::set<std::int32_t> codes;
  std::set<std::string> keys;
  for (const auto& r : regions) {
    if (r.code <= 0) throw Error("phantom region '" + r.merge_key + "' needs a positive code");
    if (!codes.insert(r.code).second) throw Error("duplicate phantom code " + std::to_string(r.code));
    if (r.merge_key.empty() || !keys.insert(r.merge_key).second)
      throw Error("phantom merge keys must be unique and non-empty ('" + r.merge_key + "')");
    for (std::size_t k = 0; k < 3; ++k) {
      const double extent = static_cast<double>(shape[k] - 1) * spacing[k];
      if (!(r.semi_axes_mm[k] > 0.0)) throw Error("phantom region '" + r.merge_key + "' has a non-positive semi-axis");
      if (r.center_mm[k] - r.semi_axes_mm[k] < 0.0 || r.center_mm[k] + r.semi_axes_mm[k] > extent)
        throw Error("phantom region '" + r.merge_key + "' extends outside the volume on axis " + std::to_string(k));
    }
  }
  if (head) {
    const auto& h = *head;
    if (h.code <= 0 || codes.count(h.code)) throw Error("phantom head needs a positive code not used by a region");
    if (h.merge_key.empty() || keys.count(h.merge_key)) throw Error("phantom head needs its own merge key");
    for (std::size_t k = 0; k < 3; ++k) {
      const double extent = static_cast<double>(shape[k] - 1) * spacing[k];
      if (!(h.semi_axes_mm[k] > 0.0) || h.center_mm[k] - h.semi_axes_mm[k] < 0.0 ||
          h.center_mm[k] + h.semi_axes_mm[k] > extent)
        throw Error("phantom head extends outside the volume on axis " + std::to_string(k));
    }
    for (const auto& r : regions)
      if (!contained_in(r, h)) throw Error("phantom region '" + r.merge_key + "' reaches outside the head");
  }
  for (std::size_t i = 0; i < regions.size(); ++i)
    for (std::size_t j = i + 1; j < regions.size(); ++j)
      if (ellipsoids_overlap(regions[i], regions[j]))
        throw Error("phantom regions '" + regions[i].merge_key + "' and '" + regions[j].merge_key + "' overlap");
}

RegionTable phantom_region_table(const PhantomSpec& spec) {
  std::vector<RegionEntry> entries;
  for (const auto& r : spec.regions) entries.push_back({r.code, r.merge_key, r.group, r.merge_key, IcvRole::Roi});
  if (spec.head)
    entries.push_back({spec.head->code, spec.head->merge_key, spec.head->group, spec.head->merge_key, IcvRole::IcvOnly});
  return RegionTable(std::move(entries));
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Shape3& s = spec.shape;
  std::vector<std::int32_t> labels(s.voxels(), 0);
  std::vector<float> intensity(s.voxels());
  Rng rng(spec.seed);

  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x) {
        const double wx = static_cast<double>(x) * spec.spacing[0];
        const double wy = static_cast<double>(y) * spec.spacing[1];
        const double wz = static_cast<double>(z) * spec.spacing[2];
        double mean = spec.background;
        std::int32_t code = 0;
        for (const auto& r : spec.regions)
          if (inside(r, wx, wy, wz)) {
            code = r.code;
            mean = r.intensity;
            break;
          }
        if (code == 0 && spec.head && inside(*spec.head, wx, wy, wz)) {
          code = spec.head->code;
          mean = spec.head->intensity;
        }
        const std::size_t i = x + s.nx * (y + s.ny * z);
        labels[i] = code;
        const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
        intensity[i] = static_cast<float>(std::clamp(mean + noise, -1.0, 1.0));
      }

  Phantom p;
  p.volume = Volume(s, spec.spacing, std::move(intensity));
  p.labels = LabelMap(VoxelGrid<std::int32_t>(s, spec.spacing, std::move(labels)), phantom_region_table(spec));
  double total = 0.0;
  p.regions = spec.regions;
  for (const auto& r : spec.regions) total += p.ground_truth_mm3[r.merge_key] = ellipsoid_volume(r);
  p.ground_truth_icv_mm3 = spec.head ? ellipsoid_volume(*spec.head) : total;
  return p;
}

// Centres sit off the voxel lattice: a symmetric ellipsoid centred on a voxel
// with integer semi-axes has lattice-count errors of up to 4% at these sizes.
PhantomSpec default_phantom_spec() {
  PhantomSpec spec;
  spec.regions = {
      {"roi_a", {20.25, 20.5, 20.75}, {8, 6, 4}, 1, 0.2, RegionGroup::Subcortical},
      {"roi_b", {44.25, 20.5, 20.75}, {8, 6, 5}, 2, 0.4, RegionGroup::Subcortical},
      {"roi_c", {20.25, 44.5, 20.75}, {6, 8, 5}, 3, -0.2, RegionGroup::Subcortical},
      {"roi_d", {44.25, 44.5, 20.75}, {7, 7, 4}, 4, 0.6, RegionGroup::Subcortical},
      {"roi_e", {24.25, 32.5, 44.75}, {10, 6, 6}, 5, 0.0, RegionGroup::Cortical},
      {"roi_f", {46.25, 32.5, 44.75}, {6, 5, 4}, 6, 0.8, RegionGroup::Cortical},
  };
  spec.head = EllipsoidRegion{"tissue", {31.5, 31.5, 31.5}, {29, 29, 29}, 7, -0.5, RegionGroup::Subcortical};
  return spec;
}

Perturbation parse_perturbation(std::string_view s) {
  if (s == "blur") return Perturbation::Blur;
  if (s == "background-artifact") return Perturbation::BackgroundArtifact;
  if (s == "regional-scale") return Perturbation::RegionalScale;
  throw Error("unknown perturbation '" + std::string(s) + "'");
}

Volume gaussian_blur(const Volume& v, double sigma) {
  if (!(sigma >= 0.0)) throw Error("blur sigma must be non-negative");
  if (sigma == 0.0) return v;
  const auto taps = gaussian_taps(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const Shape3& s = v.shape();
  std::vector<double> cur(v.data().begin(), v.data().end());
  std::vector<double> next(cur.size());
  const std::array<std::size_t, 3> stride{1, s.nx, s.nx * s.ny};
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const auto len = static_cast<std::ptrdiff_t>(s[axis]);
    for (std::size_t z = 0; z < s.nz; ++z)
      for (std::size_t y = 0; y < s.ny; ++y)
        for (std::size_t x = 0; x < s.nx; ++x) {
          const std::array<std::size_t, 3> pos{x, y, z};
          const std::size_t base = x + s.nx * (y + s.ny * z) - pos[axis] * stride[axis];
          double acc = 0.0;
          for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
            const auto q = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(pos[axis]) + k, 0, len - 1);
            acc += taps[static_cast<std::size_t>(k + radius)] * cur[base + static_cast<std::size_t>(q) * stride[axis]];
          }
          next[x + s.nx * (y + s.ny * z)] = acc;
        }
    std::swap(cur, next);
  }
  std::vector<float> out(cur.size());
  std::transform(cur.begin(), cur.end(), out.begin(), [](double d) { return static_cast<float>(d); });
  return v.with_data(std::move(out));
}

Phantom perturb_phantom(const Phantom& p, Perturbation kind, double magnitude, std::uint64_t seed,
                        std::int32_t region_code) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) throw Error("perturbation magnitude must be >= 0");
  if (magnitude == 0.0) return p;
  Phantom out = p;
  switch (kind) {
    case Perturbation::Blur:
      out.volume = gaussian_blur(p.volume, magnitude);
      break;
    case Perturbation::BackgroundArtifact: {
      if (p.labels.shape() != p.volume.shape()) throw Error("background mask shape differs from the volume");
      Rng rng(seed);
      std::vector<float> data(p.volume.data().begin(), p.volume.data().end());
      for (std::size_t i = 0; i < data.size(); ++i)
        if (p.labels.data()[i] == 0)
          data[i] = static_cast<float>(std::clamp(data[i] + std::abs(magnitude * rng.normal()), -1.0, 1.0));
      out.volume = p.volume.with_data(std::move(data));
      break;
    }
    case Perturbation::RegionalScale: {
      // Membership comes from the analytic ellipsoid dilated about its
      // centre; new voxels take intensities by nearest-neighbour remap from
      // c + (p - c) / factor. Other ROIs are never overwritten.
      const auto it = std::find_if(p.regions.begin(), p.regions.end(),
                                   [&](const EllipsoidRegion& r) { return r.code == region_code; });
      if (it == p.regions.end())
        throw Error("regional-scale: code " + std::to_string(region_code) + " is not a region of this phantom");
      const double factor = 1.0 + magnitude;
      EllipsoidRegion grown = *it;
      for (auto& a : grown.semi_axes_mm) a *= factor;
      std::set<std::int32_t> protected_codes;
      for (const auto& r : p.regions)
        if (r.code != region_code) protected_codes.insert(r.code);

      const Shape3& s = p.labels.shape();
      const Spacing& sp = p.labels.spacing();
      const auto labels = p.labels.data();
      std::vector<std::int32_t> new_labels(labels.begin(), labels.end());
      std::vector<float> new_data(p.volume.data().begin(), p.volume.data().end());
      for (std::size_t z = 0; z < s.nz; ++z)
        for (std::size_t y = 0; y < s.ny; ++y)
          for (std::size_t x = 0; x < s.nx; ++x) {
            const std::size_t to = p.labels.index(x, y, z);
            const std::array<double, 3> w{static_cast<double>(x) * sp[0], static_cast<double>(y) * sp[1],
                                          static_cast<double>(z) * sp[2]};
            if (labels[to] == region_code || protected_codes.count(labels[to]) || !inside(grown, w[0], w[1], w[2]))
              continue;
            std::array<std::size_t, 3> src{};
            for (std::size_t k = 0; k < 3; ++k) {
              const double q = (it->center_mm[k] + (w[k] - it->center_mm[k]) / factor) / sp[k];
              src[k] = static_cast<std::size_t>(std::clamp(std::round(q), 0.0, static_cast<double>(s[k] - 1)));
            }
            new_labels[to] = region_code;
            new_data[to] = p.volume.data()[p.labels.index(src[0], src[1], src[2])];
          }
      out.regions[static_cast<std::size_t>(it - p.regions.begin())] = grown;
      out.labels = LabelMap(p.labels.with_data(std::move(new_labels)), p.labels.table());
      out.volume = p.volume.with_data(std::move(new_data));
      // Dilation overwrites head tissue, so ICV only moves without a head.
      const bool has_head = std::any_of(p.labels.table().entries().begin(), p.labels.table().entries().end(),
                                        [](const RegionEntry& e) { return e.role == IcvRole::IcvOnly; });
      for (const auto& e : p.labels.table().entries())
        if (e.code == region_code && out.ground_truth_mm3.count(e.merge_key)) {
          const double before = out.ground_truth_mm3[e.merge_key];
          out.ground_truth_mm3[e.merge_key] = before * factor * factor * factor;
          if (!has_head) out.ground_truth_icv_mm3 += out.ground_truth_mm3[e.merge_key] - before;
        }
      break;
    }
  }
  return out;
}

std::vector<PhantomSpec> family_specs(const PhantomSpec& base, const FamilySpec& family) {
  if (family.count == 0) throw Error("phantom family needs at least one subject");
  if (!(family.region_jitter >= 0.0 && family.region_jitter < 1.0) ||
      !(family.global_jitter >= 0.0 && family.global_jitter < 1.0))
    throw Error("phantom jitter must lie in [0, 1)");
  for (const auto& [key, scale] : family.region_scale) {
    if (!(scale > 0.0)) throw Error("region scale for '" + key + "' must be positive");
    if (std::none_of(base.regions.begin(), base.regions.end(), [&](const auto& r) { return r.merge_key == key; }))
      throw Error("region scale names unknown region '" + key + "'");
  }

  const std::size_t dims = base.regions.size() + 1;  // one per region + global size
  Rng rng(mix(family.seed, 0x5eed));
  // u[d][i] in [-1, 1] for dimension d and subject i.
  std::vector<std::vector<double>> u(dims, std::vector<double>(family.count));
  for (std::size_t d = 0; d < dims; ++d) {
    if (family.stratified) {
      std::vector<std::size_t> perm(family.count);
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      for (std::size_t i = 0; i < family.count; ++i)
        u[d][i] = 2.0 * ((static_cast<double>(perm[i]) + 0.5) / static_cast<double>(family.count)) - 1.0;
    } else {
      for (std::size_t i = 0; i < family.count; ++i) u[d][i] = 2.0 * rng.uniform() - 1.0;
    }
  }

  std::vector<PhantomSpec> specs;
  for (std::size_t i = 0; i < family.count; ++i) {
    PhantomSpec s = base;
    s.seed = mix(base.seed, mix(family.seed, i));
    const double global = 1.0 + family.global_jitter * u[dims - 1][i];
    for (std::size_t r = 0; r < s.regions.size(); ++r) {
      auto& reg = s.regions[r];
      const auto it = family.region_scale.find(reg.merge_key);
      const double scale = (it == family.region_scale.end() ? 1.0 : it->second) *
                           (1.0 + family.region_jitter * u[r][i]) * global;
      for (std::size_t k = 0; k < 3; ++k) {
        const double mid = static_cast<double>(s.shape[k] - 1) * s.spacing[k] / 2.0;
        reg.center_mm[k] = mid + (reg.center_mm[k] - mid) * global;
        reg.semi_axes_mm[k] *= scale;
      }
    }
    if (s.head)
      for (std::size_t k = 0; k < 3; ++k) {
        const double mid = static_cast<double>(s.shape[k] - 1) * s.spacing[k] / 2.0;
        s.head->center_mm[k] = mid + (s.head->center_mm[k] - mid) * global;
        s.head->semi_axes_mm[k] *= global;
      }
    specs.push_back(std::move(s));
  }
  return specs;
}

std::vector<Phantom> generate_family(const PhantomSpec& base, const FamilySpec& family, unsigned threads) {
  const auto specs = family_specs(base, family);
  std::vector<Phantom> out(specs.size());
  detail::parallel_for(specs.size(), threads, [&](std::size_t i) { out[i] = generate_phantom(specs[i]); });
  return out;
}

std::string ground_truth_csv(const std::vector<std::string>& subject_ids, const std::vector<Phantom>& phantoms) {
  if (subject_ids.size() != phantoms.size()) throw Error("ground truth ids do not match phantoms");
  CsvTable t;
  t.header = {"subject_id", "icv_mm3"};
  if (!phantoms.empty())
    for (const auto& [key, _] : phantoms.front().ground_truth_mm3) t.header.push_back(key);
  for (std::size_t i = 0; i < phantoms.size(); ++i) {
    std::vector<std::string> row{subject_ids[i], format_real(phantoms[i].ground_truth_icv_mm3)};
    for (std::size_t c = 2; c < t.header.size(); ++c) row.push_back(format_real(phantoms[i].ground_truth_mm3.at(t.header[c])));
    t.rows.push_back(std::move(row));
  }
  return write_csv(t);
}

}  // namespace mrieval
