#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrieval/volume.hpp"

namespace mrieval {

struct EllipsoidRegion {
  std::string merge_key;
  std::array<double, 3> center_mm{};
  std::array<double, 3> semi_axes_mm{};
  std::int32_t code = 0;
  double intensity = 0.0;  // mean intensity in [-1, 1]
  RegionGroup group = RegionGroup::Subcortical;
};

/// World coordinates of voxel (i, j, k) are (i*sx, j*sy, k*sz).
struct PhantomSpec {
  Shape3 shape{64, 64, 64};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<EllipsoidRegion> regions;
  /// Optional enclosing tissue ellipsoid. Voxels inside it but outside every
  /// region get its code; it counts toward ICV but is not a reported ROI, so
  /// resizing one region leaves ICV unchanged. Regions must lie inside it.
  std::optional<EllipsoidRegion> head;
  double background = -1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  /// Throws Error for out-of-bounds or overlapping ellipsoids, regions
  /// reaching outside the head, duplicate codes or keys, and
  /// non-finite/negative noise.
  void validate() const;
};

struct Phantom {
  Volume volume;
  LabelMap labels;
  std::map<std::string, double> ground_truth_mm3;  // (4/3) pi a b c per region
  double ground_truth_icv_mm3 = 0.0;               // head volume, else sum of regions
  std::vector<EllipsoidRegion> regions;            // analytic layout, updated by regional-scale
};

RegionTable phantom_region_table(const PhantomSpec& spec);

/// Voxels take the label of the first ellipsoid containing their center;
/// intensity is the region mean plus seeded Gaussian noise, clamped to [-1, 1].
Phantom generate_phantom(const PhantomSpec& spec);

/// Six disjoint ellipsoids inside a spherical head in a 64^3 1 mm grid,
/// smallest semi-axis 4 mm.
PhantomSpec default_phantom_spec();

enum class Perturbation { Blur, BackgroundArtifact, RegionalScale };
Perturbation parse_perturbation(std::string_view s);

/// blur: Gaussian smoothing, sigma = magnitude voxels, edge-clamped.
/// background-artifact: +|N(0, magnitude)| speckle on label-0 voxels only.
/// regional-scale: dilation of region `region_code` about its centre by
///   (1 + magnitude). Voxels inside the dilated ellipsoid join the region
///   (other ROIs excepted) and take nearest-neighbour intensities remapped
///   from c + (p - c) / (1 + magnitude).
/// Magnitude 0 returns the input unchanged.
Phantom perturb_phantom(const Phantom& p, Perturbation kind, double magnitude, std::uint64_t seed,
                        std::int32_t region_code = 0);

/// Seeded, edge-clamped separable Gaussian smoothing (same-size output).
Volume gaussian_blur(const Volume& v, double sigma);

/// A set of subjects sharing one layout. Each subject scales every region's
/// semi-axes by region_scale[key] * (1 + region_jitter * u) and all
/// coordinates (head included) by (1 + global_jitter * u'), u, u' in [-1, 1].
/// With `stratified`, u values are Latin-hypercube draws, so families of
/// equal size built with different seeds share the same marginal spread.
struct FamilySpec {
  std::size_t count = 10;
  double region_jitter = 0.05;
  double global_jitter = 0.05;
  std::map<std::string, double> region_scale;
  bool stratified = true;
  std::uint64_t seed = 0;
};

std::vector<PhantomSpec> family_specs(const PhantomSpec& base, const FamilySpec& family);
std::vector<Phantom> generate_family(const PhantomSpec& base, const FamilySpec& family, unsigned threads = 1);

/// `subject_id,icv_mm3,<merge_key>...` analytic volumes in mm^3, the same
/// layout as a region-volume CSV.
std::string ground_truth_csv(const std::vector<std::string>& subject_ids, const std::vector<Phantom>& phantoms);

}  // namespace mrieval
