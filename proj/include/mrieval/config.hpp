#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrieval/ms_ssim.hpp"
#include "mrieval/qc_gate.hpp"
#include "mrieval/volume.hpp"

namespace mrieval {

/// Settings of the `phantom` subcommand.
struct PhantomConfig {
  std::size_t count = 10;
  double region_jitter = 0.05;
  double global_jitter = 0.05;
  bool stratified = true;
  double noise_sigma = 0.0;
  std::map<std::string, double> region_scale;
  std::size_t qc_fail = 0;       // subjects given one failing QC score
  std::size_t embedding_dim = 16;  // toy embedding width, 0 disables
};

/// One-file description of an evaluation run. INI sections:
///   [evaluation] model_name, seed, threads
///   [inputs]     real, synth, region_table
///   [geometry]   shape, spacing, intensity_tolerance
///   [metrics]    embedding_tags, feature_kernel, image_kernel, image_mmd,
///                ms_ssim, ms_ssim_pairs, ms_ssim_scales, ms_ssim_window,
///                ms_ssim_sigma, ms_ssim_weights
///   [qc]         threshold (omit to calibrate), target_real_fail_fraction,
///                grid_step, min_model_pass_rate, regions
///   [anatomy]    icv_fit (real | pooled), flag_threshold
///   [phantom]    count, region_jitter, global_jitter, stratified,
///                noise_sigma, scale (key=factor,...), qc_fail, embedding_dim
/// Lists are comma-separated. Relative paths resolve against the config file.
struct EvalConfig {
  std::string model_name = "synthetic";
  std::uint64_t seed = 0;
  unsigned threads = 1;

  std::filesystem::path real_dir;
  std::filesystem::path synth_dir;
  std::filesystem::path region_table;  // empty: built-in table

  Shape3 shape = kStandardShape;
  Spacing spacing = kStandardSpacing;
  double intensity_tolerance = 0.01;

  std::vector<std::string> embedding_tags;  // empty: every tag both sets provide
  std::string feature_kernel = "gaussian:median";
  std::string image_kernel = "linear";
  bool image_mmd = true;
  bool ms_ssim = true;
  std::size_t ms_ssim_pairs = 100;
  MsSsimSpec ms_ssim_spec;

  std::optional<double> qc_threshold;
  double target_real_fail_fraction = 0.05;
  double grid_step = 0.01;
  double min_model_pass_rate = 0.95;
  std::vector<std::string> qc_regions = default_qc_regions();

  std::string icv_fit = "real";
  double flag_threshold = 0.8;

  PhantomConfig phantom;

  /// Throws Error for out-of-range values.
  void validate() const;
};

EvalConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
EvalConfig load_config(const std::filesystem::path& path);

/// Every result-affecting setting in a fixed order (threads excluded); the
/// report's config hash is taken over this text.
std::string canonical_config(const EvalConfig& c);

}  // namespace mrieval
