#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mrieval/anatomy.hpp"
#include "mrieval/config.hpp"
#include "mrieval/embedding.hpp"
#include "mrieval/qc_gate.hpp"
#include "mrieval/report.hpp"

namespace mrieval {

// Input directory layout (real and synthetic sets alike):
//   images/*.nii[.gz]            intensity volumes, file stem = subject id
//   labels/*.nii[.gz]            label maps, or instead
//   region_volumes.csv           subject_id,icv_mm3,<merge_key>...
//   qc.csv                       subject_id,<qc region>...
//   embeddings/<TAG>.csv|.vemb   one embedding set per encoder tag

/// Sorted *.nii / *.nii.gz files directly inside `dir` (empty if missing).
std::vector<std::filesystem::path> list_nifti(const std::filesystem::path& dir);

RegionTable load_region_table(const EvalConfig& c);

struct LoadedImages {
  std::vector<std::string> ids;
  std::vector<Volume> volumes;
  std::vector<std::string> manifest;  // every file seen, relative to the set root
  std::vector<std::string> skipped;   // ids of rejected files
  std::vector<std::string> warnings;
};

/// Reads `<dir>/images`. With `strict`, any unreadable or nonconforming file
/// throws Error (real reference set); otherwise it is skipped with a warning.
LoadedImages load_images(const std::filesystem::path& dir, const EvalConfig& c, bool strict);

std::vector<QcRecord> load_qc(const std::filesystem::path& dir, const std::vector<std::string>& regions);

/// `<dir>/region_volumes.csv` when present, else every label map in
/// `<dir>/labels` (shape/spacing checked as for images).
std::vector<RegionVolumes> load_region_volumes(const std::filesystem::path& dir, const EvalConfig& c,
                                               const RegionTable& table, bool strict,
                                               std::vector<std::string>& warnings);

/// Tag -> embedding set from `<dir>/embeddings`.
std::map<std::string, EmbeddingSet> load_embedding_dir(const std::filesystem::path& dir);

/// fid@TAG, mmd@TAG for every shared tag, image_mmd, and within-set
/// MS-SSIM statistics. Settings and seeds are recorded in `prov`.
std::map<std::string, double> classic_metrics(const LoadedImages& real, const LoadedImages& synth,
                                              const std::map<std::string, EmbeddingSet>& real_emb,
                                              const std::map<std::string, EmbeddingSet>& synth_emb,
                                              const EvalConfig& c, Provenance& prov,
                                              std::vector<std::string>& warnings);

inline constexpr std::uint64_t kToyEncoderSeed = 0x70e5eedULL;
inline constexpr double kPhantomFailingQcScore = 0.40;

/// Writes a phantom family in the input layout above (images, labels, qc.csv,
/// embeddings/TOY.csv) plus ground_truth.csv and regions.tsv, driven by
/// c.phantom, c.seed and c.qc_regions. QC scores are drawn from [0.70, 0.99];
/// the first `qc_fail` subjects get one score of 0.40. The toy encoder uses a
/// fixed seed so every family is embedded by the same projection.
std::vector<std::string> write_phantom_set(const std::filesystem::path& dir, const EvalConfig& c);

/// Geometry validation, classic metrics, QC threshold, gate, and (only for
/// an assessable model) anatomical plausibility, in that order.
EvaluationReport run_protocol(const EvalConfig& c);

}  // namespace mrieval
