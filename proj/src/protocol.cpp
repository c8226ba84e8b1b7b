#include "mrieval/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "mrieval/detail/parallel.hpp"
#include "mrieval/error.hpp"
#include "mrieval/gaussian.hpp"
#include "mrieval/mmd.hpp"
#include "mrieval/ms_ssim.hpp"
#include "mrieval/nifti.hpp"
#include "mrieval/phantom.hpp"
#include "mrieval/toy_embedder.hpp"

namespace fs = std::filesystem;

namespace mrieval {
namespace {

std::string describe_issues(const GeometryReport& g) {
  std::string s;
  for (const auto& i : g.issues) s += (s.empty() ? "" : "; ") + i.field + " expected " + i.expected + ", got " + i.observed;
  return s;
}

// Drops rows whose id is in `skip`; sets without ids are returned unchanged.
EmbeddingSet without_ids(const EmbeddingSet& e, const std::set<std::string>& skip) {
  if (skip.empty() || e.ids().empty()) return e;
  std::vector<Eigen::Index> keep;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < e.rows(); ++i)
    if (!skip.count(e.ids()[i])) {
      keep.push_back(static_cast<Eigen::Index>(i));
      ids.push_back(e.ids()[i]);
    }
  if (keep.size() == e.rows()) return e;
  if (keep.empty()) throw Error("embedding set '" + e.source_tag() + "' has no rows left after skipping files");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(keep.size()), e.vectors().cols());
  for (std::size_t r = 0; r < keep.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = e.vectors().row(keep[r]);
  return EmbeddingSet(std::move(m), e.source_tag(), std::move(ids));
}

std::string file_list_label(const fs::path& root, const fs::path& p) {
  return p.lexically_relative(root).generic_string();
}

}  // namespace

std::vector<fs::path> list_nifti(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && has_nifti_suffix(entry.path())) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

RegionTable load_region_table(const EvalConfig& c) {
  return c.region_table.empty() ? default_region_table() : RegionTable::load(c.region_table.string());
}

LoadedImages load_images(const fs::path& dir, const EvalConfig& c, bool strict) {
  const auto files = list_nifti(dir / "images");
  if (files.empty()) throw Error("no NIfTI volumes in " + (dir / "images").string());

  struct Slot {
    std::optional<Volume> volume;
    std::string problem;
  };
  std::vector<Slot> slots(files.size());
  detail::parallel_for(files.size(), c.threads, [&](std::size_t i) {
    try {
      Volume v = read_volume(files[i]);
      const auto g = validate_geometry(v, c.shape, c.spacing, c.intensity_tolerance);
      if (g.conforms())
        slots[i].volume = std::move(v);
      else
        slots[i].problem = describe_issues(g);
    } catch (const Error& e) {
      slots[i].problem = e.what();
    }
  });

  LoadedImages out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string id = nifti_stem(files[i]);
    if (!seen.insert(id).second) throw Error("duplicate subject id '" + id + "' in " + dir.string());
    out.manifest.push_back(file_list_label(dir, files[i]));
    if (slots[i].volume) {
      out.ids.push_back(id);
      out.volumes.push_back(std::move(*slots[i].volume));
      continue;
    }
    if (strict) throw Error("reference file " + files[i].string() + " rejected: " + slots[i].problem);
    out.skipped.push_back(id);
    out.warnings.push_back("skipped " + file_list_label(dir, files[i]) + ": " + slots[i].problem);
  }
  if (out.volumes.empty()) throw Error("every volume in " + dir.string() + " was rejected");
  return out;
}

std::vector<QcRecord> load_qc(const fs::path& dir, const std::vector<std::string>& regions) {
  const fs::path p = dir / "qc.csv";
  if (!fs::is_regular_file(p)) throw Error("missing QC scores " + p.string());
  return qc_records_from_csv(load_csv(p.string()), regions);
}

std::vector<RegionVolumes> load_region_volumes(const fs::path& dir, const EvalConfig& c, const RegionTable& table,
                                               bool strict, std::vector<std::string>& warnings) {
  const fs::path csv = dir / "region_volumes.csv";
  if (fs::is_regular_file(csv)) return region_volumes_from_csv(load_csv(csv.string()));

  const auto files = list_nifti(dir / "labels");
  if (files.empty()) throw Error("no label maps or region_volumes.csv in " + dir.string());
  std::vector<std::optional<RegionVolumes>> slots(files.size());
  std::vector<std::string> problems(files.size());
  detail::parallel_for(files.size(), c.threads, [&](std::size_t i) {
    try {
      const LabelMap m = read_label_map(files[i], table);
      const auto g = validate_geometry(m, c.shape, c.spacing, c.intensity_tolerance);
      if (!g.conforms()) {
        problems[i] = describe_issues(g);
        return;
      }
      slots[i] = region_volumes(m, nifti_stem(files[i]));
    } catch (const Error& e) {
      problems[i] = e.what();
    }
  });
  std::vector<RegionVolumes> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!slots[i]) {
      if (strict) throw Error("reference label map " + files[i].string() + " rejected: " + problems[i]);
      warnings.push_back("skipped " + file_list_label(dir, files[i]) + ": " + problems[i]);
      continue;
    }
    for (const auto& w : slots[i]->warnings) warnings.push_back(slots[i]->subject_id + ": " + w);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

std::map<std::string, EmbeddingSet> load_embedding_dir(const fs::path& dir) {
  std::map<std::string, EmbeddingSet> out;
  const fs::path root = dir / "embeddings";
  if (!fs::is_directory(root)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".csv" || ext == ".vemb")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string tag = f.stem().string();
    if (out.count(tag)) throw Error("embedding tag '" + tag + "' provided twice in " + root.string());
    out.emplace(tag, load_embeddings(f, tag));
  }
  return out;
}

std::map<std::string, double> classic_metrics(const LoadedImages& real, const LoadedImages& synth,
                                              const std::map<std::string, EmbeddingSet>& real_emb,
                                              const std::map<std::string, EmbeddingSet>& synth_emb,
                                              const EvalConfig& c, Provenance& prov,
                                              std::vector<std::string>& warnings) {
  std::map<std::string, double> out;

  std::vector<std::string> tags = c.embedding_tags;
  if (tags.empty()) {
    for (const auto& [tag, _] : synth_emb)
      if (real_emb.count(tag)) tags.push_back(tag);
      else warnings.push_back("embedding tag '" + tag + "' has no real counterpart");
    for (const auto& [tag, _] : real_emb)
      if (!synth_emb.count(tag)) warnings.push_back("embedding tag '" + tag + "' has no synthetic counterpart");
  }
  const KernelSpec feature_kernel = KernelSpec::parse(c.feature_kernel);
  const std::set<std::string> skipped(synth.skipped.begin(), synth.skipped.end());
  for (const auto& tag : tags) {
    const auto r = real_emb.find(tag);
    const auto s = synth_emb.find(tag);
    if (r == real_emb.end() || s == synth_emb.end()) throw Error("configured embedding tag '" + tag + "' is missing");
    const EmbeddingSet synth_set = without_ids(s->second, skipped);
    out["fid@" + tag] = frechet_distance(fit_gaussian(r->second), fit_gaussian(synth_set));
    out["mmd@" + tag] = mmd2_unbiased(r->second, synth_set, feature_kernel, c.threads);
  }
  prov.settings["feature_kernel"] = feature_kernel.describe();

  if (c.image_mmd) {
    const KernelSpec image_kernel = KernelSpec::parse(c.image_kernel);
    if (real.volumes.size() >= 2 && synth.volumes.size() >= 2) {
      out["image_mmd"] = image_space_mmd(real.volumes, synth.volumes, image_kernel, c.threads);
      prov.settings["image_kernel"] = image_kernel.describe();
    } else {
      warnings.push_back("image MMD needs at least two volumes per set");
    }
  }

  if (c.ms_ssim) {
    if (real.volumes.size() >= 2 && synth.volumes.size() >= 2) {
      auto pairs_for = [&](std::size_t n) { return std::min(c.ms_ssim_pairs, n * (n - 1) / 2); };
      const auto s = pairwise_ms_ssim(synth.volumes, pairs_for(synth.volumes.size()), c.seed, c.ms_ssim_spec, c.threads);
      const auto r = pairwise_ms_ssim(real.volumes, pairs_for(real.volumes.size()), c.seed, c.ms_ssim_spec, c.threads);
      out["ms_ssim_mean"] = s.mean;
      out["ms_ssim_stddev"] = s.stddev;
      out["ms_ssim_real_mean"] = r.mean;
      out["ms_ssim_gap_to_real"] = s.mean - r.mean;
      prov.seeds["ms_ssim_pairs"] = c.seed;
      prov.settings["ms_ssim_pairs_synth"] = std::to_string(s.pairs.size());
      prov.settings["ms_ssim_pairs_real"] = std::to_string(r.pairs.size());
      prov.settings["ms_ssim_window"] = std::to_string(c.ms_ssim_spec.window);
      prov.settings["ms_ssim_scales"] = std::to_string(c.ms_ssim_spec.scales);
    } else {
      warnings.push_back("MS-SSIM needs at least two volumes per set");
    }
  }
  return out;
}

EvaluationReport run_protocol(const EvalConfig& c) {
  c.validate();
  if (c.real_dir.empty() || c.synth_dir.empty()) throw Error("both real and synthetic directories are required");
  for (const auto* d : {&c.real_dir, &c.synth_dir})
    if (!fs::is_directory(*d)) throw Error("not a directory: " + d->string());

  Provenance prov;
  prov.config_hash = fnv1a_hex(canonical_config(c));
  prov.seeds["evaluation"] = c.seed;
  prov.settings["geometry"] = to_string(c.shape);
  prov.settings["icv_fit"] = c.icv_fit;
  std::vector<std::string> warnings;

  // 1. geometry: the reference set must be clean, synthetic rejects are skipped.
  const LoadedImages real = load_images(c.real_dir, c, true);
  const LoadedImages synth = load_images(c.synth_dir, c, false);
  warnings.insert(warnings.end(), synth.warnings.begin(), synth.warnings.end());
  prov.manifests["real"] = real.manifest;
  prov.manifests["synth"] = synth.manifest;
  const std::set<std::string> skipped(synth.skipped.begin(), synth.skipped.end());

  // 2. classic metrics
  const auto classic =
      classic_metrics(real, synth, load_embedding_dir(c.real_dir), load_embedding_dir(c.synth_dir), c, prov, warnings);

  // 3. QC threshold
  const auto real_qc = load_qc(c.real_dir, c.qc_regions);
  auto synth_qc = load_qc(c.synth_dir, c.qc_regions);
  std::erase_if(synth_qc, [&](const QcRecord& r) { return skipped.count(r.subject_id) > 0; });
  if (synth_qc.size() != synth.volumes.size())
    warnings.push_back("synthetic QC records (" + std::to_string(synth_qc.size()) + ") and volumes (" +
                       std::to_string(synth.volumes.size()) + ") differ in number");
  QcThreshold qt;
  qt.target_real_fail_fraction = c.target_real_fail_fraction;
  qt.grid_step = c.grid_step;
  qt.real_total = real_qc.size();
  if (c.qc_threshold) {
    qt.value = *c.qc_threshold;
    qt.source = "fixed";
    qt.real_failed = count_failed_mris(real_qc, qt.value);
  } else {
    const auto cal = calibrate_threshold(real_qc, c.target_real_fail_fraction, c.grid_step, c.qc_regions);
    qt.value = cal.threshold;
    qt.source = "calibrated";
    qt.real_failed = cal.failed;
  }

  // 4. gate
  const GateConfig gate_cfg{qt.value, c.target_real_fail_fraction, c.min_model_pass_rate, c.qc_regions};
  const ModelGateResult gate = gate_model(synth_qc, gate_cfg);

  // 5. anatomical plausibility, only for an assessable model
  auto report = [&] {
    if (gate.verdict == Verdict::TooUnreliable) return EvaluationReport::unreliable(c.model_name, gate);
    const RegionTable table = load_region_table(c);
    const auto real_vols = load_region_volumes(c.real_dir, c, table, true, warnings);
    auto synth_vols = load_region_volumes(c.synth_dir, c, table, false, warnings);
    std::erase_if(synth_vols, [&](const RegionVolumes& v) { return skipped.count(v.subject_id) > 0; });
    if (synth_vols.empty()) throw Error("no usable synthetic region volumes");
    IcvFit fit;
    if (c.icv_fit == "pooled") {
      std::vector<RegionVolumes> pooled = real_vols;
      pooled.insert(pooled.end(), synth_vols.begin(), synth_vols.end());
      fit = fit_icv(pooled, "pooled");
    } else {
      fit = fit_icv(real_vols, "real");
    }
    const auto table_d =
        plausibility_table(residualize(real_vols, fit), residualize(synth_vols, fit), c.flag_threshold);
    return EvaluationReport::assessed(c.model_name, gate, table_d);
  }();

  report.classic = classic;
  report.qc_threshold = qt;
  report.qc_distribution = qc_distribution(synth_qc, qt.value, c.qc_regions);
  report.skipped_files = synth.skipped.size();
  report.warnings = std::move(warnings);
  report.provenance = std::move(prov);
  return report;
}

std::vector<std::string> write_phantom_set(const fs::path& dir, const EvalConfig& c) {
  const PhantomConfig& pc = c.phantom;
  PhantomSpec base = default_phantom_spec();
  base.noise_sigma = pc.noise_sigma;
  base.seed = c.seed;
  FamilySpec family{pc.count, pc.region_jitter, pc.global_jitter, pc.region_scale, pc.stratified, c.seed};
  const auto phantoms = generate_family(base, family, c.threads);

  std::vector<std::string> ids;
  for (std::size_t i = 0; i < phantoms.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sub-%03zu", i + 1);
    ids.emplace_back(buf);
  }
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  detail::parallel_for(phantoms.size(), c.threads, [&](std::size_t i) {
    write_nifti_file(dir / "images" / (ids[i] + ".nii.gz"), phantoms[i].volume);
    write_nifti_file(dir / "labels" / (ids[i] + ".nii.gz"), phantoms[i].labels);
  });

  auto write_text = [](const fs::path& p, const std::string& text) {
    write_file(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  write_text(dir / "ground_truth.csv", ground_truth_csv(ids, phantoms));
  write_text(dir / "regions.tsv", phantom_region_table(base).serialize());

  // Three-decimal scores so the CSV holds exactly the values that are gated.
  std::mt19937_64 rng(c.seed ^ 0x9c5c0e5ULL);
  std::vector<QcRecord> qc;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    QcRecord r{ids[i], {}};
    for (const auto& region : c.qc_regions) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      r.scores[region] = std::round(700.0 + 290.0 * u) / 1000.0;
    }
    if (i < pc.qc_fail) r.scores[c.qc_regions[i % c.qc_regions.size()]] = kPhantomFailingQcScore;
    qc.push_back(std::move(r));
  }
  write_text(dir / "qc.csv", qc_records_to_csv(qc, c.qc_regions));

  if (pc.embedding_dim > 0) {
    std::vector<Volume> volumes;
    for (const auto& p : phantoms) volumes.push_back(p.volume);
    const auto emb = toy_embed_set(volumes, pc.embedding_dim, kToyEncoderSeed, "TOY", c.threads);
    const EmbeddingSet named(emb.vectors(), "TOY", ids);
    fs::create_directories(dir / "embeddings");
    write_text(dir / "embeddings" / "TOY.csv", embeddings_to_csv(named));
  }
  return ids;
}

}  // namespace mrieval
