#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "doctest.h"
#include "mrieval/config.hpp"
#include "mrieval/error.hpp"
#include "mrieval/nifti.hpp"
#include "mrieval/protocol.hpp"
#include "mrieval/report.hpp"
#include "support.hpp"

using namespace mrieval;
namespace fs = std::filesystem;

namespace {

ModelGateResult gate(std::size_t total, std::size_t failed) {
  ModelGateResult g;
  g.total = total;
  g.failed_mris = failed;
  g.failed_roi_events = failed;
  g.pass_rate = static_cast<double>(total - failed) / static_cast<double>(total);
  g.threshold = 0.65;
  g.min_pass_rate = 0.95;
  g.verdict = g.pass_rate >= g.min_pass_rate ? Verdict::Assessable : Verdict::TooUnreliable;
  g.per_region_fail_counts["thalamus"] = failed;
  return g;
}

EffectSizeTable table(std::vector<std::pair<std::string, double>> ds) {
  EffectSizeTable t;
  for (auto& [region, d] : ds) t.rows.push_back({region, d, 400, 400, std::abs(d) > 0.8});
  return t;
}

EvaluationReport sample_report(const std::string& name, double fid, bool assessable) {
  auto r = assessable ? EvaluationReport::assessed(name, gate(400, 11),
                                                   table({{"hippocampus", -0.31}, {"thalamus", 1.25}}))
                      : EvaluationReport::unreliable(name, gate(400, 67));
  r.classic["fid@R50"] = fid;
  r.classic["mmd@R50"] = 0.0123456789;
  r.classic["ms_ssim_mean"] = 0.85;
  r.classic["ms_ssim_stddev"] = 0.02;
  r.classic["ms_ssim_real_mean"] = 0.88;
  r.classic["ms_ssim_gap_to_real"] = -0.03;
  r.qc_threshold = QcThreshold{0.65, "calibrated", 0.05, 0.01, 19, 400};
  r.qc_distribution["thalamus"] = RegionQcSummary{0.1, 0.7, 0.8, 0.9, 0.99, 0.0275};
  r.warnings.push_back("example warning");
  r.provenance.config_hash = fnv1a_hex("config");
  r.provenance.seeds["ms_ssim_pairs"] = 7;
  r.provenance.manifests["real"] = {"images/a.nii.gz"};
  r.provenance.settings["icv_fit"] = "real";
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Small phantom family written in the input layout.
EvalConfig phantom_config(const fs::path& root, std::size_t count, std::size_t qc_fail, std::uint64_t seed) {
  EvalConfig c;
  c.shape = {64, 64, 64};
  c.seed = seed;
  c.phantom.count = count;
  c.phantom.qc_fail = qc_fail;
  c.phantom.embedding_dim = 4;
  write_phantom_set(root, c);
  return c;
}

EvalConfig protocol_config(const fs::path& real, const fs::path& synth) {
  EvalConfig c;
  c.model_name = "phantom-model";
  c.shape = {64, 64, 64};
  c.real_dir = real;
  c.synth_dir = synth;
  c.region_table = real / "regions.tsv";
  c.qc_threshold = 0.65;
  c.ms_ssim_pairs = 4;
  return c;
}

}  // namespace

TEST_CASE("report factories enforce the verdict/table pairing") {
  CHECK_THROWS_AS(EvaluationReport::unreliable("m", gate(400, 11)), Error);
  CHECK_THROWS_AS(EvaluationReport::assessed("m", gate(400, 67), table({{"x", 0.1}})), Error);
  CHECK_THROWS_AS(EvaluationReport::from_parts("m", gate(400, 11), std::nullopt), Error);
  CHECK_THROWS_AS(EvaluationReport::from_parts("m", gate(400, 67), table({{"x", 0.1}})), Error);
  CHECK(!EvaluationReport::from_parts("m", gate(400, 67), std::nullopt).effect_sizes());
  CHECK(EvaluationReport::from_parts("m", gate(400, 0), table({{"x", 0.1}})).effect_sizes());
  CHECK_THROWS_AS(EvaluationReport::unreliable("", gate(400, 67)), Error);
}

TEST_CASE("JSON is canonical and round-trips byte for byte") {
  for (bool assessable : {true, false}) {
    const auto r = sample_report("HA-GAN", 0.0271, assessable);
    const auto text = to_json(r);
    CHECK(text.back() == '\n');
    const auto back = report_from_json(text);
    CHECK(to_json(back) == text);
    CHECK(back.effect_sizes().has_value() == assessable);
    CHECK(back.gate().verdict == r.gate().verdict);
    CHECK(back.classic == r.classic);
    CHECK(text.find("\"classic\"") < text.find("\"effect_sizes\""));  // sorted keys
  }
}

TEST_CASE("infinite effect sizes survive JSON") {
  auto r = EvaluationReport::assessed("m", gate(400, 0), table({{"a", std::numeric_limits<double>::infinity()},
                                                                {"b", -std::numeric_limits<double>::infinity()}}));
  const auto text = to_json(r);
  CHECK(text.find("\"inf\"") != std::string::npos);
  CHECK(text.find("\"-inf\"") != std::string::npos);
  const auto back = report_from_json(text);
  CHECK(back.effect_sizes()->find("a")->d == std::numeric_limits<double>::infinity());
  CHECK(back.effect_sizes()->find("b")->d == -std::numeric_limits<double>::infinity());
}

TEST_CASE("malformed or inconsistent JSON is rejected") {
  CHECK_THROWS_AS(report_from_json("{"), Error);
  CHECK_THROWS_AS(report_from_json("{}"), Error);
  auto text = to_json(sample_report("m", 1.0, false));
  const auto pos = text.find("\"effect_sizes\": null");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("\"effect_sizes\": null").size(),
               "\"effect_sizes\": {\"flag_threshold\": 0.8, \"rows\": []}");
  CHECK_THROWS_AS(report_from_json(text), Error);
}

TEST_CASE("formatting helpers") {
  CHECK(format_percent(381.0 / 400.0) == "95.25%");
  CHECK(format_percent(1.0) == "100.00%");
  CHECK(format_percent(3.0 / 400.0) == "0.75%");
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(safe_file_stem("alpha-WGAN v2/x") == "alpha-WGAN_v2_x");
  CHECK(safe_file_stem(".hidden") == "_.hidden");
  CHECK(parse_report_format("md") == ReportFormat::Markdown);
  CHECK(parse_report_format("csv") == ReportFormat::Csv);
  CHECK_THROWS_AS(parse_report_format("xml"), Error);
}

TEST_CASE("markdown bolds the best model and omits tables for unreliable ones") {
  const std::vector<EvaluationReport> rs{sample_report("A", 0.5, true), sample_report("B", 0.2, true),
                                         sample_report("C", 0.9, false)};
  const auto files = emit(rs, ReportFormat::Markdown);
  REQUIRE(files.size() == 1);
  CHECK(files[0].name == "report.md");
  const auto& md = files[0].content;
  CHECK(md.find("**0.200**") != std::string::npos);
  CHECK(md.find("**0.500**") == std::string::npos);
  CHECK(md.find("97.25%") != std::string::npos);
  CHECK(md.find("83.25%") != std::string::npos);
  CHECK(md.find("Too unreliable for anatomical assessment: C") != std::string::npos);
  CHECK(md.find("| Region | A | B |") != std::string::npos);
}

TEST_CASE("CSV and JSON emission") {
  const std::vector<EvaluationReport> rs{sample_report("A", 0.5, true), sample_report("C", 0.9, false)};
  const auto csv = emit(rs, ReportFormat::Csv);
  std::map<std::string, std::string> by;
  for (const auto& f : csv) by[f.name] = f.content;
  for (const char* name : {"classic_metrics.csv", "gate.csv", "gate_regions.csv", "effect_sizes.csv", "qc_distribution.csv"})
    CHECK(by.count(name));
  const auto eff = parse_csv(by["effect_sizes.csv"]);
  CHECK(eff.header == std::vector<std::string>{"region", "A"});
  CHECK(parse_real(eff.rows[0][1], "d") == -0.31);
  const auto classic = parse_csv(by["classic_metrics.csv"]);
  CHECK(classic.rows.size() == 2);

  const auto json = emit(rs, ReportFormat::Json);
  CHECK(json.size() == 2);
  CHECK(json[0].name == "A.json");
  const std::vector<EvaluationReport> dup{sample_report("A", 0.5, true), sample_report("A", 0.4, true)};
  CHECK_THROWS_AS(emit(dup, ReportFormat::Json), Error);
}

TEST_CASE("config files parse, resolve paths and reject unknown keys") {
  const auto c = parse_config(
      "[evaluation]\nmodel_name = cDPM\nseed = 42\nthreads = 3\n"
      "[inputs]\nreal = data/real\nsynth = /abs/synth\n"
      "[geometry]\nshape = 64,64,64\nspacing = 1,1,1\n"
      "[metrics]\nfeature_kernel = polynomial:3:1\nms_ssim_scales = 3\n"
      "[qc]\nthreshold = 0.65\nregions = a,b,c\n"
      "[anatomy]\nicv_fit = pooled\nflag_threshold = 1.0\n"
      "[phantom]\ncount = 5\nscale = roi_a=1.1,roi_b=0.9\n",
      "/base");
  CHECK(c.model_name == "cDPM");
  CHECK(c.seed == 42);
  CHECK(c.threads == 3);
  CHECK(c.real_dir == fs::path("/base/data/real"));
  CHECK(c.synth_dir == fs::path("/abs/synth"));
  CHECK(c.shape == Shape3{64, 64, 64});
  CHECK(*c.qc_threshold == 0.65);
  CHECK(c.qc_regions == std::vector<std::string>{"a", "b", "c"});
  CHECK(c.icv_fit == "pooled");
  CHECK(c.ms_ssim_spec.scales == 3);
  CHECK(c.ms_ssim_spec.weights.size() == 3);
  CHECK(c.phantom.region_scale.at("roi_b") == 0.9);

  const auto calibrate = parse_config("[qc]\nthreshold = calibrate\n");
  CHECK(!calibrate.qc_threshold);

  auto threads = c;
  threads.threads = 9;
  CHECK(canonical_config(threads) == canonical_config(c));
  auto seeded = c;
  seeded.seed = 43;
  CHECK(canonical_config(seeded) != canonical_config(c));

  CHECK_THROWS_AS(parse_config("[evaluation]\ncolour = blue\n"), Error);
  CHECK_THROWS_AS(parse_config("[colours]\nx = 1\n"), Error);
  CHECK_THROWS_AS(parse_config("[evaluation]\nseed = many\n"), Error);
  CHECK_THROWS_AS(parse_config("[anatomy]\nicv_fit = synthetic\n"), Error);
  CHECK_THROWS_AS(parse_config("[qc]\nthreshold = 1.5\n"), Error);
  CHECK_THROWS_AS(parse_config("[geometry]\nshape = 64,64\n"), Error);
}

TEST_CASE("protocol: a set compared with itself is indistinguishable and assessable") {
  const auto root = testing::scratch_dir("protocol_self");
  phantom_config(root / "real", 8, 0, 1);
  const auto r = run_protocol(protocol_config(root / "real", root / "real"));
  CHECK(r.gate().verdict == Verdict::Assessable);
  REQUIRE(r.effect_sizes());
  for (const auto& row : r.effect_sizes()->rows) CHECK(row.d == 0.0);
  CHECK(std::abs(r.classic.at("fid@TOY")) < 1e-8);
  CHECK(r.classic.at("ms_ssim_gap_to_real") == 0.0);
  CHECK(r.skipped_files == 0);
  CHECK(r.provenance.manifests.at("real").size() == r.provenance.manifests.at("synth").size());
  CHECK(r.qc_threshold->source == "fixed");
}

TEST_CASE("protocol: an unreliable model gets gate statistics but no plausibility table") {
  const auto root = testing::scratch_dir("protocol_unreliable");
  phantom_config(root / "real", 8, 0, 1);
  phantom_config(root / "synth", 8, 3, 2);
  const auto r = run_protocol(protocol_config(root / "real", root / "synth"));
  CHECK(r.gate().verdict == Verdict::TooUnreliable);
  CHECK(r.gate().failed_mris == 3);
  CHECK(!r.effect_sizes());
  CHECK(r.classic.count("fid@TOY"));
  CHECK(!r.qc_distribution.empty());
  CHECK(report_from_json(to_json(r)).effect_sizes() == std::nullopt);
}

TEST_CASE("protocol: nonconforming synthetic files are skipped, real ones abort") {
  const auto root = testing::scratch_dir("protocol_nonconforming");
  phantom_config(root / "real", 8, 0, 1);
  phantom_config(root / "synth", 8, 0, 2);
  std::mt19937_64 rng(3);
  const auto odd = testing::random_volume(rng, {32, 32, 32});
  write_nifti_file(root / "synth" / "images" / "zz-odd.nii.gz", odd);
  const auto r = run_protocol(protocol_config(root / "real", root / "synth"));
  CHECK(r.skipped_files == 1);
  bool warned = false;
  for (const auto& w : r.warnings) warned |= w.find("zz-odd") != std::string::npos;
  CHECK(warned);
  CHECK(r.gate().total == 8);

  write_nifti_file(root / "real" / "images" / "zz-odd.nii.gz", odd);
  CHECK_THROWS_AS(run_protocol(protocol_config(root / "real", root / "synth")), Error);
}

TEST_CASE("protocol: missing inputs are reported as errors") {
  const auto root = testing::scratch_dir("protocol_missing");
  phantom_config(root / "real", 8, 0, 1);
  CHECK_THROWS_AS(run_protocol(protocol_config(root / "real", root / "nowhere")), Error);
  fs::remove(root / "real" / "qc.csv");
  CHECK_THROWS_AS(run_protocol(protocol_config(root / "real", root / "real")), Error);
}

TEST_CASE("protocol output does not depend on the thread count") {
  const auto root = testing::scratch_dir("protocol_threads");
  phantom_config(root / "real", 8, 0, 1);
  phantom_config(root / "synth", 8, 0, 2);
  auto c = protocol_config(root / "real", root / "synth");
  const auto one = to_json(run_protocol(c));
  c.threads = 4;
  CHECK(to_json(run_protocol(c)) == one);
  CHECK(slurp(root / "real" / "ground_truth.csv").find("subject_id,icv_mm3") == 0);
}
