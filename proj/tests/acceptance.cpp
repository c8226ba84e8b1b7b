// Acceptance suite: one PASS/FAIL line per criterion. Run without arguments
// for all ten, or pass criterion numbers to run a subset.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "mrieval/anatomy.hpp"
#include "mrieval/error.hpp"
#include "mrieval/gaussian.hpp"
#include "mrieval/mmd.hpp"
#include "mrieval/ms_ssim.hpp"
#include "mrieval/nifti.hpp"
#include "mrieval/phantom.hpp"
#include "mrieval/qc_gate.hpp"
#include "mrieval/report.hpp"
#include "support.hpp"

using namespace mrieval;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kArithmeticBudgetSeconds = 1.0;
constexpr double kMmdOracleTol = 1e-10;
constexpr double kMmdNullStandardErrors = 3.0;
constexpr double kFidClosedFormTol = 1e-9;
constexpr double kFidIdentityTol = 1e-8;
constexpr double kFidSymmetryTol = 1e-8;
constexpr double kSsimOracleTol = 1e-6;
constexpr double kMsSsimBudgetSeconds = 5.0;
constexpr double kEllipsoidVolumeTol = 0.05;
constexpr double kScaleGrowthPercent = 33.1;
constexpr double kScaleGrowthTolPoints = 5.0;
constexpr double kFamilyMaxAbsD = 0.2;
constexpr double kOlsTol = 1e-9;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      if (!failures_.empty()) failures_ += "; ";
      failures_ += what;
    }
  }
  Outcome finish(const std::string& summary) const {
    return {pass_, pass_ ? summary : failures_ + " [" + summary + "]"};
  }

 private:
  bool pass_ = true;
  std::string failures_;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

QcRecord qc_record(const std::string& id, double score) {
  QcRecord r{id, {}};
  for (const auto& name : default_qc_regions()) r.scores[name] = score;
  return r;
}

Volume noisy(const Volume& v, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<float> d(v.data().begin(), v.data().end());
  for (auto& x : d) x = static_cast<float>(std::clamp(x + amplitude * n(rng), -1.0, 1.0));
  return v.with_data(std::move(d));
}

// --- 1 ---------------------------------------------------------------------

Outcome gate_arithmetic() {
  struct Row {
    const char* model;
    std::size_t failed;
    const char* rate;
    Verdict verdict;
  };
  const Row rows[] = {{"real", 19, "95.25%", Verdict::Assessable},     {"VAE-GAN", 397, "0.75%", Verdict::TooUnreliable},
                      {"a-WGAN", 67, "83.25%", Verdict::TooUnreliable}, {"HA-GAN", 0, "100.00%", Verdict::Assessable},
                      {"MONAI-LDM", 56, "86.00%", Verdict::TooUnreliable}, {"MedSyn", 6, "99.00%", Verdict::Assessable},
                      {"cDPM", 11, "97.25%", Verdict::Assessable}};
  Checker ck;
  const auto start = std::chrono::steady_clock::now();
  std::string rates;
  for (const auto& row : rows) {
    std::vector<QcRecord> rs;
    for (std::size_t i = 0; i < 400; ++i) {
      auto r = qc_record("s" + std::to_string(i), 0.9);
      if (i < row.failed) r.scores[default_qc_regions()[i % 8]] = 0.6;
      rs.push_back(std::move(r));
    }
    GateConfig cfg;
    cfg.min_model_pass_rate = 0.95;
    const auto g = gate_model(rs, cfg);
    const auto shown = format_percent(g.pass_rate);
    rates += (rates.empty() ? "" : " ") + shown;
    ck.require(shown == row.rate, std::string(row.model) + " pass rate " + shown + " != " + row.rate);
    ck.require(g.verdict == row.verdict, std::string(row.model) + " verdict " + std::string(to_string(g.verdict)));
  }
  const double t = seconds_since(start);
  ck.require(t < kArithmeticBudgetSeconds, "runtime " + fmt(t) + " s");
  return ck.finish("rates " + rates + ", " + fmt(t, 3) + " s");
}

// --- 2 ---------------------------------------------------------------------

Outcome threshold_calibration() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> low(0.60, 0.6499), high(0.65, 1.0);
  std::vector<QcRecord> rs;
  for (std::size_t i = 0; i < 400; ++i) {
    QcRecord r{"s" + std::to_string(i), {}};
    for (const auto& name : default_qc_regions()) r.scores[name] = high(rng);
    if (i < 19) r.scores[default_qc_regions()[i % 8]] = low(rng);
    else r.scores["general_white_matter"] = 0.65;
    rs.push_back(std::move(r));
  }
  Checker ck;
  const auto c = calibrate_threshold(rs, 0.05, 0.01);
  ck.require(c.threshold == 0.65, "threshold " + fmt(c.threshold));
  ck.require(format_percent(c.realized_fail_fraction) == "4.75%", "realized " + format_percent(c.realized_fail_fraction));
  const double above = static_cast<double>(count_failed_mris(rs, c.threshold + 0.01)) / 400.0;
  ck.require(above > 0.05, "maximality witness fails: " + fmt(above));
  return ck.finish("threshold " + fmt(c.threshold) + ", realized " + format_percent(c.realized_fail_fraction) +
                   ", fail fraction at +0.01 = " + format_percent(above));
}

// --- 3 ---------------------------------------------------------------------

Outcome table_counting() {
  Checker ck;
  const auto start = std::chrono::steady_clock::now();
  const auto tables = effect_tables_from_csv(load_csv((testing::data_dir() / "published_effect_sizes.csv").string()));
  const auto counts = best_region_counts(tables);
  const std::size_t flags = tables.at("HA-GAN").flagged_count();
  const double t = seconds_since(start);
  const std::pair<const char*, std::size_t> expect[] = {{"cDPM", 38}, {"MedSyn", 9}, {"HA-GAN", 2}};
  std::string got;
  for (const auto& [model, n] : expect) {
    const auto& c = counts.at(model);
    got += std::string(got.empty() ? "" : ", ") + model + " " + std::to_string(c.strict) + " (" +
           std::to_string(c.tied) + " with ties)";
    ck.require(c.strict == n || c.tied == n, std::string(model) + " best in " + std::to_string(c.strict) + ", expected " +
                                                 std::to_string(n));
  }
  ck.require(flags == 14, "HA-GAN flagged " + std::to_string(flags) + " at |d| > 0.8, expected 14");
  ck.require(t < kArithmeticBudgetSeconds, "runtime " + fmt(t) + " s");
  return ck.finish(got + "; HA-GAN flags " + std::to_string(flags));
}

// --- 4 ---------------------------------------------------------------------

Outcome mmd_oracle() {
  Checker ck;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(2, 16), dim(1, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = dim(rng);
    const Eigen::MatrixXd x = testing::random_matrix(rng, size(rng), d);
    const Eigen::MatrixXd y = testing::random_matrix(rng, size(rng), d, 1.3, 0.2);
    const EmbeddingSet ex(x, "x"), ey(y, "y");
    const KernelSpec kernels[] = {KernelSpec::gaussian(), KernelSpec::linear(), KernelSpec::polynomial(2, 1.0)};
    const auto& k = kernels[trial % 3];
    const double h = k.kind == KernelKind::Gaussian ? median_heuristic_bandwidth(ex, ey) : 0.0;
    const double oracle = testing::mmd2_oracle(x, y, k, h);
    const double err = std::abs(mmd2_unbiased(ex, ey, k) - oracle) / std::max(1.0, std::abs(oracle));
    worst = std::max(worst, err);
  }
  ck.require(worst <= kMmdOracleTol, "oracle mismatch " + fmt(worst));

  const Eigen::MatrixXd pool = testing::random_matrix(rng, 1000, 4);
  std::vector<int> idx(1000);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> vals;
  for (int rep = 0; rep < 500; ++rep) {
    std::shuffle(idx.begin(), idx.end(), rng);
    Eigen::MatrixXd a(16, 4), b(16, 4);
    for (int i = 0; i < 16; ++i) {
      a.row(i) = pool.row(idx[static_cast<std::size_t>(i)]);
      b.row(i) = pool.row(idx[static_cast<std::size_t>(16 + i)]);
    }
    vals.push_back(mmd2_unbiased(EmbeddingSet(a, "a"), EmbeddingSet(b, "b"), KernelSpec::gaussian()));
  }
  const double mean = testing::mean(vals);
  const double se = std::sqrt(testing::sample_var(vals) / static_cast<double>(vals.size()));
  ck.require(std::abs(mean) <= kMmdNullStandardErrors * se, "null mean " + fmt(mean) + " vs SE " + fmt(se));
  return ck.finish("max relative error " + fmt(worst, 3) + ", null mean " + fmt(mean, 3) + " (" +
                   fmt(std::abs(mean) / se, 3) + " SE)");
}

// --- 5 ---------------------------------------------------------------------

Outcome fid_closed_forms() {
  Checker ck;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mu(-5, 5), sd(0.01, 4);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double ma = mu(rng), mb = mu(rng), sa = sd(rng), sb = sd(rng);
    const double got = frechet_distance({Eigen::VectorXd::Constant(1, ma), Eigen::MatrixXd::Constant(1, 1, sa * sa)},
                                        {Eigen::VectorXd::Constant(1, mb), Eigen::MatrixXd::Constant(1, 1, sb * sb)});
    const double expect = (ma - mb) * (ma - mb) + (sa - sb) * (sa - sb);
    worst = std::max(worst, std::abs(got - expect) / std::max(1.0, expect));
  }
  ck.require(worst <= kFidClosedFormTol, "univariate mismatch " + fmt(worst));

  double identity = 0.0, asym = 0.0;
  for (int d = 1; d <= 16; ++d) {
    auto summary = [&] {
      const Eigen::MatrixXd a = testing::random_matrix(rng, d, d);
      return GaussianSummary{testing::random_matrix(rng, d, 1), a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d)};
    };
    const auto a = summary(), b = summary();
    identity = std::max(identity, std::abs(frechet_distance(a, a)));
    const double ab = frechet_distance(a, b);
    asym = std::max(asym, std::abs(ab - frechet_distance(b, a)) / std::max(1.0, ab));
  }
  ck.require(identity <= kFidIdentityTol, "identity " + fmt(identity));
  ck.require(asym <= kFidSymmetryTol, "symmetry " + fmt(asym));
  return ck.finish("univariate error " + fmt(worst, 3) + ", identity " + fmt(identity, 3) + ", asymmetry " +
                   fmt(asym, 3));
}

// --- 6 ---------------------------------------------------------------------

Outcome ms_ssim_checks() {
  Checker ck;
  auto spec = default_phantom_spec();
  spec.noise_sigma = 0.05;
  spec.seed = 6;
  const Volume phantom = generate_phantom(spec).volume;
  const double self = ms_ssim(phantom, phantom);
  ck.require(self == 1.0, "self-similarity " + fmt(self, 17));

  std::mt19937_64 rng(6);
  MsSsimSpec single;
  single.scales = 1;
  single.weights = {1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const Volume a = testing::smooth_volume(rng, {16, 16, 16});
    const Volume b = noisy(a, 0.1 * (trial + 1), 60 + static_cast<std::uint64_t>(trial));
    const double oracle = testing::ssim_oracle(a, b, single.window, single.sigma, single.k1, single.k2, single.dynamic_range);
    worst = std::max(worst, std::abs(ms_ssim(a, b, single) - oracle));
  }
  ck.require(worst <= kSsimOracleTol, "single-scale oracle " + fmt(worst));

  std::vector<double> by_noise;
  for (double amp : {0.05, 0.15, 0.4}) by_noise.push_back(ms_ssim(phantom, noisy(phantom, amp, 66)));
  ck.require(by_noise[0] > by_noise[1] && by_noise[1] > by_noise[2], "noise ordering " + fmt(by_noise[0]) + " " +
                                                                         fmt(by_noise[1]) + " " + fmt(by_noise[2]));

  std::vector<Volume> set;
  for (int i = 0; i < 5; ++i) set.push_back(noisy(phantom, 0.05 * (i + 1), 70 + static_cast<std::uint64_t>(i)));
  const auto one = pairwise_ms_ssim(set, 6, 1, {}, 1), many = pairwise_ms_ssim(set, 6, 1, {}, 4);
  ck.require(one.scores == many.scores && one.mean == many.mean, "thread-dependent pairwise MS-SSIM");

  const Shape3 full = kStandardShape;
  const Volume a = testing::smooth_volume(rng, full);
  const Volume b = noisy(a, 0.1, 67);
  const auto start = std::chrono::steady_clock::now();
  const double big = ms_ssim(a, b);
  const double t = seconds_since(start);
  ck.require(t < kMsSsimBudgetSeconds, "5-scale 144x192x144 took " + fmt(t, 3) + " s");
  return ck.finish("self " + fmt(self) + ", oracle error " + fmt(worst, 3) + ", noise " + fmt(by_noise[0], 4) + " > " +
                   fmt(by_noise[1], 4) + " > " + fmt(by_noise[2], 4) + ", full-size " + fmt(big, 4) + " in " +
                   fmt(t, 3) + " s");
}

// --- 7 ---------------------------------------------------------------------

Outcome phantom_anatomy() {
  Checker ck;
  const auto spec = default_phantom_spec();
  const auto p = generate_phantom(spec);
  const auto before = region_volumes(p.labels, "s");
  double worst_volume = 0.0, worst_growth = 0.0;
  for (const auto& r : spec.regions) {
    const double analytic = 4.0 / 3.0 * std::numbers::pi * r.semi_axes_mm[0] * r.semi_axes_mm[1] * r.semi_axes_mm[2];
    worst_volume = std::max(worst_volume, std::abs(before.volumes_mm3.at(r.merge_key) / analytic - 1.0));
    const auto q = perturb_phantom(p, Perturbation::RegionalScale, 0.1, 1, r.code);
    const double growth =
        100.0 * (region_volumes(q.labels, "s").volumes_mm3.at(r.merge_key) / before.volumes_mm3.at(r.merge_key) - 1.0);
    worst_growth = std::max(worst_growth, std::abs(growth - kScaleGrowthPercent));
  }
  ck.require(worst_volume <= kEllipsoidVolumeTol, "ellipsoid volume error " + fmt(worst_volume));
  ck.require(worst_growth <= kScaleGrowthTolPoints, "regional-scale growth off by " + fmt(worst_growth) + " points");

  FamilySpec fa, fb;
  fa.count = fb.count = 50;
  fa.seed = 7001;
  fb.seed = 7002;
  auto measure = [](const std::vector<Phantom>& ps) {
    std::vector<RegionVolumes> vs;
    for (std::size_t i = 0; i < ps.size(); ++i) vs.push_back(region_volumes(ps[i].labels, "s" + std::to_string(i)));
    return vs;
  };
  const auto va = measure(generate_family(spec, fa, 4));
  const auto vb = measure(generate_family(spec, fb, 4));
  const auto fit = fit_icv(va);
  const auto t = plausibility_table(residualize(va, fit), residualize(vb, fit));
  double worst_d = 0.0;
  for (const auto& row : t.rows) worst_d = std::max(worst_d, std::abs(row.d));
  ck.require(worst_d < kFamilyMaxAbsD, "family |d| " + fmt(worst_d));
  return ck.finish("volume error " + fmt(100 * worst_volume, 3) + "%, growth within " + fmt(worst_growth, 3) +
                   " points of 33.1%, max family |d| " + fmt(worst_d, 3));
}

// --- 8 ---------------------------------------------------------------------

Outcome ols_residualization() {
  Checker ck;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> icv(1.5e6, 1.2e5), noise(0.0, 1.0);
  std::vector<RegionVolumes> rows;
  for (int i = 0; i < 400; ++i) {
    RegionVolumes v;
    v.subject_id = "s" + std::to_string(i);
    v.icv_mm3 = icv(rng);
    v.volumes_mm3["hippocampus"] = 1500 + 0.002 * v.icv_mm3 + 200 * noise(rng);
    v.volumes_mm3["thalamus"] = 900 + 0.004 * v.icv_mm3 + 300 * noise(rng);
    v.volumes_mm3["cerebral_wm"] = 1e5 + 0.28 * v.icv_mm3 + 2e4 * noise(rng);
    rows.push_back(std::move(v));
  }
  const auto fit = fit_icv(rows);
  const auto res = residualize(rows, fit);
  std::vector<double> x;
  for (const auto& r : rows) x.push_back(r.icv_mm3);
  double worst_mean = 0, worst_corr = 0, worst_coef = 0;
  for (const auto& [key, coef] : fit.coefs) {
    std::vector<double> y, e;
    for (const auto& r : rows) y.push_back(r.volumes_mm3.at(key));
    for (const auto& r : res) e.push_back(r.residuals.at(key));
    long double n = static_cast<long double>(x.size()), sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sxx += static_cast<long double>(x[i]) * x[i];
      sy += y[i];
      sxy += static_cast<long double>(x[i]) * y[i];
    }
    const long double det = n * sxx - sx * sx;
    const double slope = static_cast<double>((n * sxy - sx * sy) / det);
    const double intercept = static_cast<double>((sy * sxx - sx * sxy) / det);
    worst_coef = std::max({worst_coef, std::abs(coef.slope - slope) / std::abs(slope),
                           std::abs(coef.intercept - intercept) / std::abs(intercept)});
    worst_mean = std::max(worst_mean, std::abs(testing::mean(e)) / testing::mean(y));
    worst_corr = std::max(worst_corr, std::abs(testing::pearson(e, x)));
  }
  ck.require(worst_mean <= kOlsTol, "residual mean " + fmt(worst_mean));
  ck.require(worst_corr < kOlsTol, "residual/ICV correlation " + fmt(worst_corr));
  ck.require(worst_coef <= kOlsTol, "coefficient mismatch " + fmt(worst_coef));
  return ck.finish("relative mean " + fmt(worst_mean, 3) + ", |r| " + fmt(worst_corr, 3) + ", coefficient error " +
                   fmt(worst_coef, 3));
}

// --- 9 ---------------------------------------------------------------------

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism_and_structure() {
  Checker ck;
  const auto root = testing::scratch_dir("acceptance_9");
  {
    std::ofstream cfg(root / "eval.ini");
    cfg << "[evaluation]\nmodel_name = phantom\nseed = 9\n"
           "[inputs]\nreal = real\nsynth = synth\nregion_table = real/regions.tsv\n"
           "[geometry]\nshape = 64,64,64\n"
           "[metrics]\nms_ssim_pairs = 6\n"
           "[qc]\nthreshold = 0.65\n"
           "[phantom]\ncount = 10\n";
  }
  const std::string cli = MRIEVAL_CLI;
  const std::string cfg = (root / "eval.ini").string();
  ck.require(run(cli + " phantom --config " + cfg + " --out " + (root / "real").string()) == 0, "phantom (real)");
  ck.require(run(cli + " phantom --config " + cfg + " --seed 10 --out " + (root / "synth").string()) == 0, "phantom (synth)");
  ck.require(run(cli + " evaluate --config " + cfg + " --format json --out " + (root / "run1").string()) == 0, "evaluate #1");
  ck.require(run(cli + " evaluate --config " + cfg + " --format json --threads 4 --out " + (root / "run2").string()) == 0,
             "evaluate #2");
  const auto a = slurp(root / "run1" / "phantom.json"), b = slurp(root / "run2" / "phantom.json");
  ck.require(!a.empty() && a == b, "evaluate output differs between runs");

  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> failed(0, 100);
  std::bernoulli_distribution coin(0.5);
  std::size_t built = 0, refused = 0;
  for (int i = 0; i < 100; ++i) {
    ModelGateResult g;
    g.total = 100;
    g.failed_mris = failed(rng);
    g.failed_roi_events = g.failed_mris;
    g.pass_rate = static_cast<double>(g.total - g.failed_mris) / 100.0;
    g.min_pass_rate = 0.95;
    g.threshold = 0.65;
    g.verdict = g.pass_rate >= g.min_pass_rate ? Verdict::Assessable : Verdict::TooUnreliable;
    std::optional<EffectSizeTable> table;
    if (coin(rng)) table = EffectSizeTable{{{"roi", 0.1, 10, 10, false}}, 0.8};
    try {
      const auto r = EvaluationReport::from_parts("m", g, table);
      const auto back = report_from_json(to_json(r));
      ++built;
      ck.require(!(back.gate().verdict == Verdict::TooUnreliable && back.effect_sizes()),
                 "too-unreliable report carries an effect-size table");
      ck.require(back.effect_sizes().has_value() == (g.verdict == Verdict::Assessable),
                 "assessable report lost its table");
    } catch (const Error&) {
      ++refused;
      ck.require(table.has_value() != (g.verdict == Verdict::Assessable), "valid combination refused");
    }
  }
  return ck.finish("json " + std::to_string(a.size()) + " bytes identical across runs; fuzz built " +
                   std::to_string(built) + ", refused " + std::to_string(refused));
}

// --- 10 --------------------------------------------------------------------

Outcome nifti_round_trip() {
  Checker ck;
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::size_t> dim(1, 12);
  std::uniform_real_distribution<double> spacing(0.3, 3.0);
  std::uniform_int_distribution<std::int32_t> code(0, 2035);
  std::size_t mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    const Shape3 s{dim(rng), dim(rng), dim(rng)};
    const Spacing sp{spacing(rng), spacing(rng), spacing(rng)};
    const Volume v = testing::random_volume(rng, s).with_data([&] {
      std::vector<float> d(s.voxels());
      std::uniform_real_distribution<float> u(-1.0f, 1.0f);
      for (auto& x : d) x = u(rng);
      return d;
    }());
    const Volume vs(s, sp, std::vector<float>(v.data().begin(), v.data().end()));
    const auto back = std::get<Volume>(parse_nifti(write_nifti(vs, i % 2 == 0)));
    if (!std::ranges::equal(back.data(), vs.data()) || back.shape() != s) ++mismatches;
    for (std::size_t k = 0; k < 3; ++k)
      if (std::abs(back.spacing()[k] - sp[k]) > 1e-6 * sp[k]) ++mismatches;

    std::vector<std::int32_t> labels(s.voxels());
    for (auto& x : labels) x = code(rng);
    const LabelMap m(VoxelGrid<std::int32_t>(s, sp, labels));
    const auto lb = std::get<LabelMap>(parse_nifti(write_nifti(m, i % 2 == 1)));
    if (!std::ranges::equal(lb.data(), m.data()) || lb.shape() != s) ++mismatches;
  }
  ck.require(mismatches == 0, std::to_string(mismatches) + " round-trip mismatches");

  const Bytes good = write_nifti(Volume({2, 2, 2}, {1, 1, 1}, std::vector<float>(8, 0.0f)), false);
  auto expect_error = [&](const char* name, Bytes b, std::size_t offset) {
    try {
      (void)parse_nifti(b);
      ck.require(false, std::string(name) + " accepted");
    } catch (const NiftiError& e) {
      ck.require(e.offset() == offset, std::string(name) + " offset " + std::to_string(e.offset()));
    } catch (...) {
      ck.require(false, std::string(name) + " raised the wrong exception type");
    }
  };
  Bytes magic = good;
  magic[345] = '!';
  expect_error("bad magic", magic, 344);
  expect_error("truncated header", Bytes(good.begin(), good.begin() + 100), 100);
  expect_error("truncated payload", Bytes(good.begin(), good.end() - 1), good.size() - 1);
  Bytes dtype = good;
  const std::int16_t rgb24 = 128;
  std::memcpy(dtype.data() + 70, &rgb24, 2);
  expect_error("unsupported datatype", dtype, 70);

  std::uniform_int_distribution<std::size_t> pos(0, good.size() - 1);
  std::uniform_int_distribution<int> byte(0, 255);
  std::size_t rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Bytes b = good;
    for (int k = 0; k < 4; ++k) b[pos(rng)] = static_cast<std::uint8_t>(byte(rng));
    if (trial % 2) b.resize(pos(rng));
    try {
      (void)parse_nifti(b);
    } catch (const Error&) {
      ++rejected;
    } catch (...) {
      ck.require(false, "non-Error exception from a corrupted stream");
    }
  }
  return ck.finish("100 round trips exact; malformed corpus rejected at the expected offsets; " +
                   std::to_string(rejected) + "/1000 random corruptions rejected, none crashed");
}

struct Criterion {
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"gate arithmetic", gate_arithmetic},
      {"threshold calibration", threshold_calibration},
      {"effect-size table counting", table_counting},
      {"MMD oracle equivalence", mmd_oracle},
      {"FID closed forms", fid_closed_forms},
      {"MS-SSIM", ms_ssim_checks},
      {"phantom anatomy oracle", phantom_anatomy},
      {"OLS residualization", ols_residualization},
      {"determinism and report structure", determinism_and_structure},
      {"NIfTI round trip", nifti_round_trip},
  };
  std::vector<std::size_t> chosen;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(all.size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
      return 2;
    }
    chosen.push_back(static_cast<std::size_t>(n));
  }
  if (chosen.empty())
    for (std::size_t n = 1; n <= all.size(); ++n) chosen.push_back(n);

  int failures = 0;
  for (std::size_t n : chosen) {
    Outcome o;
    try {
      o = all[n - 1].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu %s: %s (%s)\n", n, o.pass ? "PASS" : "FAIL", all[n - 1].title, o.detail.c_str());
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
