#include <algorithm>
#include <random>

#include "doctest.h"
#include "mrieval/error.hpp"
#include "mrieval/qc_gate.hpp"
#include "mrieval/report.hpp"
#include "support.hpp"

using namespace mrieval;

namespace {

QcRecord uniform_record(const std::string& id, double score) {
  QcRecord r{id, {}};
  for (const auto& name : default_qc_regions()) r.scores[name] = score;
  return r;
}

/// `total` records, the first `failing` with one region at 0.60.
std::vector<QcRecord> with_failures(std::size_t total, std::size_t failing) {
  std::vector<QcRecord> out;
  for (std::size_t i = 0; i < total; ++i) {
    auto r = uniform_record("s" + std::to_string(i), 0.9);
    if (i < failing) r.scores[default_qc_regions()[i % 8]] = 0.60;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<QcRecord> random_records(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.3, 1.0);
  std::vector<QcRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    QcRecord r{"s" + std::to_string(i), {}};
    for (const auto& name : default_qc_regions()) r.scores[name] = std::round(u(rng) * 1000) / 1000;
    out.push_back(std::move(r));
  }
  return out;
}

double min_score(const QcRecord& r) {
  double m = 1.0;
  for (const auto& [_, s] : r.scores) m = std::min(m, s);
  return m;
}

/// Exhaustive scan of k * step for k = 1.., counting failures by min score.
double calibration_oracle(const std::vector<QcRecord>& rs, double target, double step) {
  double best = -1;
  const int kmax = static_cast<int>(std::ceil(1.0 / step - 1e-9)) - 1;
  for (int k = 1; k <= kmax; ++k) {
    const double t = k / std::round(1.0 / step);
    std::size_t fails = 0;
    for (const auto& r : rs) fails += min_score(r) < t;
    if (static_cast<double>(fails) <= target * static_cast<double>(rs.size())) best = t;
  }
  return best;
}

}  // namespace

TEST_CASE("gate_mri uses a strict inequality and lists every failing region") {
  GateConfig cfg;
  CHECK(gate_mri(uniform_record("a", 0.9), cfg).pass);
  CHECK(gate_mri(uniform_record("a", 0.65), cfg).pass);
  auto r = uniform_record("a", 0.9);
  r.scores["thalamus"] = 0.60;
  auto g = gate_mri(r, cfg);
  CHECK(!g.pass);
  CHECK(g.failing_regions == std::vector<std::string>{"thalamus"});
  r.scores["brainstem"] = 0.1;
  CHECK(gate_mri(r, cfg).failing_regions.size() == 2);
}

TEST_CASE("record validation") {
  auto r = uniform_record("a", 0.9);
  r.scores.erase("brainstem");
  CHECK_THROWS_AS(gate_mri(r, GateConfig{}), Error);
  r = uniform_record("a", 0.9);
  r.scores["cerebellum"] = 1.2;
  CHECK_THROWS_AS(gate_mri(r, GateConfig{}), Error);
  r = uniform_record("a", 0.9);
  r.scores["extra"] = 0.5;
  CHECK_THROWS_AS(gate_mri(r, GateConfig{}), Error);
  GateConfig bad;
  bad.threshold = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

// 6 failures of 400 is 98.50%; the published column prints 99.00% for that count.
TEST_CASE("model pass rates for the published failure counts") {
  struct Row {
    std::size_t failed;
    const char* rate;
    Verdict verdict;
  };
  const Row rows[] = {{19, "95.25%", Verdict::Assessable},    {397, "0.75%", Verdict::TooUnreliable},
                      {67, "83.25%", Verdict::TooUnreliable}, {0, "100.00%", Verdict::Assessable},
                      {56, "86.00%", Verdict::TooUnreliable}, {6, "98.50%", Verdict::Assessable},
                      {11, "97.25%", Verdict::Assessable}};
  for (const auto& row : rows) {
    const auto g = gate_model(with_failures(400, row.failed), GateConfig{});
    CHECK(g.failed_mris == row.failed);
    CHECK(g.failed_roi_events == row.failed);
    CHECK(g.pass_rate == static_cast<double>(400 - row.failed) / 400.0);
    CHECK(format_percent(g.pass_rate) == row.rate);
    CHECK(g.verdict == row.verdict);
  }
}

TEST_CASE("gate_model invariants over random record sets") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rs = random_records(rng, 1 + static_cast<std::size_t>(trial) * 3);
    GateConfig cfg;
    cfg.threshold = 0.3 + 0.01 * trial;
    const auto g = gate_model(rs, cfg);
    CHECK(g.failed_mris <= g.failed_roi_events);
    CHECK(g.failed_roi_events <= 8 * g.failed_mris);
    CHECK(g.pass_rate == static_cast<double>(g.total - g.failed_mris) / static_cast<double>(g.total));
    CHECK((g.verdict == Verdict::Assessable) == (g.pass_rate >= cfg.min_model_pass_rate));
    CHECK(g.failed_mris == count_failed_mris(rs, cfg.threshold));
    std::size_t events = 0;
    for (const auto& [_, n] : g.per_region_fail_counts) events += n;
    CHECK(events == g.failed_roi_events);

    const auto dist = qc_distribution(rs, cfg.threshold);
    for (const auto& [region, s] : dist) {
      CHECK(s.fraction_below * static_cast<double>(rs.size()) ==
            doctest::Approx(static_cast<double>(g.per_region_fail_counts.at(region))));
      CHECK(s.min <= s.q1);
      CHECK(s.q1 <= s.median);
      CHECK(s.median <= s.q3);
      CHECK(s.q3 <= s.max);
    }

    GateConfig higher = cfg;
    higher.threshold += 0.05;
    const auto h = gate_model(rs, higher);
    CHECK(h.failed_mris >= g.failed_mris);
    CHECK(h.failed_roi_events >= g.failed_roi_events);
  }
  CHECK_THROWS_AS(gate_model(std::vector<QcRecord>{}, GateConfig{}), Error);
}

TEST_CASE("calibration on all-perfect scores picks the top grid value") {
  std::vector<QcRecord> rs;
  for (int i = 0; i < 20; ++i) rs.push_back(uniform_record("s" + std::to_string(i), 1.0));
  const auto c = calibrate_threshold(rs, 0.05);
  CHECK(c.threshold == 0.99);
  CHECK(c.failed == 0);
}

TEST_CASE("calibration reproduces 0.65 and 4.75% on a constructed real set") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> low(0.60, 0.6499), high(0.65, 1.0);
  std::vector<QcRecord> rs;
  for (std::size_t i = 0; i < 400; ++i) {
    QcRecord r{"s" + std::to_string(i), {}};
    for (const auto& name : default_qc_regions()) r.scores[name] = high(rng);
    if (i < 19) r.scores[default_qc_regions()[i % 8]] = low(rng);
    else r.scores["general_grey_matter"] = 0.65;
    rs.push_back(std::move(r));
  }
  const auto c = calibrate_threshold(rs, 0.05, 0.01);
  CHECK(c.threshold == 0.65);
  CHECK(c.failed == 19);
  CHECK(c.realized_fail_fraction == 0.0475);
  CHECK(format_percent(1.0 - c.realized_fail_fraction) == "95.25%");
  CHECK(static_cast<double>(count_failed_mris(rs, c.threshold + 0.01)) / 400.0 > 0.05);
  CHECK(calibrate_threshold(rs, 0.05, 0.01).threshold == c.threshold);
}

TEST_CASE("calibration matches an exhaustive grid-scan oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto rs = random_records(rng, 10 + static_cast<std::size_t>(trial) * 5);
    const double target = 0.05 + 0.01 * (trial % 10);
    const double step = trial % 2 ? 0.01 : 0.02;
    const double expect = calibration_oracle(rs, target, step);
    if (expect < 0) {
      CHECK_THROWS_AS(calibrate_threshold(rs, target, step), Error);
      continue;
    }
    const auto c = calibrate_threshold(rs, target, step);
    CHECK(c.threshold == doctest::Approx(expect).epsilon(1e-12));
    CHECK(c.realized_fail_fraction <= target);
    if (c.threshold + step < 1.0 - 1e-9)
      CHECK(static_cast<double>(count_failed_mris(rs, c.threshold + step)) / static_cast<double>(rs.size()) > target);
  }
}

TEST_CASE("calibration with ten records and one low score stays below every minimum") {
  auto rs = with_failures(10, 0);
  rs[3].scores["putamen_pallidum"] = 0.3;
  const auto c = calibrate_threshold(rs, 0.05);
  CHECK(c.threshold == 0.3);
  CHECK(c.failed == 0);
  rs[3].scores["putamen_pallidum"] = 0.005;
  CHECK_THROWS_AS(calibrate_threshold(rs, 0.05), Error);
  CHECK_THROWS_AS(calibrate_threshold(rs, 0.0), Error);
  CHECK_THROWS_AS(calibrate_threshold(std::vector<QcRecord>{}, 0.05), Error);
}

TEST_CASE("grid values are the decimal doubles") {
  CHECK(grid_value(65, 0.01) == 0.65);
  CHECK(grid_value(7, 0.1) == 0.7);
  CHECK(grid_value(3, 0.25) == 0.75);
}

TEST_CASE("linear-interpolation quantiles") {
  CHECK(quantile_linear({0.0, 1.0}, 0.5) == 0.5);
  CHECK(quantile_linear({4.0, 4.0, 4.0}, 0.25) == 4.0);
  CHECK(quantile_linear({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(quantile_linear({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile_linear({3, 1, 2}, 1.0) == 3.0);
  std::vector<QcRecord> rs{uniform_record("a", 0.0), uniform_record("b", 1.0)};
  const auto d = qc_distribution(rs, 0.65);
  CHECK(d.at("thalamus").median == 0.5);
  CHECK(d.at("thalamus").fraction_below == 0.5);
}

TEST_CASE("QC CSV round-trips and rejects wrong region columns") {
  std::mt19937_64 rng(4);
  const auto rs = random_records(rng, 12);
  const auto back = qc_records_from_csv(parse_csv(qc_records_to_csv(rs)));
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(back[i].subject_id == rs[i].subject_id);
    CHECK(back[i].scores == rs[i].scores);
  }
  const std::vector<std::string> three{"a", "b", "c"};
  const auto shuffled = qc_records_from_csv(parse_csv("subject_id,c,a,b\nx,0.1,0.2,0.3\n"), three);
  CHECK(shuffled[0].scores.at("a") == 0.2);
  CHECK_THROWS_AS(qc_records_from_csv(parse_csv("subject_id,a,b\nx,0.1,0.2\n"), three), Error);
  CHECK_THROWS_AS(qc_records_from_csv(parse_csv("subject_id,a,b,c\nx,0.1,0.2,1.5\n"), three), Error);
  CHECK_THROWS_AS(qc_records_from_csv(parse_csv("subject_id,a,b,c\nx,0.1,0.2,zz\n"), three), Error);
}

TEST_CASE("verdict strings") {
  CHECK(to_string(Verdict::TooUnreliable) == "too-unreliable");
  CHECK(parse_verdict("assessable") == Verdict::Assessable);
  CHECK_THROWS_AS(parse_verdict("maybe"), Error);
}
