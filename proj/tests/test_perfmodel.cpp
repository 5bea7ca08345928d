#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "aserv/perfmodel.hpp"
#include "temp_dir.hpp"

using namespace aserv;

namespace {

const std::vector<TrainingPoint> kProbing = {{3, 0.06}, {5, 0.22}, {10, 0.606}};
const std::vector<TrainingPoint> kListing = {{3, 0.3}, {5, 0.404}, {10, 0.664}};

// Closed-form line through the normal equations, written out independently.
OverheadFit normal_equations(const std::vector<TrainingPoint>& pts) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    n += 1;
    sx += p.kprime;
    sy += p.fo;
    sxx += p.kprime * p.kprime;
    sxy += p.kprime * p.fo;
  }
  const double det = n * sxx - sx * sx;
  return {(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

}  // namespace

TEST_CASE("overhead fit matches the normal equations") {
  for (const auto& pts : {kProbing, kListing}) {
    const auto fit = fit_overhead(pts);
    const auto ref = normal_equations(pts);
    CHECK(fit.theta1 == doctest::Approx(ref.theta1).epsilon(1e-12));
    CHECK(fit.theta2 == doctest::Approx(ref.theta2).epsilon(1e-12));
  }
  const std::vector<TrainingPoint> line = {{1, 1}, {2, 2}};
  const auto f = fit_overhead(line);
  CHECK(f.theta1 == doctest::Approx(1.0));
  CHECK(f.theta2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("degenerate training data is rejected") {
  const std::vector<TrainingPoint> one = {{3, 0.1}};
  const std::vector<TrainingPoint> same = {{3, 0.1}, {3, 0.2}};
  CHECK_THROWS_AS(fit_overhead(one), std::invalid_argument);
  CHECK_THROWS_AS(fit_overhead(same), std::invalid_argument);
}

TEST_CASE("damped refinement converges to the least-squares line") {
  const auto ols = fit_overhead(kProbing);
  const auto refined = refine_damped(kProbing, OverheadFit{1.0, 5.0});
  CHECK(refined.theta1 == doctest::Approx(ols.theta1).epsilon(1e-6));
  CHECK(refined.theta2 == doctest::Approx(ols.theta2).epsilon(1e-6));
}

TEST_CASE("fit recovers a noisy linear overhead") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.001);
  std::vector<TrainingPoint> pts;
  for (int k = 2; k <= 30; ++k) pts.push_back({double(k), 0.04 * k + 0.3 + noise(rng)});
  const auto fit = fit_overhead(pts);
  CHECK(fit.theta1 == doctest::Approx(0.04).epsilon(0.01));
  CHECK(fit.theta2 == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("query latency prediction reproduces the probing and listing rows") {
  auto fit = fit_overhead(kProbing);
  LatencyModel m{0.0, 0.574, fit.theta1, fit.theta2, 15.0, 19.0};
  const double probing = predict_query_latency(m);
  CHECK(std::abs(probing - 1.88) <= 0.02);
  CHECK(std::abs(prediction_accuracy(probing, 1.72) - 0.905) <= 0.01);

  fit = fit_overhead(kListing);
  m = LatencyModel{0.0, 1.07, fit.theta1, fit.theta2, 15.0, 19.0};
  const double listing = predict_query_latency(m);
  CHECK(std::abs(listing - 2.2) <= 0.02);
  CHECK(std::abs(prediction_accuracy(listing, 2.52) - 0.873) <= 0.01);
}

TEST_CASE("insert verdict and prediction accuracy") {
  CHECK(predict_insert_latency(2.25, 15).ok);
  CHECK(predict_insert_latency(15, 15).ok);
  CHECK_FALSE(predict_insert_latency(16, 15).ok);
  CHECK(predict_insert_latency(2.25, 15).seconds == 2.25);
  CHECK(prediction_accuracy(2.25, 2.35) == doctest::Approx(1 - 0.1 / 2.35));
  CHECK(std::abs(prediction_accuracy(2.25, 2.35) - 0.96) <= 0.005);
  CHECK(prediction_accuracy(10, 2) == 0.0);
  CHECK(prediction_accuracy(2, 2) == 1.0);
  CHECK_THROWS_AS(prediction_accuracy(1, 0), std::invalid_argument);
}

TEST_CASE("workload names") {
  CHECK(parse_workload("probe") == Workload::probe);
  CHECK(parse_workload("listing") == Workload::list);
  CHECK(parse_workload("stretching") == Workload::stretch);
  CHECK(parse_workload("insertion") == Workload::insert);
  CHECK(to_string(Workload::list) == "list");
  CHECK_THROWS_AS(parse_workload("scan"), std::invalid_argument);
}

TEST_CASE("training files parse and round-trip") {
  std::istringstream in("workload,kprime,seconds\n# comment\n\nprobe,base,0.574\nprobe,3,0.06\r\n"
                        "probe\t5\t0.22\nprobe,actual,1.72\ninsert,base,2.25\n");
  const auto set = parse_training(in);
  REQUIRE(set.count(Workload::probe) == 1);
  const auto& p = set.at(Workload::probe);
  CHECK(p.base == 0.574);
  CHECK(p.actual == 1.72);
  REQUIRE(p.points.size() == 2);
  CHECK(p.points[1].kprime == 5);
  CHECK(p.points[1].fo == 0.22);

  test::TempDir dir;
  write_training_file(dir.path() / "t.tsv", set);
  const auto back = read_training_file(dir.path() / "t.tsv");
  CHECK(back.at(Workload::probe).points.size() == 2);
  CHECK(back.at(Workload::insert).base == 2.25);

  for (const char* bad : {"probe,3\n", "probe,0.5,1\n", "probe,x,1\n", "nope,base,1\n", "probe,base,abc\n"}) {
    std::istringstream b(bad);
    CHECK_THROWS_AS(parse_training(b), std::invalid_argument);
  }
  CHECK_THROWS(read_training_file(dir.path() / "missing.tsv"));
}

TEST_CASE("report over the shipped training table") {
  const auto set = read_training_file(ASERV_DATA_DIR "/latency_training.tsv");
  const auto preds = predict_all(set, 19, 15);
  REQUIRE(preds.size() == 4);
  CHECK(preds[0].workload == Workload::insert);
  CHECK(preds[0].te == 2.25);
  CHECK(preds[0].ok);
  CHECK_FALSE(preds[0].fit);
  CHECK(std::abs(preds[1].te - 1.88) <= 0.02);
  CHECK(std::abs(preds[2].te - 2.2) <= 0.02);
  for (const auto& p : preds) CHECK(p.ok);
  const auto text = format_report(preds, 19, 15);
  CHECK(text.starts_with("k: 19\nct: 15\n"));
  CHECK(text.find("[probe]\ntheta1: 0.0778\ntheta2: -0.1717\nT_e: 1.88\nconstraint: ok\nT_a: 1.72\nacc_p: 0.906\n") !=
        std::string::npos);
  CHECK(text.find("[list]\ntheta1: 0.0520\ntheta2: 0.1440\nT_e: 2.20\n") != std::string::npos);
  CHECK(predict_all(set, 19, 1.0)[2].ok == false);
}

TEST_CASE("measured parallel times are positive and ordered") {
  MeasureConfig cfg;
  cfg.gen.objects = 2000;
  cfg.gen.cycles = 12;
  cfg.gen.p = 0.05;
  cfg.gen.m = 21;
  cfg.partitions = 100;
  cfg.k = 3;
  cfg.repetitions = 3;
  const auto insert = measure_parallel_time(Workload::insert, cfg);
  CHECK(insert.samples.size() == 3);
  CHECK(insert.median_s > 0);
  const auto probe = measure_parallel_time(Workload::probe, cfg);
  const auto list = measure_parallel_time(Workload::list, cfg);
  const auto stretch = measure_parallel_time(Workload::stretch, cfg);
  CHECK(probe.median_s > 0);
  CHECK(stretch.median_s > 0);
  CHECK(probe.median_s < list.median_s);
}
