#include "doctest.h"

#include "loolsm/error.hpp"
#include "loolsm/harness.hpp"

#include <cmath>
#include <sstream>

using namespace loolsm;
using namespace loolsm::harness;
using contracts::PayoffKind;

namespace {

ExperimentConfig parse(const std::string& text, Experiment e = Experiment::Comparison) {
  std::istringstream is(text);
  return parse_config(is, e, Scale::Desk);
}

std::string csv_of(const ExperimentReport& r) {
  std::ostringstream os;
  write_csv(r, os);
  return os.str();
}

ExperimentConfig small_put_comparison() {
  ExperimentConfig c = ExperimentConfig::defaults(PayoffKind::PutSingle, Experiment::Comparison);
  c.paths = 2000;
  c.n_mc = {4};
  c.lattice_steps = 2000;
  return c;
}

}  // namespace

TEST_CASE("defaults reproduce the shipped cases") {
  const auto put = ExperimentConfig::defaults(PayoffKind::PutSingle, Experiment::Comparison);
  CHECK(put.keys == std::vector<double>{80, 90, 100, 110, 120});
  CHECK(put.basis_m == std::vector<std::size_t>{5});
  CHECK(put.uses_reference_parameters());
  const auto best = ExperimentConfig::defaults(PayoffKind::BestOfCall, Experiment::Comparison, Scale::Paper);
  CHECK(best.n_mc == std::vector<std::size_t>{100});
  CHECK(best.dates == 9);
  CHECK(best.schedule().time(0) == doctest::Approx(1.0 / 3.0));
  CHECK(best.model_for(110).spot == std::vector<double>{110, 110});
  CHECK(best.payoff_for(110).strike == 100);
  const auto basket = ExperimentConfig::defaults(PayoffKind::BasketCall, Experiment::Convergence, Scale::Paper);
  CHECK(basket.pool_size == 1440000);
  CHECK(basket.basis_m == std::vector<std::size_t>{6, 10, 16});
  CHECK(basket.control_variate);
  CHECK_NOTHROW(basket.validate(Experiment::Convergence));
}

TEST_CASE("config parsing") {
  const auto c = parse(
      "# put, two strikes\n"
      "case = put\n"
      "keys = 90, 100   # trailing comment\n"
      "paths=1000\n"
      "n_mc = 3\n"
      "estimators = LSM, LOOLSM\n"
      "control_variate = yes\n"
      "seed = 7\n");
  CHECK(c.kind == PayoffKind::PutSingle);
  CHECK(c.keys == std::vector<double>{90, 100});
  CHECK(c.paths == 1000);
  CHECK(c.n_mc == std::vector<std::size_t>{3});
  CHECK(c.estimators.size() == 2);
  CHECK(c.control_variate);
  CHECK(c.seed == 7);
  CHECK(c.vol == 0.2);

  CHECK_THROWS_AS(parse("keys = 100\n"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("case = put\nbogus = 1\n"), doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_AS(parse("case = put\npaths = 1001\n"), ConfigError);
  CHECK_THROWS_AS(parse("case = put\npaths = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse("case = bestof\nbasis_m = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse("case = put\nestimators = LSM, FOO\n"), ConfigError);
  CHECK_THROWS_AS(parse("case = put\njust words\n"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("case = put\npool_size = 1000\nn_mc = 3\n", Experiment::Convergence),
                       doctest::Contains("divisible"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/loolsm.cfg", Experiment::Comparison, Scale::Desk), ConfigError);
}

TEST_CASE("reference values") {
  auto put = ExperimentConfig::defaults(PayoffKind::PutSingle, Experiment::Comparison);
  const auto r = reference_values(put, 100);
  CHECK(std::fabs(r.bermudan - 6.585) < 1e-3);
  CHECK(std::fabs(r.european - 6.330) < 1e-3);

  auto best = ExperimentConfig::defaults(PayoffKind::BestOfCall, Experiment::Comparison);
  CHECK(reference_values(best, 100).bermudan == 13.902);
  CHECK(std::fabs(reference_values(best, 100).european - 11.196) < 1e-3);
  CHECK_THROWS_AS(reference_values(best, 95), ConfigError);
  best.vol = 0.3;
  CHECK_THROWS_AS(reference_values(best, 100), ConfigError);
}

TEST_CASE("seeds are distinct per set and role") {
  const auto a = set_seed(1, PayoffKind::PutSingle, 0);
  CHECK(a != set_seed(1, PayoffKind::PutSingle, 1));
  CHECK(a != policy_seed(1, PayoffKind::PutSingle, 0));
  CHECK(a != set_seed(1, PayoffKind::BasketCall, 0));
  CHECK(a != pool_seed(1, PayoffKind::PutSingle));
  CHECK(a == set_seed(1, PayoffKind::PutSingle, 0));
}

TEST_CASE("slope fit") {
  SUBCASE("exact line") {
    const auto f = fit_bias_slope({{0.001, 0.002, 1.0}, {0.002, 0.004, 2.0}, {0.004, 0.008, 1.0}});
    CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::fabs(f.intercept) < 1e-15);
    CHECK(f.r2 == doctest::Approx(1.0));
  }
  SUBCASE("flat zero") {
    const auto f = fit_bias_slope({{1, 0, 1}, {2, 0, 1}, {3, 0, 1}});
    CHECK(f.slope == 0.0);
    CHECK(f.intercept == 0.0);
  }
  SUBCASE("known-variance standard errors against the normal equations") {
    const std::vector<SlopePoint> pts{{1, 1.2, 4}, {2, 1.9, 1}, {3, 3.4, 2}, {5, 4.8, 0.5}};
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    for (const auto& p : pts) {
      Eigen::Vector2d x(1.0, p.x);
      a += p.w * x * x.transpose();
    }
    const Eigen::Matrix2d cov = a.inverse();
    const auto f = fit_bias_slope(pts);
    CHECK(f.intercept_se == doctest::Approx(std::sqrt(cov(0, 0))).epsilon(1e-12));
    CHECK(f.slope_se == doctest::Approx(std::sqrt(cov(1, 1))).epsilon(1e-12));
    CHECK(f.points == 4);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fit_bias_slope({{1, 0, 1}, {1, 2, 1}, {1, 3, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_bias_slope({{1, 0, 1}, {2, 2, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_bias_slope({{1, 0, 1}, {2, 2, 0}, {3, 1, 1}}), std::invalid_argument);
  }
}

TEST_CASE("decimal formatting") {
  CHECK(format_decimal(0.0) == "0");
  CHECK(format_decimal(6.585) == "6.585");
  CHECK(format_decimal(-0.0024) == "-0.0024");
  CHECK(format_decimal(1.0 / 3.0) == "0.3333333333");
  CHECK(format_decimal(1440000.0) == "1440000");
  CHECK(format_decimal(1.5e-7) == "0.00000015");
  CHECK(format_decimal(std::nan("")) == "");
  CHECK(format_decimal(123456789012.0) == "123456789000");
}

TEST_CASE("CSV: header only, round trip") {
  ExperimentReport empty;
  CHECK(csv_of(empty) ==
        "case,key,estimator,M,N,n_mc,mean_offset,std,se_mean,mean_bias,bias_se,flips_total,min_rank,wall_ms\n");

  ExperimentReport r;
  ReportRow a;
  a.case_name = "put";
  a.key = 100;
  a.estimator = "LOOLSM";
  a.m = 5;
  a.n = 40000;
  a.n_mc = 100;
  a.mean_offset = -0.00312345678912;
  a.std = 0.0201;
  a.se_mean = 0.00201;
  a.mean_bias = 0.0024;
  a.bias_se = 0.00014;
  a.flips_total = 123;
  a.min_rank = 5;
  ReportRow b = a;
  b.estimator = "EUROPEAN";
  b.m = 0;
  b.mean_bias = std::nan("");
  b.bias_se = std::nan("");
  r.rows = {a, b};
  std::istringstream is(csv_of(r));
  const auto back = read_csv(is);
  REQUIRE(back.size() == 2);
  CHECK(back[0].mean_offset == doctest::Approx(a.mean_offset).epsilon(1e-9));
  CHECK(back[0].std == a.std);
  CHECK(back[0].bias_se == a.bias_se);
  CHECK(back[0].flips_total == 123);
  CHECK(std::isnan(back[1].mean_bias));
  CHECK(back[1].estimator == "EUROPEAN");
  std::ostringstream again;
  write_csv(ExperimentReport{back, {}, {}}, again);
  CHECK(again.str() == csv_of(r));
}

TEST_CASE("comparison experiment: cardinality, reproducibility, control-variate invariance") {
  ExperimentConfig c = small_put_comparison();
  const ExperimentReport r = run_experiment1(c);
  CHECK(r.rows.size() == 20);
  std::size_t european = 0;
  for (const auto& row : r.rows) {
    if (row.estimator == "EUROPEAN") {
      ++european;
      CHECK(std::isnan(row.mean_bias));
      continue;
    }
    CHECK(row.min_rank == 5);
    if (row.estimator == "LSM") CHECK(row.mean_bias == 0.0);
  }
  CHECK(european == 5);

  ExperimentConfig threaded = c;
  threaded.threads = 3;
  const std::string bytes = csv_of(r);
  CHECK(csv_of(run_experiment1(c)) == bytes);
  CHECK(csv_of(run_experiment1(threaded)) == bytes);

  ExperimentConfig cv = c;
  cv.control_variate = true;
  const ExperimentReport rc = run_experiment1(cv);
  REQUIRE(rc.rows.size() == r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (r.rows[i].estimator == "EUROPEAN") continue;
    CHECK(std::fabs(rc.rows[i].mean_bias - r.rows[i].mean_bias) < 1e-12);
  }
}

TEST_CASE("single set aggregation leaves spread fields empty") {
  ExperimentConfig c = small_put_comparison();
  c.keys = {100};
  c.n_mc = {1};
  c.estimators = {engine::Mode::LOOLSM};
  const ExperimentReport r = run_experiment1(c);
  REQUIRE(r.rows.size() == 2);
  CHECK(std::isnan(r.rows[0].std));
  CHECK(std::isnan(r.rows[0].bias_se));
  CHECK(std::isfinite(r.rows[0].mean_bias));
}

TEST_CASE("convergence experiment on a small pool") {
  ExperimentConfig c = ExperimentConfig::defaults(PayoffKind::PutSingle, Experiment::Convergence);
  c.pool_size = 24000;
  c.n_mc = {4, 12, 40};
  c.lattice_steps = 2000;
  const ExperimentReport r = run_experiment2(c);
  CHECK(r.rows.size() == 3 * 3 * 2);
  REQUIRE(r.slopes.size() == 1);
  CHECK(r.slopes[0].fit.points == 9);
  for (const auto& row : r.rows) CHECK(row.n == 24000 / row.n_mc);
  CHECK(csv_of(run_experiment2(c)) == csv_of(r));

  ExperimentConfig off = c;
  off.control_variate = false;
  const ExperimentReport ro = run_experiment2(off);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(std::fabs(ro.rows[i].mean_bias - r.rows[i].mean_bias) < 1e-12);
  }

  const auto pool = market::generate_paths(c.model_for(80), c.schedule(), 24000,
                                           pool_seed(c.seed, c.kind), true);
  CHECK(csv_of(run_experiment2(c, pool)) == csv_of(r));
  const auto wrong = market::generate_paths(c.model_for(80), c.schedule(), 12000, 1, true);
  CHECK_THROWS_AS(run_experiment2(c, wrong), ConfigError);
}
