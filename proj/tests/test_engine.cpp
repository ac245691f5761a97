#include "doctest.h"

#include "loolsm/engine.hpp"
#include "loolsm/error.hpp"
#include "loolsm/oracles.hpp"

#include <cmath>

using namespace loolsm;
using namespace loolsm::engine;
using contracts::PayoffKind;
using contracts::PayoffSpec;

namespace {

market::GbmModel put_model(double vol = 0.2) {
  return market::GbmModel::uniform(1, 100.0, 0.05, 0.02, vol, 0.0);
}

PayoffSpec put(double k) { return PayoffSpec{PayoffKind::PutSingle, k, {}, true}; }

// Three paths, two dates. Date 0 has states x = (-4, 0, 2) and a constant
// payout z; the terminal value is z + (-4, 4, 1).
DateSource toy_source(double z) {
  return [z](std::size_t d) {
    DateData data;
    if (d == 0) {
      data.design.resize(3, 2);
      data.design << 1, -4, 1, 0, 1, 2;
      data.payout = Eigen::Vector3d::Constant(z);
    } else {
      data.design = Eigen::MatrixXd::Ones(3, 1);
      data.payout = Eigen::Vector3d(z - 4.0, z + 4.0, z + 1.0);
    }
    return data;
  };
}

}  // namespace

TEST_CASE("decide_continue") {
  CHECK(decide_continue(5.0, 7.0, true));
  CHECK(decide_continue(0.0, -1.0, true));
  CHECK_FALSE(decide_continue(0.0, -1.0, false));
  CHECK(decide_continue(5.0, 5.0, true));
  CHECK_FALSE(decide_continue(5.0, 4.999, true));
}

TEST_CASE("mode names") {
  CHECK(parse_mode("loolsm") == Mode::LOOLSM);
  CHECK(parse_mode("LSM-2") == Mode::LSM2);
  CHECK(to_string(Mode::European) == "EUROPEAN");
  CHECK_THROWS_AS(parse_mode("LS"), std::invalid_argument);
}

TEST_CASE("toy cross-section: LSM continues the outlier, LOOLSM exercises it") {
  const double z = 3.0;
  std::vector<DateSnapshot> trace;
  EngineOptions opts;
  opts.trace = &trace;
  const Mode modes[] = {Mode::LSM, Mode::LOOLSM};
  const auto out = backward_induction(3, 2, toy_source(z), modes, true, opts);
  REQUIRE(trace.size() == 2);
  const DateSnapshot& lsm = trace[0];
  const DateSnapshot& loo = trace[1];
  CHECK(lsm.mode == Mode::LSM);
  CHECK(lsm.fitted(1) - z == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(loo.loo(1) - z == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  CHECK(lsm.continued[1]);
  CHECK_FALSE(loo.continued[1]);
  CHECK(out[0].value(1) == doctest::Approx(z + 4.0));
  CHECK(out[1].value(1) == doctest::Approx(z));

  // Path 0 flips the other way: the refit without it, 4 - 1.5 x, predicts +10
  // at x = -4 where the full fit gives -3.
  CHECK(loo.loo(0) - z == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_FALSE(lsm.continued[0]);
  CHECK(loo.continued[0]);
  CHECK(lsm.continued[2]);
  CHECK(loo.continued[2]);
  CHECK(out[0].flip_counts[0] == 2);
  CHECK(out[1].flip_counts[0] == 2);
  CHECK(out[0].flip_counts[1] == 0);
  CHECK(out[0].ranks[0] == 2);
}

TEST_CASE("zero payout always continues under the nonnegative override") {
  const Mode modes[] = {Mode::LSM, Mode::LOOLSM};
  const auto out = backward_induction(3, 2, toy_source(0.0), modes, true);
  for (const auto& o : out) {
    CHECK(o.flip_counts[0] == 0);
    CHECK(o.value(0) == -4.0);
  }
}

TEST_CASE("rank-zero regression is a numerical error") {
  DateSource zero = [](std::size_t) {
    DateData d;
    d.design = Eigen::MatrixXd::Zero(4, 2);
    d.payout = Eigen::VectorXd::Ones(4);
    return d;
  };
  const Mode modes[] = {Mode::LSM};
  CHECK_THROWS_AS(backward_induction(4, 2, zero, modes, true), NumericalError);
}

TEST_CASE("single exercise date reduces every estimator to the European one") {
  const market::ExerciseSchedule s = market::ExerciseSchedule::uniform(1, 1.0);
  const auto paths = market::generate_paths(put_model(), s, 2000, 3, true);
  const auto policy_paths = market::generate_paths(put_model(), s, 2000, 4, true);
  const auto basis = contracts::basis_family(PayoffKind::PutSingle, 5);
  const auto euro = european_mc_price(paths, put(100), 0.05);
  const auto both = price_lsm_and_loolsm(paths, put(100), basis, 0.05);
  const auto two = price_two_pass(policy_paths, paths, put(100), basis, 0.05);
  CHECK(both[0].result.price == euro.price);
  CHECK(both[1].result.price == euro.price);
  CHECK(two.price == euro.price);
  CHECK(both[0].policy.coefficients.empty());
  CHECK(both[0].result.std_error == euro.std_error);
}

TEST_CASE("zero-volatility European put") {
  const market::ExerciseSchedule s = market::ExerciseSchedule::uniform(5, 1.0);
  const auto paths = market::generate_paths(put_model(0.0), s, 10, 1, true);
  const auto euro = european_mc_price(paths, put(120), 0.05);
  CHECK(euro.price == doctest::Approx(std::exp(-0.05) * (120 - 100 * std::exp(0.03))).epsilon(1e-13));
  CHECK(euro.mode == Mode::European);
  CHECK(euro.std_error < 1e-12);
}

TEST_CASE("seeded put run: decomposition identity and flip characterisation") {
  const market::ExerciseSchedule s = market::ExerciseSchedule::uniform(5, 1.0);
  const auto paths = market::generate_paths(put_model(), s, 400, 17, true);
  const auto basis = contracts::basis_family(PayoffKind::PutSingle, 5);
  std::vector<DateSnapshot> trace;
  EngineOptions opts;
  opts.trace = &trace;
  const auto both = price_lsm_and_loolsm(paths, put(100), basis, 0.05, opts);
  REQUIRE(trace.size() == 8);

  std::size_t flips_seen = 0;
  for (const DateSnapshot& snap : trace) {
    std::size_t flips = 0;
    for (Eigen::Index n = 0; n < snap.payout.size(); ++n) {
      const double c = snap.fitted(n);
      const double cp = snap.loo(n);
      const double v = snap.target(n);
      const double h = snap.leverage(n);
      const double z = snap.payout(n);
      CHECK(std::fabs((1.0 - h) * cp + h * v - c) <= 1e-10 * std::max(1.0, std::fabs(c)));

      const bool lsm_cont = decide_continue(z, c, true);
      const bool loo_cont = decide_continue(z, cp, true);
      if (lsm_cont != loo_cont) ++flips;
      if (z > 0.0 && !snap.fallback[static_cast<std::size_t>(n)]) {
        const double a = c - z;
        const double b = h * (v - z);
        const bool d_plus = 0.0 <= a && a < b;
        const bool d_minus = 0.0 > a && a >= b;
        // Skip rows where rounding could move the boundary.
        if (std::fabs(a) > 1e-9 && std::fabs(a - b) > 1e-9) {
          CHECK((lsm_cont != loo_cont) == (d_plus || d_minus));
          if (d_plus) CHECK((lsm_cont && !loo_cont));
          if (d_minus) CHECK((!lsm_cont && loo_cont));
        }
      } else if (z == 0.0) {
        CHECK(lsm_cont);
        CHECK(loo_cont);
      }
    }
    const auto& counts = snap.mode == Mode::LSM ? both[0].result.flip_counts : both[1].result.flip_counts;
    CHECK(counts[snap.date] == flips);
    flips_seen += flips;
  }
  CHECK(flips_seen > 0);
  CHECK(both[1].result.fallback_count == 0);
}

TEST_CASE("per-path bias bound with one regression date") {
  const market::ExerciseSchedule s = market::ExerciseSchedule::uniform(2, 0.5);
  const auto paths = market::generate_paths(put_model(), s, 200, 8, true);
  const auto basis = contracts::basis_family(PayoffKind::PutSingle, 6);
  std::vector<DateSnapshot> trace;
  EngineOptions opts;
  opts.trace = &trace;
  const auto both = price_lsm_and_loolsm(paths, put(100), basis, 0.05, opts);
  const auto bias = lookahead_bias(both[0].result, both[1].result);
  const DateSnapshot& snap = trace[0];
  std::size_t differing = 0;
  for (Eigen::Index n = 0; n < 200; ++n) {
    const double z = snap.payout(n);
    const double gap = std::fabs(snap.target(n) - z);
    const bool inside = std::fabs(snap.fitted(n) - z) <= snap.leverage(n) * gap;
    CHECK(std::fabs(bias.per_path(n)) <= (inside ? gap : 0.0) + 1e-12);
    if (bias.per_path(n) != 0.0) ++differing;
  }
  CHECK(differing == both[0].result.flip_counts[0]);
}

TEST_CASE("pricing is deterministic and thread-independent") {
  const market::ExerciseSchedule s = market::ExerciseSchedule::uniform(5, 1.0);
  const auto paths = market::generate_paths(put_model(), s, 1000, 5, true);
  const auto basis = contracts::basis_family(PayoffKind::PutSingle, 5);
  EngineOptions four;
  four.threads = 4;
  const auto a = price_backward(paths, put(100), basis, 0.05, Mode::LOOLSM);
  const auto b = price_backward(paths, put(100), basis, 0.05, Mode::LOOLSM, four);
  const auto both = price_lsm_and_loolsm(paths, put(100), basis, 0.05);
  CHECK(a.result.per_path_value == b.result.per_path_value);
  CHECK(a.result.per_path_value == both[1].result.per_path_value);
  const auto lsm = price_backward(paths, put(100), basis, 0.05, Mode::LSM);
  CHECK(lsm.result.per_path_value == both[0].result.per_path_value);
  CHECK(a.result.price == doctest::Approx(a.result.per_path_value.mean()).epsilon(1e-15));
  CHECK_THROWS_AS(price_backward(paths, put(100), basis, 0.05, Mode::LSM2), std::invalid_argument);
}

TEST_CASE("two-pass self-application reproduces LSM") {
  const market::ExerciseSchedule s = market::ExerciseSchedule::uniform(5, 1.0);
  const auto paths = market::generate_paths(put_model(), s, 2000, 21, true);
  const auto basis = contracts::basis_family(PayoffKind::PutSingle, 5);
  const auto lsm = price_backward(paths, put(100), basis, 0.05, Mode::LSM);
  const auto two = price_two_pass(paths, paths, put(100), basis, 0.05);
  CHECK(two.mode == Mode::LSM2);
  CHECK(std::fabs(two.price - lsm.result.price) < 1e-10);

  const auto other = market::generate_paths(put_model(), market::ExerciseSchedule::uniform(4, 1.0),
                                            2000, 22, true);
  CHECK_THROWS_AS(price_two_pass(other, paths, put(100), basis, 0.05), std::invalid_argument);
}

TEST_CASE("control variate and bias accounting") {
  const market::ExerciseSchedule s = market::ExerciseSchedule::uniform(5, 1.0);
  const auto paths = market::generate_paths(put_model(), s, 1000, 31, true);
  const auto basis = contracts::basis_family(PayoffKind::PutSingle, 5);
  const auto both = price_lsm_and_loolsm(paths, put(100), basis, 0.05);
  const auto euro = european_mc_price(paths, put(100), 0.05);

  const auto same = apply_control_variate(both[0].result, euro.price, euro);
  CHECK(same.price == both[0].result.price);

  const double exact = oracles::bs_european_put(100, 0.2, 0.05, 0.02, 100, 1.0);
  const auto lsm_cv = apply_control_variate(both[0].result, exact, euro);
  const auto loo_cv = apply_control_variate(both[1].result, exact, euro);
  CHECK(lsm_cv.mode == Mode::LSM);
  CHECK(lsm_cv.price - both[0].result.price == doctest::Approx(exact - euro.price).epsilon(1e-12));
  const auto raw = lookahead_bias(both[0].result, both[1].result);
  const auto adjusted = lookahead_bias(lsm_cv, loo_cv);
  CHECK(std::fabs(raw.mean - adjusted.mean) < 1e-12);
  CHECK(std::fabs(raw.std_error - adjusted.std_error) < 1e-12);

  const auto self = lookahead_bias(both[0].result, both[0].result);
  CHECK(self.mean == 0.0);
  CHECK(self.per_path.cwiseAbs().maxCoeff() == 0.0);

  const auto elsewhere = market::generate_paths(put_model(), s, 1000, 32, true);
  const auto euro2 = european_mc_price(elsewhere, put(100), 0.05);
  CHECK_THROWS_AS(apply_control_variate(both[0].result, exact, euro2), std::invalid_argument);
  const auto lsm2 = price_backward(elsewhere, put(100), basis, 0.05, Mode::LSM);
  CHECK_THROWS_AS(lookahead_bias(both[0].result, lsm2.result), std::invalid_argument);
}

TEST_CASE("antithetic standard error uses pair means") {
  Eigen::VectorXd v(4);
  v << 1.0, 3.0, 5.0, 7.0;
  const auto [mean, se] = mean_and_std_error(v, true);
  CHECK(mean == 4.0);
  // Pair means 2 and 6: sample std 2*sqrt(2), se 2.
  CHECK(se == doctest::Approx(2.0).epsilon(1e-14));
  const auto [m2, se2] = mean_and_std_error(v, false);
  CHECK(m2 == 4.0);
  CHECK(se2 == doctest::Approx(std::sqrt(20.0 / 3.0 / 4.0)).epsilon(1e-14));
}

TEST_CASE("paths priced against the lattice at moderate N") {
  const market::ExerciseSchedule s = market::ExerciseSchedule::uniform(5, 1.0);
  const auto paths = market::generate_paths(put_model(), s, 40000, 2024, true);
  const auto basis = contracts::basis_family(PayoffKind::PutSingle, 5);
  const auto both = price_lsm_and_loolsm(paths, put(100), basis, 0.05);
  const double exact = 6.585;
  CHECK(std::fabs(both[0].result.price - exact) < 4.0 * both[0].result.std_error + 0.01);
  CHECK(std::fabs(both[1].result.price - exact) < 4.0 * both[1].result.std_error + 0.01);
  for (std::size_t d = 0; d + 1 < 5; ++d) CHECK(both[0].result.ranks[d] == 5);
}
