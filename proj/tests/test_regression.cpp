#include "doctest.h"

#include "loolsm/regression.hpp"

#include <cmath>
#include <random>

using namespace loolsm::regression;

namespace {

Eigen::MatrixXd random_design(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < m; ++j) x(i, j) = g(rng);
  }
  return x;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

// Independent oracle: drop row `skip`, refit with Eigen's pivoted QR, predict at the dropped row.
double refit_without(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::Index skip) {
  Eigen::MatrixXd xs(x.rows() - 1, x.cols());
  Eigen::VectorXd ys(x.rows() - 1);
  for (Eigen::Index i = 0, r = 0; i < x.rows(); ++i) {
    if (i == skip) continue;
    xs.row(r) = x.row(i);
    ys(r) = y(i);
    ++r;
  }
  const Eigen::VectorXd beta = xs.colPivHouseholderQr().solve(ys);
  return x.row(skip).dot(beta);
}

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

}  // namespace

TEST_CASE("intercept-only fit averages the response") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd y(4);
  y << 1.0, 2.0, 3.0, 10.0;
  const RegressionFit fit = fit_least_squares(x, y);
  CHECK(fit.rank == 1);
  CHECK(fit.beta(0) == doctest::Approx(4.0).epsilon(1e-14));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(fit.leverage(i) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("three-point toy system: full fit, leave-one-out prediction and residual") {
  Eigen::MatrixXd x(3, 2);
  x << 1, -4, 1, 0, 1, 2;
  Eigen::VectorXd y(3);
  y << -4, 4, 1;
  const RegressionFit fit = fit_least_squares(x, y);
  CHECK(fit.beta(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.beta(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.fitted(0) == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(fit.fitted(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.fitted(2) == doctest::Approx(3.0).epsilon(1e-12));

  const LooPrediction loo = loo_predictions(fit);
  CHECK(loo.fallback_rows.empty());
  CHECK(loo.values(1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  const LooPrediction res = loo_residuals(fit);
  CHECK(res.values(1) == doctest::Approx(14.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("square full-rank design interpolates and falls back everywhere") {
  Eigen::MatrixXd x(3, 3);
  x << 1, 0.5, 2.0, 1, -1.0, 0.3, 1, 2.0, -1.5;
  Eigen::VectorXd y(3);
  y << 0.7, -2.0, 5.0;
  const RegressionFit fit = fit_least_squares(x, y);
  CHECK(fit.rank == 3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(fit.fitted(i) == doctest::Approx(y(i)).epsilon(1e-12));
    CHECK(std::fabs(fit.residuals(i)) < 1e-12);
    CHECK(fit.leverage(i) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const LooPrediction loo = loo_predictions(fit);
  CHECK(loo.fallback_rows.size() == 3);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(loo.values(i) == fit.fitted(i));
}

TEST_CASE("zero residuals leave predictions unchanged") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd x = random_design(rng, 30, 3);
  const Eigen::VectorXd y = x * Eigen::Vector3d(1.0, -2.0, 0.5);
  const RegressionFit fit = fit_least_squares(x, y);
  const LooPrediction loo = loo_predictions(fit);
  for (Eigen::Index i = 0; i < 30; ++i) CHECK(loo.values(i) == doctest::Approx(fit.fitted(i)).epsilon(1e-10));
}

TEST_CASE("zero leverage leaves the residual unchanged") {
  RegressionFit fit;
  fit.fitted = Eigen::VectorXd::Constant(2, 1.0);
  fit.residuals = Eigen::Vector2d(0.5, -0.25);
  fit.leverage = Eigen::Vector2d(0.0, 0.0);
  const LooPrediction res = loo_residuals(fit);
  CHECK(res.values(0) == 0.5);
  CHECK(res.values(1) == -0.25);
}

TEST_CASE("leave-one-out predictions match explicit refits on a 50x3 system") {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd x = random_design(rng, 50, 3);
  const Eigen::VectorXd y = random_vector(rng, 50);
  const RegressionFit fit = fit_least_squares(x, y);
  const LooPrediction loo = loo_predictions(fit);
  const LooPrediction res = loo_residuals(fit);
  for (Eigen::Index n = 0; n < 50; ++n) {
    CHECK(rel_err(loo.values(n), refit_without(x, y, n)) < 1e-9);
    CHECK(std::fabs(res.values(n) - (y(n) - loo.values(n))) < 1e-12);
    CHECK(std::fabs(res.values(n)) >= std::fabs(fit.residuals(n)));
  }
}

TEST_CASE("property: leverage bounds, trace, reconstruction and brute-force equivalence") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_dist(8, 200);
  std::uniform_int_distribution<int> m_dist(1, 6);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = m_dist(rng);
    const int n = std::max(n_dist(rng), m + 2);
    const Eigen::MatrixXd x = random_design(rng, n, m);
    const Eigen::VectorXd y = random_vector(rng, n);
    const RegressionFit fit = fit_least_squares(x, y);
    REQUIRE(fit.rank == static_cast<std::size_t>(m));
    CHECK(std::fabs(fit.leverage.sum() - static_cast<double>(fit.rank)) < 1e-8);
    CHECK(fit.leverage.minCoeff() >= 0.0);
    CHECK(fit.leverage.maxCoeff() <= 1.0);
    CHECK((fit.fitted + fit.residuals - y).cwiseAbs().maxCoeff() < 1e-12);

    const LooPrediction loo = loo_predictions(fit);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = fit.leverage(i);
      const double rebuilt = (1.0 - h) * loo.values(i) + h * y(i);
      CHECK(rel_err(rebuilt, fit.fitted(i)) < 1e-10);
      CHECK(rel_err(loo.values(i), refit_without(x, y, i)) < 1e-9);
    }
  }
}

TEST_CASE("leverage equals the finite-difference sensitivity of the fit") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = random_design(rng, 40, 4);
  const Eigen::VectorXd y = random_vector(rng, 40);
  const LeastSquaresProjector proj(x);
  const RegressionFit base = proj.fit(y);
  constexpr double delta = 1e-6;
  for (Eigen::Index n = 0; n < 40; n += 3) {
    Eigen::VectorXd bumped = y;
    bumped(n) += delta;
    const double dc = (proj.fit(bumped).fitted(n) - base.fitted(n)) / delta;
    CHECK(std::fabs(dc - base.leverage(n)) < 1e-5);
  }
}

TEST_CASE("scaling the response scales every output but leverage") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = random_design(rng, 25, 3);
  const Eigen::VectorXd y = random_vector(rng, 25);
  const RegressionFit a = fit_least_squares(x, y);
  const RegressionFit b = fit_least_squares(x, 3.5 * y);
  const auto la = loo_predictions(a).values;
  const auto lb = loo_predictions(b).values;
  const auto ra = loo_residuals(a).values;
  const auto rb = loo_residuals(b).values;
  for (Eigen::Index i = 0; i < 25; ++i) {
    CHECK(b.fitted(i) == doctest::Approx(3.5 * a.fitted(i)).epsilon(1e-12));
    CHECK(b.residuals(i) == doctest::Approx(3.5 * a.residuals(i)).epsilon(1e-10));
    CHECK(lb(i) == doctest::Approx(3.5 * la(i)).epsilon(1e-10));
    CHECK(rb(i) == doctest::Approx(3.5 * ra(i)).epsilon(1e-10));
    CHECK(b.leverage(i) == a.leverage(i));
  }
}

TEST_CASE("rank-deficient design gives the minimum-norm solution") {
  // Duplicated column: any split of the coefficient works, min-norm splits evenly.
  Eigen::MatrixXd x(4, 3);
  x << 1, 2, 2, 1, -1, -1, 1, 0.5, 0.5, 1, 3, 3;
  Eigen::VectorXd y(4);
  y << 1.0, 0.0, 2.0, 4.0;
  const RegressionFit fit = fit_least_squares(x, y);
  CHECK(fit.rank == 2);
  CHECK(fit.beta(1) == doctest::Approx(fit.beta(2)).epsilon(1e-12));
  CHECK(std::fabs(fit.leverage.sum() - 2.0) < 1e-10);

  // Oracle: the pseudo-inverse via a complete orthogonal decomposition.
  const Eigen::VectorXd oracle = x.completeOrthogonalDecomposition().solve(y);
  CHECK((fit.beta - oracle).norm() < 1e-10);
  CHECK((fit.fitted - x * oracle).norm() < 1e-10);
}

TEST_CASE("badly scaled monomials keep full rank after equilibration") {
  // 1, S, ..., S^10 with S around 100: raw column norms span twenty decades.
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> s_dist(std::log(100.0), 0.2);
  const Eigen::Index n = 2000;
  Eigen::MatrixXd x(n, 11);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = s_dist(rng);
    double p = 1.0;
    for (Eigen::Index j = 0; j < 11; ++j) {
      x(i, j) = p;
      p *= s;
    }
  }
  const Eigen::VectorXd y = random_vector(rng, n);
  const RegressionFit fit = fit_least_squares(x, y);
  CHECK(fit.rank == 11);
  CHECK(std::fabs(fit.leverage.sum() - static_cast<double>(fit.rank)) < 1e-8);
}

TEST_CASE("non-finite input names the offending entry") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  x(2, 1) = std::nan("");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_WITH_AS(fit_least_squares(x, y), doctest::Contains("row 2, column 1"),
                       std::invalid_argument);
  x(2, 1) = 0.0;
  y(1) = INFINITY;
  CHECK_THROWS_WITH_AS(fit_least_squares(x, y), doctest::Contains("row 1"), std::invalid_argument);
}
