#include "loolsm/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace loolsm::regression {
namespace {

void require_finite(const Eigen::MatrixXd& design) {
  for (Eigen::Index c = 0; c < design.cols(); ++c) {
    for (Eigen::Index r = 0; r < design.rows(); ++r) {
      if (!std::isfinite(design(r, c))) {
        throw std::invalid_argument("design matrix entry (row " + std::to_string(r) +
                                    ", column " + std::to_string(c) +
                                    ") is not finite");
      }
    }
  }
}

LooPrediction apply_loo(const RegressionFit& fit, bool residual_form) {
  const Eigen::Index n = fit.fitted.size();
  if (fit.residuals.size() != n || fit.leverage.size() != n) {
    throw std::invalid_argument("inconsistent RegressionFit vector lengths");
  }
  LooPrediction out;
  out.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double slack = 1.0 - fit.leverage(i);
    if (slack < kLeverageEpsilon) {
      out.values(i) = residual_form ? fit.residuals(i) : fit.fitted(i);
      out.fallback_rows.push_back(static_cast<std::size_t>(i));
    } else if (residual_form) {
      out.values(i) = fit.residuals(i) / slack;
    } else {
      out.values(i) = fit.fitted(i) - fit.leverage(i) * fit.residuals(i) / slack;
    }
  }
  return out;
}

}  // namespace

LeastSquaresProjector::LeastSquaresProjector(const Eigen::MatrixXd& design) {
  const Eigen::Index n = design.rows();
  const Eigen::Index m = design.cols();
  if (n < 1 || m < 1) {
    throw std::invalid_argument("design matrix must have at least one row and one column");
  }
  require_finite(design);

  col_scale_ = design.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < m; ++c) {
    if (col_scale_(c) == 0.0) col_scale_(c) = 1.0;
  }
  const Eigen::MatrixXd scaled = design * col_scale_.cwiseInverse().asDiagonal();

  // range(X) = range(Q U), X_s = Q R = Q (U S V^T).
  Eigen::MatrixXd left;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd right;
  if (n >= m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(scaled);
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, m);
    q.applyOnTheLeft(qr.householderQ());
    const Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    left = q * svd.matrixU();
    sigma = svd.singularValues();
    right = svd.matrixV();
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    left = svd.matrixU();
    sigma = svd.singularValues();
    right = svd.matrixV();
  }

  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
  const double tol = static_cast<double>(std::max(n, m)) *
                     std::numeric_limits<double>::epsilon() * sigma_max;
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > tol && sigma(rank) > 0.0) ++rank;

  basis_ = left.leftCols(rank);
  coef_map_ = col_scale_.cwiseInverse().asDiagonal() * right.leftCols(rank) *
              sigma.head(rank).cwiseInverse().asDiagonal();
  leverage_ = basis_.rowwise().squaredNorm().transpose();
  leverage_ = leverage_.cwiseMin(1.0);
}

RegressionFit LeastSquaresProjector::fit(const Eigen::VectorXd& response) const {
  if (static_cast<std::size_t>(response.size()) != rows()) {
    throw std::invalid_argument("response length " + std::to_string(response.size()) +
                                " does not match design rows " + std::to_string(rows()));
  }
  for (Eigen::Index i = 0; i < response.size(); ++i) {
    if (!std::isfinite(response(i))) {
      throw std::invalid_argument("response entry (row " + std::to_string(i) +
                                  ") is not finite");
    }
  }
  const Eigen::VectorXd coords = basis_.transpose() * response;
  RegressionFit fit;
  fit.fitted = basis_ * coords;
  fit.beta = coef_map_ * coords;
  fit.residuals = response - fit.fitted;
  fit.leverage = leverage_;
  fit.rank = rank();
  return fit;
}

RegressionFit fit_least_squares(const Eigen::MatrixXd& design,
                                const Eigen::VectorXd& response) {
  if (design.rows() != response.size()) {
    throw std::invalid_argument("design rows and response length differ");
  }
  return LeastSquaresProjector(design).fit(response);
}

LooPrediction loo_predictions(const RegressionFit& fit) { return apply_loo(fit, false); }

LooPrediction loo_residuals(const RegressionFit& fit) { return apply_loo(fit, true); }

}  // namespace loolsm::regression
