#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace loolsm::regression {

/// Leverage values with 1 - h below this are treated as fully self-determined;
/// the leave-one-out correction falls back to the full-fit value there.
inline constexpr double kLeverageEpsilon = 1e-10;

struct RegressionFit {
  Eigen::VectorXd beta;       // M coefficients
  Eigen::VectorXd fitted;     // C = X beta
  Eigen::VectorXd residuals;  // e = y - C
  Eigen::VectorXd leverage;   // diagonal of the hat matrix
  std::size_t rank = 0;
};

/// Orthogonal factorization of a design matrix, reusable across responses.
///
/// Columns are equilibrated to unit Euclidean norm before factorizing, then a
/// thin Householder QR is followed by an SVD of the triangular factor. Singular
/// values below max(N, M) * eps * sigma_max are discarded. The hat matrix is
/// never formed: leverage is the row-wise squared norm of the retained left
/// singular vectors, O(N M) once the factorization exists.
class LeastSquaresProjector {
 public:
  explicit LeastSquaresProjector(const Eigen::MatrixXd& design);

  std::size_t rows() const { return static_cast<std::size_t>(basis_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(col_scale_.size()); }
  std::size_t rank() const { return static_cast<std::size_t>(basis_.cols()); }
  const Eigen::VectorXd& leverage() const { return leverage_; }

  /// Fit a response. beta is the minimum-norm minimizer in the equilibrated
  /// coordinates (identical to the plain minimum-norm solution whenever the
  /// design columns share one norm, and unique when X has full column rank).
  RegressionFit fit(const Eigen::VectorXd& response) const;

 private:
  Eigen::MatrixXd basis_;       // N x rank orthonormal basis of range(X)
  Eigen::MatrixXd coef_map_;    // M x rank, beta = coef_map_ * basis_^T y
  Eigen::VectorXd col_scale_;   // M column norms used for equilibration
  Eigen::VectorXd leverage_;
};

RegressionFit fit_least_squares(const Eigen::MatrixXd& design,
                                const Eigen::VectorXd& response);

/// Leave-one-out predictions C' = C - h e / (1 - h). Entries whose leverage is
/// within kLeverageEpsilon of 1 keep C and are listed in `fallback_rows`.
struct LooPrediction {
  Eigen::VectorXd values;
  std::vector<std::size_t> fallback_rows;
};

LooPrediction loo_predictions(const RegressionFit& fit);

/// Leave-one-out residuals e' = e / (1 - h), with the same fallback rule
/// (e' = e where 1 - h < kLeverageEpsilon).
LooPrediction loo_residuals(const RegressionFit& fit);

}  // namespace loolsm::regression
