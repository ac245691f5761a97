#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loolsm::contracts {

enum class PayoffKind { PutSingle, BestOfCall, BasketCall };

std::string_view to_string(PayoffKind kind);
/// Accepts "put", "bestof", "basket" (and the enum spellings put_single,
/// bestof_call, basket_call).
PayoffKind parse_payoff_kind(std::string_view text);

struct PayoffSpec {
  PayoffKind kind = PayoffKind::PutSingle;
  double strike = 100.0;
  std::vector<double> weights;  // basket only; empty means equal weights
  bool nonnegative = true;

  void validate(std::size_t assets) const;
};

/// e^{-r t} times the undiscounted payoff.
double discounted_payout(const PayoffSpec& spec, std::span<const double> state, double t,
                         double rate);

struct BasisTerm {
  enum class Kind { Constant, Payoff, Monomial };
  Kind kind = Kind::Constant;
  std::vector<int> exponents;  // per asset, Monomial only

  bool operator==(const BasisTerm&) const = default;
  std::string label() const;
};

struct BasisSpec {
  PayoffKind kind = PayoffKind::PutSingle;
  std::vector<BasisTerm> terms;

  std::size_t size() const { return terms.size(); }
};

/// First M terms of the fixed regressor family for a payoff kind:
///  put:    1, Z, S, S^2, ..., S^{M-2}                 (2 <= M <= 20)
///  bestof: 1, Z, then monomials in (S1, S2) graded by degree and
///          lexicographic within a degree              (M in {4, 7, 11})
///  basket: 1, Z, S1..S4, S1^2..S4^2, then S_j S_k for j < k
///                                                     (M in {6, 10, 16})
BasisSpec basis_family(PayoffKind kind, std::size_t m);

/// Regressor values at one state; entry 0 is 1 and entry 1 is the payout z.
void basis_row(const BasisSpec& spec, std::span<const double> state, double z,
               std::span<double> out);
Eigen::VectorXd basis_row(const BasisSpec& spec, std::span<const double> state, double z);

/// Number of assets a payoff kind is defined on (1, 2, 4).
std::size_t asset_count(PayoffKind kind);

}  // namespace loolsm::contracts
