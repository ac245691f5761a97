#include "loolsm/contracts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace loolsm::contracts {
namespace {

BasisTerm monomial(std::vector<int> exponents) {
  return BasisTerm{BasisTerm::Kind::Monomial, std::move(exponents)};
}

double integer_power(double x, int e) {
  double out = 1.0;
  for (int k = 0; k < e; ++k) out *= x;
  return out;
}

// Degree-graded, lexicographic (higher power of the earlier asset first)
// monomials in `assets` variables up to `max_degree`, degree >= 1.
std::vector<BasisTerm> graded_monomials(std::size_t assets, int max_degree) {
  std::vector<BasisTerm> out;
  for (int degree = 1; degree <= max_degree; ++degree) {
    std::vector<int> e(assets, 0);
    // Enumerate compositions of `degree` into `assets` parts in lex-descending order.
    auto recurse = [&](auto&& self, std::size_t pos, int remaining) -> void {
      if (pos + 1 == assets) {
        e[pos] = remaining;
        out.push_back(monomial(e));
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[pos] = k;
        self(self, pos + 1, remaining - k);
      }
    };
    recurse(recurse, 0, degree);
  }
  return out;
}

[[noreturn]] void unsupported(PayoffKind kind, std::size_t m, const std::string& supported) {
  throw std::invalid_argument("basis size M=" + std::to_string(m) + " is not supported for " +
                              std::string(to_string(kind)) + "; supported: " + supported);
}

}  // namespace

std::string_view to_string(PayoffKind kind) {
  switch (kind) {
    case PayoffKind::PutSingle: return "put";
    case PayoffKind::BestOfCall: return "bestof";
    case PayoffKind::BasketCall: return "basket";
  }
  throw std::invalid_argument("unknown payoff kind");
}

PayoffKind parse_payoff_kind(std::string_view text) {
  if (text == "put" || text == "put_single") return PayoffKind::PutSingle;
  if (text == "bestof" || text == "bestof_call") return PayoffKind::BestOfCall;
  if (text == "basket" || text == "basket_call") return PayoffKind::BasketCall;
  throw std::invalid_argument("unknown payoff kind '" + std::string(text) +
                              "' (expected put, bestof or basket)");
}

std::size_t asset_count(PayoffKind kind) {
  switch (kind) {
    case PayoffKind::PutSingle: return 1;
    case PayoffKind::BestOfCall: return 2;
    case PayoffKind::BasketCall: return 4;
  }
  throw std::invalid_argument("unknown payoff kind");
}

void PayoffSpec::validate(std::size_t assets) const {
  if (!(strike > 0.0)) throw std::invalid_argument("strike must be positive");
  if (kind == PayoffKind::PutSingle && assets < 1) {
    throw std::invalid_argument("put needs one asset");
  }
  if (kind == PayoffKind::BestOfCall && assets < 1) {
    throw std::invalid_argument("best-of needs at least one asset");
  }
  if (kind == PayoffKind::BasketCall && !weights.empty()) {
    if (weights.size() != assets) {
      throw std::invalid_argument("basket weights must have one entry per asset");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::fabs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("basket weights must sum to 1");
    }
  }
}

double discounted_payout(const PayoffSpec& spec, std::span<const double> state, double t,
                         double rate) {
  double intrinsic = 0.0;
  switch (spec.kind) {
    case PayoffKind::PutSingle:
      intrinsic = spec.strike - state[0];
      break;
    case PayoffKind::BestOfCall:
      intrinsic = *std::max_element(state.begin(), state.end()) - spec.strike;
      break;
    case PayoffKind::BasketCall: {
      double basket = 0.0;
      if (spec.weights.empty()) {
        for (double s : state) basket += s;
        basket /= static_cast<double>(state.size());
      } else {
        for (std::size_t j = 0; j < state.size(); ++j) basket += spec.weights[j] * state[j];
      }
      intrinsic = basket - spec.strike;
      break;
    }
    default:
      throw std::invalid_argument("unknown payoff kind");
  }
  return std::exp(-rate * t) * std::max(intrinsic, 0.0);
}

std::string BasisTerm::label() const {
  switch (kind) {
    case Kind::Constant: return "1";
    case Kind::Payoff: return "Z";
    case Kind::Monomial: break;
  }
  std::string out;
  for (std::size_t j = 0; j < exponents.size(); ++j) {
    if (exponents[j] == 0) continue;
    if (!out.empty()) out += "*";
    out += "S" + std::to_string(j + 1);
    if (exponents[j] > 1) out += "^" + std::to_string(exponents[j]);
  }
  return out;
}

BasisSpec basis_family(PayoffKind kind, std::size_t m) {
  BasisSpec spec;
  spec.kind = kind;
  spec.terms.push_back(BasisTerm{BasisTerm::Kind::Constant, {}});
  spec.terms.push_back(BasisTerm{BasisTerm::Kind::Payoff, {}});
  switch (kind) {
    case PayoffKind::PutSingle:
      if (m < 2 || m > 20) unsupported(kind, m, "2..20");
      for (std::size_t p = 1; p + 2 <= m; ++p) spec.terms.push_back(monomial({static_cast<int>(p)}));
      break;
    case PayoffKind::BestOfCall: {
      if (m != 4 && m != 7 && m != 11) unsupported(kind, m, "4, 7, 11");
      const auto mono = graded_monomials(2, 3);
      spec.terms.insert(spec.terms.end(), mono.begin(), mono.begin() + static_cast<std::ptrdiff_t>(m - 2));
      break;
    }
    case PayoffKind::BasketCall: {
      if (m != 6 && m != 10 && m != 16) unsupported(kind, m, "6, 10, 16");
      constexpr std::size_t kAssets = 4;
      std::vector<BasisTerm> family;
      for (std::size_t j = 0; j < kAssets; ++j) {
        std::vector<int> e(kAssets, 0);
        e[j] = 1;
        family.push_back(monomial(e));
      }
      for (std::size_t j = 0; j < kAssets; ++j) {
        std::vector<int> e(kAssets, 0);
        e[j] = 2;
        family.push_back(monomial(e));
      }
      for (std::size_t j = 0; j < kAssets; ++j) {
        for (std::size_t k = j + 1; k < kAssets; ++k) {
          std::vector<int> e(kAssets, 0);
          e[j] = 1;
          e[k] = 1;
          family.push_back(monomial(e));
        }
      }
      spec.terms.insert(spec.terms.end(), family.begin(), family.begin() + static_cast<std::ptrdiff_t>(m - 2));
      break;
    }
  }
  return spec;
}

void basis_row(const BasisSpec& spec, std::span<const double> state, double z,
               std::span<double> out) {
  if (out.size() != spec.terms.size()) {
    throw std::invalid_argument("basis_row output has the wrong length");
  }
  for (std::size_t k = 0; k < spec.terms.size(); ++k) {
    const BasisTerm& term = spec.terms[k];
    switch (term.kind) {
      case BasisTerm::Kind::Constant: out[k] = 1.0; break;
      case BasisTerm::Kind::Payoff: out[k] = z; break;
      case BasisTerm::Kind::Monomial: {
        if (term.exponents.size() > state.size()) {
          throw std::invalid_argument("basis term uses more assets than the state has");
        }
        double v = 1.0;
        for (std::size_t j = 0; j < term.exponents.size(); ++j) {
          v *= integer_power(state[j], term.exponents[j]);
        }
        out[k] = v;
        break;
      }
    }
  }
}

Eigen::VectorXd basis_row(const BasisSpec& spec, std::span<const double> state, double z) {
  Eigen::VectorXd row(static_cast<Eigen::Index>(spec.size()));
  basis_row(spec, state, z, std::span<double>(row.data(), spec.size()));
  return row;
}

}  // namespace loolsm::contracts
