#pragma once

#include "loolsm/contracts.hpp"
#include "loolsm/market.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loolsm::engine {

enum class Mode { LSM, LOOLSM, LSM2, European };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Identifies the simulation set a result was computed on.
struct Provenance {
  std::uint64_t seed = 0;
  std::size_t pool_offset = 0;
  std::size_t paths = 0;
  bool antithetic = false;

  static Provenance of(const market::PathSet& paths);
  bool operator==(const Provenance&) const = default;
};

struct PricingResult {
  double price = 0.0;
  Eigen::VectorXd per_path_value;
  double std_error = 0.0;
  Mode mode = Mode::LSM;
  std::vector<std::size_t> ranks;        // per exercise date, 0 where no regression ran
  std::size_t fallback_count = 0;        // leverage-one fallbacks used in decisions
  std::vector<std::size_t> flip_counts;  // per date, paths where C and C' disagree
  Provenance provenance;
  std::vector<std::string> warnings;
};

/// Regression coefficients per exercise date; the last date has none because
/// exercise there is forced.
struct ExercisePolicy {
  std::vector<Eigen::VectorXd> coefficients;
  contracts::BasisSpec basis;
};

/// Continue iff c >= z, or when the payout is non-negative and z == 0.
constexpr bool decide_continue(double z, double c, bool nonnegative) noexcept {
  return c >= z || (nonnegative && z == 0.0);
}

/// Everything the induction saw at one regression date for one mode.
struct DateSnapshot {
  std::size_t date = 0;
  Mode mode = Mode::LSM;
  Eigen::VectorXd payout;    // Z at this date
  Eigen::VectorXd target;    // V at the next date (regression response)
  Eigen::VectorXd fitted;    // C
  Eigen::VectorXd loo;       // C'
  Eigen::VectorXd leverage;  // h
  std::vector<bool> continued;
  std::vector<bool> fallback;
};

struct EngineOptions {
  bool track_flips = true;
  std::size_t threads = 1;
  std::vector<DateSnapshot>* trace = nullptr;  // optional per-date diagnostics
};

/// Design matrix and payout vector of one exercise date.
struct DateData {
  Eigen::MatrixXd design;
  Eigen::VectorXd payout;
};
/// date index 0 .. I-1 maps to exercise times t_1 .. t_I.
using DateSource = std::function<DateData(std::size_t date)>;

struct InductionOutcome {
  Mode mode = Mode::LSM;
  Eigen::VectorXd value;  // path-wise discounted value at t_0
  std::vector<std::size_t> ranks;
  std::size_t fallback_count = 0;
  std::vector<std::size_t> flip_counts;
  std::vector<Eigen::VectorXd> coefficients;  // I - 1 entries
};

/// Path-wise backward induction for each requested regression mode (LSM or
/// LOOLSM), sharing one factorization of each date's design matrix across
/// modes. Results equal separate single-mode runs.
std::vector<InductionOutcome> backward_induction(std::size_t paths, std::size_t dates,
                                                 const DateSource& source,
                                                 std::span<const Mode> modes, bool nonnegative,
                                                 const EngineOptions& options = {});

/// DateSource over a PathSet for a payoff and basis.
DateSource path_source(const market::PathSet& paths, const contracts::PayoffSpec& payoff,
                       const contracts::BasisSpec& basis, double rate, std::size_t threads = 1);

struct PricedPolicy {
  PricingResult result;
  ExercisePolicy policy;
};

PricedPolicy price_backward(const market::PathSet& paths, const contracts::PayoffSpec& payoff,
                            const contracts::BasisSpec& basis, double rate, Mode mode,
                            const EngineOptions& options = {});

/// LSM and LOOLSM on the same paths with shared factorizations; element 0 is
/// LSM, element 1 LOOLSM.
std::vector<PricedPolicy> price_lsm_and_loolsm(const market::PathSet& paths,
                                               const contracts::PayoffSpec& payoff,
                                               const contracts::BasisSpec& basis, double rate,
                                               const EngineOptions& options = {});

/// Value `valuation_paths` under an existing exercise policy.
PricingResult apply_policy(const market::PathSet& valuation_paths,
                           const contracts::PayoffSpec& payoff, const ExercisePolicy& policy,
                           double rate, Mode mode = Mode::LSM2);

/// Two-pass estimator: LSM policy from `policy_paths`, valued on `valuation_paths`.
PricingResult price_two_pass(const market::PathSet& policy_paths,
                             const market::PathSet& valuation_paths,
                             const contracts::PayoffSpec& payoff,
                             const contracts::BasisSpec& basis, double rate);

/// Mean discounted payout at maturity.
PricingResult european_mc_price(const market::PathSet& paths,
                                const contracts::PayoffSpec& payoff, double rate);

/// Shift every path value by exact_euro - mc_euro.price.
PricingResult apply_control_variate(const PricingResult& result, double exact_euro,
                                    const PricingResult& mc_euro);

struct BiasStatistics {
  double mean = 0.0;
  Eigen::VectorXd per_path;
  double std_error = 0.0;
};

/// LSM minus LOOLSM, path by path.
BiasStatistics lookahead_bias(const PricingResult& lsm, const PricingResult& loolsm);

/// Sample mean and its standard error. With antithetic pairing the error is
/// computed from the N/2 pair averages (adjacent entries).
std::pair<double, double> mean_and_std_error(const Eigen::VectorXd& values, bool antithetic);

}  // namespace loolsm::engine
