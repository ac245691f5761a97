#include "loolsm/engine.hpp"

#include "loolsm/error.hpp"
#include "loolsm/parallel.hpp"
#include "loolsm/regression.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace loolsm::engine {
namespace {

void require_same_grid(const market::PathSet& a, const market::PathSet& b) {
  if (!(a.schedule() == b.schedule())) {
    throw std::invalid_argument("path sets use different exercise schedules");
  }
  if (a.assets() != b.assets()) {
    throw std::invalid_argument("path sets simulate different numbers of assets");
  }
}

PricingResult make_result(Eigen::VectorXd values, Mode mode, const market::PathSet& paths) {
  PricingResult r;
  const auto [mean, se] = mean_and_std_error(values, paths.antithetic());
  r.price = mean;
  r.std_error = se;
  r.per_path_value = std::move(values);
  r.mode = mode;
  r.provenance = Provenance::of(paths);
  r.ranks.assign(paths.dates(), 0);
  r.flip_counts.assign(paths.dates(), 0);
  return r;
}

void require_same_provenance(const PricingResult& a, const PricingResult& b) {
  if (!(a.provenance == b.provenance) || a.per_path_value.size() != b.per_path_value.size()) {
    throw std::invalid_argument("results were computed on different simulation sets");
  }
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::LSM: return "LSM";
    case Mode::LOOLSM: return "LOOLSM";
    case Mode::LSM2: return "LSM2";
    case Mode::European: return "EUROPEAN";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "LSM" || text == "lsm") return Mode::LSM;
  if (text == "LOOLSM" || text == "loolsm") return Mode::LOOLSM;
  if (text == "LSM2" || text == "lsm2" || text == "LSM-2") return Mode::LSM2;
  if (text == "EUROPEAN" || text == "european") return Mode::European;
  throw std::invalid_argument("unknown estimator '" + std::string(text) +
                              "' (expected LSM, LSM2, LOOLSM or EUROPEAN)");
}

Provenance Provenance::of(const market::PathSet& paths) {
  return Provenance{paths.seed(), paths.pool_offset(), paths.paths(), paths.antithetic()};
}

std::pair<double, double> mean_and_std_error(const Eigen::VectorXd& values, bool antithetic) {
  const Eigen::Index n = values.size();
  if (n == 0) return {0.0, 0.0};
  const double mean = values.mean();
  Eigen::VectorXd samples;
  if (antithetic && n % 2 == 0) {
    samples = Eigen::Map<const Eigen::MatrixXd>(values.data(), 2, n / 2).colwise().mean().transpose();
  } else {
    samples = values;
  }
  const Eigen::Index k = samples.size();
  if (k < 2) return {mean, 0.0};
  const double var = (samples.array() - samples.mean()).square().sum() / static_cast<double>(k - 1);
  return {mean, std::sqrt(var / static_cast<double>(k))};
}

std::vector<InductionOutcome> backward_induction(std::size_t paths, std::size_t dates,
                                                 const DateSource& source,
                                                 std::span<const Mode> modes, bool nonnegative,
                                                 const EngineOptions& options) {
  if (paths == 0 || dates == 0) throw std::invalid_argument("need at least one path and one date");
  const auto n = static_cast<Eigen::Index>(paths);

  std::vector<InductionOutcome> out(modes.size());
  std::vector<Eigen::VectorXd> value(modes.size());
  {
    const DateData last = source(dates - 1);
    if (last.payout.size() != n) throw std::invalid_argument("payout length differs from path count");
    for (std::size_t k = 0; k < modes.size(); ++k) {
      if (modes[k] != Mode::LSM && modes[k] != Mode::LOOLSM) {
        throw std::invalid_argument("backward_induction runs LSM or LOOLSM only");
      }
      out[k].mode = modes[k];
      out[k].ranks.assign(dates, 0);
      out[k].flip_counts.assign(dates, 0);
      out[k].coefficients.resize(dates - 1);
      value[k] = last.payout;
    }
  }

  for (std::size_t d = dates - 1; d-- > 0;) {
    const DateData data = source(d);
    if (data.design.rows() != n || data.payout.size() != n) {
      throw std::invalid_argument("date " + std::to_string(d) + " data has the wrong row count");
    }
    const regression::LeastSquaresProjector projector(data.design);
    if (projector.rank() == 0) {
      throw NumericalError("regression at exercise date " + std::to_string(d + 1) + " has rank 0");
    }
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const Mode mode = modes[k];
      const regression::RegressionFit fit = projector.fit(value[k]);
      const bool need_loo = mode == Mode::LOOLSM || options.track_flips || options.trace != nullptr;
      regression::LooPrediction loo;
      if (need_loo) loo = regression::loo_predictions(fit);
      const Eigen::VectorXd& decision = mode == Mode::LSM ? fit.fitted : loo.values;
      if (mode == Mode::LOOLSM) out[k].fallback_count += loo.fallback_rows.size();

      DateSnapshot snap;
      const bool tracing = options.trace != nullptr;
      if (tracing) {
        snap.date = d;
        snap.mode = mode;
        snap.payout = data.payout;
        snap.target = value[k];
        snap.fitted = fit.fitted;
        snap.loo = loo.values;
        snap.leverage = fit.leverage;
        snap.continued.resize(paths);
        snap.fallback.assign(paths, false);
        for (std::size_t r : loo.fallback_rows) snap.fallback[r] = true;
      }

      std::size_t flips = 0;
      Eigen::VectorXd& v = value[k];
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z = data.payout(i);
        const bool cont = decide_continue(z, decision(i), nonnegative);
        if (need_loo && options.track_flips &&
            decide_continue(z, fit.fitted(i), nonnegative) !=
                decide_continue(z, loo.values(i), nonnegative)) {
          ++flips;
        }
        if (tracing) snap.continued[static_cast<std::size_t>(i)] = cont;
        if (!cont) v(i) = z;
      }
      out[k].flip_counts[d] = flips;
      out[k].ranks[d] = fit.rank;
      out[k].coefficients[d] = fit.beta;
      if (tracing) options.trace->push_back(std::move(snap));
    }
  }
  for (std::size_t k = 0; k < modes.size(); ++k) out[k].value = std::move(value[k]);
  return out;
}

DateSource path_source(const market::PathSet& paths, const contracts::PayoffSpec& payoff,
                       const contracts::BasisSpec& basis, double rate, std::size_t threads) {
  payoff.validate(paths.assets());
  return [&paths, payoff, basis, rate, threads](std::size_t d) {
    const auto n = paths.paths();
    const auto m = basis.size();
    DateData data;
    data.design.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    data.payout.resize(static_cast<Eigen::Index>(n));
    const double t = paths.schedule().time(d);
    // Row-major scratch keeps basis_row writes contiguous.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(
        static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    parallel_for(n, threads, [&](std::size_t i) {
      const auto state = paths.state(i, d);
      const double z = contracts::discounted_payout(payoff, state, t, rate);
      data.payout(static_cast<Eigen::Index>(i)) = z;
      contracts::basis_row(basis, state, z,
                           std::span<double>(rows.row(static_cast<Eigen::Index>(i)).data(), m));
    });
    data.design = rows;
    return data;
  };
}

std::vector<PricedPolicy> price_lsm_and_loolsm(const market::PathSet& paths,
                                               const contracts::PayoffSpec& payoff,
                                               const contracts::BasisSpec& basis, double rate,
                                               const EngineOptions& options) {
  const Mode modes[] = {Mode::LSM, Mode::LOOLSM};
  auto outcomes = backward_induction(paths.paths(), paths.dates(),
                                     path_source(paths, payoff, basis, rate, options.threads),
                                     modes, payoff.nonnegative, options);
  std::vector<PricedPolicy> priced;
  for (auto& o : outcomes) {
    PricedPolicy p;
    p.result = make_result(std::move(o.value), o.mode, paths);
    p.result.ranks = std::move(o.ranks);
    p.result.flip_counts = std::move(o.flip_counts);
    p.result.fallback_count = o.fallback_count;
    if (paths.paths() <= basis.size() && paths.dates() > 1) {
      p.result.warnings.push_back("N=" + std::to_string(paths.paths()) +
                                  " does not exceed M=" + std::to_string(basis.size()));
    }
    p.policy.coefficients = std::move(o.coefficients);
    p.policy.basis = basis;
    priced.push_back(std::move(p));
  }
  return priced;
}

PricedPolicy price_backward(const market::PathSet& paths, const contracts::PayoffSpec& payoff,
                            const contracts::BasisSpec& basis, double rate, Mode mode,
                            const EngineOptions& options) {
  if (mode != Mode::LSM && mode != Mode::LOOLSM) {
    throw std::invalid_argument("price_backward supports the LSM and LOOLSM modes");
  }
  const Mode modes[] = {mode};
  auto outcomes = backward_induction(paths.paths(), paths.dates(),
                                     path_source(paths, payoff, basis, rate, options.threads),
                                     modes, payoff.nonnegative, options);
  InductionOutcome& o = outcomes.front();
  PricedPolicy p;
  p.result = make_result(std::move(o.value), mode, paths);
  p.result.ranks = std::move(o.ranks);
  p.result.flip_counts = std::move(o.flip_counts);
  p.result.fallback_count = o.fallback_count;
  if (paths.paths() <= basis.size() && paths.dates() > 1) {
    p.result.warnings.push_back("N=" + std::to_string(paths.paths()) +
                                " does not exceed M=" + std::to_string(basis.size()));
  }
  p.policy.coefficients = std::move(o.coefficients);
  p.policy.basis = basis;
  return p;
}

PricingResult apply_policy(const market::PathSet& valuation_paths,
                           const contracts::PayoffSpec& payoff, const ExercisePolicy& policy,
                           double rate, Mode mode) {
  const std::size_t dates = valuation_paths.dates();
  if (policy.coefficients.size() + 1 != dates) {
    throw std::invalid_argument("exercise policy covers " +
                                std::to_string(policy.coefficients.size() + 1) +
                                " dates but the paths have " + std::to_string(dates));
  }
  const DateSource source = path_source(valuation_paths, payoff, policy.basis, rate);
  DateData last = source(dates - 1);
  Eigen::VectorXd v = std::move(last.payout);
  for (std::size_t d = dates - 1; d-- > 0;) {
    const DateData data = source(d);
    const Eigen::VectorXd& beta = policy.coefficients[d];
    if (beta.size() != data.design.cols()) {
      throw std::invalid_argument("policy coefficients do not match the basis size");
    }
    const Eigen::VectorXd c = data.design * beta;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!decide_continue(data.payout(i), c(i), payoff.nonnegative)) v(i) = data.payout(i);
    }
  }
  return make_result(std::move(v), mode, valuation_paths);
}

PricingResult price_two_pass(const market::PathSet& policy_paths,
                             const market::PathSet& valuation_paths,
                             const contracts::PayoffSpec& payoff,
                             const contracts::BasisSpec& basis, double rate) {
  require_same_grid(policy_paths, valuation_paths);
  EngineOptions opts;
  opts.track_flips = false;
  const PricedPolicy trained = price_backward(policy_paths, payoff, basis, rate, Mode::LSM, opts);
  PricingResult r = apply_policy(valuation_paths, payoff, trained.policy, rate, Mode::LSM2);
  r.ranks = trained.result.ranks;
  return r;
}

PricingResult european_mc_price(const market::PathSet& paths,
                                const contracts::PayoffSpec& payoff, double rate) {
  payoff.validate(paths.assets());
  const std::size_t last = paths.dates() - 1;
  const double t = paths.schedule().time(last);
  Eigen::VectorXd v(static_cast<Eigen::Index>(paths.paths()));
  for (std::size_t i = 0; i < paths.paths(); ++i) {
    v(static_cast<Eigen::Index>(i)) = contracts::discounted_payout(payoff, paths.state(i, last), t, rate);
  }
  return make_result(std::move(v), Mode::European, paths);
}

PricingResult apply_control_variate(const PricingResult& result, double exact_euro,
                                    const PricingResult& mc_euro) {
  require_same_provenance(result, mc_euro);
  const double shift = exact_euro - mc_euro.price;
  PricingResult adjusted = result;
  adjusted.price += shift;
  adjusted.per_path_value.array() += shift;
  return adjusted;
}

BiasStatistics lookahead_bias(const PricingResult& lsm, const PricingResult& loolsm) {
  require_same_provenance(lsm, loolsm);
  BiasStatistics b;
  b.per_path = lsm.per_path_value - loolsm.per_path_value;
  b.mean = lsm.price - loolsm.price;
  b.std_error = mean_and_std_error(b.per_path, lsm.provenance.antithetic).second;
  return b;
}

}  // namespace loolsm::engine
