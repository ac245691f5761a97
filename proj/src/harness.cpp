#include "loolsm/harness.hpp"

#include "loolsm/error.hpp"
#include "loolsm/oracles.hpp"
#include "loolsm/parallel.hpp"
#include "loolsm/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace loolsm::harness {
namespace {

using contracts::PayoffKind;
using engine::Mode;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SampleStats {
  double mean = 0.0;
  double std = kNaN;  // with the n/(n-1) correction
  double se = kNaN;
};

SampleStats stats_of(const std::vector<double>& xs) {
  SampleStats s;
  if (xs.empty()) return s;
  const double n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return s;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / (n - 1.0));
  s.se = s.std / std::sqrt(n);
  return s;
}

std::size_t min_regression_rank(const std::vector<std::size_t>& ranks) {
  if (ranks.size() < 2) return 0;
  return *std::min_element(ranks.begin(), ranks.end() - 1);
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != std::floor(d) || d > 1e15) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return static_cast<std::size_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F convert) {
  std::vector<T> out;
  for (const auto& item : split(v, ',')) {
    if (item.empty()) throw ConfigError("config key '" + key + "' has an empty list entry");
    out.push_back(convert(key, item));
  }
  return out;
}

std::uint64_t seed_hash(PayoffKind kind, std::uint64_t a, const char* tag) {
  std::uint64_t h = random::hash_string(std::string(contracts::to_string(kind)).c_str());
  h = random::mix64(h ^ random::mix64(a));
  if (tag != nullptr) h = random::mix64(h ^ random::hash_string(tag));
  return h;
}

}  // namespace

Scale parse_scale(const std::string& text) {
  if (text == "desk") return Scale::Desk;
  if (text == "paper") return Scale::Paper;
  throw ConfigError("unknown scale '" + text + "' (expected desk or paper)");
}

ExperimentConfig ExperimentConfig::defaults(PayoffKind kind, Experiment experiment, Scale scale) {
  ExperimentConfig c;
  c.kind = kind;
  const bool comparison = experiment == Experiment::Comparison;
  switch (kind) {
    case PayoffKind::PutSingle:
      c.keys = comparison ? std::vector<double>{80, 90, 100, 110, 120} : std::vector<double>{80};
      c.spot = 100;
      c.rate = 0.05;
      c.dividend = 0.02;
      c.vol = 0.2;
      c.correlation = 0.0;
      c.dates = 5;
      c.maturity = 1.0;
      c.basis_m = comparison ? std::vector<std::size_t>{5} : std::vector<std::size_t>{4, 8, 12};
      break;
    case PayoffKind::BestOfCall:
      c.keys = comparison ? std::vector<double>{90, 100, 110} : std::vector<double>{100};
      c.strike = 100;
      c.rate = 0.05;
      c.dividend = 0.10;
      c.vol = 0.2;
      c.correlation = 0.0;
      c.dates = 9;
      c.maturity = 3.0;
      c.basis_m = comparison ? std::vector<std::size_t>{11} : std::vector<std::size_t>{4, 7, 11};
      break;
    case PayoffKind::BasketCall:
      c.keys = comparison ? std::vector<double>{60, 80, 100, 120, 140} : std::vector<double>{100};
      c.spot = 100;
      c.rate = 0.0;
      c.dividend = 0.0;
      c.vol = 0.4;
      c.correlation = 0.5;
      c.dates = 10;
      c.maturity = 5.0;
      c.basis_m = comparison ? std::vector<std::size_t>{16} : std::vector<std::size_t>{6, 10, 16};
      break;
  }
  c.paths = 40000;
  if (comparison) {
    c.estimators = {Mode::LSM, Mode::LSM2, Mode::LOOLSM};
    c.n_mc = {scale == Scale::Paper ? std::size_t{100} : std::size_t{20}};
    c.control_variate = false;
  } else {
    c.estimators = {Mode::LSM, Mode::LOOLSM};
    if (scale == Scale::Paper) {
      c.pool_size = 1440000;
      c.n_mc = {10, 20, 30, 40, 60, 120, 240, 720};
    } else {
      c.pool_size = 144000;
      c.n_mc = {10, 40, 120};
    }
    c.control_variate = true;
  }
  return c;
}

void ExperimentConfig::validate(Experiment experiment) const {
  if (keys.empty()) throw ConfigError("config needs at least one key (strike or spot)");
  for (double k : keys) {
    if (!(k > 0.0)) throw ConfigError("keys must be positive");
  }
  if (!(spot > 0.0) || !(strike > 0.0)) throw ConfigError("spot and strike must be positive");
  if (!(vol >= 0.0)) throw ConfigError("vol must be non-negative");
  if (dates < 1) throw ConfigError("dates must be at least 1");
  if (!(maturity > 0.0)) throw ConfigError("maturity must be positive");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (n_mc.empty()) throw ConfigError("n_mc needs at least one value");
  if (basis_m.empty()) throw ConfigError("basis_m needs at least one value");
  if (estimators.empty()) throw ConfigError("estimators must not be empty");
  for (Mode m : estimators) {
    if (m == Mode::European) throw ConfigError("EUROPEAN is always reported; list LSM, LSM2, LOOLSM");
  }
  for (std::size_t m : basis_m) {
    try {
      contracts::basis_family(kind, m);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (kind == PayoffKind::BasketCall && !(correlation > -1.0 / 3.0 && correlation <= 1.0)) {
    throw ConfigError("basket correlation must lie in (-1/3, 1]");
  }
  if (std::fabs(correlation) > 1.0) throw ConfigError("correlation must lie in [-1, 1]");
  if (experiment == Experiment::Comparison) {
    if (paths == 0) throw ConfigError("paths must be positive");
    if (antithetic && paths % 2 != 0) throw ConfigError("paths must be even with antithetic sampling");
    if (n_mc.front() == 0) throw ConfigError("n_mc must be positive");
  } else {
    for (std::size_t n : n_mc) {
      if (n == 0 || pool_size % n != 0) {
        throw ConfigError("pool_size " + std::to_string(pool_size) + " is not divisible by n_mc " +
                          std::to_string(n));
      }
      if (antithetic && (pool_size / n) % 2 != 0) {
        throw ConfigError("pool_size / n_mc must be even with antithetic sampling");
      }
    }
  }
  if (kind == PayoffKind::PutSingle && lattice_steps % dates != 0) {
    throw ConfigError("lattice_steps must be a multiple of dates");
  }
}

market::GbmModel ExperimentConfig::model_for(double key) const {
  const std::size_t assets = contracts::asset_count(kind);
  const double s0 = kind == PayoffKind::BestOfCall ? key : spot;
  return market::GbmModel::uniform(assets, s0, rate, dividend, vol, correlation);
}

contracts::PayoffSpec ExperimentConfig::payoff_for(double key) const {
  contracts::PayoffSpec p;
  p.kind = kind;
  p.strike = kind == PayoffKind::BestOfCall ? strike : key;
  return p;
}

market::ExerciseSchedule ExperimentConfig::schedule() const {
  return market::ExerciseSchedule::uniform(dates, maturity);
}

bool ExperimentConfig::uses_reference_parameters() const {
  const ExperimentConfig d = defaults(kind, Experiment::Comparison);
  return spot == d.spot && strike == d.strike && rate == d.rate && dividend == d.dividend &&
         vol == d.vol && correlation == d.correlation && dates == d.dates &&
         maturity == d.maturity;
}

ExperimentConfig parse_config(std::istream& in, Experiment experiment, Scale scale) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  std::optional<PayoffKind> kind;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "case") {
      try {
        kind = contracts::parse_payoff_kind(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      continue;
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  if (!kind) throw ConfigError("config must set 'case' (put, bestof or basket)");

  ExperimentConfig c = ExperimentConfig::defaults(*kind, experiment, scale);
  for (const auto& [key, value] : entries) {
    if (key == "keys") c.keys = to_list<double>(key, value, to_double);
    else if (key == "spot") c.spot = to_double(key, value);
    else if (key == "strike") c.strike = to_double(key, value);
    else if (key == "rate") c.rate = to_double(key, value);
    else if (key == "dividend") c.dividend = to_double(key, value);
    else if (key == "vol") c.vol = to_double(key, value);
    else if (key == "correlation") c.correlation = to_double(key, value);
    else if (key == "dates") c.dates = to_size(key, value);
    else if (key == "maturity") c.maturity = to_double(key, value);
    else if (key == "paths") c.paths = to_size(key, value);
    else if (key == "n_mc") c.n_mc = to_list<std::size_t>(key, value, to_size);
    else if (key == "basis_m") c.basis_m = to_list<std::size_t>(key, value, to_size);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_size(key, value));
    else if (key == "pool_size") c.pool_size = to_size(key, value);
    else if (key == "control_variate") c.control_variate = to_bool(key, value);
    else if (key == "antithetic") c.antithetic = to_bool(key, value);
    else if (key == "track_flips") c.track_flips = to_bool(key, value);
    else if (key == "record_timing") c.record_timing = to_bool(key, value);
    else if (key == "threads") c.threads = to_size(key, value);
    else if (key == "lattice_steps") c.lattice_steps = to_size(key, value);
    else if (key == "output") c.output = value;
    else if (key == "pool_file") c.pool_file = value;
    else if (key == "estimators") {
      c.estimators.clear();
      for (const auto& item : split(value, ',')) {
        try {
          c.estimators.push_back(engine::parse_mode(item));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.validate(experiment);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file, Experiment experiment,
                             Scale scale) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file " + file.string());
  return parse_config(is, experiment, scale);
}

ReferenceValues reference_values(const ExperimentConfig& config, double key) {
  ReferenceValues ref;
  const contracts::PayoffSpec payoff = config.payoff_for(key);
  switch (config.kind) {
    case PayoffKind::PutSingle: {
      const market::GbmModel model = config.model_for(key);
      ref.bermudan = oracles::binomial_bermudan_put(model, config.schedule(), payoff.strike,
                                                    config.lattice_steps);
      ref.european = oracles::bs_european_put(config.spot, config.vol, config.rate,
                                              config.dividend, payoff.strike, config.maturity);
      return ref;
    }
    case PayoffKind::BestOfCall:
    case PayoffKind::BasketCall: {
      if (!config.uses_reference_parameters()) {
        throw ConfigError("no reference price for " + std::string(contracts::to_string(config.kind)) +
                          " with non-default model parameters");
      }
      try {
        const auto& entry = oracles::reference_price(config.kind, key);
        ref.bermudan = entry.bermudan;
        ref.european = entry.european;
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      if (config.kind == PayoffKind::BestOfCall) {
        ref.european = oracles::bestof2_european_call(config.model_for(key), config.strike,
                                                      config.maturity);
      }
      return ref;
    }
  }
  throw ConfigError("unknown payoff kind");
}

std::uint64_t set_seed(std::uint64_t base, PayoffKind kind, std::size_t set) {
  return base ^ seed_hash(kind, set, nullptr);
}

std::uint64_t policy_seed(std::uint64_t base, PayoffKind kind, std::size_t set) {
  return base ^ seed_hash(kind, set, "policy");
}

std::uint64_t pool_seed(std::uint64_t base, PayoffKind kind) {
  return base ^ seed_hash(kind, 0, "pool");
}

SlopeFit fit_bias_slope(const std::vector<SlopePoint>& points) {
  if (points.size() < 3) throw std::invalid_argument("slope fit needs at least 3 points");
  double sw = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& p : points) {
    if (!(p.w > 0.0) || !std::isfinite(p.w)) {
      throw std::invalid_argument("slope fit weights must be positive and finite");
    }
    sw += p.w;
    sx += p.w * p.x;
    sy += p.w * p.y;
  }
  const double xbar = sx / sw;
  const double ybar = sy / sw;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& p : points) {
    sxx += p.w * (p.x - xbar) * (p.x - xbar);
    sxy += p.w * (p.x - xbar) * (p.y - ybar);
    syy += p.w * (p.y - ybar) * (p.y - ybar);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("slope fit needs at least two distinct x values");
  SlopeFit fit;
  fit.points = points.size();
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double sse = 0.0;
  for (const auto& p : points) {
    const double r = p.y - (fit.intercept + fit.slope * p.x);
    sse += p.w * r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.slope_se = std::sqrt(1.0 / sxx);
  fit.intercept_se = std::sqrt(1.0 / sw + xbar * xbar / sxx);
  return fit;
}

ExperimentReport run_experiment1(const ExperimentConfig& config) {
  config.validate(Experiment::Comparison);
  const market::ExerciseSchedule schedule = config.schedule();
  const std::size_t n_sets = config.n_mc.front();
  const bool want_lsm2 = std::find(config.estimators.begin(), config.estimators.end(),
                                   Mode::LSM2) != config.estimators.end();
  const std::string case_name(contracts::to_string(config.kind));

  ExperimentReport report;
  report.notes.push_back(std::string("control variate ") + (config.control_variate ? "on" : "off"));
  if (config.kind == PayoffKind::BasketCall &&
      std::find(config.basis_m.begin(), config.basis_m.end(), 10) != config.basis_m.end()) {
    report.notes.push_back("basket M=10 is the linear terms plus the pure squares");
  }

  for (double key : config.keys) {
    const auto start = std::chrono::steady_clock::now();
    const ReferenceValues ref = reference_values(config, key);
    const market::GbmModel model = config.model_for(key);
    const contracts::PayoffSpec payoff = config.payoff_for(key);
    const std::size_t n_m = config.basis_m.size();

    // prices[m][estimator][set], estimator order LSM, LSM2, LOOLSM.
    std::vector<std::vector<std::vector<double>>> prices(
        n_m, std::vector<std::vector<double>>(3, std::vector<double>(n_sets)));
    std::vector<std::vector<std::vector<std::size_t>>> flips(
        n_m, std::vector<std::vector<std::size_t>>(3, std::vector<std::size_t>(n_sets, 0)));
    std::vector<std::vector<std::vector<std::size_t>>> ranks(
        n_m, std::vector<std::vector<std::size_t>>(3, std::vector<std::size_t>(n_sets, 0)));
    std::vector<double> euro(n_sets);

    parallel_for(n_sets, config.threads, [&](std::size_t k) {
      const market::PathSet valuation = market::generate_paths(
          model, schedule, config.paths, set_seed(config.seed, config.kind, k), config.antithetic);
      std::optional<market::PathSet> policy_paths;
      if (want_lsm2) {
        policy_paths = market::generate_paths(model, schedule, config.paths,
                                              policy_seed(config.seed, config.kind, k),
                                              config.antithetic);
      }
      const engine::PricingResult mc_euro = engine::european_mc_price(valuation, payoff, config.rate);
      auto adjust = [&](const engine::PricingResult& r) {
        return config.control_variate ? engine::apply_control_variate(r, ref.european, mc_euro).price
                                      : r.price;
      };
      euro[k] = config.control_variate ? ref.european : mc_euro.price;
      engine::EngineOptions opts;
      opts.track_flips = config.track_flips;
      for (std::size_t mi = 0; mi < n_m; ++mi) {
        const contracts::BasisSpec basis = contracts::basis_family(config.kind, config.basis_m[mi]);
        const auto both = engine::price_lsm_and_loolsm(valuation, payoff, basis, config.rate, opts);
        prices[mi][0][k] = adjust(both[0].result);
        prices[mi][2][k] = adjust(both[1].result);
        for (int e : {0, 2}) {
          const auto& r = both[e == 0 ? 0 : 1].result;
          flips[mi][e][k] = std::accumulate(r.flip_counts.begin(), r.flip_counts.end(), std::size_t{0});
          ranks[mi][e][k] = min_regression_rank(r.ranks);
        }
        if (want_lsm2) {
          const engine::PricingResult two =
              engine::price_two_pass(*policy_paths, valuation, payoff, basis, config.rate);
          prices[mi][1][k] = adjust(two);
          ranks[mi][1][k] = min_regression_rank(two.ranks);
        }
      }
    });
    const double wall = config.record_timing ? elapsed_ms(start) : 0.0;

    for (std::size_t mi = 0; mi < n_m; ++mi) {
      for (Mode mode : {Mode::LSM, Mode::LSM2, Mode::LOOLSM}) {
        if (std::find(config.estimators.begin(), config.estimators.end(), mode) ==
            config.estimators.end()) {
          continue;
        }
        const int e = mode == Mode::LSM ? 0 : (mode == Mode::LSM2 ? 1 : 2);
        std::vector<double> offsets(n_sets);
        std::vector<double> diffs(n_sets);
        for (std::size_t k = 0; k < n_sets; ++k) {
          offsets[k] = prices[mi][e][k] - ref.bermudan;
          diffs[k] = prices[mi][0][k] - prices[mi][e][k];
        }
        const SampleStats off = stats_of(offsets);
        const SampleStats bias = stats_of(diffs);
        ReportRow row;
        row.case_name = case_name;
        row.key = key;
        row.estimator = std::string(engine::to_string(mode));
        row.m = config.basis_m[mi];
        row.n = config.paths;
        row.n_mc = n_sets;
        row.mean_offset = off.mean;
        row.std = off.std;
        row.se_mean = off.se;
        row.mean_bias = bias.mean;
        row.bias_se = bias.se;
        row.flips_total = std::accumulate(flips[mi][e].begin(), flips[mi][e].end(), std::size_t{0});
        row.min_rank = *std::min_element(ranks[mi][e].begin(), ranks[mi][e].end());
        row.wall_ms = wall;
        report.rows.push_back(row);
      }
    }
    std::vector<double> euro_offsets(n_sets);
    for (std::size_t k = 0; k < n_sets; ++k) euro_offsets[k] = euro[k] - ref.european;
    const SampleStats off = stats_of(euro_offsets);
    ReportRow row;
    row.case_name = case_name;
    row.key = key;
    row.estimator = std::string(engine::to_string(Mode::European));
    row.m = 0;
    row.n = config.paths;
    row.n_mc = n_sets;
    row.mean_offset = off.mean;
    row.std = off.std;
    row.se_mean = off.se;
    row.mean_bias = kNaN;
    row.bias_se = kNaN;
    row.wall_ms = wall;
    report.rows.push_back(row);
  }
  return report;
}

ExperimentReport run_experiment2(const ExperimentConfig& config,
                                 const std::optional<market::PathSet>& pool_override) {
  config.validate(Experiment::Convergence);
  const market::ExerciseSchedule schedule = config.schedule();
  const std::string case_name(contracts::to_string(config.kind));

  ExperimentReport report;
  report.notes.push_back("one path pool per key is shared by every M and n_mc (nested contiguous splits)");
  report.notes.push_back(std::string("control variate ") + (config.control_variate ? "on" : "off"));
  if (config.kind == PayoffKind::BasketCall &&
      std::find(config.basis_m.begin(), config.basis_m.end(), 10) != config.basis_m.end()) {
    report.notes.push_back("basket M=10 is the linear terms plus the pure squares");
  }

  for (double key : config.keys) {
    const ReferenceValues ref = reference_values(config, key);
    const market::GbmModel model = config.model_for(key);
    const contracts::PayoffSpec payoff = config.payoff_for(key);
    market::PathSet pool = pool_override
                               ? *pool_override
                               : market::generate_paths(model, schedule, config.pool_size,
                                                        pool_seed(config.seed, config.kind),
                                                        config.antithetic, config.threads);
    if (pool.paths() != config.pool_size || !(pool.schedule() == schedule) ||
        pool.assets() != model.assets()) {
      throw ConfigError("path pool does not match the configured pool size, schedule or assets");
    }
    std::vector<SlopePoint> points;

    for (std::size_t n_mc : config.n_mc) {
      const auto start = std::chrono::steady_clock::now();
      const std::vector<market::PathSet> sets = market::split_pool(pool, n_mc);
      const std::size_t n_m = config.basis_m.size();
      std::vector<std::vector<double>> lsm(n_m, std::vector<double>(n_mc));
      std::vector<std::vector<double>> loo(n_m, std::vector<double>(n_mc));
      std::vector<std::vector<std::size_t>> lsm_flips(n_m, std::vector<std::size_t>(n_mc));
      std::vector<std::vector<std::size_t>> loo_flips(n_m, std::vector<std::size_t>(n_mc));
      std::vector<std::vector<std::size_t>> min_rank(n_m, std::vector<std::size_t>(n_mc));

      parallel_for(n_mc, config.threads, [&](std::size_t k) {
        const market::PathSet& set = sets[k];
        const engine::PricingResult mc_euro = engine::european_mc_price(set, payoff, config.rate);
        engine::EngineOptions opts;
        opts.track_flips = config.track_flips;
        for (std::size_t mi = 0; mi < n_m; ++mi) {
          const contracts::BasisSpec basis = contracts::basis_family(config.kind, config.basis_m[mi]);
          const auto both = engine::price_lsm_and_loolsm(set, payoff, basis, config.rate, opts);
          auto adjust = [&](const engine::PricingResult& r) {
            return config.control_variate
                       ? engine::apply_control_variate(r, ref.european, mc_euro).price
                       : r.price;
          };
          lsm[mi][k] = adjust(both[0].result);
          loo[mi][k] = adjust(both[1].result);
          const auto& fl = both[0].result.flip_counts;
          const auto& fo = both[1].result.flip_counts;
          lsm_flips[mi][k] = std::accumulate(fl.begin(), fl.end(), std::size_t{0});
          loo_flips[mi][k] = std::accumulate(fo.begin(), fo.end(), std::size_t{0});
          min_rank[mi][k] = std::min(min_regression_rank(both[0].result.ranks),
                                     min_regression_rank(both[1].result.ranks));
        }
      });
      const double wall = config.record_timing ? elapsed_ms(start) : 0.0;
      const std::size_t n = pool.paths() / n_mc;

      for (std::size_t mi = 0; mi < n_m; ++mi) {
        std::vector<double> diffs(n_mc);
        std::vector<double> lsm_off(n_mc);
        std::vector<double> loo_off(n_mc);
        for (std::size_t k = 0; k < n_mc; ++k) {
          diffs[k] = lsm[mi][k] - loo[mi][k];
          lsm_off[k] = lsm[mi][k] - ref.bermudan;
          loo_off[k] = loo[mi][k] - ref.bermudan;
        }
        const SampleStats bias = stats_of(diffs);
        const std::size_t rank = *std::min_element(min_rank[mi].begin(), min_rank[mi].end());
        for (int e = 0; e < 2; ++e) {
          const SampleStats off = stats_of(e == 0 ? lsm_off : loo_off);
          const auto& fl = e == 0 ? lsm_flips[mi] : loo_flips[mi];
          ReportRow row;
          row.case_name = case_name;
          row.key = key;
          row.estimator = e == 0 ? "LSM" : "LOOLSM";
          row.m = config.basis_m[mi];
          row.n = n;
          row.n_mc = n_mc;
          row.mean_offset = off.mean;
          row.std = off.std;
          row.se_mean = off.se;
          row.mean_bias = bias.mean;
          row.bias_se = bias.se;
          row.flips_total = std::accumulate(fl.begin(), fl.end(), std::size_t{0});
          row.min_rank = rank;
          row.wall_ms = wall;
          report.rows.push_back(row);
        }
        if (std::isfinite(bias.se) && bias.se > 0.0) {
          points.push_back({static_cast<double>(config.basis_m[mi]) / static_cast<double>(n),
                            bias.mean, 1.0 / (bias.se * bias.se)});
        }
      }
    }
    if (points.size() >= 3) {
      try {
        report.slopes.push_back({key, fit_bias_slope(points)});
      } catch (const std::invalid_argument& e) {
        report.notes.push_back(std::string("slope fit skipped: ") + e.what());
      }
    }
  }
  return report;
}

std::string format_decimal(double value, int digits) {
  if (std::isnan(value)) return "";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  const int exponent = static_cast<int>(std::floor(std::log10(std::fabs(value))));
  const int decimals = std::max(0, digits - 1 - exponent);
  if (exponent >= digits) {
    const double unit = std::pow(10.0, exponent - digits + 1);
    value = std::round(value / unit) * unit;
  }
  std::vector<char> buf(static_cast<std::size_t>(decimals + std::max(exponent, 0) + 8));
  std::snprintf(buf.data(), buf.size(), "%.*f", decimals, value);
  std::string s(buf.data());
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

void write_csv(const ExperimentReport& report, std::ostream& os) {
  os << "case,key,estimator,M,N,n_mc,mean_offset,std,se_mean,mean_bias,bias_se,flips_total,"
        "min_rank,wall_ms\n";
  for (const auto& r : report.rows) {
    os << r.case_name << ',' << format_decimal(r.key) << ',' << r.estimator << ',' << r.m << ','
       << r.n << ',' << r.n_mc << ',' << format_decimal(r.mean_offset) << ','
       << format_decimal(r.std) << ',' << format_decimal(r.se_mean) << ','
       << format_decimal(r.mean_bias) << ',' << format_decimal(r.bias_se) << ','
       << r.flips_total << ',' << r.min_rank << ',' << format_decimal(r.wall_ms) << '\n';
  }
}

void emit_csv(const ExperimentReport& report, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
  write_csv(report, os);
  os.flush();
  if (!os) throw std::runtime_error("failed writing " + file.string());
}

std::vector<ReportRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty CSV input");
  std::vector<ReportRow> rows;
  auto num = [](const std::string& s) {
    return s.empty() ? kNaN : std::stod(s);
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 14) throw std::invalid_argument("CSV row has " + std::to_string(f.size()) + " fields");
    ReportRow r;
    r.case_name = f[0];
    r.key = num(f[1]);
    r.estimator = f[2];
    r.m = std::stoul(f[3]);
    r.n = std::stoul(f[4]);
    r.n_mc = std::stoul(f[5]);
    r.mean_offset = num(f[6]);
    r.std = num(f[7]);
    r.se_mean = num(f[8]);
    r.mean_bias = num(f[9]);
    r.bias_se = num(f[10]);
    r.flips_total = std::stoul(f[11]);
    r.min_rank = std::stoul(f[12]);
    r.wall_ms = num(f[13]);
    rows.push_back(r);
  }
  return rows;
}

void emit_slope_csv(const ExperimentReport& report, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
  os << "key,slope,intercept,r2,slope_se,intercept_se,points\n";
  for (const auto& s : report.slopes) {
    os << format_decimal(s.key) << ',' << format_decimal(s.fit.slope) << ','
       << format_decimal(s.fit.intercept) << ',' << format_decimal(s.fit.r2) << ','
       << format_decimal(s.fit.slope_se) << ',' << format_decimal(s.fit.intercept_se) << ','
       << s.fit.points << '\n';
  }
  if (!os) throw std::runtime_error("failed writing " + file.string());
}

}  // namespace loolsm::harness
