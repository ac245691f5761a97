#include "loolsm/engine.hpp"
#include "loolsm/error.hpp"
#include "loolsm/harness.hpp"
#include "loolsm/oracles.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

using namespace loolsm;
using contracts::PayoffKind;

namespace {

struct PriceArgs {
  std::string kind = "put";
  std::string mode = "LOOLSM";
  std::optional<double> strike;
  std::optional<double> spot;
  std::size_t paths = 40000;
  std::optional<std::size_t> basis_m;
  std::uint64_t seed = 20240601;
  bool control_variate = false;
  std::size_t threads = 1;
};

struct ExperimentArgs {
  std::string config;
  std::string kind;
  std::string out;
  std::string slopes;
  std::string scale = "desk";
  std::size_t threads = 0;
};

struct OracleArgs {
  std::string kind = "put";
  double key = 100.0;
  std::size_t steps = 50000;
};

int run_price(const PriceArgs& a) {
  const PayoffKind kind = contracts::parse_payoff_kind(a.kind);
  const engine::Mode mode = engine::parse_mode(a.mode);
  harness::ExperimentConfig c =
      harness::ExperimentConfig::defaults(kind, harness::Experiment::Comparison);
  double key = 100.0;
  if (kind == PayoffKind::BestOfCall) {
    if (a.spot) key = *a.spot;
    if (a.strike) c.strike = *a.strike;
  } else {
    if (a.strike) key = *a.strike;
    if (a.spot) c.spot = *a.spot;
  }
  c.keys = {key};
  c.paths = a.paths;
  if (a.basis_m) c.basis_m = {*a.basis_m};
  c.threads = a.threads;
  c.validate(harness::Experiment::Comparison);

  const auto model = c.model_for(key);
  const auto payoff = c.payoff_for(key);
  const auto schedule = c.schedule();
  const auto basis = contracts::basis_family(kind, c.basis_m.front());
  const auto paths = market::generate_paths(model, schedule, c.paths, a.seed, c.antithetic, c.threads);

  std::optional<harness::ReferenceValues> ref;
  try {
    ref = harness::reference_values(c, key);
  } catch (const ConfigError&) {
    if (a.control_variate) throw;
  }

  engine::EngineOptions opts;
  opts.threads = c.threads;
  engine::PricingResult result;
  switch (mode) {
    case engine::Mode::LSM:
    case engine::Mode::LOOLSM:
      result = engine::price_backward(paths, payoff, basis, c.rate, mode, opts).result;
      break;
    case engine::Mode::LSM2: {
      const auto policy = market::generate_paths(model, schedule, c.paths,
                                                 harness::policy_seed(a.seed, kind, 0),
                                                 c.antithetic, c.threads);
      result = engine::price_two_pass(policy, paths, payoff, basis, c.rate);
      break;
    }
    case engine::Mode::European:
      result = engine::european_mc_price(paths, payoff, c.rate);
      break;
  }
  if (a.control_variate) {
    const auto euro = engine::european_mc_price(paths, payoff, c.rate);
    result = engine::apply_control_variate(result, ref->european, euro);
  }

  std::printf("case       %s\n", a.kind.c_str());
  std::printf("key        %g\n", key);
  std::printf("mode       %s\n", std::string(engine::to_string(result.mode)).c_str());
  std::printf("paths      %zu (antithetic)\n", paths.paths());
  if (mode != engine::Mode::European) std::printf("basis M    %zu\n", basis.size());
  std::printf("price      %.6f\n", result.price);
  std::printf("std error  %.6f\n", result.std_error);
  if (ref) {
    const double exact = mode == engine::Mode::European ? ref->european : ref->bermudan;
    std::printf("reference  %.6f\n", exact);
    std::printf("offset     %+.6f\n", result.price - exact);
  }
  if (mode == engine::Mode::LSM || mode == engine::Mode::LOOLSM) {
    const std::size_t flips =
        std::accumulate(result.flip_counts.begin(), result.flip_counts.end(), std::size_t{0});
    std::printf("flips      %zu\n", flips);
    if (mode == engine::Mode::LOOLSM) std::printf("fallbacks  %zu\n", result.fallback_count);
  }
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

harness::ExperimentConfig experiment_config(const ExperimentArgs& a, harness::Experiment e) {
  const harness::Scale scale = harness::parse_scale(a.scale);
  harness::ExperimentConfig c;
  if (!a.config.empty()) {
    c = harness::load_config(a.config, e, scale);
    if (!a.kind.empty() && contracts::parse_payoff_kind(a.kind) != c.kind) {
      throw ConfigError("--case disagrees with the case in " + a.config);
    }
  } else if (!a.kind.empty()) {
    c = harness::ExperimentConfig::defaults(contracts::parse_payoff_kind(a.kind), e, scale);
  } else {
    throw ConfigError("give --config FILE or --case");
  }
  if (a.threads > 0) c.threads = a.threads;
  if (!a.out.empty()) c.output = a.out;
  c.validate(e);
  return c;
}

void write_report(const harness::ExperimentReport& report, const std::string& out) {
  for (const auto& note : report.notes) std::fprintf(stderr, "note: %s\n", note.c_str());
  if (out.empty() || out == "-") {
    harness::write_csv(report, std::cout);
  } else {
    harness::emit_csv(report, out);
    std::fprintf(stderr, "wrote %zu rows to %s\n", report.rows.size(), out.c_str());
  }
}

int run_experiment(const ExperimentArgs& a, harness::Experiment e) {
  const harness::ExperimentConfig c = experiment_config(a, e);
  if (e == harness::Experiment::Comparison) {
    write_report(harness::run_experiment1(c), c.output);
    return 0;
  }
  std::optional<market::PathSet> pool;
  if (!c.pool_file.empty()) {
    if (c.keys.size() != 1) throw ConfigError("pool_file needs exactly one key");
    pool = market::load_paths(c.pool_file, c.schedule());
  }
  const harness::ExperimentReport report = harness::run_experiment2(c, pool);
  write_report(report, c.output);
  for (const auto& s : report.slopes) {
    std::fprintf(stderr, "key %g: slope %.6g (se %.3g), intercept %.3g (se %.3g), r2 %.4f\n", s.key,
                 s.fit.slope, s.fit.slope_se, s.fit.intercept, s.fit.intercept_se, s.fit.r2);
  }
  if (!a.slopes.empty()) harness::emit_slope_csv(report, a.slopes);
  return 0;
}

int run_oracle(const OracleArgs& a) {
  const PayoffKind kind = contracts::parse_payoff_kind(a.kind);
  harness::ExperimentConfig c =
      harness::ExperimentConfig::defaults(kind, harness::Experiment::Comparison);
  c.lattice_steps = a.steps;
  c.validate(harness::Experiment::Comparison);
  const harness::ReferenceValues ref = harness::reference_values(c, a.key);
  std::printf("case      %s\n", a.kind.c_str());
  std::printf("key       %g\n", a.key);
  std::printf("bermudan  %.6f\n", ref.bermudan);
  std::printf("european  %.6f\n", ref.european);
  if (kind != PayoffKind::PutSingle) {
    std::printf("source    %s\n", oracles::reference_price(kind, a.key).source.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bermudan option pricing by least-squares Monte Carlo with leave-one-out regression"};
  app.require_subcommand(1);

  PriceArgs price;
  auto* p = app.add_subcommand("price", "Price one contract with one estimator");
  p->add_option("--case", price.kind, "put, bestof or basket")->capture_default_str();
  p->add_option("--mode", price.mode, "LSM, LOOLSM, LSM2 or EUROPEAN")->capture_default_str();
  p->add_option("--strike", price.strike, "Strike (the key for put and basket)");
  p->add_option("--spot", price.spot, "Initial spot (the key for bestof)");
  p->add_option("--paths", price.paths, "Number of paths (even)")->capture_default_str();
  p->add_option("--basis-m", price.basis_m, "Number of basis functions");
  p->add_option("--seed", price.seed, "Random seed")->capture_default_str();
  p->add_flag("--cv", price.control_variate, "Apply the European control variate");
  p->add_option("--threads", price.threads, "Worker threads")->capture_default_str();

  ExperimentArgs exp1;
  auto* e1 = app.add_subcommand("experiment1", "Estimator comparison over independent path sets");
  ExperimentArgs exp2;
  auto* e2 = app.add_subcommand("experiment2", "Look-ahead bias against M/N on a shared path pool");
  for (auto [cmd, args] : {std::pair{e1, &exp1}, std::pair{e2, &exp2}}) {
    cmd->add_option("--config", args->config, "Config file (key = value lines)");
    cmd->add_option("--case", args->kind, "Use the defaults of a case instead of a config file");
    cmd->add_option("--out", args->out, "CSV output file (default: stdout)");
    cmd->add_option("--scale", args->scale, "desk or paper")->capture_default_str();
    cmd->add_option("--threads", args->threads, "Worker threads (overrides the config)");
  }
  e2->add_option("--slopes", exp2.slopes, "Write the per-key slope fit to this CSV file");

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle", "Print the reference Bermudan and European prices");
  o->add_option("--case", oracle.kind, "put, bestof or basket")->capture_default_str();
  o->add_option("--key", oracle.key, "Strike (put, basket) or spot (bestof)")->capture_default_str();
  o->add_option("--steps", oracle.steps, "Lattice steps for the put")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (p->parsed()) return run_price(price);
    if (e1->parsed()) return run_experiment(exp1, harness::Experiment::Comparison);
    if (e2->parsed()) return run_experiment(exp2, harness::Experiment::Convergence);
    if (o->parsed()) return run_oracle(oracle);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
