#pragma once

#include "loolsm/contracts.hpp"
#include "loolsm/engine.hpp"
#include "loolsm/market.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace loolsm::harness {

enum class Experiment { Comparison, Convergence };
enum class Scale { Desk, Paper };

Scale parse_scale(const std::string& text);

/// Everything one experiment run needs. Defaults come from `defaults()` and
/// reproduce the published parameter set of each case; a config file
/// overrides individual fields.
struct ExperimentConfig {
  contracts::PayoffKind kind = contracts::PayoffKind::PutSingle;
  std::vector<double> keys;  // strikes (put, basket) or common spots (bestof)
  double spot = 100.0;       // put and basket
  double strike = 100.0;     // bestof
  double rate = 0.05;
  double dividend = 0.02;
  double vol = 0.2;
  double correlation = 0.0;
  std::size_t dates = 5;
  double maturity = 1.0;
  std::vector<engine::Mode> estimators;
  std::size_t paths = 40000;          // N per set, comparison experiment
  std::vector<std::size_t> n_mc;      // comparison uses the first entry
  std::vector<std::size_t> basis_m;
  std::uint64_t seed = 20240601;
  std::size_t pool_size = 144000;     // convergence experiment
  bool control_variate = false;
  bool antithetic = true;
  bool track_flips = true;
  bool record_timing = false;         // wall_ms is 0 unless enabled
  std::size_t threads = 1;
  std::size_t lattice_steps = 50000;  // put reference prices
  std::string output;
  std::string pool_file;              // optional PathSet dump for the pool

  static ExperimentConfig defaults(contracts::PayoffKind kind, Experiment experiment,
                                   Scale scale = Scale::Desk);

  /// Throws ConfigError on inconsistent settings.
  void validate(Experiment experiment) const;

  market::GbmModel model_for(double key) const;
  contracts::PayoffSpec payoff_for(double key) const;
  market::ExerciseSchedule schedule() const;
  /// True when model, schedule and payoff parameters equal the shipped case.
  bool uses_reference_parameters() const;
};

/// Key-value config: one `key = value` per line, '#' comments, lists comma
/// separated. `case` selects the defaults and is required.
ExperimentConfig parse_config(std::istream& in, Experiment experiment, Scale scale);
ExperimentConfig load_config(const std::filesystem::path& file, Experiment experiment,
                             Scale scale);

/// Exact reference values used for offsets and the control variate.
struct ReferenceValues {
  double bermudan = 0.0;
  double european = 0.0;
};
/// put: CRR lattice and Black-Scholes for any parameters; bestof: published
/// Bermudan value and analytic European; basket: published values. Throws
/// ConfigError when no reference exists for the configuration.
ReferenceValues reference_values(const ExperimentConfig& config, double key);

/// Seeds: set k uses base ^ H(case, k); the two-pass policy set uses
/// base ^ H(case, k, "policy"); the convergence pool uses base ^ H(case, "pool").
std::uint64_t set_seed(std::uint64_t base, contracts::PayoffKind kind, std::size_t set);
std::uint64_t policy_seed(std::uint64_t base, contracts::PayoffKind kind, std::size_t set);
std::uint64_t pool_seed(std::uint64_t base, contracts::PayoffKind kind);

struct ReportRow {
  std::string case_name;
  double key = 0.0;
  std::string estimator;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t n_mc = 0;
  double mean_offset = 0.0;
  double std = 0.0;        // NaN when n_mc < 2
  double se_mean = 0.0;    // NaN when n_mc < 2
  double mean_bias = 0.0;  // mean of LSM - estimator; NaN for European rows
  double bias_se = 0.0;
  std::size_t flips_total = 0;
  std::size_t min_rank = 0;
  double wall_ms = 0.0;
};

struct SlopePoint {
  double x = 0.0;  // M / N
  double y = 0.0;  // mean bias
  double w = 1.0;  // 1 / variance
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  std::size_t points = 0;
};

/// Weighted least-squares line through the points. With w = 1/variance the
/// standard errors are the known-variance ones.
SlopeFit fit_bias_slope(const std::vector<SlopePoint>& points);

struct KeyedSlope {
  double key = 0.0;
  SlopeFit fit;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<KeyedSlope> slopes;  // convergence experiment only
  std::vector<std::string> notes;
};

ExperimentReport run_experiment1(const ExperimentConfig& config);
/// `pool` overrides the generated pool (e.g. one loaded from a dump).
ExperimentReport run_experiment2(const ExperimentConfig& config,
                                 const std::optional<market::PathSet>& pool = std::nullopt);

/// Columns: case,key,estimator,M,N,n_mc,mean_offset,std,se_mean,mean_bias,
/// bias_se,flips_total,min_rank,wall_ms. Reals in plain decimal notation with
/// 10 significant digits; NaN is written as an empty field.
void write_csv(const ExperimentReport& report, std::ostream& os);
void emit_csv(const ExperimentReport& report, const std::filesystem::path& file);
std::vector<ReportRow> read_csv(std::istream& is);

/// key,slope,intercept,r2,slope_se,intercept_se,points
void emit_slope_csv(const ExperimentReport& report, const std::filesystem::path& file);

/// Plain decimal, `digits` significant digits, no exponent.
std::string format_decimal(double value, int digits = 10);

}  // namespace loolsm::harness
