#include "loolsm/contracts.hpp"
#include "loolsm/engine.hpp"
#include "loolsm/error.hpp"
#include "loolsm/harness.hpp"
#include "loolsm/market.hpp"
#include "loolsm/oracles.hpp"
#include "loolsm/regression.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace loolsm;

namespace {

using release = py::call_guard<py::gil_scoped_release>;

py::array_t<double> path_values(const market::PathSet& p) {
  py::array_t<double> out({p.paths(), p.dates(), p.assets()});
  std::copy(p.values().begin(), p.values().end(), out.mutable_data());
  return out;
}

market::PathSet path_set_from_array(const market::ExerciseSchedule& schedule,
                                    py::array_t<double, py::array::c_style | py::array::forcecast> values,
                                    std::uint64_t seed, bool antithetic) {
  if (values.ndim() != 3) throw std::invalid_argument("values must have shape (paths, dates, assets)");
  std::vector<double> v(values.data(), values.data() + values.size());
  return market::PathSet(schedule, values.shape(0), values.shape(2), std::move(v), seed, antithetic);
}

}  // namespace

PYBIND11_MODULE(_loolsm, m) {
  m.doc() = "Least-squares Monte Carlo pricing of Bermudan options with leave-one-out regression.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  // regression
  py::class_<regression::RegressionFit>(m, "RegressionFit")
      .def_readonly("beta", &regression::RegressionFit::beta)
      .def_readonly("fitted", &regression::RegressionFit::fitted)
      .def_readonly("residuals", &regression::RegressionFit::residuals)
      .def_readonly("leverage", &regression::RegressionFit::leverage)
      .def_readonly("rank", &regression::RegressionFit::rank);
  m.def("fit_least_squares", &regression::fit_least_squares, py::arg("x"), py::arg("y"), release());
  m.def(
      "loo_predictions",
      [](const regression::RegressionFit& fit) {
        auto r = regression::loo_predictions(fit);
        return py::make_tuple(r.values, r.fallback_rows);
      },
      py::arg("fit"), "Leave-one-out predictions C' and the rows that fell back to C.");
  m.def(
      "loo_residuals",
      [](const regression::RegressionFit& fit) {
        auto r = regression::loo_residuals(fit);
        return py::make_tuple(r.values, r.fallback_rows);
      },
      py::arg("fit"));

  // market
  py::class_<market::GbmModel>(m, "GbmModel")
      .def_static("uniform", &market::GbmModel::uniform, py::arg("assets"), py::arg("spot"),
                  py::arg("rate"), py::arg("dividend"), py::arg("vol"), py::arg("correlation") = 0.0)
      .def_readwrite("spot", &market::GbmModel::spot)
      .def_readwrite("rate", &market::GbmModel::rate)
      .def_readwrite("dividend", &market::GbmModel::dividend)
      .def_readwrite("vol", &market::GbmModel::vol)
      .def_readwrite("correlation", &market::GbmModel::correlation)
      .def_property_readonly("assets", &market::GbmModel::assets)
      .def("validate", &market::GbmModel::validate);

  py::class_<market::ExerciseSchedule>(m, "ExerciseSchedule")
      .def(py::init<std::vector<double>>(), py::arg("times"))
      .def_static("uniform", &market::ExerciseSchedule::uniform, py::arg("dates"), py::arg("maturity"))
      .def_property_readonly("times", &market::ExerciseSchedule::times)
      .def("__len__", &market::ExerciseSchedule::size)
      .def(py::self == py::self);

  py::class_<market::PathSet>(m, "PathSet")
      .def(py::init(&path_set_from_array), py::arg("schedule"), py::arg("values"),
           py::arg("seed") = 0, py::arg("antithetic") = false)
      .def_property_readonly("paths", &market::PathSet::paths)
      .def_property_readonly("dates", &market::PathSet::dates)
      .def_property_readonly("assets", &market::PathSet::assets)
      .def_property_readonly("schedule", &market::PathSet::schedule)
      .def_property_readonly("seed", &market::PathSet::seed)
      .def_property_readonly("antithetic", &market::PathSet::antithetic)
      .def_property_readonly("pool_offset", &market::PathSet::pool_offset)
      .def_property_readonly("values", &path_values, "Copy of the simulated prices, shape (paths, dates, assets).");

  m.def("generate_paths", &market::generate_paths, py::arg("model"), py::arg("schedule"),
        py::arg("n_paths"), py::arg("seed"), py::arg("antithetic") = true, py::arg("threads") = 1,
        release());
  m.def("split_pool", &market::split_pool, py::arg("pool"), py::arg("n_sets"));
  m.def("save_paths", &market::save_paths, py::arg("paths"), py::arg("file"));
  m.def("load_paths", &market::load_paths, py::arg("file"), py::arg("schedule"));

  // contracts
  py::enum_<contracts::PayoffKind>(m, "PayoffKind")
      .value("put", contracts::PayoffKind::PutSingle)
      .value("bestof", contracts::PayoffKind::BestOfCall)
      .value("basket", contracts::PayoffKind::BasketCall);
  m.def("parse_payoff_kind", [](const std::string& s) { return contracts::parse_payoff_kind(s); });

  py::class_<contracts::PayoffSpec>(m, "PayoffSpec")
      .def(py::init([](contracts::PayoffKind kind, double strike, std::vector<double> weights) {
             return contracts::PayoffSpec{kind, strike, std::move(weights), true};
           }),
           py::arg("kind"), py::arg("strike"), py::arg("weights") = std::vector<double>{})
      .def_readwrite("kind", &contracts::PayoffSpec::kind)
      .def_readwrite("strike", &contracts::PayoffSpec::strike)
      .def_readwrite("weights", &contracts::PayoffSpec::weights)
      .def_readonly("nonnegative", &contracts::PayoffSpec::nonnegative);
  m.def(
      "discounted_payout",
      [](const contracts::PayoffSpec& spec, std::vector<double> state, double t, double rate) {
        return contracts::discounted_payout(spec, state, t, rate);
      },
      py::arg("spec"), py::arg("state"), py::arg("t"), py::arg("rate"));

  py::class_<contracts::BasisSpec>(m, "BasisSpec")
      .def_readonly("kind", &contracts::BasisSpec::kind)
      .def("__len__", &contracts::BasisSpec::size)
      .def_property_readonly("labels", [](const contracts::BasisSpec& b) {
        std::vector<std::string> out;
        for (const auto& t : b.terms) out.push_back(t.label());
        return out;
      });
  m.def("basis_family", &contracts::basis_family, py::arg("kind"), py::arg("m"));
  m.def(
      "basis_row",
      [](const contracts::BasisSpec& spec, std::vector<double> state, double z) {
        return contracts::basis_row(spec, state, z);
      },
      py::arg("spec"), py::arg("state"), py::arg("z"));

  // engine
  py::enum_<engine::Mode>(m, "Mode")
      .value("LSM", engine::Mode::LSM)
      .value("LOOLSM", engine::Mode::LOOLSM)
      .value("LSM2", engine::Mode::LSM2)
      .value("EUROPEAN", engine::Mode::European);

  py::class_<engine::PricingResult>(m, "PricingResult")
      .def_readonly("price", &engine::PricingResult::price)
      .def_readonly("per_path_value", &engine::PricingResult::per_path_value)
      .def_readonly("std_error", &engine::PricingResult::std_error)
      .def_readonly("mode", &engine::PricingResult::mode)
      .def_readonly("ranks", &engine::PricingResult::ranks)
      .def_readonly("fallback_count", &engine::PricingResult::fallback_count)
      .def_readonly("flip_counts", &engine::PricingResult::flip_counts)
      .def_readonly("warnings", &engine::PricingResult::warnings)
      .def("__repr__", [](const engine::PricingResult& r) {
        std::ostringstream os;
        os << "PricingResult(mode=" << engine::to_string(r.mode) << ", price=" << r.price
           << ", std_error=" << r.std_error << ")";
        return os.str();
      });

  py::class_<engine::ExercisePolicy>(m, "ExercisePolicy")
      .def_readonly("coefficients", &engine::ExercisePolicy::coefficients)
      .def_readonly("basis", &engine::ExercisePolicy::basis);

  m.def(
      "price_backward",
      [](const market::PathSet& paths, const contracts::PayoffSpec& payoff,
         const contracts::BasisSpec& basis, double rate, engine::Mode mode, std::size_t threads) {
        engine::EngineOptions opts;
        opts.threads = threads;
        auto r = engine::price_backward(paths, payoff, basis, rate, mode, opts);
        return std::make_pair(std::move(r.result), std::move(r.policy));
      },
      py::arg("paths"), py::arg("payoff"), py::arg("basis"), py::arg("rate"), py::arg("mode"),
      py::arg("threads") = 1, release());
  m.def(
      "price_lsm_and_loolsm",
      [](const market::PathSet& paths, const contracts::PayoffSpec& payoff,
         const contracts::BasisSpec& basis, double rate) {
        auto r = engine::price_lsm_and_loolsm(paths, payoff, basis, rate);
        return std::make_pair(std::move(r[0].result), std::move(r[1].result));
      },
      py::arg("paths"), py::arg("payoff"), py::arg("basis"), py::arg("rate"), release());
  m.def("apply_policy", &engine::apply_policy, py::arg("paths"), py::arg("payoff"), py::arg("policy"),
        py::arg("rate"), py::arg("mode") = engine::Mode::LSM2, release());
  m.def("price_two_pass", &engine::price_two_pass, py::arg("policy_paths"),
        py::arg("valuation_paths"), py::arg("payoff"), py::arg("basis"), py::arg("rate"), release());
  m.def("european_mc_price", &engine::european_mc_price, py::arg("paths"), py::arg("payoff"),
        py::arg("rate"));
  m.def("apply_control_variate", &engine::apply_control_variate, py::arg("result"),
        py::arg("exact_euro"), py::arg("mc_euro"));
  m.def(
      "lookahead_bias",
      [](const engine::PricingResult& lsm, const engine::PricingResult& loolsm) {
        auto b = engine::lookahead_bias(lsm, loolsm);
        py::dict d;
        d["mean"] = b.mean;
        d["per_path"] = b.per_path;
        d["std_error"] = b.std_error;
        return d;
      },
      py::arg("lsm"), py::arg("loolsm"));

  // oracles
  m.def("binomial_bermudan_put", &oracles::binomial_bermudan_put, py::arg("model"),
        py::arg("schedule"), py::arg("strike"), py::arg("steps") = 50000, release());
  m.def("bs_european_put", &oracles::bs_european_put, py::arg("spot"), py::arg("vol"),
        py::arg("rate"), py::arg("dividend"), py::arg("strike"), py::arg("expiry"));
  m.def("bs_european_call", &oracles::bs_european_call, py::arg("spot"), py::arg("vol"),
        py::arg("rate"), py::arg("dividend"), py::arg("strike"), py::arg("expiry"));
  m.def("bivariate_normal_cdf", &oracles::bivariate_normal_cdf, py::arg("a"), py::arg("b"),
        py::arg("rho"));
  m.def("bestof2_european_call", &oracles::bestof2_european_call, py::arg("model"),
        py::arg("strike"), py::arg("expiry"));
  m.def(
      "reference_price",
      [](contracts::PayoffKind kind, double key) {
        const auto& e = oracles::reference_price(kind, key);
        py::dict d;
        d["bermudan"] = e.bermudan;
        d["european"] = e.european;
        d["source"] = e.source;
        return d;
      },
      py::arg("kind"), py::arg("key"));

  // harness
  m.def("set_seed", &harness::set_seed, py::arg("base"), py::arg("kind"), py::arg("set"));
  m.def("policy_seed", &harness::policy_seed, py::arg("base"), py::arg("kind"), py::arg("set"));
  m.def("pool_seed", &harness::pool_seed, py::arg("base"), py::arg("kind"));
  py::enum_<harness::Experiment>(m, "Experiment")
      .value("comparison", harness::Experiment::Comparison)
      .value("convergence", harness::Experiment::Convergence);
  py::enum_<harness::Scale>(m, "Scale")
      .value("desk", harness::Scale::Desk)
      .value("paper", harness::Scale::Paper);

  using Config = harness::ExperimentConfig;
  py::class_<Config>(m, "ExperimentConfig")
      .def_static("defaults", &Config::defaults, py::arg("kind"), py::arg("experiment"),
                  py::arg("scale") = harness::Scale::Desk)
      .def_readwrite("kind", &Config::kind)
      .def_readwrite("keys", &Config::keys)
      .def_readwrite("spot", &Config::spot)
      .def_readwrite("strike", &Config::strike)
      .def_readwrite("rate", &Config::rate)
      .def_readwrite("dividend", &Config::dividend)
      .def_readwrite("vol", &Config::vol)
      .def_readwrite("correlation", &Config::correlation)
      .def_readwrite("dates", &Config::dates)
      .def_readwrite("maturity", &Config::maturity)
      .def_readwrite("estimators", &Config::estimators)
      .def_readwrite("paths", &Config::paths)
      .def_readwrite("n_mc", &Config::n_mc)
      .def_readwrite("basis_m", &Config::basis_m)
      .def_readwrite("seed", &Config::seed)
      .def_readwrite("pool_size", &Config::pool_size)
      .def_readwrite("control_variate", &Config::control_variate)
      .def_readwrite("antithetic", &Config::antithetic)
      .def_readwrite("track_flips", &Config::track_flips)
      .def_readwrite("record_timing", &Config::record_timing)
      .def_readwrite("threads", &Config::threads)
      .def_readwrite("lattice_steps", &Config::lattice_steps)
      .def("validate", &Config::validate, py::arg("experiment"))
      .def("model_for", &Config::model_for, py::arg("key"))
      .def("payoff_for", &Config::payoff_for, py::arg("key"))
      .def("schedule", &Config::schedule);
  m.def(
      "parse_config",
      [](const std::string& text, harness::Experiment e, harness::Scale s) {
        std::istringstream is(text);
        return harness::parse_config(is, e, s);
      },
      py::arg("text"), py::arg("experiment"), py::arg("scale") = harness::Scale::Desk);
  m.def("load_config", &harness::load_config, py::arg("file"), py::arg("experiment"),
        py::arg("scale") = harness::Scale::Desk);
  m.def(
      "reference_values",
      [](const Config& c, double key) {
        const auto r = harness::reference_values(c, key);
        return py::make_tuple(r.bermudan, r.european);
      },
      py::arg("config"), py::arg("key"));

  py::class_<harness::SlopeFit>(m, "SlopeFit")
      .def_readonly("slope", &harness::SlopeFit::slope)
      .def_readonly("intercept", &harness::SlopeFit::intercept)
      .def_readonly("r2", &harness::SlopeFit::r2)
      .def_readonly("slope_se", &harness::SlopeFit::slope_se)
      .def_readonly("intercept_se", &harness::SlopeFit::intercept_se)
      .def_readonly("points", &harness::SlopeFit::points);
  m.def(
      "fit_bias_slope",
      [](const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
        if (x.size() != y.size() || x.size() != w.size()) {
          throw std::invalid_argument("x, y and w must have the same length");
        }
        std::vector<harness::SlopePoint> pts;
        for (std::size_t i = 0; i < x.size(); ++i) pts.push_back({x[i], y[i], w[i]});
        return harness::fit_bias_slope(pts);
      },
      py::arg("x"), py::arg("y"), py::arg("w"));

  py::class_<harness::ExperimentReport>(m, "ExperimentReport")
      .def_readonly("notes", &harness::ExperimentReport::notes)
      .def_property_readonly("slopes",
                             [](const harness::ExperimentReport& r) {
                               py::dict d;
                               for (const auto& s : r.slopes) d[py::float_(s.key)] = s.fit;
                               return d;
                             })
      .def("to_csv", [](const harness::ExperimentReport& r) {
        std::ostringstream os;
        harness::write_csv(r, os);
        return os.str();
      })
      .def("__len__", [](const harness::ExperimentReport& r) { return r.rows.size(); });
  m.def(
      "run_experiment1", [](const Config& c) { return harness::run_experiment1(c); },
      py::arg("config"), release());
  m.def(
      "run_experiment2", [](const Config& c) { return harness::run_experiment2(c); },
      py::arg("config"), release());
}
