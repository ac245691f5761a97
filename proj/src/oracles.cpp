#include "loolsm/oracles.hpp"

#include "loolsm/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>

namespace loolsm::oracles {
namespace {

using random::normal_cdf;

}  // namespace

double binomial_bermudan_put(const market::GbmModel& model,
                             const market::ExerciseSchedule& schedule, double strike,
                             std::size_t steps) {
  model.validate();
  if (model.assets() != 1) throw std::invalid_argument("binomial put needs a single asset");
  if (steps < 100) throw std::invalid_argument("binomial lattice needs at least 100 steps");
  const double maturity = schedule.maturity();
  const double dt = maturity / static_cast<double>(steps);

  std::vector<bool> exercise_level(steps + 1, false);
  for (double t : schedule.times()) {
    const double pos = t / dt;
    const double level = std::round(pos);
    if (std::fabs(pos - level) > 1e-9 * std::max(1.0, pos)) {
      throw std::invalid_argument("exercise date " + std::to_string(t) +
                                  " is not on a lattice level; use a step count that is a "
                                  "multiple of the number of dates");
    }
    exercise_level[static_cast<std::size_t>(level)] = true;
  }

  const double s0 = model.spot[0];
  const double sigma = model.vol[0];
  const double r = model.rate;
  const double q = model.dividend[0];
  const double jump = sigma * std::sqrt(dt);
  const double u = std::exp(jump);
  const double d = 1.0 / u;
  const double p = (std::exp((r - q) * dt) - d) / (u - d);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("binomial probability outside (0, 1)");
  const double disc = std::exp(-r * dt);
  const double pu = disc * p;
  const double pd = disc * (1.0 - p);

  auto spot_at = [&](std::size_t level, std::size_t ups) {
    return s0 * std::exp(jump * (2.0 * static_cast<double>(ups) - static_cast<double>(level)));
  };

  std::vector<double> v(steps + 1);
  for (std::size_t j = 0; j <= steps; ++j) v[j] = std::max(strike - spot_at(steps, j), 0.0);
  for (std::size_t level = steps; level-- > 0;) {
    for (std::size_t j = 0; j <= level; ++j) v[j] = pu * v[j + 1] + pd * v[j];
    if (exercise_level[level] && level > 0) {
      for (std::size_t j = 0; j <= level; ++j) {
        v[j] = std::max(v[j], strike - spot_at(level, j));
      }
    }
  }
  return v[0];
}

double bs_european_put(double spot, double vol, double rate, double dividend, double strike,
                       double expiry) {
  const double fwd_disc = spot * std::exp(-dividend * expiry);
  const double k_disc = strike * std::exp(-rate * expiry);
  const double sd = vol * std::sqrt(expiry);
  if (sd <= 0.0) return std::max(k_disc - fwd_disc, 0.0);
  const double d1 = (std::log(fwd_disc / k_disc) + 0.5 * sd * sd) / sd;
  const double d2 = d1 - sd;
  return k_disc * normal_cdf(-d2) - fwd_disc * normal_cdf(-d1);
}

double bs_european_call(double spot, double vol, double rate, double dividend, double strike,
                        double expiry) {
  // Put-call parity.
  return bs_european_put(spot, vol, rate, dividend, strike, expiry) +
         spot * std::exp(-dividend * expiry) - strike * std::exp(-rate * expiry);
}

double bivariate_normal_cdf(double a, double b, double rho) {
  if (std::isnan(a) || std::isnan(b) || !(std::fabs(rho) <= 1.0)) {
    throw std::invalid_argument("bivariate_normal_cdf needs finite-or-infinite limits and |rho| <= 1");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Upper orthant P[X > h, Y > k] with h = -a, k = -b.
  const double h0 = -a;
  const double k0 = -b;
  if (h0 == inf || k0 == inf) return 0.0;
  if (h0 == -inf) return k0 == -inf ? 1.0 : normal_cdf(-k0);
  if (k0 == -inf) return normal_cdf(-h0);
  if (rho == 0.0) return normal_cdf(-h0) * normal_cdf(-k0);

  static constexpr std::array<double, 3> w6 = {0.1713244923791705, 0.3607615730481384,
                                               0.4679139345726904};
  static constexpr std::array<double, 3> x6 = {0.9324695142031522, 0.6612093864662647,
                                               0.2386191860831970};
  static constexpr std::array<double, 6> w12 = {0.04717533638651177, 0.1069393259953183,
                                                0.1600783285433464,  0.2031674267230659,
                                                0.2334925365383547,  0.2491470458134029};
  static constexpr std::array<double, 6> x12 = {0.9815606342467191, 0.9041172563704750,
                                                0.7699026741943050, 0.5873179542866171,
                                                0.3678314989981802, 0.1252334085114692};
  static constexpr std::array<double, 10> w20 = {
      0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
      0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
      0.1491729864726037,  0.1527533871307259};
  static constexpr std::array<double, 10> x20 = {
      0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
      0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
      0.2277858511416451, 0.07652652113349733};

  std::span<const double> w;
  std::span<const double> x;
  const double abs_r = std::fabs(rho);
  if (abs_r < 0.3) {
    w = w6;
    x = x6;
  } else if (abs_r < 0.75) {
    w = w12;
    x = x12;
  } else {
    w = w20;
    x = x20;
  }
  // Symmetric Gauss-Legendre nodes on [0, 2]: 1 - x and 1 + x.
  std::vector<double> nodes;
  std::vector<double> weights;
  for (std::size_t i = 0; i < x.size(); ++i) {
    nodes.push_back(1.0 - x[i]);
    weights.push_back(w[i]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    nodes.push_back(1.0 + x[i]);
    weights.push_back(w[i]);
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  double h = h0;
  double k = k0;
  double hk = h * k;
  double bvn = 0.0;
  if (abs_r < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(rho) / 2.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double sn = std::sin(asr * nodes[i]);
      bvn += weights[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    bvn = bvn * asr / two_pi + normal_cdf(-h) * normal_cdf(-k);
  } else {
    if (rho < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (abs_r < 1.0) {
      const double as = (1.0 - rho) * (1.0 + rho);
      double aa = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 80.0;
      double asr = -(bs / as + hk) / 2.0;
      if (asr > -100.0) {
        bvn = aa * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
      }
      if (hk > -100.0) {
        const double bb = std::sqrt(bs);
        const double sp = std::sqrt(two_pi) * normal_cdf(-bb / aa);
        bvn -= std::exp(-hk / 2.0) * sp * bb * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
      }
      aa /= 2.0;
      double sum = 0.0;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double xs = (aa * nodes[i]) * (aa * nodes[i]);
        asr = -(bs / xs + hk) / 2.0;
        if (asr <= -100.0) continue;
        const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
        const double rs = std::sqrt(1.0 - xs);
        const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
        sum += weights[i] * std::exp(asr) * (sp - ep);
      }
      bvn = (aa * sum - bvn) / two_pi;
    }
    if (rho > 0.0) {
      bvn += normal_cdf(-std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double band = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_cdf(-h) - normal_cdf(-k);
      bvn = band - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double bestof2_european_call(const market::GbmModel& model, double strike, double expiry) {
  model.validate();
  if (model.assets() != 2) throw std::invalid_argument("best-of-two call needs two assets");
  const double s1 = model.spot[0];
  const double s2 = model.spot[1];
  const double q1 = model.dividend[0];
  const double q2 = model.dividend[1];
  const double v1 = model.vol[0];
  const double v2 = model.vol[1];
  const double rho = model.correlation(0, 1);
  const double r = model.rate;
  const double sqrt_t = std::sqrt(expiry);
  const double spread_vol = std::sqrt(v1 * v1 + v2 * v2 - 2.0 * rho * v1 * v2);
  if (!(spread_vol > 0.0) || !(v1 > 0.0) || !(v2 > 0.0)) {
    throw std::invalid_argument("best-of-two formula needs positive volatilities and spread volatility");
  }

  const double d = (std::log(s1 / s2) + (q2 - q1 + 0.5 * spread_vol * spread_vol) * expiry) /
                   (spread_vol * sqrt_t);
  const double y1 = (std::log(s1 / strike) + (r - q1 + 0.5 * v1 * v1) * expiry) / (v1 * sqrt_t);
  const double y2 = (std::log(s2 / strike) + (r - q2 + 0.5 * v2 * v2) * expiry) / (v2 * sqrt_t);
  const double rho1 = (v1 - rho * v2) / spread_vol;
  const double rho2 = (v2 - rho * v1) / spread_vol;

  return s1 * std::exp(-q1 * expiry) * bivariate_normal_cdf(y1, d, rho1) +
         s2 * std::exp(-q2 * expiry) *
             bivariate_normal_cdf(y2, -d + spread_vol * sqrt_t, rho2) -
         strike * std::exp(-r * expiry) *
             (1.0 - bivariate_normal_cdf(-y1 + v1 * sqrt_t, -y2 + v2 * sqrt_t, rho));
}

const std::vector<ReferenceEntry>& reference_table() {
  using contracts::PayoffKind;
  static const std::vector<ReferenceEntry> table = [] {
    const std::string put_src = "CRR binomial lattice; K=100 agrees with Feng & Lin (2013)";
    const std::string bestof_src = "Andersen & Broadie (2004); European by Stulz (1982)";
    const std::string basket_src = "Choi (2018) sum-of-lognormals; no early exercise premium";
    return std::vector<ReferenceEntry>{
        {PayoffKind::PutSingle, 80, 0.856, 0.843, put_src},
        {PayoffKind::PutSingle, 90, 2.786, 2.714, put_src},
        {PayoffKind::PutSingle, 100, 6.585, 6.330, put_src},
        {PayoffKind::PutSingle, 110, 12.486, 11.804, put_src},
        {PayoffKind::PutSingle, 120, 20.278, 18.839, put_src},
        {PayoffKind::BestOfCall, 90, 8.075, 6.655, bestof_src},
        {PayoffKind::BestOfCall, 100, 13.902, 11.196, bestof_src},
        {PayoffKind::BestOfCall, 110, 21.345, 16.929, bestof_src},
        {PayoffKind::BasketCall, 60, 47.481, 47.481, basket_src},
        {PayoffKind::BasketCall, 80, 36.352, 36.352, basket_src},
        {PayoffKind::BasketCall, 100, 28.007, 28.007, basket_src},
        {PayoffKind::BasketCall, 120, 21.763, 21.763, basket_src},
        {PayoffKind::BasketCall, 140, 17.066, 17.066, basket_src},
    };
  }();
  return table;
}

const ReferenceEntry& reference_price(contracts::PayoffKind kind, double key) {
  std::string known;
  for (const auto& e : reference_table()) {
    if (e.kind != kind) continue;
    if (std::fabs(e.key - key) < 1e-9) return e;
    std::ostringstream os;
    os << e.key;
    known += (known.empty() ? "" : ", ") + os.str();
  }
  std::ostringstream msg;
  msg << "no reference price for " << contracts::to_string(kind) << " key " << key
      << "; known keys: " << known;
  throw std::invalid_argument(msg.str());
}

std::vector<ReferenceEntry> load_reference_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open reference table " + file.string());
  std::vector<ReferenceEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ReferenceEntry e{};
    if (!(ls >> kind >> e.key >> e.bermudan >> e.european)) {
      throw std::invalid_argument(file.string() + ":" + std::to_string(line_no) +
                                  ": expected 'case key bermudan european source'");
    }
    e.kind = contracts::parse_payoff_kind(kind);
    std::getline(ls >> std::ws, e.source);
    if (e.source.empty()) {
      throw std::invalid_argument(file.string() + ":" + std::to_string(line_no) +
                                  ": missing source");
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace loolsm::oracles
