#include "loolsm/market.hpp"

#include "loolsm/parallel.hpp"
#include "loolsm/random.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace loolsm::market {
namespace {

constexpr double kPivotFloor = 1e-12;

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int b = 0; b < 8; ++b) out |= ((v >> (8 * b)) & 0xFFULL) << (8 * (7 - b));
    return out;
  }
  return v;
}

void write_u64(std::ostream& os, std::uint64_t v) {
  const std::uint64_t le = to_little_endian(v);
  os.write(reinterpret_cast<const char*>(&le), sizeof le);
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t le = 0;
  is.read(reinterpret_cast<char*>(&le), sizeof le);
  return to_little_endian(le);
}

}  // namespace

void GbmModel::validate() const {
  const std::size_t j = spot.size();
  if (j == 0) throw std::invalid_argument("GbmModel needs at least one asset");
  if (dividend.size() != j || vol.size() != j) {
    throw std::invalid_argument("GbmModel spot/dividend/vol sizes differ");
  }
  if (static_cast<std::size_t>(correlation.rows()) != j ||
      static_cast<std::size_t>(correlation.cols()) != j) {
    throw std::invalid_argument("GbmModel correlation must be J x J");
  }
  for (std::size_t a = 0; a < j; ++a) {
    if (!(spot[a] > 0.0)) throw std::invalid_argument("spot prices must be positive");
    if (!(vol[a] >= 0.0)) throw std::invalid_argument("volatilities must be non-negative");
    if (!std::isfinite(dividend[a])) throw std::invalid_argument("dividend must be finite");
  }
  if (!std::isfinite(rate)) throw std::invalid_argument("rate must be finite");
}

GbmModel GbmModel::uniform(std::size_t assets, double spot, double rate, double dividend,
                           double vol, double correlation) {
  GbmModel m;
  m.spot.assign(assets, spot);
  m.rate = rate;
  m.dividend.assign(assets, dividend);
  m.vol.assign(assets, vol);
  m.correlation = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(assets),
                                            static_cast<Eigen::Index>(assets), correlation);
  m.correlation.diagonal().setOnes();
  return m;
}

ExerciseSchedule::ExerciseSchedule(std::vector<double> times) : times_(std::move(times)) {
  if (times_.empty()) throw std::invalid_argument("exercise schedule is empty");
  if (!(times_.front() > 0.0)) {
    throw std::invalid_argument("first exercise date must be after the valuation date");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw std::invalid_argument("exercise dates must be strictly increasing");
    }
  }
}

ExerciseSchedule ExerciseSchedule::uniform(std::size_t dates, double maturity) {
  if (dates == 0) throw std::invalid_argument("schedule needs at least one date");
  std::vector<double> t(dates);
  for (std::size_t i = 0; i < dates; ++i) {
    t[i] = maturity * static_cast<double>(i + 1) / static_cast<double>(dates);
  }
  return ExerciseSchedule(std::move(t));
}

PathSet::PathSet(ExerciseSchedule schedule, std::size_t paths, std::size_t assets,
                 std::vector<double> values, std::uint64_t seed, bool antithetic,
                 std::size_t pool_offset)
    : schedule_(std::move(schedule)),
      paths_(paths),
      assets_(assets),
      values_(std::move(values)),
      seed_(seed),
      antithetic_(antithetic),
      pool_offset_(pool_offset) {
  if (values_.size() != paths_ * schedule_.size() * assets_) {
    throw std::invalid_argument("PathSet value count does not match N*I*J");
  }
  if (antithetic_ && paths_ % 2 != 0) {
    throw std::invalid_argument("antithetic PathSet needs an even number of paths");
  }
}

Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& correlation) {
  const Eigen::Index j = correlation.rows();
  if (j == 0 || correlation.cols() != j) {
    throw std::invalid_argument("correlation matrix must be square and non-empty");
  }
  for (Eigen::Index a = 0; a < j; ++a) {
    if (std::fabs(correlation(a, a) - 1.0) > 1e-12) {
      throw std::invalid_argument("correlation matrix must have a unit diagonal");
    }
    for (Eigen::Index b = 0; b < a; ++b) {
      if (std::fabs(correlation(a, b) - correlation(b, a)) > 1e-12) {
        throw std::invalid_argument("correlation matrix must be symmetric");
      }
    }
  }

  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(j, j);
  for (Eigen::Index c = 0; c < j; ++c) {
    double pivot = correlation(c, c) - lower.row(c).head(c).squaredNorm();
    if (pivot < -kPivotFloor) {
      throw std::invalid_argument("correlation matrix is not positive semidefinite (pivot " +
                                  std::to_string(pivot) + " at column " +
                                  std::to_string(c) + ")");
    }
    if (pivot <= kPivotFloor) {
      // Degenerate direction: remaining entries of this column must vanish too.
      for (Eigen::Index r = c + 1; r < j; ++r) {
        const double off = correlation(r, c) - lower.row(r).head(c).dot(lower.row(c).head(c));
        if (std::fabs(off) > 1e-8) {
          throw std::invalid_argument("correlation matrix is not positive semidefinite");
        }
      }
      continue;
    }
    const double diag = std::sqrt(pivot);
    lower(c, c) = diag;
    for (Eigen::Index r = c + 1; r < j; ++r) {
      lower(r, c) = (correlation(r, c) - lower.row(r).head(c).dot(lower.row(c).head(c))) / diag;
    }
  }
  return lower;
}

PathSet generate_paths(const GbmModel& model, const ExerciseSchedule& schedule,
                       std::size_t n_paths, std::uint64_t seed, bool antithetic,
                       std::size_t threads) {
  model.validate();
  if (n_paths == 0) throw std::invalid_argument("n_paths must be positive");
  if (antithetic && n_paths % 2 != 0) {
    throw std::invalid_argument("antithetic sampling needs an even number of paths");
  }
  const std::size_t dates = schedule.size();
  const std::size_t assets = model.assets();
  const Eigen::MatrixXd factor = correlation_factor(model.correlation);

  // Per-step drift and diffusion scale for each asset.
  std::vector<double> drift(dates * assets);
  std::vector<double> diffusion(dates * assets);
  double prev = 0.0;
  for (std::size_t i = 0; i < dates; ++i) {
    const double dt = schedule.time(i) - prev;
    prev = schedule.time(i);
    for (std::size_t a = 0; a < assets; ++a) {
      const double s = model.vol[a];
      drift[i * assets + a] = (model.rate - model.dividend[a] - 0.5 * s * s) * dt;
      diffusion[i * assets + a] = s * std::sqrt(dt);
    }
  }

  std::vector<double> values(n_paths * dates * assets);
  parallel_for(n_paths, threads, [&](std::size_t n) {
    const std::uint64_t stream = antithetic ? n / 2 : n;
    const double sign = (antithetic && n % 2 == 1) ? -1.0 : 1.0;
    const random::CounterRng rng(seed, stream);
    std::vector<double> log_s(assets);
    std::vector<double> z(assets);
    for (std::size_t a = 0; a < assets; ++a) log_s[a] = std::log(model.spot[a]);
    for (std::size_t i = 0; i < dates; ++i) {
      for (std::size_t a = 0; a < assets; ++a) {
        z[a] = sign * random::inverse_normal_cdf(rng.uniform(i * assets + a));
      }
      for (std::size_t a = 0; a < assets; ++a) {
        double shock = 0.0;
        for (std::size_t b = 0; b <= a; ++b) {
          shock += factor(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * z[b];
        }
        log_s[a] += drift[i * assets + a] + diffusion[i * assets + a] * shock;
        values[(n * dates + i) * assets + a] = std::exp(log_s[a]);
      }
    }
  });
  return PathSet(schedule, n_paths, assets, std::move(values), seed, antithetic);
}

std::vector<PathSet> split_pool(const PathSet& pool, std::size_t n_sets) {
  if (n_sets == 0 || pool.paths() % n_sets != 0) {
    throw std::invalid_argument("n_sets = " + std::to_string(n_sets) +
                                " does not divide the pool size " +
                                std::to_string(pool.paths()));
  }
  const std::size_t size = pool.paths() / n_sets;
  if (pool.antithetic() && size % 2 != 0) {
    throw std::invalid_argument("split would separate antithetic pairs");
  }
  if (n_sets == 1) return {pool};
  const std::size_t stride = pool.dates() * pool.assets();
  std::vector<PathSet> sets;
  sets.reserve(n_sets);
  for (std::size_t k = 0; k < n_sets; ++k) {
    const auto first = pool.values().begin() + static_cast<std::ptrdiff_t>(k * size * stride);
    std::vector<double> block(first, first + static_cast<std::ptrdiff_t>(size * stride));
    sets.emplace_back(pool.schedule(), size, pool.assets(), std::move(block), pool.seed(),
                      pool.antithetic(), pool.pool_offset() + k * size);
  }
  return sets;
}

void save_paths(const PathSet& paths, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
  write_u64(os, paths.paths());
  write_u64(os, paths.dates());
  write_u64(os, paths.assets());
  write_u64(os, paths.seed());
  const char flag = paths.antithetic() ? 1 : 0;
  os.write(&flag, 1);
  for (double v : paths.values()) write_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw std::runtime_error("failed writing path dump " + file.string());
}

PathSet load_paths(const std::filesystem::path& file, const ExerciseSchedule& schedule) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file.string() + " for reading");
  const std::uint64_t n = read_u64(is);
  const std::uint64_t dates = read_u64(is);
  const std::uint64_t assets = read_u64(is);
  const std::uint64_t seed = read_u64(is);
  char flag = 0;
  is.read(&flag, 1);
  if (!is) throw std::runtime_error("truncated path dump header in " + file.string());
  if (dates != schedule.size()) {
    throw std::invalid_argument("path dump has " + std::to_string(dates) +
                                " dates but the schedule has " +
                                std::to_string(schedule.size()));
  }
  std::vector<double> values(n * dates * assets);
  for (double& v : values) v = std::bit_cast<double>(read_u64(is));
  if (!is) throw std::runtime_error("truncated path dump body in " + file.string());
  return PathSet(schedule, n, assets, std::move(values), seed, flag != 0);
}

}  // namespace loolsm::market
