#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace loolsm::market {

/// Risk-neutral multi-asset geometric Brownian motion,
/// dS_j / S_j = (r - q_j) dt + sigma_j dW_j with dW_j dW_k = rho_jk dt.
struct GbmModel {
  std::vector<double> spot;
  double rate = 0.0;
  std::vector<double> dividend;
  std::vector<double> vol;
  Eigen::MatrixXd correlation;

  std::size_t assets() const { return spot.size(); }
  /// Throws std::invalid_argument if the fields are inconsistent.
  void validate() const;

  /// J identical assets with a common pairwise correlation.
  static GbmModel uniform(std::size_t assets, double spot, double rate, double dividend,
                          double vol, double correlation);
};

/// Exercise dates t_1 < ... < t_I = T. The valuation date t_0 = 0 is not one of them.
class ExerciseSchedule {
 public:
  explicit ExerciseSchedule(std::vector<double> times);
  /// `dates` equally spaced dates ending at `maturity`.
  static ExerciseSchedule uniform(std::size_t dates, double maturity);

  std::size_t size() const { return times_.size(); }
  double time(std::size_t i) const { return times_[i]; }
  double maturity() const { return times_.back(); }
  const std::vector<double>& times() const { return times_; }
  bool operator==(const ExerciseSchedule&) const = default;

 private:
  std::vector<double> times_;
};

/// N simulated trajectories of J assets observed on the I exercise dates,
/// stored path-major: value(n, i, j) = values[(n * I + i) * J + j].
class PathSet {
 public:
  PathSet(ExerciseSchedule schedule, std::size_t paths, std::size_t assets,
          std::vector<double> values, std::uint64_t seed, bool antithetic,
          std::size_t pool_offset = 0);

  std::size_t paths() const { return paths_; }
  std::size_t dates() const { return schedule_.size(); }
  std::size_t assets() const { return assets_; }
  const ExerciseSchedule& schedule() const { return schedule_; }
  std::uint64_t seed() const { return seed_; }
  bool antithetic() const { return antithetic_; }
  std::size_t pool_offset() const { return pool_offset_; }

  double value(std::size_t path, std::size_t date, std::size_t asset) const {
    return values_[(path * dates() + date) * assets_ + asset];
  }
  /// The J asset prices of one path on one date.
  std::span<const double> state(std::size_t path, std::size_t date) const {
    return {values_.data() + (path * dates() + date) * assets_, assets_};
  }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const PathSet&) const = default;

 private:
  ExerciseSchedule schedule_;
  std::size_t paths_;
  std::size_t assets_;
  std::vector<double> values_;
  std::uint64_t seed_;
  bool antithetic_;
  std::size_t pool_offset_;
};

/// Lower-triangular L with L L^T = correlation. Pivots that fall within 1e-12
/// of zero are floored to a zero column (positive semidefinite input); a pivot
/// below -1e-12 means the matrix is not PSD and is rejected.
Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& correlation);

/// Exact log-normal stepping between exercise dates driven by a counter-based
/// generator: path n uses stream n (antithetic: stream n / 2, with the odd path
/// negating every draw). Bit-identical for any thread count.
PathSet generate_paths(const GbmModel& model, const ExerciseSchedule& schedule,
                       std::size_t n_paths, std::uint64_t seed, bool antithetic,
                       std::size_t threads = 1);

/// Contiguous, disjoint blocks of equal size in pool order.
std::vector<PathSet> split_pool(const PathSet& pool, std::size_t n_sets);

/// Binary layout, little-endian: uint64 N, uint64 I, uint64 J, uint64 seed,
/// uint8 antithetic, then N*I*J float64 values in path-major order. The
/// schedule is not stored; load_paths takes it from the caller and checks I.
void save_paths(const PathSet& paths, const std::filesystem::path& file);
PathSet load_paths(const std::filesystem::path& file, const ExerciseSchedule& schedule);

}  // namespace loolsm::market
