#pragma once

#include "loolsm/contracts.hpp"
#include "loolsm/market.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace loolsm::oracles {

/// Cox-Ross-Rubinstein lattice for a put that may be exercised only on the
/// schedule dates. Every exercise date must fall on a lattice level.
double binomial_bermudan_put(const market::GbmModel& model,
                             const market::ExerciseSchedule& schedule, double strike,
                             std::size_t steps);

double bs_european_put(double spot, double vol, double rate, double dividend, double strike,
                       double expiry);
double bs_european_call(double spot, double vol, double rate, double dividend, double strike,
                        double expiry);

/// P[X <= a, Y <= b] for standard normals with correlation rho (Genz's
/// Gauss-Legendre scheme, absolute error below 1e-15 in double precision
/// for the bulk of the domain and below 1e-7 everywhere).
double bivariate_normal_cdf(double a, double b, double rho);

/// Call on the maximum of two assets (Stulz; Johnson).
double bestof2_european_call(const market::GbmModel& model, double strike, double expiry);

struct ReferenceEntry {
  contracts::PayoffKind kind;
  double key;  // strike for put and basket, common spot for best-of
  double bermudan;
  double european;
  std::string source;
};

/// Published exact prices for the three cases.
const std::vector<ReferenceEntry>& reference_table();

/// Throws std::invalid_argument listing known keys if (kind, key) is absent.
const ReferenceEntry& reference_price(contracts::PayoffKind kind, double key);

/// Plain-text table, one record per line: case key bermudan european source...
/// Lines starting with '#' are comments; the source runs to end of line.
std::vector<ReferenceEntry> load_reference_file(const std::filesystem::path& file);

}  // namespace loolsm::oracles
