#pragma once

#include <stdexcept>
#include <string>

namespace loolsm {

/// Invalid user-supplied configuration or arguments (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical breakdown such as a rank-0 regression or a diverging oracle
/// (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace loolsm
