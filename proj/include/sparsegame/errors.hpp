#pragma once

#include <stdexcept>
#include <string>

namespace sparsegame {

// Smallness condition violated or a recursion denominator crossed zero.
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// A solver state left the monotone regime (norm guard tripped).
struct BlowupError : std::runtime_error {
  explicit BlowupError(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative solver exhausted its iteration budget.
struct NonConvergenceError : std::runtime_error {
  NonConvergenceError(const std::string& msg, std::vector<double> residuals = {})
      : std::runtime_error(msg), residual_history(std::move(residuals)) {}
  std::vector<double> residual_history;
};

// Malformed or out-of-range configuration input.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sparsegame
