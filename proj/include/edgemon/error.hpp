#pragma once

#include <stdexcept>
#include <string>

namespace edgemon {

// Rejected model parameters or configuration values.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative solver ran out of budget before meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// A schedule decision broke the per-slot or per-dispatcher query budget.
class BudgetViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace edgemon
