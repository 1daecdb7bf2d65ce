#pragma once

#include <stdexcept>
#include <string>

namespace cmdp {

/// Dimension or index mismatch between objects that must agree.
class StructuralError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A parameter is outside its admissible range.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Input violates an operation's precondition (e.g. a value table out of range).
class ContractError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf or a failed factorization.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when an environment generator cannot produce an admissible instance.
class GenerationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// No policy reaches the utility threshold.
class InfeasibleConstraint : public std::runtime_error {
  public:
    InfeasibleConstraint(double max_utility, double offset)
        : std::runtime_error("constraint infeasible: best achievable utility value " +
                             std::to_string(max_utility) + " < offset b = " +
                             std::to_string(offset)),
          max_utility_(max_utility), offset_(offset) {}

    double max_utility() const noexcept { return max_utility_; }
    double offset() const noexcept { return offset_; }

  private:
    double max_utility_;
    double offset_;
};

} // namespace cmdp
