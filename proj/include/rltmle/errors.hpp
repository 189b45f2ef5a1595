#pragma once

#include <stdexcept>
#include <string>

namespace rltmle {

/// Malformed model, policy, dataset or experiment configuration.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The behavior policy assigns zero probability to an action that was logged.
class AbsoluteContinuityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An input violated a documented range or shape invariant.
class InvariantError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver stopped without meeting its tolerance.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rltmle
