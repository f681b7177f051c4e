#pragma once

#include <stdexcept>
#include <string>

namespace ustat {

/// Wrong arity, malformed parameters, bad registry strings.
class invalid_argument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite inputs.
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Fewer observations than the statistic needs.
class insufficient_data : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested route is not available for this kernel/distribution pair.
class unsupported_operation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exact enumeration would exceed the configured guard.
class resource_limit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A self-normalizing denominator is zero.
class degenerate_normalizer : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class precondition_violation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment/CLI configuration could not be resolved.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ustat
