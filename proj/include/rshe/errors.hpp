#pragma once

#include <stdexcept>
#include <string>

namespace rshe {

/// Invalid experiment configuration (bad key, violated invariant).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sigma(1) = 0 regime: the average is identically zero and no CLT
/// normalization exists.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values produced while stepping a replica.
class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(const std::string& what, long replica, long step)
      : std::runtime_error(what), replica_(replica), step_(step) {}

  long replica() const { return replica_; }
  long step() const { return step_; }

 private:
  long replica_;
  long step_;
};

}  // namespace rshe
