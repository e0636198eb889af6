#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gnp {

// Base for every error the toolkit raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss, gradient or parameter. `step` is -1 when raised outside a
// training loop; `where` names the pass or quantity that went bad.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string where, std::int64_t step = -1)
      : Error("divergence in " + where +
              (step >= 0 ? " at step " + std::to_string(step) : std::string{})),
        where_(std::move(where)),
        step_(step) {}

  const std::string& where() const noexcept { return where_; }
  std::int64_t step() const noexcept { return step_; }

 private:
  std::string where_;
  std::int64_t step_;
};

}  // namespace gnp
