#pragma once

#include <stdexcept>
#include <string>

namespace ldnhim {

class ParameterDomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SymplecticViolationError : public std::invalid_argument {
 public:
  SymplecticViolationError(const std::string& what, double residual)
      : std::invalid_argument(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Raised when an integrated state leaves the representable range.
class OverflowError : public std::runtime_error {
 public:
  OverflowError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class EnergyMismatchError : public std::invalid_argument {
 public:
  EnergyMismatchError(const std::string& what, double residual)
      : std::invalid_argument(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class UnknownSectionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ldnhim
