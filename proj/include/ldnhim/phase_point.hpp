#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>

namespace ldnhim {

// Fixed-capacity coordinate tuple of a 4- or 6-dimensional phase space.
class PhasePoint {
 public:
  static constexpr std::size_t kMaxDim = 6;

  PhasePoint() = default;
  explicit PhasePoint(std::size_t dim);
  PhasePoint(std::initializer_list<double> coords);
  static PhasePoint from_span(std::span<const double> coords);

  std::size_t size() const noexcept { return n_; }
  double& operator[](std::size_t i) noexcept { return c_[i]; }
  double operator[](std::size_t i) const noexcept { return c_[i]; }

  std::span<double> coords() noexcept { return {c_.data(), n_}; }
  std::span<const double> coords() const noexcept { return {c_.data(), n_}; }

  bool finite() const noexcept;
  double norm() const noexcept;

  friend bool operator==(const PhasePoint& a, const PhasePoint& b) noexcept;

 private:
  std::array<double, kMaxDim> c_{};
  std::size_t n_ = 0;
};

PhasePoint operator+(const PhasePoint& a, const PhasePoint& b);
PhasePoint operator-(const PhasePoint& a, const PhasePoint& b);
PhasePoint operator*(double s, const PhasePoint& a);

double max_abs_diff(const PhasePoint& a, const PhasePoint& b);

}  // namespace ldnhim
