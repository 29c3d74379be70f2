#include "ldnhim/phase_point.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ldnhim/errors.hpp"

namespace ldnhim {

namespace {

void check_dim(std::size_t n) {
  if (n != 4 && n != 6) {
    throw ShapeError("phase point dimension must be 4 or 6, got " + std::to_string(n));
  }
}

void check_same(const PhasePoint& a, const PhasePoint& b) {
  if (a.size() != b.size()) throw ShapeError("phase point dimension mismatch");
}

}  // namespace

PhasePoint::PhasePoint(std::size_t dim) : n_(dim) { check_dim(dim); }

PhasePoint::PhasePoint(std::initializer_list<double> coords) : n_(coords.size()) {
  check_dim(n_);
  std::copy(coords.begin(), coords.end(), c_.begin());
}

PhasePoint PhasePoint::from_span(std::span<const double> coords) {
  PhasePoint x(coords.size());
  std::copy(coords.begin(), coords.end(), x.c_.begin());
  return x;
}

bool PhasePoint::finite() const noexcept {
  return std::all_of(c_.begin(), c_.begin() + n_, [](double v) { return std::isfinite(v); });
}

double PhasePoint::norm() const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) s += c_[i] * c_[i];
  return std::sqrt(s);
}

bool operator==(const PhasePoint& a, const PhasePoint& b) noexcept {
  return a.n_ == b.n_ && std::equal(a.c_.begin(), a.c_.begin() + a.n_, b.c_.begin());
}

PhasePoint operator+(const PhasePoint& a, const PhasePoint& b) {
  check_same(a, b);
  PhasePoint r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

PhasePoint operator-(const PhasePoint& a, const PhasePoint& b) {
  check_same(a, b);
  PhasePoint r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

PhasePoint operator*(double s, const PhasePoint& a) {
  PhasePoint r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

double max_abs_diff(const PhasePoint& a, const PhasePoint& b) {
  check_same(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ldnhim
