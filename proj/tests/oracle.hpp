#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <vector>

#include "test_util.hpp"

// Closed-form trajectories and LD integrals built without the library's flow
// or quadrature code.
namespace oracle {

struct Model {
  int dof = 2;
  double lambda = 1.0;
  std::vector<double> omega;  // bath frequencies
  Eigen::MatrixXd c;          // empty for decoupled models
  Eigen::MatrixXd cinv;
};

inline Model decoupled(double lambda, std::vector<double> omega) {
  Model m;
  m.dof = static_cast<int>(omega.size()) + 1;
  m.lambda = lambda;
  m.omega = std::move(omega);
  return m;
}

inline Model coupled(double lambda, std::vector<double> omega) {
  Model m = decoupled(lambda, std::move(omega));
  m.c = testutil::printed_matrices(m.dof)[0];
  m.cinv = m.c.inverse();
  return m;
}

inline Eigen::VectorXd to_vec(const ldnhim::PhasePoint& x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = x[i];
  return v;
}

// Decoupled state and velocity at time t from decoupled initial data y0.
inline void decoupled_motion(const Model& m, const Eigen::VectorXd& y0, double t,
                             Eigen::VectorXd& y, Eigen::VectorXd& dy) {
  const int n = m.dof;
  y.resize(2 * n);
  dy.resize(2 * n);
  const double a = y0(0) + y0(n), b = y0(0) - y0(n);
  const double ep = std::exp(m.lambda * t), em = std::exp(-m.lambda * t);
  y(0) = 0.5 * (a * ep + b * em);
  y(n) = 0.5 * (a * ep - b * em);
  dy(0) = m.lambda * y(n);
  dy(n) = m.lambda * y(0);
  for (int k = 1; k < n; ++k) {
    const double w = m.omega[static_cast<std::size_t>(k - 1)];
    const double cs = std::cos(w * t), sn = std::sin(w * t);
    y(k) = y0(k) * cs + y0(n + k) * sn;
    y(n + k) = y0(n + k) * cs - y0(k) * sn;
    dy(k) = w * y(n + k);
    dy(n + k) = -w * y(k);
  }
}

// Velocity in the model's native coordinates.
inline Eigen::VectorXd velocity(const Model& m, const Eigen::VectorXd& x0, double t) {
  Eigen::VectorXd y, dy;
  if (m.c.size() == 0) {
    decoupled_motion(m, x0, t, y, dy);
    return dy;
  }
  decoupled_motion(m, m.c * x0, t, y, dy);
  return m.cinv * dy;
}

inline Eigen::VectorXd state(const Model& m, const Eigen::VectorXd& x0, double t) {
  Eigen::VectorXd y, dy;
  if (m.c.size() == 0) {
    decoupled_motion(m, x0, t, y, dy);
    return y;
  }
  decoupled_motion(m, m.c * x0, t, y, dy);
  return m.cinv * y;
}

// Integral of |f|^p over [a, b]: zero crossings located by sampling and
// bracketing, each sign-definite piece by tanh-sinh, which tolerates the
// |t - t0|^p endpoint behaviour.
template <class F>
double abs_power_integral(F f, double a, double b, double p, int samples = 4000) {
  std::vector<double> cuts{a};
  double ta = a, fa = f(a);
  for (int k = 1; k <= samples; ++k) {
    const double tb = a + (b - a) * k / samples;
    const double fb = f(tb);
    if (fa * fb < 0) {
      boost::uintmax_t iters = 200;
      const auto r = boost::math::tools::toms748_solve(
          f, ta, tb, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
      cuts.push_back(0.5 * (r.first + r.second));
    }
    ta = tb;
    fa = fb;
  }
  cuts.push_back(b);
  boost::math::quadrature::tanh_sinh<double> ts;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] <= cuts[k]) continue;
    sum += ts.integrate([&](double t) { return std::pow(std::abs(f(t)), p); }, cuts[k],
                        cuts[k + 1]);
  }
  return sum;
}

// Forward and backward per-coordinate integrals of |x_i'|^p.
inline std::vector<double> per_dof(const Model& m, const ldnhim::PhasePoint& x0, double p,
                                   double tau, bool forward) {
  const Eigen::VectorXd x = to_vec(x0);
  std::vector<double> out;
  for (int i = 0; i < 2 * m.dof; ++i) {
    auto f = [&](double t) { return velocity(m, x, t)(i); };
    out.push_back(forward ? abs_power_integral(f, 0.0, tau, p)
                          : abs_power_integral(f, -tau, 0.0, p));
  }
  return out;
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace oracle
