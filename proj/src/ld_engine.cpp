#include "ldnhim/ld_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ldnhim/errors.hpp"

namespace ldnhim {

namespace {

constexpr double kOverflowLimit = 1e150;

struct AbsPow {
  double p;
  double operator()(double v) const { return std::pow(std::abs(v), p); }
};
struct AbsSqrt {
  double operator()(double v) const { return std::sqrt(std::abs(v)); }
};
struct Abs {
  double operator()(double v) const { return std::abs(v); }
};

[[noreturn]] void overflow_at(double t) {
  std::ostringstream os;
  os << "state exceeded " << kOverflowLimit << " at t = " << t;
  throw OverflowError(os.str(), t);
}

template <std::size_t D>
inline void matvec(const double* j, const std::array<double, D>& x, std::array<double, D>& y) {
  for (std::size_t i = 0; i < D; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < D; ++k) s += j[i * D + k] * x[k];
    y[i] = s;
  }
}

// Composite Simpson on [a, b] after t = a + (b - a)(3w^2 - 2w^3), which
// flattens the |f|^p cusp at the piece ends.
template <class F>
double simpson_smoothstep(F f, double a, double b, int panels) {
  const double len = b - a;
  auto g = [&](double w) {
    const double t = a + len * w * w * (3.0 - 2.0 * w);
    return f(t) * 6.0 * len * w * (1.0 - w);
  };
  const double hw = 1.0 / panels;
  double s = g(0.0) + g(1.0);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * g(k * hw);
  return s * hw / 3.0;
}

// Integral of |x_i'|^p over one step near a sign change of x_i'. The velocity
// is the degree-5 Taylor polynomial of J exp(sJ) x; the root is bisected and
// both sides integrated separately.
template <std::size_t D, class Pow>
double kink_step(const double* j, const std::array<double, D>& k1, double h, std::size_t i,
                 Pow pw) {
  std::array<double, 6> c{};
  std::array<double, D> v = k1, w;
  double fact = 1.0;
  for (int k = 0; k < 6; ++k) {
    c[k] = v[i] / fact;
    if (k == 5) break;
    matvec<D>(j, v, w);
    v = w;
    fact *= k + 1;
  }
  auto vel = [&](double s) {
    double r = c[5];
    for (int k = 4; k >= 0; --k) r = r * s + c[k];
    return r;
  };
  auto f = [&](double s) { return pw(vel(s)); };
  const double f0 = vel(0.0), fh = vel(h);
  if (f0 * fh >= 0.0) return simpson_smoothstep(f, 0.0, h, 16);
  double lo = 0.0, hi = h;
  for (int it = 0; it < 60 && hi - lo > 1e-15 * h; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((vel(mid) < 0.0) == (f0 < 0.0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double r = 0.5 * (lo + hi);
  return simpson_smoothstep(f, 0.0, r, 16) + simpson_smoothstep(f, r, h, 16);
}

// Fixed-step RK4 for x' = J x, accumulating sum_i |x_i'|^p per coordinate
// from the stage slopes. Steps where a velocity component changes sign, or
// comes within a few steps of doing so, are integrated through the kink.
template <std::size_t D, class Pow>
void rk4_run(const double* j, std::array<double, D>& x, double h, long steps, double sign,
             Pow pw, std::array<double, D>& acc) {
  std::array<double, D> k1, k2, k3, k4, xs, sum{};
  const double h2 = 0.5 * h;
  const double h6 = h / 6.0;
  for (long s = 0; s < steps; ++s) {
    matvec<D>(j, x, k1);
    for (std::size_t i = 0; i < D; ++i) xs[i] = x[i] + h2 * k1[i];
    matvec<D>(j, xs, k2);
    for (std::size_t i = 0; i < D; ++i) xs[i] = x[i] + h2 * k2[i];
    matvec<D>(j, xs, k3);
    for (std::size_t i = 0; i < D; ++i) xs[i] = x[i] + h * k3[i];
    matvec<D>(j, xs, k4);
    bool ok = true;
    for (std::size_t i = 0; i < D; ++i) {
      const double lo = std::min({std::abs(k1[i]), std::abs(k2[i]), std::abs(k3[i]), std::abs(k4[i])});
      const double spread = std::max({std::abs(k2[i] - k1[i]), std::abs(k3[i] - k1[i]),
                                      std::abs(k4[i] - k1[i])});
      if (lo < 3.0 * spread) {
        sum[i] += kink_step<D>(j, k1, h, i, pw) / h6;
      } else {
        sum[i] += pw(k1[i]) + 2.0 * (pw(k2[i]) + pw(k3[i])) + pw(k4[i]);
      }
      x[i] += h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
      ok = ok && std::abs(x[i]) <= kOverflowLimit;
    }
    if (!ok) overflow_at(sign * h * static_cast<double>(s + 1));
  }
  for (std::size_t i = 0; i < D; ++i) acc[i] = h6 * sum[i];
}

template <std::size_t D>
void run_dispatch(const double* j, std::array<double, D>& x, double h, long steps, double sign,
                  double p, std::array<double, D>& acc) {
  if (p == 1.0) {
    rk4_run<D>(j, x, h, steps, sign, Abs{}, acc);
  } else if (p == 0.5) {
    rk4_run<D>(j, x, h, steps, sign, AbsSqrt{}, acc);
  } else {
    rk4_run<D>(j, x, h, steps, sign, AbsPow{p}, acc);
  }
}

long step_count(const LDParams& params) {
  return std::max(1L, static_cast<long>(std::ceil(params.tau / params.dt - 1e-9)));
}

template <std::size_t D>
AugmentedResult augmented_fixed(const SystemModel& system, const PhasePoint& x0,
                                Direction direction, const LDParams& params) {
  std::array<double, D * D> j;
  const auto& rows = system.jacobian_rows();
  const double sign = direction == Direction::Forward ? 1.0 : -1.0;
  for (std::size_t i = 0; i < D * D; ++i) j[i] = sign * rows[i];
  std::array<double, D> x, acc;
  for (std::size_t i = 0; i < D; ++i) x[i] = x0[i];
  const long steps = step_count(params);
  run_dispatch<D>(j.data(), x, params.tau / static_cast<double>(steps), steps, sign, params.p,
                  acc);
  AugmentedResult r{PhasePoint::from_span(x), std::vector<double>(acc.begin(), acc.end())};
  return r;
}

void check_inputs(const SystemModel& system, const PhasePoint& x0, const LDParams& params) {
  validate(params);
  require_dim(system, x0);
  if (!x0.finite() || !std::isfinite(energy(system, x0))) {
    throw ParameterDomainError("initial condition must be finite");
  }
}

}  // namespace

void validate(const LDParams& params) {
  if (!(params.p > 0.0 && params.p <= 1.0)) throw ParameterDomainError("p must lie in (0, 1]");
  if (!(params.tau > 0.0) || !std::isfinite(params.tau)) {
    throw ParameterDomainError("tau must be positive");
  }
  if (!(params.dt > 0.0) || params.dt > params.tau) {
    throw ParameterDomainError("dt must satisfy 0 < dt <= tau");
  }
  if (!std::isfinite(params.t0)) throw ParameterDomainError("t0 must be finite");
}

AugmentedResult integrate_augmented(const SystemModel& system, const PhasePoint& x0,
                                    Direction direction, const LDParams& params) {
  check_inputs(system, x0, params);
  if (system.dim() == 4) return augmented_fixed<4>(system, x0, direction, params);
  return augmented_fixed<6>(system, x0, direction, params);
}

std::vector<double> quadrature_per_dof(const SystemModel& system, const PhasePoint& x0,
                                       Direction direction, const LDParams& params) {
  check_inputs(system, x0, params);
  const double sign = direction == Direction::Forward ? 1.0 : -1.0;
  const std::size_t dim = system.dim();
  const auto& jr = system.jacobian_rows();
  const double p = params.p;

  auto velocity = [&](double t) {
    const PhasePoint x = analytic_flow(system, x0, sign * t);
    if (!(x.norm() <= kOverflowLimit)) overflow_at(sign * t);
    std::array<double, PhasePoint::kMaxDim> v{};
    for (std::size_t i = 0; i < dim; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += jr[i * dim + k] * x[k];
      v[i] = s;
    }
    return v;
  };

  const auto omegas = system.bath_frequencies();
  const double wmax = *std::max_element(omegas.begin(), omegas.end());
  const double width = std::min(params.dt, 2.0 * std::numbers::pi / wmax / 40.0);
  const int nodes = static_cast<int>(std::ceil(params.tau / width));
  std::vector<std::array<double, PhasePoint::kMaxDim>> vals(nodes + 1);
  std::vector<double> ts(nodes + 1);
  for (int k = 0; k <= nodes; ++k) {
    ts[k] = params.tau * k / nodes;
    vals[k] = velocity(ts[k]);
  }

  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    std::vector<double> cuts{0.0};
    for (int k = 0; k < nodes; ++k) {
      const double fa = vals[k][i];
      const double fb = vals[k + 1][i];
      if (k > 0 && fa == 0.0 && cuts.back() != ts[k]) cuts.push_back(ts[k]);
      if (fa * fb < 0.0) {
        double lo = ts[k], hi = ts[k + 1], flo = fa;
        while (hi - lo > 1e-12) {
          const double mid = 0.5 * (lo + hi);
          const double fm = velocity(mid)[i];
          if (fm == 0.0) {
            lo = hi = mid;
            break;
          }
          if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        cuts.push_back(0.5 * (lo + hi));
      }
    }
    if (cuts.back() < params.tau) cuts.push_back(params.tau);
    auto f = [&](double t) {
      const double v = velocity(t)[i];
      return p == 1.0 ? std::abs(v) : std::pow(std::abs(v), p);
    };
    double total = 0.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c], b = cuts[c + 1];
      if (b <= a) continue;
      int panels = 2 * std::max(8, static_cast<int>(std::ceil(0.75 * (b - a) / width)));
      total += simpson_smoothstep(f, a, b, panels);
    }
    out[i] = total;
  }
  return out;
}

LDResult ld_point(const SystemModel& system, const PhasePoint& x0, const LDParams& params) {
  check_inputs(system, x0, params);
  std::vector<double> fwd, bwd;
  if (params.method == LDMethod::AugmentedIntegration) {
    fwd = integrate_augmented(system, x0, Direction::Forward, params).accumulated;
    bwd = integrate_augmented(system, x0, Direction::Backward, params).accumulated;
  } else {
    fwd = quadrature_per_dof(system, x0, Direction::Forward, params);
    bwd = quadrature_per_dof(system, x0, Direction::Backward, params);
  }
  LDResult r;
  r.per_dof.resize(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    r.forward += fwd[i];
    r.backward += bwd[i];
    r.per_dof[i] = fwd[i] + bwd[i];
  }
  r.total = r.forward + r.backward;
  const int n = system.dof();
  if (!system.transform()) {
    const double h = r.per_dof[0] + r.per_dof[n];
    double e = 0.0;
    for (int i = 1; i < n; ++i) e += r.per_dof[i] + r.per_dof[n + i];
    r.hyperbolic = h;
    r.elliptic = e;
  } else {
    const ComponentSplit s = split_components(system, x0, params);
    r.hyperbolic = s.hyperbolic;
    r.elliptic = s.elliptic;
  }
  return r;
}

LDTotals ld_totals(const SystemModel& system, const PhasePoint& x0, const LDParams& params) {
  LDTotals t;
  for (Direction d : {Direction::Forward, Direction::Backward}) {
    const auto acc = integrate_augmented(system, x0, d, params).accumulated;
    double s = 0.0;
    for (double v : acc) s += v;
    (d == Direction::Forward ? t.forward : t.backward) = s;
  }
  return t;
}

ComponentSplit split_components(const SystemModel& system, const PhasePoint& x0,
                                const LDParams& params) {
  check_inputs(system, x0, params);
  if (system.transform()) {
    const ModelKind kind =
        system.dof() == 2 ? ModelKind::Decoupled2 : ModelKind::Decoupled3;
    const SystemModel plain = build_system(kind, system.params());
    const LDResult r = ld_point(plain, to_decoupled(system, x0), params);
    return {*r.hyperbolic, *r.elliptic};
  }
  const LDResult r = ld_point(system, x0, params);
  return {*r.hyperbolic, *r.elliptic};
}

double hyperbolic_asymptote(double lambda, double p, double a, double b, double tau) {
  if (!(lambda > 0.0)) throw ParameterDomainError("lambda must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw ParameterDomainError("p must lie in (0, 1]");
  if (!(tau > 0.0)) throw ParameterDomainError("tau must be positive");
  const double pre = std::pow(lambda, p - 1.0) / (p * std::pow(2.0, p - 1.0));
  return pre * (std::pow(std::abs(a), p) + std::pow(std::abs(b), p)) * std::exp(p * lambda * tau);
}

double elliptic_average_limit(double omega, double h_mode, double p) {
  if (!(omega > 0.0)) throw ParameterDomainError("omega must be positive");
  if (!(h_mode >= 0.0)) throw ParameterDomainError("mode energy must be non-negative");
  if (!(p > 0.0 && p <= 1.0)) throw ParameterDomainError("p must lie in (0, 1]");
  if (h_mode == 0.0) return 0.0;
  const double radius = std::sqrt(2.0 * h_mode / omega);
  const double x = 0.5 * (p + 1.0);
  const double beta = std::exp(std::lgamma(x) + std::lgamma(0.5) - std::lgamma(x + 0.5));
  return 2.0 / std::numbers::pi * std::pow(omega * radius, p) * beta;
}

double elliptic_arclength(double omega, double radius, double tau) {
  if (!(omega > 0.0)) throw ParameterDomainError("omega must be positive");
  if (!(radius >= 0.0) || !(tau >= 0.0)) {
    throw ParameterDomainError("radius and tau must be non-negative");
  }
  return 2.0 * tau * omega * radius;
}

}  // namespace ldnhim
