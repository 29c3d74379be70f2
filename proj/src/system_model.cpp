#include "ldnhim/system_model.hpp"

#include <algorithm>
#include <cmath>

#include "ldnhim/errors.hpp"
#include "ldnhim/symplectic.hpp"

namespace ldnhim {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Decoupled2: return "decoupled2";
    case ModelKind::Coupled2: return "coupled2";
    case ModelKind::Decoupled3: return "decoupled3";
    case ModelKind::Coupled3: return "coupled3";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "decoupled2") return ModelKind::Decoupled2;
  if (name == "coupled2") return ModelKind::Coupled2;
  if (name == "decoupled3") return ModelKind::Decoupled3;
  if (name == "coupled3") return ModelKind::Coupled3;
  throw ParameterDomainError("unknown model kind: " + std::string(name));
}

int degrees_of_freedom(ModelKind kind) {
  return (kind == ModelKind::Decoupled2 || kind == ModelKind::Coupled2) ? 2 : 3;
}

bool is_coupled(ModelKind kind) {
  return kind == ModelKind::Coupled2 || kind == ModelKind::Coupled3;
}

std::vector<double> SystemModel::bath_frequencies() const {
  std::vector<double> w{params_.omega2};
  if (dof_ == 3) w.push_back(*params_.omega3);
  return w;
}

namespace {

void check_params(ModelKind kind, const ModelParams& p) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(p.lambda)) throw ParameterDomainError("lambda must be positive and finite");
  if (!positive(p.omega2)) throw ParameterDomainError("omega2 must be positive and finite");
  if (degrees_of_freedom(kind) == 3) {
    if (!p.omega3 || !positive(*p.omega3)) {
      throw ParameterDomainError("omega3 must be given and positive for 3-DoF models");
    }
  } else if (p.omega3) {
    throw ParameterDomainError("omega3 is only meaningful for 3-DoF models");
  }
}

Eigen::MatrixXd decoupled_jacobian(const ModelParams& p, int n) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  j(0, n) = p.lambda;
  j(n, 0) = p.lambda;
  for (int i = 1; i < n; ++i) {
    const double w = (i == 1) ? p.omega2 : *p.omega3;
    j(i, n + i) = w;
    j(n + i, i) = -w;
  }
  return j;
}

PhasePoint apply(const Eigen::MatrixXd& m, const PhasePoint& x) {
  PhasePoint r(x.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < m.cols(); ++k) s += m(i, k) * x[k];
    r[i] = s;
  }
  return r;
}

PhasePoint decoupled_flow(const ModelParams& p, int n, const PhasePoint& y0, double t) {
  PhasePoint y(y0.size());
  const double ch = std::cosh(p.lambda * t);
  const double sh = std::sinh(p.lambda * t);
  y[0] = y0[0] * ch + y0[n] * sh;
  y[n] = y0[n] * ch + y0[0] * sh;
  for (int i = 1; i < n; ++i) {
    const double w = (i == 1) ? p.omega2 : *p.omega3;
    const double c = std::cos(w * t);
    const double s = std::sin(w * t);
    y[i] = y0[i] * c + y0[n + i] * s;
    y[n + i] = y0[n + i] * c - y0[i] * s;
  }
  return y;
}

}  // namespace

void require_dim(const SystemModel& system, const PhasePoint& x) {
  if (x.size() != system.dim()) {
    throw ShapeError("phase point has dimension " + std::to_string(x.size()) +
                     ", system " + to_string(system.kind()) + " needs " +
                     std::to_string(system.dim()));
  }
}

SystemModel build_system(ModelKind kind, const ModelParams& params,
                         const std::optional<Eigen::MatrixXd>& transform) {
  check_params(kind, params);
  const int n = degrees_of_freedom(kind);
  SystemModel s;
  s.kind_ = kind;
  s.params_ = params;
  s.dof_ = n;
  const Eigen::MatrixXd jd = decoupled_jacobian(params, n);
  if (is_coupled(kind)) {
    if (!transform) throw ShapeError("coupled models need a symplectic transform");
    if (transform->rows() != 2 * n || transform->cols() != 2 * n) {
      throw ShapeError("transform must be " + std::to_string(2 * n) + "x" +
                       std::to_string(2 * n));
    }
    const double r = check_symplectic(*transform);
    if (r > 1e-12) {
      throw SymplecticViolationError(
          "transform violates C J C^T = J (residual " + std::to_string(r) + ")", r);
    }
    s.transform_ = *transform;
    s.inverse_ = symplectic_inverse(*transform);
    s.jac_ = (*s.inverse_) * jd * (*transform);
  } else {
    if (transform) throw ShapeError("decoupled models take no transform");
    s.jac_ = jd;
  }
  for (int i = 0; i < 2 * n; ++i) {
    for (int k = 0; k < 2 * n; ++k) s.jac_rows_[i * 2 * n + k] = s.jac_(i, k);
  }
  return s;
}

SystemModel reference_system(ModelKind kind, const ModelParams& params) {
  if (is_coupled(kind)) {
    return build_system(kind, params, reference_transform(degrees_of_freedom(kind)));
  }
  return build_system(kind, params);
}

PhasePoint to_decoupled(const SystemModel& system, const PhasePoint& x) {
  require_dim(system, x);
  if (!system.transform()) return x;
  return apply(*system.transform(), x);
}

PhasePoint from_decoupled(const SystemModel& system, const PhasePoint& y) {
  require_dim(system, y);
  if (!system.inverse_transform()) return y;
  return apply(*system.inverse_transform(), y);
}

double decoupled_energy(const ModelParams& p, int n, const PhasePoint& y) {
  double h = 0.5 * p.lambda * (y[n] * y[n] - y[0] * y[0]);
  for (int i = 1; i < n; ++i) {
    const double w = (i == 1) ? p.omega2 : *p.omega3;
    h += 0.5 * w * (y[i] * y[i] + y[n + i] * y[n + i]);
  }
  return h;
}

double energy(const SystemModel& system, const PhasePoint& x) {
  return decoupled_energy(system.params(), system.dof(), to_decoupled(system, x));
}

PhasePoint vector_field(const SystemModel& system, const PhasePoint& x) {
  require_dim(system, x);
  return apply(system.jacobian(), x);
}

std::vector<std::complex<double>> jacobian_spectrum(const SystemModel& system) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(system.jacobian(), false);
  const auto ev = solver.eigenvalues();
  std::vector<std::complex<double>> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return out;
}

HyperbolicConstants hyperbolic_constants(const SystemModel& system, const PhasePoint& x) {
  const PhasePoint y = to_decoupled(system, x);
  const int n = system.dof();
  return {y[0] + y[n], y[0] - y[n]};
}

PhasePoint analytic_flow(const SystemModel& system, const PhasePoint& x0, double t) {
  require_dim(system, x0);
  if (!system.transform()) return decoupled_flow(system.params(), system.dof(), x0, t);
  if (t == 0.0) return x0;
  return from_decoupled(system,
                        decoupled_flow(system.params(), system.dof(), to_decoupled(system, x0), t));
}

Reactivity classify_reactive(const SystemModel& system, const PhasePoint& x0, double tau) {
  if (!(tau > 0.0)) throw ParameterDomainError("tau must be positive");
  require_dim(system, x0);
  const PhasePoint y0 = to_decoupled(system, x0);
  const ModelParams& p = system.params();
  const int n = system.dof();
  bool neg = false;
  bool pos = false;
  constexpr int kSamples = 1000;
  for (int k = 0; k <= kSamples; ++k) {
    const double t = tau * k / kSamples;
    const double r = y0[0] * std::cosh(p.lambda * t) + y0[n] * std::sinh(p.lambda * t);
    neg = neg || r < 0.0;
    pos = pos || r > 0.0;
    if (neg && pos) return Reactivity::Reactive;
  }
  return Reactivity::Nonreactive;
}

}  // namespace ldnhim
