#include "ldnhim/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "ldnhim/errors.hpp"

namespace ldnhim {

std::string to_string(FeatureLabel label) {
  switch (label) {
    case FeatureLabel::NHIM: return "NHIM";
    case FeatureLabel::WStable: return "W_stable";
    case FeatureLabel::WUnstable: return "W_unstable";
    case FeatureLabel::DS: return "DS";
  }
  return "unknown";
}

std::string to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Point: return "point";
    case PrimitiveKind::LineSegment: return "line-segment";
    case PrimitiveKind::Circle: return "circle";
    case PrimitiveKind::EllipseArc: return "ellipse-arc";
    case PrimitiveKind::CurveSamples: return "curve-samples";
  }
  return "unknown";
}

std::string to_string(DSMembership m) {
  switch (m) {
    case DSMembership::ForwardDS: return "forward-DS";
    case DSMembership::BackwardDS: return "backward-DS";
    case DSMembership::NHIMSeam: return "NHIM-seam";
    case DSMembership::OffDS: return "off-DS";
  }
  return "unknown";
}

bool FeatureSet::has(FeatureLabel label) const {
  return std::any_of(primitives.begin(), primitives.end(),
                     [&](const FeaturePrimitive& p) { return p.label == label; });
}

namespace {

constexpr int kCurveSamples = 2000;
constexpr double kInf = std::numeric_limits<double>::infinity();

double dist(Point2 a, Point2 b) { return std::hypot(a.u - b.u, a.v - b.v); }

double segment_distance(Point2 a, Point2 b, Point2 q) {
  const double du = b.u - a.u, dv = b.v - a.v;
  const double len2 = du * du + dv * dv;
  if (len2 == 0.0) return dist(a, q);
  const double t = std::clamp(((q.u - a.u) * du + (q.v - a.v) * dv) / len2, 0.0, 1.0);
  return dist({a.u + t * du, a.v + t * dv}, q);
}

double conic_value(const std::array<double, 6>& c, Point2 p) {
  return c[0] * p.u * p.u + c[1] * p.u * p.v + c[2] * p.v * p.v + c[3] * p.u + c[4] * p.v + c[5];
}

Point2 conic_gradient(const std::array<double, 6>& c, Point2 p) {
  return {2.0 * c[0] * p.u + c[1] * p.v + c[3], c[1] * p.u + 2.0 * c[2] * p.v + c[4]};
}

// Real roots of a x^2 + b x + c = 0 (a may vanish).
std::vector<double> quadratic_roots(double a, double b, double c) {
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (scale == 0.0) return {};
  if (std::abs(a) <= 1e-14 * scale) {
    if (std::abs(b) <= 1e-14 * scale) return {};
    return {-c / b};
  }
  double disc = b * b - 4.0 * a * c;
  if (disc < -1e-14 * scale * scale) return {};
  if (disc <= 0.0) return {-b / (2.0 * a)};
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  return {q / a, c / q};
}

bool inside(const Bounds& b, Point2 p) {
  return p.u >= b.u_min && p.u <= b.u_max && p.v >= b.v_min && p.v <= b.v_max;
}

// Intersections of the shell, the section and a set of linear constraints,
// expressed in the section variables z = (u, v, s).
class SectionGeometry {
 public:
  SectionGeometry(const SectionSpec& section, const SystemModel& system, double h,
                  const Bounds& bounds)
      : section_(section), system_(system), h_(h), bounds_(bounds) {
    const std::size_t n = system.dim();
    idx_ = {section.u, section.v, section.solve};
    fixed_ = PhasePoint(n);
    for (const auto& [k, val] : section.fixed) fixed_[k] = val;
    // Hessian of H by polarisation; exact for quadratic forms.
    Eigen::MatrixXd s(n, n);
    auto e = [&](std::size_t i) {
      PhasePoint x(n);
      x[i] = 1.0;
      return x;
    };
    for (std::size_t i = 0; i < n; ++i) s(i, i) = 2.0 * energy(system, e(i));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = energy(system, e(i) + e(j)) - 0.5 * (s(i, i) + s(j, j));
        s(i, j) = s(j, i) = v;
      }
    }
    Eigen::VectorXd xf(n);
    for (std::size_t i = 0; i < n; ++i) xf(i) = fixed_[i];
    const Eigen::VectorXd sxf = s * xf;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) p_(a, b) = s(idx_[a], idx_[b]);
      g_(a) = sxf(idx_[a]);
    }
    c0_ = 0.5 * xf.dot(sxf);
  }

  // Quadratic energy minus h restricted to z.
  double q(const Eigen::Vector3d& z) const { return 0.5 * z.dot(p_ * z) + g_.dot(z) + c0_ - h_; }

  // Constraint row (decoupled coordinates) mapped to (u, v, s) and constant.
  std::pair<Eigen::Vector3d, double> constraint(const Eigen::VectorXd& row_decoupled) const {
    Eigen::VectorXd row = row_decoupled;
    if (system_.transform()) row = system_.transform()->transpose() * row_decoupled;
    Eigen::Vector3d a;
    for (int k = 0; k < 3; ++k) a(k) = row(idx_[k]);
    double beta = 0.0;
    for (std::size_t i = 0; i < system_.dim(); ++i) beta -= row(i) * fixed_[i];
    return {a, beta};
  }

  // Candidate accepted when the section's own lift lands on it.
  bool accepts(Point2 p, std::optional<double> s) const {
    LiftOptions opt;
    opt.closure = true;
    const auto x = lift(section_, system_, p.u, p.v, h_, opt);
    if (!x) return false;
    if (!s) return true;
    return std::abs((*x)[section_.solve] - *s) <= 1e-6 * std::max(1.0, std::abs(*s));
  }

  std::vector<FeaturePrimitive> build(FeatureLabel label,
                                      const std::vector<Eigen::VectorXd>& rows) const;

 private:
  std::vector<FeaturePrimitive> conic_case(FeatureLabel label, const Eigen::Vector3d& a,
                                           double beta) const;
  std::vector<FeaturePrimitive> line_case(FeatureLabel label, Point2 origin, Point2 dir,
                                          std::optional<std::array<double, 2>> s_affine) const;

  const SectionSpec& section_;
  const SystemModel& system_;
  double h_;
  Bounds bounds_;
  std::array<int, 3> idx_{};
  PhasePoint fixed_;
  Eigen::Matrix3d p_;
  Eigen::Vector3d g_;
  double c0_ = 0.0;
};

std::vector<FeaturePrimitive> SectionGeometry::build(
    FeatureLabel label, const std::vector<Eigen::VectorXd>& rows) const {
  std::vector<Eigen::Vector3d> a;
  std::vector<double> beta;
  for (const auto& r : rows) {
    auto [ai, bi] = constraint(r);
    a.push_back(ai);
    beta.push_back(bi);
  }
  // Gaussian elimination, pivoting on s first.
  std::vector<int> pivot_col(a.size(), -1);
  for (int col : {2, 0, 1}) {
    int best = -1;
    for (std::size_t r = 0; r < a.size(); ++r) {
      if (pivot_col[r] >= 0) continue;
      if (std::abs(a[r](col)) > 1e-12 && (best < 0 || std::abs(a[r](col)) > std::abs(a[best](col)))) {
        best = static_cast<int>(r);
      }
    }
    if (best < 0) continue;
    const double piv = a[best](col);
    a[best] /= piv;
    beta[best] /= piv;
    pivot_col[best] = col;
    for (std::size_t r = 0; r < a.size(); ++r) {
      if (static_cast<int>(r) == best || a[r](col) == 0.0) continue;
      const double f = a[r](col);
      a[r] -= f * a[best];
      beta[r] -= f * beta[best];
    }
  }
  std::vector<std::size_t> pivots;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (pivot_col[r] >= 0) {
      pivots.push_back(r);
    } else if (std::abs(beta[r]) > 1e-12) {
      return {};  // inconsistent constraints
    }
  }
  if (pivots.empty()) return {};  // constraint holds on the whole section

  if (pivots.size() == 1) {
    const std::size_t r = pivots[0];
    if (pivot_col[r] == 2) return conic_case(label, a[r], beta[r]);
    // Line in (u, v); s unconstrained.
    const int c = pivot_col[r];
    const int other = 1 - c;
    Point2 origin, dir;
    double* o = c == 0 ? &origin.u : &origin.v;
    double* d = c == 0 ? &dir.u : &dir.v;
    double* oo = c == 0 ? &origin.v : &origin.u;
    double* od = c == 0 ? &dir.v : &dir.u;
    *o = beta[r];
    *oo = 0.0;
    *d = -a[r](other);
    *od = 1.0;
    return line_case(label, origin, dir, std::nullopt);
  }

  // Two or three independent constraints.
  int free_col = -1;
  for (int col = 0; col < 3; ++col) {
    if (std::none_of(pivots.begin(), pivots.end(), [&](std::size_t r) { return pivot_col[r] == col; })) {
      free_col = col;
    }
  }
  auto value_of = [&](int col, double t) {
    for (std::size_t r : pivots) {
      if (pivot_col[r] == col) return beta[r] - (free_col >= 0 ? a[r](free_col) * t : 0.0);
    }
    return t;
  };
  auto z_at = [&](double t) {
    return Eigen::Vector3d(value_of(0, t), value_of(1, t), value_of(2, t));
  };
  std::vector<FeaturePrimitive> out;
  auto emit_point = [&](const Eigen::Vector3d& z, std::optional<double> s) {
    const Point2 p{z(0), z(1)};
    if (!inside(bounds_, p) || !accepts(p, s)) return;
    FeaturePrimitive fp;
    fp.kind = PrimitiveKind::Point;
    fp.label = label;
    fp.points = {p};
    out.push_back(fp);
  };
  if (free_col < 0) {
    const Eigen::Vector3d z = z_at(0.0);
    if (std::abs(q(z)) <= 1e-12) emit_point(z, z(2));
    return out;
  }
  if (free_col == 2) {
    // (u, v) pinned, s free along the shell.
    emit_point(z_at(0.0), std::nullopt);
    return out;
  }
  // Line in z parametrised by the free coordinate t (u or v).
  const Eigen::Vector3d z0 = z_at(0.0);
  const Eigen::Vector3d d = z_at(1.0) - z0;
  const double qa = 0.5 * d.dot(p_ * d);
  const double qb = d.dot(p_ * z0) + g_.dot(d);
  const double qc = q(z0);
  const double scale = std::max({std::abs(qa), std::abs(qb), std::abs(qc)});
  if (scale <= 1e-14) {
    return line_case(label, {z0(0), z0(1)}, {d(0), d(1)},
                     std::array<double, 2>{z0(2), d(2)});
  }
  for (double t : quadratic_roots(qa, qb, qc)) {
    const Eigen::Vector3d z = z0 + t * d;
    emit_point(z, z(2));
  }
  return out;
}

std::vector<FeaturePrimitive> SectionGeometry::conic_case(FeatureLabel label,
                                                          const Eigen::Vector3d& a,
                                                          double beta) const {
  // s = beta - a_u u - a_v v, substituted into the energy.
  const Eigen::Vector3d z0(0.0, 0.0, beta);
  const Eigen::Vector3d eu(1.0, 0.0, -a(0));
  const Eigen::Vector3d ev(0.0, 1.0, -a(1));
  std::array<double, 6> c{};
  c[0] = 0.5 * eu.dot(p_ * eu);
  c[1] = eu.dot(p_ * ev);
  c[2] = 0.5 * ev.dot(p_ * ev);
  c[3] = eu.dot(p_ * z0) + g_.dot(eu);
  c[4] = ev.dot(p_ * z0) + g_.dot(ev);
  c[5] = q(z0);
  auto s_of = [&](Point2 p) { return beta - a(0) * p.u - a(1) * p.v; };

  std::vector<FeaturePrimitive> out;
  FeaturePrimitive fp;
  fp.label = label;
  fp.conic = c;

  const double scale = std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2])});
  const double det = 4.0 * c[0] * c[2] - c[1] * c[1];
  if (scale > 0.0 && det > 1e-12 * scale * scale) {
    Eigen::Matrix2d m;
    m << c[0], 0.5 * c[1], 0.5 * c[1], c[2];
    const Eigen::Vector2d lin(c[3], c[4]);
    const Eigen::Vector2d ctr = -0.5 * m.inverse() * lin;
    const double fc = c[5] + 0.5 * lin.dot(ctr);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
    const Eigen::Vector2d l = es.eigenvalues();
    if (-fc / l(0) <= 0.0 || -fc / l(1) <= 0.0) {
      if (std::abs(fc) > 1e-14) return out;  // empty ellipse
    }
    const double r0 = std::sqrt(std::max(0.0, -fc / l(0)));
    const double r1 = std::sqrt(std::max(0.0, -fc / l(1)));
    const Eigen::Matrix2d rot = es.eigenvectors();
    fp.center = {ctr(0), ctr(1)};
    std::size_t accepted = 0;
    for (int k = 0; k < kCurveSamples; ++k) {
      const double th = 2.0 * std::numbers::pi * k / kCurveSamples;
      const Eigen::Vector2d pt = ctr + rot * Eigen::Vector2d(r0 * std::cos(th), r1 * std::sin(th));
      const Point2 p{pt(0), pt(1)};
      if (inside(bounds_, p) && accepts(p, s_of(p))) {
        fp.points.push_back(p);
        ++accepted;
      }
    }
    if (fp.points.empty()) return out;
    fp.spacing = 2.0 * std::numbers::pi * std::max(r0, r1) / kCurveSamples;
    const bool circle = std::abs(l(0) - l(1)) <= 1e-12 * std::abs(l(0));
    if (circle && accepted == static_cast<std::size_t>(kCurveSamples)) {
      fp.kind = PrimitiveKind::Circle;
      fp.radius = r0;
    } else {
      fp.kind = PrimitiveKind::EllipseArc;
    }
    out.push_back(fp);
    return out;
  }

  // Other conics: sweep both axes and solve the quadratic in the other one.
  fp.kind = PrimitiveKind::CurveSamples;
  const double su = (bounds_.u_max - bounds_.u_min) / (kCurveSamples - 1);
  const double sv = (bounds_.v_max - bounds_.v_min) / (kCurveSamples - 1);
  for (int k = 0; k < kCurveSamples; ++k) {
    const double u = bounds_.u_min + k * su;
    for (double v : quadratic_roots(c[2], c[1] * u + c[4], c[0] * u * u + c[3] * u + c[5])) {
      const Point2 p{u, v};
      if (inside(bounds_, p) && accepts(p, s_of(p))) fp.points.push_back(p);
    }
    const double v = bounds_.v_min + k * sv;
    for (double uu : quadratic_roots(c[0], c[1] * v + c[3], c[2] * v * v + c[4] * v + c[5])) {
      const Point2 p{uu, v};
      if (inside(bounds_, p) && accepts(p, s_of(p))) fp.points.push_back(p);
    }
  }
  if (fp.points.empty()) return out;
  fp.spacing = std::max(su, sv);
  out.push_back(fp);
  return out;
}

std::vector<FeaturePrimitive> SectionGeometry::line_case(
    FeatureLabel label, Point2 origin, Point2 dir,
    std::optional<std::array<double, 2>> s_affine) const {
  // Clip origin + t dir to the bounds.
  double t0 = -kInf, t1 = kInf;
  auto clip = [&](double o, double d, double lo, double hi) {
    if (d == 0.0) {
      if (o < lo || o > hi) t0 = kInf;
      return;
    }
    double a = (lo - o) / d, b = (hi - o) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  };
  clip(origin.u, dir.u, bounds_.u_min, bounds_.u_max);
  clip(origin.v, dir.v, bounds_.v_min, bounds_.v_max);
  if (!(t1 >= t0)) return {};
  auto at = [&](double t) { return Point2{origin.u + t * dir.u, origin.v + t * dir.v}; };
  auto ok = [&](double t) {
    std::optional<double> s;
    if (s_affine) s = (*s_affine)[0] + t * (*s_affine)[1];
    return accepts(at(t), s);
  };
  auto refine = [&](double good, double bad) {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (good + bad);
      (ok(mid) ? good : bad) = mid;
    }
    return good;
  };
  std::vector<FeaturePrimitive> out;
  const double dt = (t1 - t0) / (kCurveSamples - 1);
  std::optional<double> run_start;
  double prev_t = t0;
  bool prev_ok = false;
  for (int k = 0; k < kCurveSamples; ++k) {
    const double t = (k == kCurveSamples - 1) ? t1 : t0 + k * dt;
    const bool cur = ok(t);
    if (cur && !prev_ok) run_start = (k == 0) ? t : refine(t, prev_t);
    if (!cur && prev_ok) {
      FeaturePrimitive fp;
      fp.kind = PrimitiveKind::LineSegment;
      fp.label = label;
      fp.points = {at(*run_start), at(refine(prev_t, t))};
      out.push_back(fp);
    }
    prev_ok = cur;
    prev_t = t;
  }
  if (prev_ok) {
    FeaturePrimitive fp;
    fp.kind = PrimitiveKind::LineSegment;
    fp.label = label;
    fp.points = {at(*run_start), at(t1)};
    out.push_back(fp);
  }
  for (auto& fp : out) {
    if (dist(fp.points[0], fp.points[1]) < 1e-12) {
      fp.kind = PrimitiveKind::Point;
      fp.points.resize(1);
    }
  }
  return out;
}

Eigen::VectorXd unit_row(int n, std::initializer_list<std::pair<int, double>> entries) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * n);
  for (auto [i, v] : entries) r(i) = v;
  return r;
}

}  // namespace

FeatureSet analytic_features(const SectionSpec& section, const SystemModel& system, double h,
                             const Bounds& bounds) {
  if (section.kind != system.kind()) {
    throw UnknownSectionError("section " + section.name + " does not belong to model " +
                              to_string(system.kind()));
  }
  if (!(h > 0.0)) throw ParameterDomainError("energy h must be positive");
  const SectionGeometry geo(section, system, h, bounds);
  const int n = system.dof();
  // Decoupled coordinates: q1 at 0, p1 at n.
  const auto q1 = unit_row(n, {{0, 1.0}});
  const auto p1 = unit_row(n, {{n, 1.0}});
  FeatureSet fs;
  fs.section = section.name;
  fs.h = h;
  fs.bounds = bounds;
  auto add = [&](FeatureLabel label, const std::vector<Eigen::VectorXd>& rows) {
    auto prims = geo.build(label, rows);
    fs.primitives.insert(fs.primitives.end(), prims.begin(), prims.end());
  };
  add(FeatureLabel::NHIM, {q1, p1});
  add(FeatureLabel::WStable, {q1 + p1});
  add(FeatureLabel::WUnstable, {q1 - p1});
  add(FeatureLabel::DS, {q1});
  return fs;
}

double distance(const FeaturePrimitive& prim, Point2 q) {
  switch (prim.kind) {
    case PrimitiveKind::Point: return dist(prim.points[0], q);
    case PrimitiveKind::LineSegment: return segment_distance(prim.points[0], prim.points[1], q);
    case PrimitiveKind::Circle: return std::abs(dist(prim.center, q) - prim.radius);
    case PrimitiveKind::EllipseArc:
    case PrimitiveKind::CurveSamples: break;
  }
  if (prim.points.empty()) return kInf;
  Point2 p0 = prim.points[0];
  double best = kInf;
  for (const auto& p : prim.points) {
    const double d = dist(p, q);
    if (d < best) {
      best = d;
      p0 = p;
    }
  }
  // Foot point on the implicit curve, started at the nearest sample.
  Point2 p = p0;
  bool converged = false;
  for (int it = 0; it < 20; ++it) {
    Point2 g = conic_gradient(prim.conic, p);
    double g2 = g.u * g.u + g.v * g.v;
    if (g2 == 0.0) break;
    const double f = conic_value(prim.conic, p);
    p = {p.u - f * g.u / g2, p.v - f * g.v / g2};
    g = conic_gradient(prim.conic, p);
    g2 = g.u * g.u + g.v * g.v;
    const double gn = std::sqrt(g2);
    const Point2 tang{-g.v / gn, g.u / gn};
    const double step = (q.u - p.u) * tang.u + (q.v - p.v) * tang.v;
    p = {p.u + step * tang.u, p.v + step * tang.v};
    if (std::abs(step) < 1e-15) {
      converged = true;
      break;
    }
  }
  if (converged || std::abs(conic_value(prim.conic, p)) < 1e-12) {
    if (dist(p, p0) <= 2.0 * prim.spacing) best = std::min(best, dist(p, q));
  }
  return best;
}

double distance(const FeatureSet& set, FeatureLabel label, Point2 q) {
  double best = kInf;
  for (const auto& p : set.primitives) {
    if (p.label == label) best = std::min(best, distance(p, q));
  }
  return best;
}

std::vector<Point2> sample_label(const FeatureSet& set, FeatureLabel label, double step) {
  std::vector<Point2> out;
  for (const auto& p : set.primitives) {
    if (p.label != label) continue;
    if (p.kind == PrimitiveKind::LineSegment) {
      const double len = dist(p.points[0], p.points[1]);
      const int m = std::max(1, static_cast<int>(std::ceil(len / step)));
      for (int k = 0; k <= m; ++k) {
        const double t = static_cast<double>(k) / m;
        out.push_back({p.points[0].u + t * (p.points[1].u - p.points[0].u),
                       p.points[0].v + t * (p.points[1].v - p.points[0].v)});
      }
    } else {
      out.insert(out.end(), p.points.begin(), p.points.end());
    }
  }
  return out;
}

Point2 ScalarGrid::center(int i, int j) const {
  const double du = (bounds.u_max - bounds.u_min) / nu;
  const double dv = (bounds.v_max - bounds.v_min) / nv;
  return {bounds.u_min + (i + 0.5) * du, bounds.v_min + (j + 0.5) * dv};
}

ScalarGrid scalar_view(const GridField& grid, FieldComponent which) {
  ScalarGrid s;
  s.nu = grid.nu;
  s.nv = grid.nv;
  s.bounds = grid.bounds;
  s.values.resize(grid.values.size());
  s.mask.resize(grid.values.size());
  for (std::size_t k = 0; k < grid.values.size(); ++k) {
    const CellValue& c = grid.values[k];
    s.values[k] = which == FieldComponent::Total     ? c.total
                  : which == FieldComponent::Forward ? c.forward
                                                     : c.backward;
    s.mask[k] = grid.status[k] == CellStatus::Valid ? 1 : 0;
  }
  for (const EdgeProbe& e : grid.edges) {
    if (!e.ok) continue;
    const double value = which == FieldComponent::Total     ? e.value.total
                         : which == FieldComponent::Forward ? e.value.forward
                                                            : e.value.backward;
    s.edges.push_back({e.i, e.j, e.di, e.dj, value, e.fold});
  }
  return s;
}

namespace {

double median_abs_difference(const ScalarGrid& grid, int di, int dj) {
  std::vector<double> diffs;
  for (int j = 0; j < grid.nv; ++j) {
    for (int i = 0; i < grid.nu; ++i) {
      if (grid.valid(i, j) && grid.valid(i + di, j + dj)) {
        diffs.push_back(std::abs(grid.values[grid.index(i + di, j + dj)] -
                                 grid.values[grid.index(i, j)]));
      }
    }
  }
  if (diffs.empty()) return 0.0;
  auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  return *mid;
}

}  // namespace

std::vector<GridCell> minima_cells(const ScalarGrid& grid) {
  auto slice_min = [&](int i, int j, int di, int dj) {
    if (!grid.valid(i - di, j - dj) || !grid.valid(i + di, j + dj)) return false;
    const double f = grid.values[grid.index(i, j)];
    return f < grid.values[grid.index(i - di, j - dj)] &&
           f < grid.values[grid.index(i + di, j + dj)];
  };
  std::vector<GridCell> out;
  for (int j = 0; j < grid.nv; ++j) {
    for (int i = 0; i < grid.nu; ++i) {
      if (!grid.valid(i, j)) continue;
      if (slice_min(i, j, 1, 0) || slice_min(i, j, 0, 1)) out.push_back({i, j});
    }
  }
  return out;
}

std::vector<Point2> detect_minima(const ScalarGrid& grid) {
  std::vector<Point2> out;
  for (const GridCell& c : minima_cells(grid)) out.push_back(grid.center(c.i, c.j));
  return out;
}

std::vector<Point2> detect_minima(const GridField& grid) {
  return detect_minima(scalar_view(grid, FieldComponent::Total));
}

double difference_scale(const ScalarGrid& grid) {
  return std::max(median_abs_difference(grid, 1, 0), median_abs_difference(grid, 0, 1));
}

std::vector<GridCell> kink_minima(const ScalarGrid& grid, const KinkOptions& options) {
  if (!(options.kappa > 0.0)) throw ParameterDomainError("kappa must be positive");
  const double threshold = options.kappa * difference_scale(grid);
  std::vector<std::uint8_t> hit(grid.values.size(), 0);
  auto tied = [&](double a, double b) {
    return std::abs(a - b) <= options.tie * std::max(std::abs(a), std::abs(b));
  };

  for (int axis = 0; axis < 2; ++axis) {
    const int lines = axis == 0 ? grid.nv : grid.nu;
    const int length = axis == 0 ? grid.nu : grid.nv;
    for (int line = 0; line < lines; ++line) {
      auto cell = [&](int k) {
        return axis == 0 ? std::pair{k, line} : std::pair{line, k};
      };
      auto ok = [&](int k) {
        const auto [i, j] = cell(k);
        return grid.valid(i, j);
      };
      auto val = [&](int k) {
        const auto [i, j] = cell(k);
        return grid.values[grid.index(i, j)];
      };
      int k = 0;
      while (k < length) {
        if (!ok(k)) {
          ++k;
          continue;
        }
        int e = k;
        while (e + 1 < length && ok(e + 1) && tied(val(e + 1), val(k))) ++e;
        if (k > 0 && e + 1 < length && ok(k - 1) && ok(e + 1)) {
          const double c = val(k), a = val(k - 1), b = val(e + 1);
          if (c < a && c < b) {
            // A kink between two cells shows only half its jump at either
            // one; the slope past the lower neighbour recovers the rest.
            double jump = (a - c) + (b - c);
            if (a < b && k > 1 && ok(k - 2)) jump = std::max(jump, (b - c) + (val(k - 2) - a));
            if (b <= a && e + 2 < length && ok(e + 2)) {
              jump = std::max(jump, (a - c) + (val(e + 2) - b));
            }
            if (jump > threshold) {
              for (int t = k; t <= e; ++t) {
                const auto [i, j] = cell(t);
                hit[grid.index(i, j)] = 1;
              }
            }
          }
        }
        k = e + 1;
      }
    }
  }

  for (const EdgeSample& e : grid.edges) {
    if (!grid.valid(e.i, e.j) || !grid.valid(e.i - e.di, e.j - e.dj)) continue;
    const double c = grid.values[grid.index(e.i, e.j)];
    const double a = grid.values[grid.index(e.i - e.di, e.j - e.dj)];
    // Across a fold the sample mirrors the cell; a tie means the minimum sits
    // on the fold itself.
    const bool below = e.fold ? c <= e.value + options.fold_tie * std::abs(e.value) : c < e.value;
    if (c < a && below && (a - c) + std::max(0.0, e.value - c) > threshold) {
      hit[grid.index(e.i, e.j)] = 1;
    }
  }

  std::vector<GridCell> out;
  for (int j = 0; j < grid.nv; ++j) {
    for (int i = 0; i < grid.nu; ++i) {
      if (hit[grid.index(i, j)]) out.push_back({i, j});
    }
  }
  return out;
}

std::vector<std::uint8_t> detect_singularities(const ScalarGrid& grid, double kappa) {
  std::vector<std::uint8_t> flags(grid.values.size(), 0);
  for (int axis = 0; axis < 2; ++axis) {
    const int di = axis == 0 ? 1 : 0;
    const int dj = axis == 0 ? 0 : 1;
    const double median = median_abs_difference(grid, di, dj);
    for (int j = 0; j < grid.nv; ++j) {
      for (int i = 0; i < grid.nu; ++i) {
        if (!grid.valid(i, j) || !grid.valid(i - di, j - dj) || !grid.valid(i + di, j + dj)) {
          continue;
        }
        const double f = grid.values[grid.index(i, j)];
        const double dp = grid.values[grid.index(i + di, j + dj)] - f;
        const double dm = f - grid.values[grid.index(i - di, j - dj)];
        if (std::abs(dp - dm) > kappa * median) flags[grid.index(i, j)] = 1;
      }
    }
  }
  return flags;
}

std::vector<std::uint8_t> detect_singularities(const GridField& grid, double kappa) {
  return detect_singularities(scalar_view(grid, FieldComponent::Total), kappa);
}

MatchReport match_features(const DetectedSets& detected, const FeatureSet& analytic, double tol,
                           const ScalarGrid* mask) {
  if (!(tol > 0.0)) throw ParameterDomainError("tolerance must be positive");
  MatchReport report;
  report.tolerance = tol;
  report.pass = true;
  for (FeatureLabel label : {FeatureLabel::NHIM, FeatureLabel::WStable, FeatureLabel::WUnstable}) {
    LabelReport lr;
    lr.label = label;
    lr.expected = analytic.has(label);
    std::size_t n_prims = 0;
    std::string kinds;
    for (const auto& p : analytic.primitives) {
      if (p.label != label) continue;
      ++n_prims;
      if (!kinds.empty()) kinds += ",";
      kinds += to_string(p.kind);
    }
    lr.n_expected = lr.expected ? std::to_string(n_prims) + " primitive(s): " + kinds : "empty";
    const auto it = detected.find(label);
    const std::vector<Point2> empty;
    const auto& pts = it == detected.end() ? empty : it->second;
    lr.n_detected = pts.size();
    double sum = 0.0;
    for (const auto& q : pts) {
      const double d = distance(analytic, label, q);
      lr.max_distance = std::max(lr.max_distance, d);
      sum += d;
    }
    lr.mean_distance = pts.empty() ? 0.0 : sum / static_cast<double>(pts.size());
    if (mask != nullptr && lr.expected && !pts.empty()) {
      // Analytic points away from the edge of the valid region must be hit.
      std::size_t total = 0, hit = 0;
      const double du = (mask->bounds.u_max - mask->bounds.u_min) / mask->nu;
      const double dv = (mask->bounds.v_max - mask->bounds.v_min) / mask->nv;
      for (const Point2& a : sample_label(analytic, label, 0.5 * std::min(du, dv))) {
        const int i = static_cast<int>(std::floor((a.u - mask->bounds.u_min) / du));
        const int j = static_cast<int>(std::floor((a.v - mask->bounds.v_min) / dv));
        bool interior = true;
        for (int dj = -2; dj <= 2 && interior; ++dj) {
          for (int di = -2; di <= 2 && interior; ++di) interior = mask->valid(i + di, j + dj);
        }
        if (!interior) continue;
        ++total;
        for (const auto& q : pts) {
          if (dist(a, q) <= tol) {
            ++hit;
            break;
          }
        }
      }
      lr.coverage = total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
    }
    lr.pass = lr.expected ? (!pts.empty() && lr.max_distance <= tol) : pts.empty();
    report.pass = report.pass && lr.pass;
    report.labels.push_back(lr);
  }
  return report;
}

namespace {

struct LocalLine {
  Point2 point;
  Point2 dir;
  bool ok = false;
};

// Principal axis of the points within radius of centre.
LocalLine local_line(const std::vector<Point2>& pts, Point2 centre, double radius) {
  double su = 0.0, sv = 0.0;
  int n = 0;
  for (const Point2& p : pts) {
    if (dist(p, centre) > radius) continue;
    su += p.u;
    sv += p.v;
    ++n;
  }
  if (n < 3) return {};
  const Point2 m{su / n, sv / n};
  double cuu = 0.0, cuv = 0.0, cvv = 0.0;
  for (const Point2& p : pts) {
    if (dist(p, centre) > radius) continue;
    cuu += (p.u - m.u) * (p.u - m.u);
    cuv += (p.u - m.u) * (p.v - m.v);
    cvv += (p.v - m.v) * (p.v - m.v);
  }
  const double angle = 0.5 * std::atan2(2.0 * cuv, cuu - cvv);
  return {m, {std::cos(angle), std::sin(angle)}, true};
}

}  // namespace

DetectedSets detect_structures(const GridField& grid, const KinkOptions& options) {
  const ScalarGrid fwd = scalar_view(grid, FieldComponent::Forward);
  const ScalarGrid bwd = scalar_view(grid, FieldComponent::Backward);
  const auto fcells = kink_minima(fwd, options);
  const auto bcells = kink_minima(bwd, options);

  DetectedSets out;
  auto& stable = out[FeatureLabel::WStable];
  auto& unstable = out[FeatureLabel::WUnstable];
  auto& nhim = out[FeatureLabel::NHIM];
  for (const auto& c : fcells) stable.push_back(fwd.center(c.i, c.j));
  for (const auto& c : bcells) unstable.push_back(bwd.center(c.i, c.j));

  std::vector<std::uint8_t> fmark(fwd.values.size(), 0), bmark(bwd.values.size(), 0);
  for (const auto& c : fcells) fmark[fwd.index(c.i, c.j)] = 1;
  for (const auto& c : bcells) bmark[bwd.index(c.i, c.j)] = 1;

  // Shared cells: the manifolds coincide there.
  for (const auto& c : fcells) {
    if (bmark[fwd.index(c.i, c.j)]) nhim.push_back(fwd.center(c.i, c.j));
  }

  // Crossings: nearby cells of the two sets; the local lines through each
  // set meet at the NHIM point. Sets that stop short of each other (one of
  // them running into a masked edge) are joined when the lines meet close to
  // one of the two ends.
  const double cell = std::min(grid.du(), grid.dv());
  constexpr int reach = 16;
  std::vector<Point2> crossings;
  for (const auto& f : fcells) {
    if (bmark[fwd.index(f.i, f.j)]) continue;
    for (int dj = -reach; dj <= reach; ++dj) {
      for (int di = -reach; di <= reach; ++di) {
        const int i = f.i + di, j = f.j + dj;
        if (i < 0 || j < 0 || i >= grid.nu || j >= grid.nv) continue;
        const std::size_t k = bwd.index(i, j);
        if (!bmark[k] || fmark[k]) continue;
        const bool touching = std::max(std::abs(di), std::abs(dj)) <= 1;
        const Point2 a = fwd.center(f.i, f.j), b = bwd.center(i, j);
        const Point2 mid{0.5 * (a.u + b.u), 0.5 * (a.v + b.v)};
        const LocalLine ls = local_line(stable, touching ? mid : a, 6.0 * cell);
        const LocalLine lu = local_line(unstable, touching ? mid : b, 6.0 * cell);
        const double cross = ls.dir.u * lu.dir.v - ls.dir.v * lu.dir.u;
        std::optional<Point2> x;
        if (touching) x = mid;
        if (ls.ok && lu.ok && std::abs(cross) > (touching ? 0.2 : 0.5)) {
          const double t = ((lu.point.u - ls.point.u) * lu.dir.v -
                            (lu.point.v - ls.point.v) * lu.dir.u) / cross;
          const Point2 y{ls.point.u + t * ls.dir.u, ls.point.v + t * ls.dir.v};
          const double da = dist(y, a), db = dist(y, b);
          if (touching ? dist(y, mid) <= 3.0 * cell
                       : std::min(da, db) <= 3.0 * cell && std::max(da, db) <= reach * cell) {
            x = y;
          }
        }
        if (x) crossings.push_back(*x);
      }
    }
  }
  // One point per crossing.
  std::vector<std::pair<Point2, int>> clusters;
  for (const Point2& x : crossings) {
    bool merged = false;
    for (auto& [c, n] : clusters) {
      if (dist(c, x) <= 2.0 * cell) {
        c = {(c.u * n + x.u) / (n + 1), (c.v * n + x.v) / (n + 1)};
        ++n;
        merged = true;
        break;
      }
    }
    if (!merged) clusters.push_back({x, 1});
  }
  for (const auto& [c, n] : clusters) nhim.push_back(c);
  return out;
}

DSMembership ds_membership(const SystemModel& system, const PhasePoint& x, double h) {
  const double residual = std::abs(energy(system, x) - h);
  if (!(residual <= 1e-9)) {
    throw EnergyMismatchError("point is off the energy shell (|H - h| = " +
                                  std::to_string(residual) + ")",
                              residual);
  }
  const PhasePoint y = to_decoupled(system, x);
  constexpr double eps = 1e-12;
  if (std::abs(y[0]) > eps) return DSMembership::OffDS;
  const double p1 = y[system.dof()];
  if (p1 > eps) return DSMembership::ForwardDS;
  if (p1 < -eps) return DSMembership::BackwardDS;
  return DSMembership::NHIMSeam;
}

}  // namespace ldnhim
