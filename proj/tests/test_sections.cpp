#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "ldnhim/errors.hpp"
#include "ldnhim/sections.hpp"
#include "test_util.hpp"

using namespace ldnhim;

namespace {

ModelParams unit(int dof) {
  ModelParams mp;
  if (dof == 3) mp.omega3 = 1.0;
  return mp;
}

SystemModel system_for(const SectionSpec& s, const ModelParams& mp) {
  return reference_system(s.kind, mp);
}

std::vector<std::string> names(ModelKind k) {
  std::vector<std::string> out;
  for (const auto& s : section_catalog(k)) out.push_back(s.name);
  return out;
}

LDParams short_window() {
  LDParams lp;
  lp.tau = 0.1;
  lp.dt = 0.01;
  return lp;
}

// Energy from the printed expressions, independent of the library.
double printed_energy(const SystemModel& s, const PhasePoint& x) {
  const ModelParams& mp = s.params();
  if (s.kind() == ModelKind::Coupled2) return testutil::printed_energy_c2(mp.lambda, mp.omega2, x);
  if (s.kind() == ModelKind::Coupled3) {
    return testutil::printed_energy_c3(mp.lambda, mp.omega2, *mp.omega3, x);
  }
  const int n = s.dof();
  double e = 0.5 * mp.lambda * (x[static_cast<std::size_t>(n)] * x[static_cast<std::size_t>(n)] - x[0] * x[0]);
  for (int k = 1; k < n; ++k) {
    const double w = k == 1 ? mp.omega2 : *mp.omega3;
    const double q = x[static_cast<std::size_t>(k)], p = x[static_cast<std::size_t>(n + k)];
    e += 0.5 * w * (q * q + p * p);
  }
  return e;
}

PhasePoint printed_field(const SystemModel& s, const PhasePoint& x) {
  const ModelParams& mp = s.params();
  if (s.kind() == ModelKind::Coupled2) return testutil::printed_field_c2(mp.lambda, mp.omega2, x);
  if (s.kind() == ModelKind::Coupled3) {
    return testutil::printed_field_c3(mp.lambda, mp.omega2, *mp.omega3, x);
  }
  const int n = s.dof();
  PhasePoint v(x.size());
  v[0] = mp.lambda * x[static_cast<std::size_t>(n)];
  v[static_cast<std::size_t>(n)] = mp.lambda * x[0];
  for (int k = 1; k < n; ++k) {
    const double w = k == 1 ? mp.omega2 : *mp.omega3;
    v[static_cast<std::size_t>(k)] = w * x[static_cast<std::size_t>(n + k)];
    v[static_cast<std::size_t>(n + k)] = -w * x[static_cast<std::size_t>(k)];
  }
  return v;
}

}  // namespace

TEST_CASE("catalog sizes and names") {
  CHECK(names(ModelKind::Decoupled2) ==
        std::vector<std::string>{"decoupled2/q1p1", "decoupled2/q2p2", "decoupled2/q1q2",
                                 "decoupled2/p1p2", "decoupled2/q1p2", "decoupled2/q2p1"});
  CHECK(names(ModelKind::Coupled2) ==
        std::vector<std::string>{"coupled2/xpx", "coupled2/xy", "coupled2/ypy", "coupled2/pxpy",
                                 "coupled2/xpy", "coupled2/ypx"});
  CHECK(names(ModelKind::Decoupled3).size() == 9);
  CHECK(names(ModelKind::Coupled3).size() == 9);
  CHECK(full_catalog().size() == 30);
  for (const char* n : {"q1p1", "q2p2", "q3p3", "q1q2", "q2q3", "q3q1", "p2p3", "q1p3", "q3p2"}) {
    CHECK(find_section(std::string("decoupled3/") + n).kind == ModelKind::Decoupled3);
  }
  for (const char* n : {"xpx", "ypy", "zpz", "xpz", "ypz", "xz", "yz", "zpy", "pypz"}) {
    CHECK(find_section(std::string("coupled3/") + n).kind == ModelKind::Coupled3);
  }
  CHECK_THROWS_AS(find_section("decoupled2/q3p3"), UnknownSectionError);
  CHECK_THROWS_AS(find_section("bogus"), UnknownSectionError);
}

TEST_CASE("preset encodings") {
  const SectionSpec a = find_section("decoupled2/q1p1");
  CHECK(a.u == 0);
  CHECK(a.v == 2);
  REQUIRE(a.fixed.size() == 1);
  CHECK(a.fixed[0] == std::pair<int, double>{1, 0.0});
  CHECK(a.solve == 3);
  CHECK(a.branch == Branch::Positive);
  REQUIRE(a.direction);
  CHECK(a.direction->component == 1);
  CHECK(a.direction->strict);

  const SectionSpec b = find_section("coupled3/pypz");
  std::set<int> fixed;
  for (const auto& [k, val] : b.fixed) {
    fixed.insert(k);
    CHECK(val == 0.0);
  }
  CHECK(fixed == std::set<int>{0, 1, 2});
  CHECK(b.solve == 3);

  const SectionSpec c = find_section("decoupled3/q2q3");
  REQUIRE(c.direction);
  CHECK(c.direction->component == 0);
  CHECK_FALSE(c.direction->strict);
  CHECK(c.branch == Branch::NonNegative);
}

TEST_CASE("sweep, fixed and solved coordinates partition the phase space") {
  for (const SectionSpec& s : full_catalog()) {
    const int dim = 2 * degrees_of_freedom(s.kind);
    std::vector<int> seen{s.u, s.v, s.solve};
    for (const auto& f : s.fixed) seen.push_back(f.first);
    std::sort(seen.begin(), seen.end());
    std::vector<int> want(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) want[static_cast<std::size_t>(i)] = i;
    CHECK_MESSAGE(seen == want, s.name);
  }
}

TEST_CASE("lift examples") {
  const SectionSpec q1p1 = find_section("decoupled2/q1p1");
  const SystemModel d2 = build_system(ModelKind::Decoupled2, {});
  const auto x = lift(q1p1, d2, 0.0, 0.0, 0.2);
  REQUIRE(x);
  CHECK((*x)[3] == doctest::Approx(0.6324555320336759).epsilon(1e-15));
  CHECK_FALSE(lift(q1p1, d2, 0.0, 0.7, 0.2));

  // coupled2 xpx at (sqrt 0.2, 0): y = 0 and p_y from the printed quadratic.
  const SectionSpec xpx = find_section("coupled2/xpx");
  const SystemModel c2 = reference_system(ModelKind::Coupled2, {});
  const double l = 1.0, w = 1.0, h = 0.2;
  for (double u : {std::sqrt(0.2), 0.1, -0.3}) {
    for (double v : {0.0, 0.25, -0.4}) {
      const double a = w + l / 2;
      const double b = w * v + l * (v - u);
      const double c = l / 2 * u * u + w / 2 * v * v - l * u * v - h;
      const double disc = b * b - 4 * a * c;
      const auto y = lift(xpx, c2, u, v, h);
      if (disc < 0) {
        CHECK_FALSE(y);
        continue;
      }
      std::vector<double> roots{(-b - std::sqrt(disc)) / (2 * a), (-b + std::sqrt(disc)) / (2 * a)};
      int accepted = 0;
      double chosen = 0.0;
      for (double py : roots) {
        const PhasePoint pt{u, 0.0, v, py};
        if (testutil::printed_field_c2(l, w, pt)[1] > 0) {
          ++accepted;
          chosen = py;
        }
      }
      if (accepted == 0) {
        CHECK_FALSE(y);
        continue;
      }
      REQUIRE(y);
      CHECK(accepted == 1);
      CHECK((*y)[1] == 0.0);
      CHECK(std::abs((*y)[3] - chosen) <= 1e-12);
      CHECK(std::abs(testutil::printed_energy_c2(l, w, *y) - h) <= 1e-12);
    }
  }
}

TEST_CASE("solved coordinates match the printed formulas") {
  const double l = 1.3, w2 = 0.8, w3 = 1.7, h = 0.2;
  const ModelParams p2{l, w2, std::nullopt};
  const ModelParams p3{l, w2, w3};
  struct Case {
    const char* name;
    std::function<double(double, double)> formula;  // NaN where no real root
  };
  auto root = [](double r) { return r >= 0 ? std::sqrt(r) : std::nan(""); };
  const std::vector<Case> cases{
      {"decoupled2/q1p1",
       [&](double q1, double p1) { return root(2 / w2 * (h - l / 2 * (p1 * p1 - q1 * q1))); }},
      {"decoupled2/q2p2",
       [&](double q2, double p2) { return root(2 / l * (h - w2 / 2 * (p2 * p2 + q2 * q2))); }},
      {"decoupled3/q1p1",
       [&](double q1, double p1) { return root(2 / w3 * (h - l / 2 * (p1 * p1 - q1 * q1))); }},
      {"decoupled3/q2p2",
       [&](double q2, double p2) { return root(2 / l * (h - w2 / 2 * (p2 * p2 + q2 * q2))); }},
      {"decoupled3/q3p3",
       [&](double q3, double p3) { return root(2 / l * (w3 / 2 * (p3 * p3 + q3 * q3) - h)); }},
      {"decoupled3/q1q2",
       [&](double q1, double q2) { return root(2 / w3 * (h - (w2 / 2 * q2 * q2 - l / 2 * q1 * q1))); }},
      {"decoupled3/q2q3",
       [&](double q2, double q3) { return root(2 / l * (h - (w2 / 2 * q2 * q2 + w3 / 2 * q3 * q3))); }},
      {"decoupled3/q3q1",
       [&](double q3, double q1) { return root(2 / l * (h - (w3 / 2 * q3 * q3 - l / 2 * q1 * q1))); }},
      {"decoupled3/p2p3",
       [&](double p2, double p3) { return root(2 / l * ((w2 / 2 * p2 * p2 + w3 / 2 * p3 * p3) - h)); }},
      {"decoupled3/q1p3",
       [&](double q1, double p3) { return root(2 / w2 * (h - (w3 / 2 * p3 * p3 - l / 2 * q1 * q1))); }},
      {"decoupled3/q3p2",
       [&](double q3, double p2) { return root(2 / l * (h - (w3 / 2 * q3 * q3 + w2 / 2 * p2 * p2))); }},
  };
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  for (const Case& c : cases) {
    const SectionSpec s = find_section(c.name);
    const SystemModel sys = system_for(s, degrees_of_freedom(s.kind) == 2 ? p2 : p3);
    int checked = 0;
    double worst = 0.0;
    while (checked < 100) {
      const double u = box(rng), v = box(rng);
      const double want = c.formula(u, v);
      const auto got = lift(s, sys, u, v, h);
      if (std::isnan(want) || want == 0.0) {
        if (std::isnan(want)) CHECK_FALSE_MESSAGE(got, c.name);
        continue;
      }
      REQUIRE_MESSAGE(got, c.name);
      worst = std::max(worst, std::abs((*got)[static_cast<std::size_t>(s.solve)] - want));
      ++checked;
    }
    CHECK_MESSAGE(worst <= 1e-12, c.name);
  }
}

TEST_CASE("valid lifts lie on the shell and satisfy the direction condition") {
  for (const SectionSpec& s : full_catalog()) {
    const SystemModel sys = system_for(s, unit(degrees_of_freedom(s.kind)));
    int valid = 0;
    for (int i = 0; i < 41; ++i) {
      for (int j = 0; j < 41; ++j) {
        const double u = -1 + 2.0 * (i + 0.5) / 41, v = -1 + 2.0 * (j + 0.5) / 41;
        const auto x = lift(s, sys, u, v, 0.2);
        if (!x) continue;
        ++valid;
        CHECK((*x)[static_cast<std::size_t>(s.u)] == u);
        CHECK((*x)[static_cast<std::size_t>(s.v)] == v);
        for (const auto& [k, val] : s.fixed) CHECK((*x)[static_cast<std::size_t>(k)] == val);
        CHECK(std::abs(printed_energy(sys, *x) - 0.2) <= 1e-10);
        const double sv = (*x)[static_cast<std::size_t>(s.solve)];
        if (s.branch == Branch::Positive) CHECK(sv > 0.0);
        if (s.branch == Branch::NonNegative) CHECK(sv >= 0.0);
        if (s.direction) {
          const double d = printed_field(sys, *x)[static_cast<std::size_t>(s.direction->component)];
          if (s.direction->strict) {
            CHECK_MESSAGE(d > 0.0, s.name);
          } else {
            CHECK_MESSAGE(d >= 0.0, s.name);
          }
        }
      }
    }
    CHECK_MESSAGE(valid > 0, s.name);
  }
}

TEST_CASE("masked area of decoupled2/q1p1") {
  const SectionSpec s = find_section("decoupled2/q1p1");
  const SystemModel d2 = build_system(ModelKind::Decoupled2, {});
  const GridField g = grid_ld(d2, s, 0.2, {}, 400, 400, short_window());
  std::size_t masked = 0;
  for (CellStatus st : g.status) masked += st != CellStatus::Valid;
  const double frac = static_cast<double>(masked) / static_cast<double>(g.status.size());
  // Area of {p1^2 - q1^2 > 0.4} inside the square, over the square's area.
  const double area = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double q) { return 2.0 * std::max(0.0, 1.0 - std::sqrt(0.4 + q * q)); }, -1.0, 1.0, 15,
      1e-12);
  CHECK(std::abs(frac - area / 4.0) <= 0.01 * area / 4.0);
}

TEST_CASE("decoupled2/q1p1 field is symmetric under q1, p1 -> -q1, -p1") {
  const SectionSpec s = find_section("decoupled2/q1p1");
  const SystemModel d2 = build_system(ModelKind::Decoupled2, {});
  const GridField g = grid_ld(d2, s, 0.2, {}, 80, 80, LDParams{});
  double worst = 0.0;
  for (int j = 0; j < g.nv; ++j) {
    for (int i = 0; i < g.nu; ++i) {
      const bool a = g.valid(i, j), b = g.valid(g.nu - 1 - i, g.nv - 1 - j);
      CHECK(a == b);
      if (!a || !b) continue;
      const double x = g.values[g.index(i, j)].total;
      const double y = g.values[g.index(g.nu - 1 - i, g.nv - 1 - j)].total;
      worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(x)));
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("grids are identical for any worker count") {
  for (const char* name : {"decoupled2/q1p1", "coupled3/ypz"}) {
    const SectionSpec s = find_section(name);
    const SystemModel sys = system_for(s, unit(degrees_of_freedom(s.kind)));
    const GridField a = grid_ld(sys, s, 0.2, {}, 48, 40, LDParams{}, 1);
    const GridField b = grid_ld(sys, s, 0.2, {}, 48, 40, LDParams{}, 3);
    REQUIRE(a.values.size() == b.values.size());
    CHECK(a.status == b.status);
    bool same = true;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
      same = same && std::memcmp(&a.values[k], &b.values[k], sizeof(CellValue)) == 0;
    }
    CHECK(same);
    CHECK(a.edges.size() == b.edges.size());
  }
}

TEST_CASE("grid checks its arguments") {
  const SectionSpec s = find_section("decoupled2/q1p1");
  const SystemModel d2 = build_system(ModelKind::Decoupled2, {});
  CHECK_THROWS(grid_ld(d2, s, 0.2, {}, 1, 10, short_window()));
  CHECK_THROWS(grid_ld(d2, s, 0.2, {1, 1, -1, 1}, 10, 10, short_window()));
  const SystemModel c2 = reference_system(ModelKind::Coupled2, {});
  CHECK_THROWS(grid_ld(c2, s, 0.2, {}, 10, 10, short_window()));
}

TEST_CASE("overflow cells are marked, not fatal") {
  const SectionSpec s = find_section("decoupled2/q1p1");
  const SystemModel d2 = build_system(ModelKind::Decoupled2, {});
  LDParams lp;
  lp.p = 1.0;
  lp.tau = 400.0;
  lp.dt = 0.5;
  const GridField g = grid_ld(d2, s, 0.2, {}, 9, 9, lp);
  std::size_t over = 0;
  for (CellStatus st : g.status) over += st == CellStatus::Overflow;
  CHECK(over > 0);
}
