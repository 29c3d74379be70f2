#include "ldnhim/sections.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "ldnhim/errors.hpp"

namespace ldnhim {

namespace {

// Coordinate indices. Decoupled layout (q..., p...), coupled (x, y[, z], px, py[, pz]).
namespace d2 { constexpr int q1 = 0, q2 = 1, p1 = 2, p2 = 3; }
namespace c2 { constexpr int x = 0, y = 1, px = 2, py = 3; }
namespace d3 { constexpr int q1 = 0, q2 = 1, q3 = 2, p1 = 3, p2 = 4, p3 = 5; }
namespace c3 { constexpr int x = 0, y = 1, z = 2, px = 3, py = 4, pz = 5; }

SectionSpec make(ModelKind kind, const std::string& axes, int u, int v,
                 std::vector<int> zeros, int solve, Branch branch,
                 std::optional<DirectionCondition> dir) {
  SectionSpec s;
  s.name = to_string(kind) + "/" + axes;
  s.kind = kind;
  s.u = u;
  s.v = v;
  for (int z : zeros) s.fixed.emplace_back(z, 0.0);
  s.solve = solve;
  s.branch = branch;
  s.direction = dir;
  return s;
}

DirectionCondition gt(int c) { return {c, true}; }
DirectionCondition ge(int c) { return {c, false}; }

constexpr auto Pos = Branch::Positive;
constexpr auto NonNeg = Branch::NonNegative;
constexpr auto AnyRoot = Branch::Any;
constexpr auto D2 = ModelKind::Decoupled2;
constexpr auto C2 = ModelKind::Coupled2;
constexpr auto D3 = ModelKind::Decoupled3;
constexpr auto C3 = ModelKind::Coupled3;

}  // namespace

std::vector<SectionSpec> section_catalog(ModelKind kind) {
  using std::nullopt;
  switch (kind) {
    case ModelKind::Decoupled2: {
      using namespace d2;
      return {
          make(D2, "q1p1", q1, p1, {q2}, p2, Pos, gt(q2)),
          make(D2, "q2p2", q2, p2, {q1}, p1, NonNeg, ge(q1)),
          make(D2, "q1q2", q1, q2, {p1}, p2, Pos, nullopt),
          make(D2, "p1p2", p1, p2, {q2}, q1, NonNeg, nullopt),
          make(D2, "q1p2", q1, p2, {q2}, p1, NonNeg, nullopt),
          make(D2, "q2p1", q2, p1, {q1}, p2, NonNeg, nullopt),
      };
    }
    case ModelKind::Coupled2: {
      using namespace c2;
      return {
          make(C2, "xpx", x, px, {y}, py, AnyRoot, gt(y)),
          make(C2, "xy", x, y, {px}, py, Pos, ge(px)),
          make(C2, "ypy", y, py, {x}, px, Pos, gt(x)),
          make(C2, "pxpy", px, py, {x}, y, Pos, gt(x)),
          make(C2, "xpy", x, py, {y}, px, Pos, gt(y)),
          make(C2, "ypx", y, px, {x}, py, Pos, gt(x)),
      };
    }
    case ModelKind::Decoupled3: {
      using namespace d3;
      return {
          make(D3, "q1p1", q1, p1, {q2, p2, q3}, p3, Pos, gt(q3)),
          make(D3, "q2p2", q2, p2, {q1, q3, p3}, p1, Pos, gt(q1)),
          make(D3, "q3p3", q3, p3, {p1, q2, p2}, q1, Pos, gt(p1)),
          make(D3, "q1q2", q1, q2, {p1, p2, q3}, p3, Pos, gt(q3)),
          make(D3, "q2q3", q2, q3, {q1, p2, p3}, p1, NonNeg, ge(q1)),
          make(D3, "q3q1", q3, q1, {q2, p2, p3}, p1, Pos, gt(q1)),
          make(D3, "p2p3", p2, p3, {p1, q2, q3}, q1, Pos, gt(p1)),
          make(D3, "q1p3", q1, p3, {p1, q2, q3}, p2, Pos, gt(q2)),
          make(D3, "q3p2", q3, p2, {q1, q2, p3}, p1, Pos, gt(q1)),
      };
    }
    case ModelKind::Coupled3: {
      using namespace c3;
      return {
          make(C3, "xpx", x, px, {y, z, py}, pz, Pos, gt(z)),
          make(C3, "ypy", y, py, {x, z, pz}, px, Pos, gt(x)),
          make(C3, "zpz", z, pz, {x, y, py}, px, Pos, gt(x)),
          make(C3, "xpz", x, pz, {px, y, z}, py, AnyRoot, gt(y)),
          make(C3, "ypz", y, pz, {x, px, z}, py, Pos, gt(x)),
          make(C3, "xz", x, z, {y, px, pz}, py, AnyRoot, gt(pz)),
          make(C3, "yz", y, z, {x, px, py}, pz, Pos, gt(px)),
          make(C3, "zpy", z, py, {x, px, y}, pz, AnyRoot, gt(y)),
          make(C3, "pypz", py, pz, {x, y, z}, px, AnyRoot, gt(x)),
      };
    }
  }
  throw ParameterDomainError("unknown model kind");
}

std::vector<SectionSpec> full_catalog() {
  std::vector<SectionSpec> all;
  for (ModelKind k : {D2, C2, D3, C3}) {
    auto part = section_catalog(k);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

SectionSpec find_section(const std::string& name) {
  for (const auto& s : full_catalog()) {
    if (s.name == name) return s;
  }
  throw UnknownSectionError("unknown section: " + name);
}

std::string coordinate_name(ModelKind kind, int index) {
  const int n = degrees_of_freedom(kind);
  const bool momentum = index >= n;
  const int k = momentum ? index - n : index;
  if (is_coupled(kind)) {
    static const char* axes[] = {"x", "y", "z"};
    return (momentum ? std::string("p") : std::string()) + axes[k];
  }
  return (momentum ? "p" : "q") + std::to_string(k + 1);
}

std::vector<PhasePoint> shell_points(const SectionSpec& section, const SystemModel& system,
                                     double u, double v, double h, double tangency_tol) {
  PhasePoint x(system.dim());
  x[section.u] = u;
  x[section.v] = v;
  for (const auto& [k, val] : section.fixed) x[k] = val;

  const int s = section.solve;
  x[s] = -1.0;
  const double hm = energy(system, x);
  x[s] = 0.0;
  const double h0 = energy(system, x);
  x[s] = 1.0;
  const double hp = energy(system, x);
  const double a = 0.5 * (hp + hm) - h0;
  const double b = 0.5 * (hp - hm);
  const double c = h0 - h;

  std::vector<double> roots;
  if (a == 0.0) {
    if (b != 0.0) roots.push_back(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc <= 0.0 && disc >= -tangency_tol) {
      roots.push_back(-b / (2.0 * a));
    } else if (disc > 0.0) {
      const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      roots.push_back(q / a);
      roots.push_back(c / q);
    }
  }
  std::sort(roots.begin(), roots.end());
  std::vector<PhasePoint> out;
  for (double r : roots) {
    x[s] = r;
    out.push_back(x);
  }
  return out;
}

std::optional<PhasePoint> lift(const SectionSpec& section, const SystemModel& system, double u,
                               double v, double h, const LiftOptions& options) {
  const double tol = options.closure ? std::max(options.tangency_tol, options.slack)
                                     : options.tangency_tol;
  const double slack = options.closure ? options.slack : 0.0;
  auto sign_ok = [&](double r) {
    switch (section.branch) {
      case Branch::Positive: return options.closure ? r >= -slack : r > 0.0;
      case Branch::NonNegative: return r >= -slack;
      case Branch::Any: return true;
    }
    return false;
  };

  std::optional<PhasePoint> best;
  for (const PhasePoint& x : shell_points(section, system, u, v, h, tol)) {
    const int s = section.solve;
    if (!sign_ok(x[s])) continue;
    if (section.direction) {
      const double f = vector_field(system, x)[section.direction->component];
      const bool ok = (section.direction->strict && !options.closure) ? f > 0.0 : f >= -slack;
      if (!ok) continue;
    }
    if (!best || x[s] > (*best)[s]) best = x;
  }
  return best;
}

namespace {

struct Continuation {
  PhasePoint x;
  bool fold = false;
};

std::optional<Continuation> edge_continuation(const SectionSpec& section,
                                              const SystemModel& system, const GridField& grid,
                                              int i, int j, int di, int dj) {
  const int s = section.solve;
  const auto here = lift(section, system, grid.u_at(i), grid.v_at(j), grid.h);
  if (!here) return std::nullopt;
  // Across a sign or direction boundary the same root carries on.
  const auto beyond =
      shell_points(section, system, grid.u_at(i + di), grid.v_at(j + dj), grid.h);
  if (!beyond.empty()) {
    const auto it = std::min_element(beyond.begin(), beyond.end(), [&](const auto& a, const auto& b) {
      return std::abs(a[s] - (*here)[s]) < std::abs(b[s] - (*here)[s]);
    });
    return Continuation{*it, false};
  }
  // Across a fold the surface turns back; the other root above the same cell
  // is its mirror image.
  const auto roots = shell_points(section, system, grid.u_at(i), grid.v_at(j), grid.h);
  if (roots.size() < 2) return std::nullopt;
  const bool first_is_here = std::abs(roots[0][s] - (*here)[s]) <= std::abs(roots[1][s] - (*here)[s]);
  return Continuation{first_is_here ? roots[1] : roots[0], true};
}

}  // namespace

GridField grid_ld(const SystemModel& system, const SectionSpec& section, double h,
                  const Bounds& bounds, int nu, int nv, const LDParams& params,
                  unsigned workers) {
  if (nu < 2 || nv < 2) throw ShapeError("grid needs at least 2x2 cells");
  if (!(bounds.u_max > bounds.u_min) || !(bounds.v_max > bounds.v_min)) {
    throw ShapeError("grid bounds are degenerate");
  }
  if (section.kind != system.kind()) {
    throw UnknownSectionError("section " + section.name + " does not belong to model " +
                              to_string(system.kind()));
  }
  validate(params);

  GridField g;
  g.section = section;
  g.h = h;
  g.bounds = bounds;
  g.nu = nu;
  g.nv = nv;
  g.params = params;
  g.values.assign(static_cast<std::size_t>(nu) * nv, CellValue{});
  g.status.assign(static_cast<std::size_t>(nu) * nv, CellStatus::NoLift);

  std::atomic<int> next_row{0};
  auto work = [&]() {
    for (int j = next_row++; j < nv; j = next_row++) {
      for (int i = 0; i < nu; ++i) {
        const auto x = lift(section, system, g.u_at(i), g.v_at(j), h);
        if (!x) continue;
        const std::size_t idx = g.index(i, j);
        try {
          const LDTotals t = ld_totals(system, *x, params);
          g.values[idx] = {t.forward + t.backward, t.forward, t.backward};
          g.status[idx] = CellStatus::Valid;
        } catch (const OverflowError&) {
          g.status[idx] = CellStatus::Overflow;
        }
      }
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(nv));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  probe_edges(g, system);
  return g;
}

void probe_edges(GridField& grid, const SystemModel& system) {
  grid.edges.clear();
  for (int j = 0; j < grid.nv; ++j) {
    for (int i = 0; i < grid.nu; ++i) {
      if (!grid.valid(i, j)) continue;
      for (const auto& [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const int a = i + di, b = j + dj;
        if (a < 0 || b < 0 || a >= grid.nu || b >= grid.nv) continue;
        if (grid.status[grid.index(a, b)] != CellStatus::NoLift) continue;
        if (i - di < 0 || j - dj < 0 || i - di >= grid.nu || j - dj >= grid.nv) continue;
        if (!grid.valid(i - di, j - dj)) continue;
        EdgeProbe probe{i, j, di, dj, {}, false, false};
        if (const auto c = edge_continuation(grid.section, system, grid, i, j, di, dj)) {
          probe.fold = c->fold;
          try {
            const LDTotals t = ld_totals(system, c->x, grid.params);
            probe.value = {t.forward + t.backward, t.forward, t.backward};
            probe.ok = true;
          } catch (const OverflowError&) {
          }
        }
        grid.edges.push_back(probe);
      }
    }
  }
}

}  // namespace ldnhim
