#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ldnhim/ld_engine.hpp"
#include "ldnhim/phase_point.hpp"
#include "ldnhim/system_model.hpp"

namespace ldnhim {

// Sign required of the solved coordinate.
enum class Branch { Positive, NonNegative, Any };

struct DirectionCondition {
  int component = 0;  // index into the vector field
  bool strict = true;  // > 0 when strict, >= 0 otherwise
};

struct SectionSpec {
  std::string name;  // "<model>/<axes>", e.g. "decoupled2/q1p1"
  ModelKind kind = ModelKind::Decoupled2;
  int u = 0;
  int v = 1;
  std::vector<std::pair<int, double>> fixed;
  int solve = 0;
  Branch branch = Branch::Positive;
  std::optional<DirectionCondition> direction;
};

std::vector<SectionSpec> section_catalog(ModelKind kind);
std::vector<SectionSpec> full_catalog();
// Accepts "<model>/<axes>"; throws UnknownSectionError.
SectionSpec find_section(const std::string& name);
// Coordinate label for display, e.g. "q1" or "px".
std::string coordinate_name(ModelKind kind, int index);

struct LiftOptions {
  double tangency_tol = 1e-14;
  // Treat strict inequalities as non-strict and allow slack of this size;
  // used to lift boundary points of the closure of the section.
  bool closure = false;
  double slack = 1e-9;
};

// Every point of the energy shell above (u, v), ignoring branch and direction
// conditions, ordered by the solved coordinate.
std::vector<PhasePoint> shell_points(const SectionSpec& section, const SystemModel& system,
                                     double u, double v, double h, double tangency_tol = 1e-14);

std::optional<PhasePoint> lift(const SectionSpec& section, const SystemModel& system, double u,
                               double v, double h, const LiftOptions& options = {});

struct Bounds {
  double u_min = -1.0;
  double u_max = 1.0;
  double v_min = -1.0;
  double v_max = 1.0;
};

enum class CellStatus : std::uint8_t { Valid = 0, NoLift = 1, Overflow = 2 };

struct CellValue {
  double total = 0.0;
  double forward = 0.0;
  double backward = 0.0;
};

// LD where the energy surface carries on past the edge of the valid region.
// Cell (i, j) is valid and (i + di, j + dj) is not. Across a sign or direction
// boundary the probe sits on the same root above the outer cell; across a
// fold (no real root outside) it is the other root above (i, j) itself.
struct EdgeProbe {
  int i = 0;
  int j = 0;
  int di = 0;
  int dj = 0;
  CellValue value;
  bool ok = false;
  bool fold = false;
};

struct GridField {
  SectionSpec section;
  double h = 0.0;
  Bounds bounds;
  int nu = 0;
  int nv = 0;
  LDParams params;
  std::vector<CellValue> values;    // index j * nu + i (v-outer)
  std::vector<CellStatus> status;   // same indexing
  std::vector<EdgeProbe> edges;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nu + i; }
  bool valid(int i, int j) const { return status[index(i, j)] == CellStatus::Valid; }
  double du() const { return (bounds.u_max - bounds.u_min) / nu; }
  double dv() const { return (bounds.v_max - bounds.v_min) / nv; }
  double u_at(int i) const { return bounds.u_min + (i + 0.5) * du(); }
  double v_at(int j) const { return bounds.v_min + (j + 0.5) * dv(); }
};

// workers = 0 picks the hardware concurrency.
GridField grid_ld(const SystemModel& system, const SectionSpec& section, double h,
                  const Bounds& bounds, int nu, int nv, const LDParams& params,
                  unsigned workers = 0);

// Fills grid.edges for every valid cell with a valid inner neighbour and a
// no-lift outer neighbour along an axis. Called by grid_ld.
void probe_edges(GridField& grid, const SystemModel& system);

}  // namespace ldnhim
