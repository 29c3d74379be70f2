#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ldnhim/sections.hpp"
#include "ldnhim/system_model.hpp"

namespace ldnhim {

enum class FeatureLabel { NHIM, WStable, WUnstable, DS };
enum class PrimitiveKind { Point, LineSegment, Circle, EllipseArc, CurveSamples };

std::string to_string(FeatureLabel label);
std::string to_string(PrimitiveKind kind);

struct Point2 {
  double u = 0.0;
  double v = 0.0;
};

struct FeaturePrimitive {
  PrimitiveKind kind = PrimitiveKind::Point;
  FeatureLabel label = FeatureLabel::NHIM;
  // Point: one entry. LineSegment: two endpoints. Curve kinds: samples.
  std::vector<Point2> points;
  // Curve kinds: implicit curve a uu + b uv + c vv + d u + e v + f = 0.
  std::array<double, 6> conic{};
  // Circle / ellipse centre; radius for circles.
  Point2 center;
  double radius = 0.0;
  // Largest gap between neighbouring samples of a curve primitive.
  double spacing = 0.0;
};

struct FeatureSet {
  std::string section;
  double h = 0.0;
  Bounds bounds;
  std::vector<FeaturePrimitive> primitives;

  bool has(FeatureLabel label) const;
};

// Exact intersections of NHIM, stable/unstable manifolds and dividing
// surface with the section, clipped to the bounds. Only points whose lift
// reproduces the intersection point are kept (boundary points of the
// section count).
FeatureSet analytic_features(const SectionSpec& section, const SystemModel& system, double h,
                             const Bounds& bounds = {});

double distance(const FeaturePrimitive& primitive, Point2 q);
// Minimum distance to primitives with the label; +inf if none.
double distance(const FeatureSet& set, FeatureLabel label, Point2 q);
// Points spread along every primitive with the label, spacing <= step.
std::vector<Point2> sample_label(const FeatureSet& set, FeatureLabel label, double step);

// LD value where the energy surface continues past a valid cell (i, j) in
// direction (di, dj); see EdgeProbe.
struct EdgeSample {
  int i = 0;
  int j = 0;
  int di = 0;
  int dj = 0;
  double value = 0.0;
  bool fold = false;
};

// Row-major (v-outer) scalar grid with a validity mask.
struct ScalarGrid {
  int nu = 0;
  int nv = 0;
  Bounds bounds;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // 1 = valid
  std::vector<EdgeSample> edges;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nu + i; }
  bool valid(int i, int j) const {
    return i >= 0 && j >= 0 && i < nu && j < nv && mask[index(i, j)] != 0;
  }
  Point2 center(int i, int j) const;
};

enum class FieldComponent { Total, Forward, Backward };
ScalarGrid scalar_view(const GridField& grid, FieldComponent which = FieldComponent::Total);

struct GridCell {
  int i = 0;
  int j = 0;
};

// Cells strictly below both neighbours along a row or a column. A masked or
// missing neighbour disqualifies the cell.
std::vector<GridCell> minima_cells(const ScalarGrid& grid);
std::vector<Point2> detect_minima(const ScalarGrid& grid);
std::vector<Point2> detect_minima(const GridField& grid);

// Largest over the two axes of the median absolute first difference.
double difference_scale(const ScalarGrid& grid);

struct KinkOptions {
  double kappa = 10.0;
  // Neighbouring cells within this relative difference form one plateau.
  double tie = 1e-12;
  // Relative tolerance when comparing a cell with its mirror across a fold.
  double fold_tie = 1e-9;
};

// Slice minima at which the slope jumps by more than kappa times
// difference_scale. Runs of tied cells count as one minimum. At the edge of
// the valid region the edge samples stand in for the missing neighbour.
std::vector<GridCell> kink_minima(const ScalarGrid& grid, const KinkOptions& options = {});

std::vector<std::uint8_t> detect_singularities(const ScalarGrid& grid, double kappa = 10.0);
std::vector<std::uint8_t> detect_singularities(const GridField& grid, double kappa = 10.0);

struct LabelReport {
  FeatureLabel label = FeatureLabel::NHIM;
  std::size_t n_detected = 0;
  std::string n_expected;  // description of the analytic set
  bool expected = false;
  double max_distance = 0.0;
  double mean_distance = 0.0;
  // Fraction of interior analytic sample points with a detection within tol.
  double coverage = 1.0;
  bool pass = false;
};

struct MatchReport {
  double tolerance = 0.0;
  std::vector<LabelReport> labels;
  bool pass = false;
};

using DetectedSets = std::map<FeatureLabel, std::vector<Point2>>;

MatchReport match_features(const DetectedSets& detected, const FeatureSet& analytic, double tol,
                           const ScalarGrid* mask = nullptr);

// Detected structures of an LD grid: kinked forward-LD minima mark the stable
// manifold and backward-LD minima the unstable one. The NHIM is taken where
// the two sets share cells or cross.
DetectedSets detect_structures(const GridField& grid, const KinkOptions& options = {});

enum class DSMembership { ForwardDS, BackwardDS, NHIMSeam, OffDS };
std::string to_string(DSMembership m);
DSMembership ds_membership(const SystemModel& system, const PhasePoint& x, double h);

}  // namespace ldnhim
