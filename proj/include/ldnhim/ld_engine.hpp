#pragma once

#include <optional>
#include <vector>

#include "ldnhim/phase_point.hpp"
#include "ldnhim/system_model.hpp"

namespace ldnhim {

enum class LDMethod { AugmentedIntegration, AnalyticQuadrature };
enum class Direction { Forward, Backward };

struct LDParams {
  double p = 0.5;
  double tau = 10.0;
  double t0 = 0.0;
  LDMethod method = LDMethod::AugmentedIntegration;
  double dt = 1e-2;
};

void validate(const LDParams& params);

struct LDResult {
  double forward = 0.0;
  double backward = 0.0;
  double total = 0.0;
  std::vector<double> per_dof;  // one entry per phase-space coordinate
  // Saddle-pair and bath contributions, measured in decoupled coordinates.
  // For decoupled systems they add up to total; for coupled systems they add
  // up to the LD of the decoupled image of the trajectory.
  std::optional<double> hyperbolic;
  std::optional<double> elliptic;
};

LDResult ld_point(const SystemModel& system, const PhasePoint& x0, const LDParams& params);

struct AugmentedResult {
  PhasePoint endpoint;
  std::vector<double> accumulated;
};

// Classical RK4 on the state with |x_i'|^p accumulated from the stage slopes.
AugmentedResult integrate_augmented(const SystemModel& system, const PhasePoint& x0,
                                    Direction direction, const LDParams& params);

// Per-coordinate integrals over one half-window from the closed-form flow.
std::vector<double> quadrature_per_dof(const SystemModel& system, const PhasePoint& x0,
                                       Direction direction, const LDParams& params);

// Forward and backward totals only; the hot path used by grids.
struct LDTotals {
  double forward = 0.0;
  double backward = 0.0;
};
LDTotals ld_totals(const SystemModel& system, const PhasePoint& x0, const LDParams& params);

double hyperbolic_asymptote(double lambda, double p, double a, double b, double tau);
double elliptic_average_limit(double omega, double h_mode, double p);
double elliptic_arclength(double omega, double radius, double tau);

struct ComponentSplit {
  double hyperbolic = 0.0;
  double elliptic = 0.0;
};
ComponentSplit split_components(const SystemModel& system, const PhasePoint& x0,
                                const LDParams& params);

}  // namespace ldnhim
