#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ldnhim/phase_point.hpp"

namespace ldnhim {

enum class ModelKind { Decoupled2, Coupled2, Decoupled3, Coupled3 };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
int degrees_of_freedom(ModelKind kind);
bool is_coupled(ModelKind kind);

struct ModelParams {
  double lambda = 1.0;
  double omega2 = 1.0;
  std::optional<double> omega3;
};

// Constants of the saddle pair: A = q1 + p1, B = q1 - p1 (decoupled coordinates).
struct HyperbolicConstants {
  double a = 0.0;
  double b = 0.0;
};

class SystemModel {
 public:
  static constexpr std::size_t kMaxDim = PhasePoint::kMaxDim;

  ModelKind kind() const noexcept { return kind_; }
  const ModelParams& params() const noexcept { return params_; }
  int dof() const noexcept { return dof_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(2 * dof_); }

  const std::optional<Eigen::MatrixXd>& transform() const noexcept { return transform_; }
  const std::optional<Eigen::MatrixXd>& inverse_transform() const noexcept { return inverse_; }

  // Constant Jacobian of the native vector field; the field is jacobian() * x.
  const Eigen::MatrixXd& jacobian() const noexcept { return jac_; }
  // Row-major copy of jacobian() for tight loops.
  const std::array<double, kMaxDim * kMaxDim>& jacobian_rows() const noexcept { return jac_rows_; }

  // Bath frequencies omega_2..omega_N.
  std::vector<double> bath_frequencies() const;

 private:
  friend SystemModel build_system(ModelKind, const ModelParams&,
                                  const std::optional<Eigen::MatrixXd>&);
  SystemModel() = default;

  ModelKind kind_ = ModelKind::Decoupled2;
  ModelParams params_;
  int dof_ = 2;
  std::optional<Eigen::MatrixXd> transform_;
  std::optional<Eigen::MatrixXd> inverse_;
  Eigen::MatrixXd jac_;
  std::array<double, kMaxDim * kMaxDim> jac_rows_{};
};

SystemModel build_system(ModelKind kind, const ModelParams& params,
                         const std::optional<Eigen::MatrixXd>& transform = std::nullopt);

// Convenience: decoupled kinds without transform, coupled kinds with the
// reference transformation.
SystemModel reference_system(ModelKind kind, const ModelParams& params);

// Decoupled <-> native coordinates (identity for decoupled kinds).
PhasePoint to_decoupled(const SystemModel& system, const PhasePoint& x);
PhasePoint from_decoupled(const SystemModel& system, const PhasePoint& y);

double energy(const SystemModel& system, const PhasePoint& x);
// Energy of the normal-form Hamiltonian with the system's parameters.
double decoupled_energy(const ModelParams& params, int dof, const PhasePoint& y);

PhasePoint vector_field(const SystemModel& system, const PhasePoint& x);
std::vector<std::complex<double>> jacobian_spectrum(const SystemModel& system);

HyperbolicConstants hyperbolic_constants(const SystemModel& system, const PhasePoint& x);
PhasePoint analytic_flow(const SystemModel& system, const PhasePoint& x0, double t);

enum class Reactivity { Reactive, Nonreactive };
Reactivity classify_reactive(const SystemModel& system, const PhasePoint& x0, double tau);

void require_dim(const SystemModel& system, const PhasePoint& x);

}  // namespace ldnhim
