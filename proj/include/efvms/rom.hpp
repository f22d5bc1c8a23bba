#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "efvms/assembly.hpp"
#include "efvms/strategies.hpp"

namespace efvms {

struct PodResult {
  DenseMatrix modes;   ///< columns, orthonormal in the Gramian
  Vector eigenvalues;  ///< all snapshot-correlation eigenvalues, descending
  double energy_fraction = 0.0;
};

/// Eigenvalues below this fraction of the largest count as numerically zero.
inline constexpr double kRankTolerance = 1e-12;

/// Method of snapshots on the columns of `snapshots` with C = Yᵀ G Y.
PodResult pod(const DenseMatrix& snapshots, int r, const SparseMatrix& gramian);
/// Number of eigenvalues above the drop tolerance.
int achievable_rank(const Vector& eigenvalues);

/// Solves (S, τ)_𝕌 = b(τ, p) for all τ vanishing on Γ_D, with (·,·)_𝕌 = a + L².
Field supremizer(const Field& p, const Operators& ops);

enum class LiftKind { Stokes, FirstSnapshot };

/// Velocity modes (POD then supremizers), pressure modes and the lift that
/// carries the Dirichlet data.
struct ReducedBasis {
  DenseMatrix velocity;
  DenseMatrix pressure;
  Vector lift;
  int r_u = 0;
  int r_s = 0;
  int r_p = 0;
  Vector velocity_eigenvalues;
  Vector supremizer_eigenvalues;
  Vector pressure_eigenvalues;

  int r_us() const { return r_u + r_s; }
};

/// Velocity lift for a snapshot set with time-independent Dirichlet data.
Vector make_lift(LiftKind kind, const SnapshotSet& snapshots, const OperatorsPtr& ops, const BoundaryData& bc, double nu);

ReducedBasis build_basis(const SnapshotSet& snapshots, const Operators& ops, int r_u, int r_s, int r_p, Vector lift);

/// Galerkin projections. Velocity is u = lift + Φ a.
struct ReducedOperators {
  int r_us = 0;
  int r_p = 0;
  DenseMatrix mass;
  DenseMatrix stiffness;
  DenseMatrix graddiv;
  DenseMatrix divergence;  ///< r_p × r_us, Φ_pᵀ B Φ
  /// tensor[(i * r + j) * r + k] = ĉ(φ_i; φ_j, φ_k)
  std::vector<double> tensor;
  Vector mass_lift;        ///< Φᵀ M L
  Vector stiffness_lift;   ///< Φᵀ A L
  Vector graddiv_lift;     ///< Φᵀ G L
  Vector divergence_lift;  ///< Φ_pᵀ B L
  DenseMatrix conv_lift_convecting;  ///< [k][j] = ĉ(L; φ_j, φ_k)
  DenseMatrix conv_lift_convected;   ///< [k][i] = ĉ(φ_i; L, φ_k)
  Vector conv_lift_both;             ///< [k] = ĉ(L; L, φ_k)

  double c(int i, int j, int k) const { return tensor[(static_cast<std::size_t>(i) * r_us + j) * r_us + k]; }
};

ReducedOperators project_operators(const ReducedBasis& basis, const Operators& ops);

struct ReducedState {
  Vector a_u;
  Vector a_p;
  double t = 0.0;
};

enum class RomStrategy { Galerkin, EF, EFFC, EPFC };
std::string to_string(RomStrategy s);
RomStrategy rom_strategy_from_string(const std::string& name);

struct RomConfig {
  double nu = 1e-4;
  double dt = 4e-4;
  double delta = 1.59e-3;
  double delta1 = 1.59e-3;
  double delta2 = 1.59e-3;
  double gamma_d = 100.0;
  int r_bar_u = 77;
  int r_u = 140;  ///< POD velocity modes in the basis; the rest are supremizers
  double newton_tol = 1e-10;
  int newton_max_iter = 25;
};

/// Reduced implicit Euler with dense Newton, plus the reduced filters.
class RomStepper {
 public:
  RomStepper(std::shared_ptr<const ReducedOperators> ops, RomConfig cfg);

  const RomConfig& config() const { return cfg_; }

  /// Step (I): evolve. Returns (w, p) coefficients.
  ReducedState evolve(const ReducedState& s) const;
  /// (δ²Â + M̂ + γĜ) ā = M̂ a − δ² â_L − γ ĝ_L (lift-consistent large scales).
  Vector filter_large(const Vector& a, double delta) const;
  /// (δ²Â + M̂ + γĜ) ā = M̂ a (homogeneous data).
  Vector filter_homogeneous(const Vector& a, double delta) const;

  ReducedState step(RomStrategy strategy, const ReducedState& s) const;

  /// Residual and Jacobian of the reduced step system at (a_u, a_p).
  std::pair<Vector, DenseMatrix> residual_and_jacobian(const Vector& x, const Vector& a_prev) const;

 private:
  Vector solve_filter(double delta, const Vector& rhs) const;
  Eigen::PartialPivLU<DenseMatrix> factor_filter(double delta) const;

  std::shared_ptr<const ReducedOperators> ops_;
  RomConfig cfg_;
  std::map<double, Eigen::PartialPivLU<DenseMatrix>> filters_;
};

ReducedState grom_step(const ReducedState& s, const RomStepper& stepper);
ReducedState efrom_step(const ReducedState& s, const RomStepper& stepper);
ReducedState effc_rom_step(const ReducedState& s, const RomStepper& stepper);
ReducedState epfc_rom_step(const ReducedState& s, const RomStepper& stepper);

/// Velocity and pressure fields of a reduced state.
std::pair<Field, Field> expand(const ReducedState& s, const ReducedBasis& basis, const SpacePtr& space);
/// L² Galerkin projection of (u, p) onto the basis (velocity after lift removal).
ReducedState project_state(const Field& u, const Field& p, const ReducedBasis& basis, const Operators& ops);

/// n_steps reduced steps from `initial`; the result includes the initial state.
std::vector<ReducedState> rom_run(RomStrategy strategy, const RomStepper& stepper, const ReducedState& initial,
                                  int n_steps);

}  // namespace efvms
