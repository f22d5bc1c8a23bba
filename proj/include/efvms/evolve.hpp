#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "efvms/assembly.hpp"

namespace efvms {

struct EvolveConfig {
  double nu = 1e-3;
  double dt = 4e-4;
  double newton_tol = 1e-9;
  int newton_max_iter = 25;
  bool smagorinsky_enabled = false;
  double c_s = 0.1;
  /// Off gives the unsteady Stokes system.
  bool convection = true;
  LocalSmallScaleOperator small_scale = LocalSmallScaleOperator::nested_p1();

  void validate() const;
};

struct EvolveResult {
  Field w;
  Field p;
  int newton_iters = 0;
  std::vector<double> residuals;
};

/// Implicit Euler Newton stepper. Holds the constant part of the mixed
/// Jacobian and the symbolic factorization, so repeated steps on one space
/// only pay for numeric refactorization.
class Evolver {
 public:
  Evolver(OperatorsPtr ops, EvolveConfig cfg);
  ~Evolver();
  Evolver(Evolver&&) noexcept;
  Evolver& operator=(Evolver&&) noexcept;

  const EvolveConfig& config() const { return cfg_; }
  const OperatorsPtr& operators() const { return ops_; }

  /// Solves for (w, p) at t_next, starting from u_prev (and p_guess).
  EvolveResult step(const Field& u_prev, const Field& p_guess, const BoundaryData& bc, double t_next);

  /// Mixed residual and Jacobian at `state` = (w, p) for previous velocity u_prev.
  /// No Dirichlet rows are removed.
  std::pair<Vector, SparseMatrix> residual_and_jacobian(const Vector& state, const Vector& u_prev) const;
  Vector residual(const Vector& state, const Vector& u_prev) const;

 private:
  void assemble(const Vector& state, const Vector& u_prev, Vector* residual, SparseMatrix* jacobian) const;

  OperatorsPtr ops_;
  EvolveConfig cfg_;
  SparseMatrix constant_;           // mixed pattern: M/Δt + νA, −Bᵀ, −B
  std::vector<int> velocity_to_mixed_;  // nnz position map, velocity pattern -> mixed
  std::vector<std::array<int, 144>> element_positions_;
  std::vector<char> constrained_;   // Dirichlet velocity dofs and the pressure pin
  struct Solver;
  std::unique_ptr<Solver> solver_;
};

/// One-shot step building operators on the fly.
EvolveResult evolve_step(const Field& u_prev, const Field& p_guess, const BoundaryData& bc, double t_next,
                         const EvolveConfig& cfg);

/// Mixed residual and Jacobian of the step system at `state` (velocity then pressure).
std::pair<Vector, SparseMatrix> newton_residual_and_jacobian(const Vector& state, const Field& u_prev,
                                                             const EvolveConfig& cfg);

/// Steady Stokes: ν a(u, v) − b(v, p) = 0, b(u, q) = 0, u = u_D(t) on Γ_D.
std::pair<Field, Field> solve_stokes(const OperatorsPtr& ops, const BoundaryData& bc, double t, double nu);

}  // namespace efvms
