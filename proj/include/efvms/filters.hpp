#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <utility>

#include "efvms/assembly.hpp"

namespace efvms {

/// Constrained system matrix with its factorization; `matrix` is kept
/// unconstrained to lift boundary values into the right-hand side.
struct CachedSystem {
  SparseMatrix matrix;
  SparseLU lu;
  std::vector<int> constrained;
};

/// Boundary treatment of a filter solve. Γ_N is always natural (zero Neumann).
enum class FilterBC {
  MatchDirichlet,  ///< keep the input's Dirichlet trace
  Homogeneous,     ///< zero on Γ_D
};

/// Velocity subspace defining the large scales Π_h.
class CoarseSpace {
 public:
  enum class Kind { NestedP1, Fine };

  CoarseSpace(OperatorsPtr ops, Kind kind);

  Kind kind() const { return kind_; }
  int dimension() const { return static_cast<int>(prolongation_.cols()); }
  /// Fine × coarse injection.
  const SparseMatrix& prolongation() const { return prolongation_; }
  /// Element-local I − (interpolation into the coarse space).
  LocalSmallScaleOperator small_scale_operator() const;
  /// Nodal interpolation into the coarse space, expressed on the fine space.
  Field interpolate(const Field& w) const;

  /// (ū, v) + γ_P (∇·ū, ∇·v) = (w, v) for all coarse v, with coarse Dirichlet
  /// dofs taken from w; the prolonged result keeps w's fine Dirichlet trace.
  Field l2_projection(const Field& w, double gamma_p) const;

 private:
  std::shared_ptr<const CachedSystem> factorization(double gamma_p) const;

  OperatorsPtr ops_;
  Kind kind_;
  SparseMatrix prolongation_;
  std::vector<int> coarse_dirichlet_;  // coarse dof indices
  std::vector<int> coarse_to_fine_;    // fine dof carrying each coarse dof's nodal value
  mutable std::shared_mutex mutex_;
  mutable std::map<double, std::shared_ptr<const CachedSystem>> cache_;
};

/// Differential and nonlinear filters over one space. Factorizations of the
/// linear filter are cached per (δ, γ_D); lookups may run concurrently.
class FilterBank {
 public:
  explicit FilterBank(OperatorsPtr ops);

  const OperatorsPtr& operators() const { return ops_; }

  /// Solves (δ² A + M + γ_D G) ū = M w with the chosen boundary treatment.
  Field differential(const Field& w, double delta, double gamma_d, FilterBC bc) const;
  /// Solves (A_{ν_T} + M) ū = M w_small with ν_T = eddy_viscosity(w_small, c_s).
  Field nonlinear(const Field& w_small, double c_s, FilterBC bc) const;
  /// 2 F(u) − F(F(u)).
  Field ad_deconvolve_order1(const Field& u, double delta, double gamma_d, FilterBC bc) const;

  std::size_t cached_factorizations() const;

 private:
  std::shared_ptr<const CachedSystem> factorization(double delta, double gamma_d) const;
  Field solve(const CachedSystem& system, const Field& w, FilterBC bc) const;

  OperatorsPtr ops_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::pair<double, double>, std::shared_ptr<const CachedSystem>> cache_;
};

Field differential_filter(const Field& w, double delta, double gamma_d, FilterBC bc);
Field nonlinear_filter(const Field& w_small, double c_s, FilterBC bc);
Field l2_projection_postprocess(const Field& w, const CoarseSpace& coarse, double gamma_p);
/// w − large, coefficient-wise.
Field small_scales(const Field& w, const Field& large);
Field ad_deconvolve_order1(const Field& u, double delta, double gamma_d, FilterBC bc);

}  // namespace efvms
