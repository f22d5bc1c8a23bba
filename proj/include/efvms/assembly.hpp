#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <vector>

#include "efvms/numerics.hpp"
#include "efvms/quadrature.hpp"
#include "efvms/space.hpp"

namespace efvms {

/// Geometry and P2/P1 basis data of one element sampled at the nodes of a
/// quadrature rule.
struct ElementData {
  static constexpr int kMaxNodes = 12;
  double area = 0.0;
  std::array<std::array<double, 2>, 3> grad_lambda{};
  int n_q = 0;
  std::array<double, kMaxNodes> weight{};  ///< |K| * w_q
  std::array<Point, kMaxNodes> x{};
  std::array<std::array<double, 6>, kMaxNodes> phi{};
  std::array<std::array<std::array<double, 2>, 6>, kMaxNodes> dphi{};
  std::array<std::array<double, 3>, kMaxNodes> psi{};
};

ElementData element_data(const TaylorHoodSpace& sp, std::size_t k, const TriangleRule& rule);

/// P2 basis values and physical gradients at barycentric coordinates `l`.
void p2_basis(const std::array<double, 3>& l, const std::array<std::array<double, 2>, 3>& grad_lambda,
              std::array<double, 6>& phi, std::array<std::array<double, 2>, 6>& dphi);

/// Velocity value and gradient (grad[c][j] = ∂_j u_c) at barycentric point `l` of element k.
struct VelocityPointValue {
  std::array<double, 2> u{};
  std::array<std::array<double, 2>, 2> grad{};
};
VelocityPointValue evaluate_velocity(const TaylorHoodSpace& sp, const Vector& coeffs, std::size_t k,
                                     const std::array<double, 3>& l);
double evaluate_pressure(const TaylorHoodSpace& sp, const Vector& coeffs, std::size_t k, const std::array<double, 3>& l);

/// Sparsity patterns shared by all assembled operators of a space.
SparseMatrix velocity_pattern(const TaylorHoodSpace& sp);
SparseMatrix pressure_pattern(const TaylorHoodSpace& sp);
SparseMatrix divergence_pattern(const TaylorHoodSpace& sp);
/// Mixed (velocity, pressure) pattern with a full pressure diagonal.
SparseMatrix mixed_pattern(const TaylorHoodSpace& sp);

SparseMatrix assemble_mass(const TaylorHoodSpace& sp, FieldKind kind);
/// a(u, v) = ∫ ∇u : ∇v.
SparseMatrix assemble_stiffness(const TaylorHoodSpace& sp, FieldKind kind);
/// Element-wise weighted velocity stiffness Σ_K c_K ∫_K ∇u : ∇v.
SparseMatrix assemble_weighted_stiffness(const TaylorHoodSpace& sp, const std::vector<double>& coefficient);
/// Rows are pressure dofs: B[q, v] = b(v, q) = ∫ q ∇·v.
SparseMatrix assemble_divergence(const TaylorHoodSpace& sp);
/// γ ∫ (∇·u)(∇·v).
SparseMatrix assemble_graddiv(const TaylorHoodSpace& sp, double gamma);

/// Vector r with r·z = ĉ(w; u, z) for every velocity z, where
/// ĉ(w; u, z) = ½ [c(w; u, z) − c(w; z, u)] and c(w; u, z) = ∫ (w·∇)u·z.
Vector apply_convection(const Field& w, const Field& u);
/// Matrix C(w) with C(w) u = apply_convection(w, u).
SparseMatrix assemble_convection(const Field& w);
/// Jacobian of u ↦ ĉ(u; u, ·) at u = w (both the convected and convecting slots).
SparseMatrix assemble_convection_jacobian(const Field& w);

/// Local ĉ(w; w, ·) (residual) and its full Jacobian in w on one element.
/// `w` holds the 12 element velocity coefficients (6 x then 6 y). Either
/// output may be null.
void convection_element(const ElementData& e, const std::array<double, 12>& w, Eigen::Matrix<double, 12, 1>* residual,
                        Eigen::Matrix<double, 12, 12>* jacobian);

/// ν_T|_K = c_s² h_K² |mean_K ∇u_small|_F.
std::vector<double> eddy_viscosity(const Field& u_small, double c_s);

/// Element-local small-scale extraction Π̄_h = I − Π_h acting on the six scalar
/// P2 coefficients of an element (applied to each velocity component).
struct LocalSmallScaleOperator {
  Eigen::Matrix<double, 6, 6> matrix = Eigen::Matrix<double, 6, 6>::Zero();
  /// Small scales relative to the P1 nodal interpolant on the same mesh.
  static LocalSmallScaleOperator nested_p1();
  /// Coarse space equal to the fine space: no small scales.
  static LocalSmallScaleOperator none();
};

/// Global small-scale operator Π̄_h as a velocity matrix.
SparseMatrix small_scale_matrix(const TaylorHoodSpace& sp, const LocalSmallScaleOperator& op);

/// a_s(u; u, v) = Σ_K ν_T|_K ∫_K ∇Π̄u : ∇Π̄v, with ν_T frozen.
SparseMatrix assemble_smagorinsky(const TaylorHoodSpace& sp, const std::vector<double>& nu_t,
                                  const LocalSmallScaleOperator& op);

/// Residual of a_s(u; u, ·) with ν_T = ν_T(Π̄u) and its full Jacobian in u.
struct SmagorinskyLinearization {
  Vector residual;
  SparseMatrix jacobian;
  std::vector<double> nu_t;
};
SmagorinskyLinearization smagorinsky_linearization(const Field& u, double c_s, const LocalSmallScaleOperator& op);

/// Symmetric Dirichlet elimination. `dofs` index rows/cols of `system`; the
/// constrained rows become identity rows carrying `values`, and the columns
/// are moved to the right-hand side.
void apply_dirichlet(SparseMatrix& system, Vector& rhs, const std::vector<int>& dofs, const Vector& values);
/// Same, for the space's Dirichlet velocity dofs.
void apply_dirichlet(SparseMatrix& system, Vector& rhs, const TaylorHoodSpace& sp, const Vector& values);

/// Assembled constant operators of a space, built once and shared.
struct Operators {
  SpacePtr space;
  SparseMatrix mass;       ///< velocity L² mass
  SparseMatrix stiffness;  ///< velocity ∫∇u:∇v
  SparseMatrix graddiv;    ///< velocity ∫(∇·u)(∇·v)
  SparseMatrix divergence; ///< pressure × velocity
  SparseMatrix pressure_mass;

  static std::shared_ptr<const Operators> build(SpacePtr space);
};
using OperatorsPtr = std::shared_ptr<const Operators>;

}  // namespace efvms
