#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "efvms/mesh.hpp"
#include "efvms/numerics.hpp"

namespace efvms {

/// P2 velocity / P1 pressure degree-of-freedom maps over a mesh.
///
/// Scalar P2 nodes are the mesh vertices followed by the edge midpoints.
/// Velocity dofs are component-blocked: x-components occupy [0, n_nodes),
/// y-components [n_nodes, 2 n_nodes). Pressure dofs are the vertices. The
/// mixed (velocity, pressure) vector stacks velocity first.
class TaylorHoodSpace {
 public:
  explicit TaylorHoodSpace(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }

  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  int n_edges() const { return n_nodes() - static_cast<int>(mesh_->n_vertices()); }
  int n_velocity() const { return 2 * n_nodes(); }
  int n_pressure() const { return static_cast<int>(mesh_->n_vertices()); }
  int n_total() const { return n_velocity() + n_pressure(); }

  const std::vector<Point>& nodes() const { return nodes_; }
  /// Local P2 nodes of element k: vertices 0,1,2 then edges (0,1),(1,2),(2,0).
  const std::array<int, 6>& element_nodes(std::size_t k) const { return element_nodes_[k]; }
  /// Edge endpoints for edge node `node` (node >= n_vertices).
  std::array<int, 2> edge_vertices(int node) const { return edges_[node - mesh_->n_vertices()]; }

  /// Sorted velocity dof indices on the Dirichlet boundary (Inlet ∪ Walls).
  const std::vector<int>& dirichlet_dofs() const { return dirichlet_dofs_; }
  const std::vector<char>& dirichlet_mask() const { return dirichlet_mask_; }
  /// Boundary tag that owns a Dirichlet node. Walls win over Inlet at shared corners.
  BoundaryTag node_tag(int node) const { return node_tag_[node]; }
  bool node_on_dirichlet(int node) const { return dirichlet_mask_[node] != 0; }

  /// Pressure dof fixed to zero when the whole boundary is Dirichlet.
  std::optional<int> pressure_pin() const { return pressure_pin_; }

  /// Velocity dofs of an element: 6 x-dofs then 6 y-dofs.
  std::array<int, 12> element_velocity_dofs(std::size_t k) const;
  std::array<int, 3> element_pressure_dofs(std::size_t k) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 6>> element_nodes_;
  std::vector<int> dirichlet_dofs_;
  std::vector<char> dirichlet_mask_;
  std::vector<BoundaryTag> node_tag_;
  std::optional<int> pressure_pin_;
};

using SpacePtr = std::shared_ptr<const TaylorHoodSpace>;

enum class FieldKind { Velocity, Pressure };

/// Coefficient vector over a space, stamped with its time.
struct Field {
  SpacePtr space;
  FieldKind kind = FieldKind::Velocity;
  Vector coeffs;
  double time = 0.0;

  static Field zeros(SpacePtr space, FieldKind kind, double time = 0.0);
  static Field velocity(SpacePtr space, Vector coeffs, double time = 0.0);
  static Field pressure(SpacePtr space, Vector coeffs, double time = 0.0);

  /// Throws if the coefficient length does not match the space.
  void check() const;
};

/// Nodal interpolation of a vector function into the P2 velocity space.
Vector interpolate_velocity(const TaylorHoodSpace& sp, const std::function<std::array<double, 2>(const Point&)>& f);
/// Nodal interpolation of a scalar function into the P1 pressure space.
Vector interpolate_pressure(const TaylorHoodSpace& sp, const std::function<double(const Point&)>& f);

/// Dirichlet data u_D(x, t) per boundary tag. Outflow carries none.
class BoundaryData {
 public:
  using Profile = std::function<std::array<double, 2>(const Point&, double)>;

  BoundaryData() = default;
  BoundaryData(Profile inlet, Profile walls) : inlet_(std::move(inlet)), walls_(std::move(walls)) {}

  /// Homogeneous data everywhere.
  static BoundaryData zero();
  /// Parabolic channel inlet u_x = 6 U y (H - y) / H² (peak 1.5 U), no-slip walls.
  /// A positive ramp time multiplies the inlet by min(t / ramp, 1).
  static BoundaryData channel_parabola(double height, double mean_velocity = 1.0, double ramp_time = 0.0);
  /// Lid-driven cavity on the unit square: piecewise-linear lid speed on y = 1.
  static BoundaryData cavity_lid(double lid_speed = 10.0, double ramp_width = 0.06);
  /// Arbitrary function applied on both Inlet and Walls.
  static BoundaryData everywhere(Profile f);

  std::array<double, 2> value(BoundaryTag tag, const Point& x, double t) const;
  bool time_dependent() const { return time_dependent_; }

  /// Value for every Dirichlet velocity dof, aligned with sp.dirichlet_dofs().
  Vector dof_values(const TaylorHoodSpace& sp, double t) const;

 private:
  Profile inlet_;
  Profile walls_;
  bool time_dependent_ = false;
};

/// Overwrites the Dirichlet entries of a velocity coefficient vector.
void impose_dirichlet(const TaylorHoodSpace& sp, const Vector& dirichlet_values, Vector& velocity);

}  // namespace efvms
