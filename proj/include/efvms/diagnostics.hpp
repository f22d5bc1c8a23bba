#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "efvms/assembly.hpp"

namespace efvms {

/// ‖f‖_{L²}.
double l2_norm(const Field& f);
/// ‖∇·u‖_{L²}.
double divergence_norm(const Field& u);
/// ‖ref − test‖ / ‖ref‖ in L².
double relative_error(const Field& ref, const Field& test);

struct ForceCoefficients {
  double c_d = 0.0;     ///< traction (2ν∇u − pI)n projected on t_C
  double c_l = 0.0;     ///< same traction projected on n_C
  double c_d_ex = 0.0;  ///< (ν(∇u + ∇uᵀ) − pI)n projected on e_x
  double c_l_ey = 0.0;  ///< same, on e_y
};

/// Boundary-edge force integration over the obstacle, found as the closed
/// Walls-only boundary loops that enclose a hole. n_C points into the fluid
/// and t_C = (n_y, −n_x).
class ForceEvaluator {
 public:
  explicit ForceEvaluator(SpacePtr space);
  ForceCoefficients evaluate(const Field& u, const Field& p, double nu, double u_ref = 1.0, double l_ref = 0.1) const;
  /// Length of the obstacle boundary.
  double perimeter() const;

 private:
  struct Segment {
    std::size_t element;
    int local_a;
    int local_b;
    Point a;
    Point b;
  };
  SpacePtr space_;
  std::vector<Segment> segments_;
};

/// Returns nullopt when the mesh has no obstacle.
std::optional<ForceEvaluator> find_obstacle(SpacePtr space);

ForceCoefficients drag_lift(const Field& u, const Field& p, double nu, double u_ref = 1.0, double l_ref = 0.1);

/// Uniform bucket grid over triangle bounding boxes.
class PointLocator {
 public:
  explicit PointLocator(std::shared_ptr<const Mesh> mesh);
  /// Element and barycentric coordinates of x. Points up to `tol` (in
  /// barycentric units) outside the mesh are accepted and extrapolated.
  std::optional<std::pair<std::size_t, std::array<double, 3>>> locate(const Point& x, double tol = 1e-10) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  double x0_ = 0, y0_ = 0, dx_ = 1, dy_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

/// L² projection of a field onto another space, evaluating the source by
/// point location at the target quadrature points.
Field cross_mesh_project(const Field& f, const SpacePtr& target, double tol = 1e-8);

struct LineSample {
  double x;
  std::optional<double> magnitude;  ///< absent outside the domain
};
/// |u|(x, y) at n_points equispaced x spanning the mesh bounding box.
std::vector<LineSample> line_sample(const Field& u, double y, int n_points);

struct DiagnosticsRecord {
  double t = 0.0;
  double energy = 0.0;  ///< ‖u‖²
  double p_norm = 0.0;
  double div = 0.0;
  std::optional<ForceCoefficients> forces;
  std::optional<double> e_u;
};

struct DiagnosticsSeries {
  std::vector<DiagnosticsRecord> records;

  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Per-step diagnostics for one space.
class DiagnosticsRecorder {
 public:
  DiagnosticsRecorder(SpacePtr space, double nu, double u_ref = 1.0, double l_ref = 0.1);
  DiagnosticsRecord record(const Field& u, const Field& p, const Field* reference = nullptr) const;

 private:
  SpacePtr space_;
  double nu_, u_ref_, l_ref_;
  std::optional<ForceEvaluator> forces_;
};

}  // namespace efvms
