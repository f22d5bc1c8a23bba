#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace efvms {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class BoundaryTag : std::uint8_t { Inlet = 0, Walls = 1, Outflow = 2 };

std::string to_string(BoundaryTag tag);
BoundaryTag boundary_tag_from_string(const std::string& name);

/// Inlet and Walls carry Dirichlet data; Outflow is the free-flow boundary.
inline bool is_dirichlet(BoundaryTag tag) { return tag != BoundaryTag::Outflow; }

struct BoundaryEdge {
  std::array<int, 2> v{};
  BoundaryTag tag = BoundaryTag::Walls;
};

/// Conforming triangulation of a 2D polygonal domain. Triangles are stored
/// counter-clockwise. Immutable once constructed.
class Mesh {
 public:
  Mesh() = default;
  /// Validates orientation, boundary coverage and tag consistency; throws
  /// efvms::Error on violation.
  Mesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles,
       std::vector<BoundaryEdge> boundary_edges);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
  const std::vector<double>& element_diameters() const { return diameters_; }

  std::size_t n_vertices() const { return vertices_.size(); }
  std::size_t n_triangles() const { return triangles_.size(); }

  double area(std::size_t k) const;
  double total_area() const;
  bool has_tag(BoundaryTag tag) const;

  /// FNV-1a over the raw coordinate and connectivity bytes.
  std::uint64_t hash() const;

 private:
  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_;
  std::vector<double> diameters_;
};

double signed_area(const Point& a, const Point& b, const Point& c);

struct Rectangle {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

struct RectangleTags {
  BoundaryTag left = BoundaryTag::Walls;
  BoundaryTag right = BoundaryTag::Walls;
  BoundaryTag bottom = BoundaryTag::Walls;
  BoundaryTag top = BoundaryTag::Walls;
};

/// Structured triangulation: every cell is split along its (x0,y0)-(x1,y1)
/// diagonal, giving 2*nx*ny triangles.
Mesh build_rectangle_mesh(int nx, int ny, const Rectangle& bounds = {}, const RectangleTags& tags = {});

struct CylinderChannelGeometry {
  double length = 2.2;
  double height = 0.41;
  double cx = 0.2;
  double cy = 0.2;
  double radius = 0.05;
};

/// Multi-block channel mesh: an O-grid of graded layers around the obstacle
/// embedded in a 3x3 block structured background grid. `target_h` bounds the
/// element diameter away from the obstacle, `target_h / refinement` is the
/// diameter near it. x=0 is Inlet, x=length is Outflow, everything else Walls.
Mesh build_cylinder_channel_mesh(double target_h, double refinement_near_cylinder,
                                 const CylinderChannelGeometry& geometry = {});

struct MeshStats {
  double h_min = 0.0;
  double h_max = 0.0;
  std::size_t n_vertices = 0;
  std::size_t n_triangles = 0;
  /// Shortest edge anywhere in the mesh; h_min above is a diameter.
  double shortest_edge = 0.0;
};

MeshStats mesh_stats(const Mesh& m);

void save_mesh(const Mesh& m, const std::filesystem::path& path);
Mesh load_mesh(const std::filesystem::path& path);

}  // namespace efvms
