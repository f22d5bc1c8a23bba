#pragma once

#include <memory>
#include <random>

#include "efvms/assembly.hpp"
#include "efvms/mesh.hpp"

namespace fixtures {

using namespace efvms;

// Structured rectangle with interior vertices jittered by up to `jitter` of a cell.
inline std::shared_ptr<const Mesh> jittered_rectangle(int nx, int ny, double jitter, unsigned seed,
                                                      const Rectangle& r = {}, const RectangleTags& tags = {}) {
  const Mesh base = build_rectangle_mesh(nx, ny, r, tags);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  const double hx = (r.x1 - r.x0) / nx, hy = (r.y1 - r.y0) / ny;
  auto v = base.vertices();
  for (auto& p : v) {
    const bool interior = p.x > r.x0 + 1e-12 && p.x < r.x1 - 1e-12 && p.y > r.y0 + 1e-12 && p.y < r.y1 - 1e-12;
    if (!interior) continue;
    p.x += u(rng) * hx;
    p.y += u(rng) * hy;
  }
  return std::make_shared<const Mesh>(v, base.triangles(), base.boundary_edges());
}

inline SpacePtr space(std::shared_ptr<const Mesh> mesh) { return std::make_shared<const TaylorHoodSpace>(std::move(mesh)); }

inline SpacePtr unit_square(int n, const RectangleTags& tags = {}) {
  return space(std::make_shared<const Mesh>(build_rectangle_mesh(n, n, {}, tags)));
}

// Unit square with the top side tagged Inlet, driven by the piecewise-linear lid.
inline SpacePtr tiny_cavity(int n = 4) {
  RectangleTags tags;
  tags.top = BoundaryTag::Inlet;
  return unit_square(n, tags);
}

// [0, 2.2] x [0, 0.41] channel: Inlet left, Outflow right, walls elsewhere.
inline SpacePtr channel(int nx, int ny) {
  RectangleTags tags;
  tags.left = BoundaryTag::Inlet;
  tags.right = BoundaryTag::Outflow;
  return space(std::make_shared<const Mesh>(build_rectangle_mesh(nx, ny, {0.0, 0.0, 2.2, 0.41}, tags)));
}

inline Field random_velocity(const SpacePtr& sp, std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Vector v(sp->n_velocity());
  for (auto& x : v) x = d(rng);
  return Field::velocity(sp, v);
}

inline Field random_pressure(const SpacePtr& sp, std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Vector v(sp->n_pressure());
  for (auto& x : v) x = d(rng);
  return Field::pressure(sp, v);
}

inline Field velocity_of(const SpacePtr& sp, const std::function<std::array<double, 2>(const Point&)>& f) {
  return Field::velocity(sp, interpolate_velocity(*sp, f));
}

}  // namespace fixtures
