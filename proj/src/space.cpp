#include "efvms/space.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "efvms/errors.hpp"

namespace efvms {

TaylorHoodSpace::TaylorHoodSpace(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
  if (!mesh_) throw Error("TaylorHoodSpace needs a mesh");
  const int nv = static_cast<int>(mesh_->n_vertices());
  nodes_ = mesh_->vertices();
  std::map<std::pair<int, int>, int> edge_node;
  element_nodes_.reserve(mesh_->n_triangles());
  for (const auto& t : mesh_->triangles()) {
    std::array<int, 6> en{t[0], t[1], t[2], 0, 0, 0};
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      const auto key = a < b ? std::pair{a, b} : std::pair{b, a};
      auto [it, inserted] = edge_node.emplace(key, static_cast<int>(nodes_.size()));
      if (inserted) {
        const Point& pa = mesh_->vertices()[key.first];
        const Point& pb = mesh_->vertices()[key.second];
        nodes_.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
        edges_.push_back({key.first, key.second});
      }
      en[3 + e] = it->second;
    }
    element_nodes_.push_back(en);
  }

  const int nn = n_nodes();
  std::vector<char> node_dirichlet(nn, 0);
  node_tag_.assign(nn, BoundaryTag::Outflow);
  auto mark = [&](int node, BoundaryTag tag) {
    if (!is_dirichlet(tag)) return;
    if (!node_dirichlet[node] || tag == BoundaryTag::Walls) node_tag_[node] = tag;
    node_dirichlet[node] = 1;
  };
  for (const auto& be : mesh_->boundary_edges()) {
    const int a = be.v[0], b = be.v[1];
    const auto key = a < b ? std::pair{a, b} : std::pair{b, a};
    mark(a, be.tag);
    mark(b, be.tag);
    mark(edge_node.at(key), be.tag);
  }
  dirichlet_mask_.assign(2 * nn, 0);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < nn; ++i) {
      if (node_dirichlet[i]) {
        dirichlet_dofs_.push_back(c * nn + i);
        dirichlet_mask_[c * nn + i] = 1;
      }
    }
  }

  if (!mesh_->has_tag(BoundaryTag::Outflow)) {
    // Fully enclosed: pin the vertex closest to the lower-left corner.
    int best = 0;
    for (int v = 1; v < nv; ++v) {
      const auto& p = nodes_[v];
      const auto& q = nodes_[best];
      if (p.x + p.y < q.x + q.y - 1e-14 || (std::abs(p.x + p.y - q.x - q.y) <= 1e-14 && p.x < q.x)) best = v;
    }
    pressure_pin_ = best;
  }
}

std::array<int, 12> TaylorHoodSpace::element_velocity_dofs(std::size_t k) const {
  const auto& en = element_nodes_[k];
  const int nn = n_nodes();
  std::array<int, 12> d{};
  for (int a = 0; a < 6; ++a) {
    d[a] = en[a];
    d[6 + a] = nn + en[a];
  }
  return d;
}

std::array<int, 3> TaylorHoodSpace::element_pressure_dofs(std::size_t k) const {
  const auto& t = mesh_->triangles()[k];
  return {t[0], t[1], t[2]};
}

Field Field::zeros(SpacePtr space, FieldKind kind, double time) {
  const int n = kind == FieldKind::Velocity ? space->n_velocity() : space->n_pressure();
  return Field{std::move(space), kind, Vector::Zero(n), time};
}

Field Field::velocity(SpacePtr space, Vector coeffs, double time) {
  Field f{std::move(space), FieldKind::Velocity, std::move(coeffs), time};
  f.check();
  return f;
}

Field Field::pressure(SpacePtr space, Vector coeffs, double time) {
  Field f{std::move(space), FieldKind::Pressure, std::move(coeffs), time};
  f.check();
  return f;
}

void Field::check() const {
  if (!space) throw Error("field has no space");
  const int n = kind == FieldKind::Velocity ? space->n_velocity() : space->n_pressure();
  if (coeffs.size() != n) {
    throw Error("field coefficient length " + std::to_string(coeffs.size()) + " does not match space dimension " +
                std::to_string(n));
  }
}

Vector interpolate_velocity(const TaylorHoodSpace& sp, const std::function<std::array<double, 2>(const Point&)>& f) {
  const int nn = sp.n_nodes();
  Vector v(2 * nn);
  for (int i = 0; i < nn; ++i) {
    const auto val = f(sp.nodes()[i]);
    v[i] = val[0];
    v[nn + i] = val[1];
  }
  return v;
}

Vector interpolate_pressure(const TaylorHoodSpace& sp, const std::function<double(const Point&)>& f) {
  Vector v(sp.n_pressure());
  for (int i = 0; i < sp.n_pressure(); ++i) v[i] = f(sp.nodes()[i]);
  return v;
}

BoundaryData BoundaryData::zero() {
  auto z = [](const Point&, double) { return std::array<double, 2>{0.0, 0.0}; };
  return BoundaryData(z, z);
}

BoundaryData BoundaryData::channel_parabola(double height, double mean_velocity, double ramp_time) {
  auto inlet = [height, mean_velocity, ramp_time](const Point& p, double t) {
    const double ramp = ramp_time > 0.0 ? std::min(t / ramp_time, 1.0) : 1.0;
    return std::array<double, 2>{ramp * 6.0 * mean_velocity * p.y * (height - p.y) / (height * height), 0.0};
  };
  auto walls = [](const Point&, double) { return std::array<double, 2>{0.0, 0.0}; };
  BoundaryData bd(inlet, walls);
  bd.time_dependent_ = ramp_time > 0.0;
  return bd;
}

BoundaryData BoundaryData::cavity_lid(double lid_speed, double ramp_width) {
  auto lid = [lid_speed, ramp_width](const Point& p, double) {
    double u = lid_speed;
    if (p.x <= ramp_width) u = lid_speed * p.x / ramp_width;
    if (p.x >= 1.0 - ramp_width) u = lid_speed * (1.0 - p.x) / ramp_width;
    return std::array<double, 2>{u, 0.0};
  };
  auto walls = [](const Point&, double) { return std::array<double, 2>{0.0, 0.0}; };
  return BoundaryData(lid, walls);
}

BoundaryData BoundaryData::everywhere(Profile f) {
  BoundaryData bd(f, f);
  bd.time_dependent_ = true;
  return bd;
}

std::array<double, 2> BoundaryData::value(BoundaryTag tag, const Point& x, double t) const {
  switch (tag) {
    case BoundaryTag::Inlet:
      return inlet_ ? inlet_(x, t) : std::array<double, 2>{0.0, 0.0};
    case BoundaryTag::Walls:
      return walls_ ? walls_(x, t) : std::array<double, 2>{0.0, 0.0};
    case BoundaryTag::Outflow:
      break;
  }
  throw Error("no Dirichlet data on the outflow boundary");
}

Vector BoundaryData::dof_values(const TaylorHoodSpace& sp, double t) const {
  const auto& dofs = sp.dirichlet_dofs();
  const int nn = sp.n_nodes();
  Vector out(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    const int comp = dofs[i] >= nn ? 1 : 0;
    const int node = dofs[i] - comp * nn;
    out[static_cast<Eigen::Index>(i)] = value(sp.node_tag(node), sp.nodes()[node], t)[comp];
  }
  return out;
}

void impose_dirichlet(const TaylorHoodSpace& sp, const Vector& dirichlet_values, Vector& velocity) {
  const auto& dofs = sp.dirichlet_dofs();
  if (static_cast<std::size_t>(dirichlet_values.size()) != dofs.size()) {
    throw Error("Dirichlet value count " + std::to_string(dirichlet_values.size()) + " does not match " +
                std::to_string(dofs.size()) + " Dirichlet dofs");
  }
  for (std::size_t i = 0; i < dofs.size(); ++i) velocity[dofs[i]] = dirichlet_values[static_cast<Eigen::Index>(i)];
}

}  // namespace efvms
