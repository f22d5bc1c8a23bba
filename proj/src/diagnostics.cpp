#include "efvms/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

#include "efvms/errors.hpp"

namespace efvms {

namespace {

constexpr int kDegree = 5;

// ∫ (values of f)² over the domain, exact for P2 and P1 fields.
double integral_of_square(const Field& f) {
  f.check();
  const auto& sp = *f.space;
  const auto& rule = triangle_rule(kDegree);
  const int nn = sp.n_nodes();
  double s = 0.0;
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto e = element_data(sp, k, rule);
    if (f.kind == FieldKind::Velocity) {
      const auto& nodes = sp.element_nodes(k);
      for (int q = 0; q < e.n_q; ++q) {
        double ux = 0.0, uy = 0.0;
        for (int a = 0; a < 6; ++a) {
          ux += f.coeffs[nodes[a]] * e.phi[q][a];
          uy += f.coeffs[nn + nodes[a]] * e.phi[q][a];
        }
        s += e.weight[q] * (ux * ux + uy * uy);
      }
    } else {
      const auto d = sp.element_pressure_dofs(k);
      for (int q = 0; q < e.n_q; ++q) {
        double p = 0.0;
        for (int a = 0; a < 3; ++a) p += f.coeffs[d[a]] * e.psi[q][a];
        s += e.weight[q] * p * p;
      }
    }
  }
  return s;
}

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

double l2_norm(const Field& f) { return std::sqrt(integral_of_square(f)); }

double divergence_norm(const Field& u) {
  u.check();
  if (u.kind != FieldKind::Velocity) throw Error("divergence of a pressure field");
  const auto& sp = *u.space;
  const auto& rule = triangle_rule(kDegree);
  const int nn = sp.n_nodes();
  double s = 0.0;
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto e = element_data(sp, k, rule);
    const auto& nodes = sp.element_nodes(k);
    for (int q = 0; q < e.n_q; ++q) {
      double div = 0.0;
      for (int a = 0; a < 6; ++a) div += u.coeffs[nodes[a]] * e.dphi[q][a][0] + u.coeffs[nn + nodes[a]] * e.dphi[q][a][1];
      s += e.weight[q] * div * div;
    }
  }
  return std::sqrt(s);
}

double relative_error(const Field& ref, const Field& test) {
  ref.check();
  test.check();
  if (ref.space != test.space || ref.kind != test.kind) throw Error("relative_error: fields live on different spaces");
  const double norm = l2_norm(ref);
  if (norm == 0.0) throw Error("relative_error: reference field has zero norm");
  return l2_norm(Field{ref.space, ref.kind, test.coeffs - ref.coeffs, ref.time}) / norm;
}

ForceEvaluator::ForceEvaluator(SpacePtr space) : space_(std::move(space)) {
  const auto& mesh = space_->mesh();
  const auto& verts = mesh.vertices();
  std::map<std::pair<int, int>, std::pair<std::size_t, int>> owner;
  for (std::size_t k = 0; k < mesh.n_triangles(); ++k) {
    const auto& t = mesh.triangles()[k];
    for (int e = 0; e < 3; ++e) owner[edge_key(t[e], t[(e + 1) % 3])] = {k, e};
  }
  // Walls edges oriented with the fluid on their left.
  std::map<int, Segment> next;
  for (const auto& be : mesh.boundary_edges()) {
    if (be.tag != BoundaryTag::Walls) continue;
    const auto [k, e] = owner.at(edge_key(be.v[0], be.v[1]));
    const auto& t = mesh.triangles()[k];
    const int la = e, lb = (e + 1) % 3;
    next[t[la]] = Segment{k, la, lb, verts[t[la]], verts[t[lb]]};
  }
  std::map<int, char> visited;
  for (const auto& [start, seg0] : next) {
    if (visited[start]) continue;
    std::vector<Segment> loop;
    double area2 = 0.0;
    int v = start;
    bool closed = false;
    while (true) {
      auto it = next.find(v);
      if (it == next.end() || visited[v]) break;
      visited[v] = 1;
      const Segment& s = it->second;
      loop.push_back(s);
      area2 += s.a.x * s.b.y - s.b.x * s.a.y;
      v = mesh.triangles()[s.element][s.local_b];
      if (v == start) {
        closed = true;
        break;
      }
    }
    if (closed && area2 < 0.0) segments_.insert(segments_.end(), loop.begin(), loop.end());
  }
  if (segments_.empty()) throw Error("no closed obstacle boundary found among Walls edges");
}

double ForceEvaluator::perimeter() const {
  double s = 0.0;
  for (const auto& seg : segments_) s += std::hypot(seg.b.x - seg.a.x, seg.b.y - seg.a.y);
  return s;
}

ForceCoefficients ForceEvaluator::evaluate(const Field& u, const Field& p, double nu, double u_ref, double l_ref) const {
  u.check();
  p.check();
  if (u.space.get() != space_.get() || p.space.get() != space_.get()) throw Error("drag_lift: fields on a different space");
  if (!(u_ref > 0.0) || !(l_ref > 0.0)) throw Error("reference velocity and length must be positive");
  const auto line = gauss_line_rule(3);
  ForceCoefficients c;
  for (const auto& seg : segments_) {
    const double dx = seg.b.x - seg.a.x, dy = seg.b.y - seg.a.y;
    const double len = std::hypot(dx, dy);
    const std::array<double, 2> n{-dy / len, dx / len};
    const std::array<double, 2> t{n[1], -n[0]};
    for (std::size_t q = 0; q < line.points.size(); ++q) {
      std::array<double, 3> l{0.0, 0.0, 0.0};
      l[seg.local_a] = 1.0 - line.points[q];
      l[seg.local_b] = line.points[q];
      const auto val = evaluate_velocity(*space_, u.coeffs, seg.element, l);
      const double pq = evaluate_pressure(*space_, p.coeffs, seg.element, l);
      const auto& g = val.grad;
      std::array<double, 2> grad{}, sym{};
      for (int i = 0; i < 2; ++i) {
        grad[i] = 2.0 * nu * (g[i][0] * n[0] + g[i][1] * n[1]) - pq * n[i];
        sym[i] = nu * ((g[i][0] + g[0][i]) * n[0] + (g[i][1] + g[1][i]) * n[1]) - pq * n[i];
      }
      const double w = line.weights[q] * len;
      c.c_d += w * (grad[0] * t[0] + grad[1] * t[1]);
      c.c_l += w * (grad[0] * n[0] + grad[1] * n[1]);
      c.c_d_ex += w * sym[0];
      c.c_l_ey += w * sym[1];
    }
  }
  const double scale = 2.0 / (u_ref * u_ref * l_ref);
  c.c_d *= scale;
  c.c_l *= scale;
  c.c_d_ex *= scale;
  c.c_l_ey *= scale;
  return c;
}

std::optional<ForceEvaluator> find_obstacle(SpacePtr space) {
  try {
    return ForceEvaluator(std::move(space));
  } catch (const Error&) {
    return std::nullopt;
  }
}

ForceCoefficients drag_lift(const Field& u, const Field& p, double nu, double u_ref, double l_ref) {
  return ForceEvaluator(u.space).evaluate(u, p, nu, u_ref, l_ref);
}

PointLocator::PointLocator(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
  const auto& v = mesh_->vertices();
  double x1 = -std::numeric_limits<double>::infinity(), y1 = x1;
  x0_ = y0_ = std::numeric_limits<double>::infinity();
  for (const auto& p : v) {
    x0_ = std::min(x0_, p.x);
    y0_ = std::min(y0_, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh_->n_triangles()))));
  const double w = x1 - x0_, h = y1 - y0_;
  nx_ = std::max(1, static_cast<int>(side * std::sqrt(w / std::max(h, 1e-300))));
  ny_ = std::max(1, static_cast<int>(side * std::sqrt(h / std::max(w, 1e-300))));
  nx_ = std::min(nx_, 4096);
  ny_ = std::min(ny_, 4096);
  dx_ = w / nx_;
  dy_ = h / ny_;
  buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
  auto clamp_i = [](double f, int n) { return std::clamp(static_cast<int>(std::floor(f)), 0, n - 1); };
  for (std::size_t k = 0; k < mesh_->n_triangles(); ++k) {
    const auto& t = mesh_->triangles()[k];
    double bx0 = v[t[0]].x, bx1 = bx0, by0 = v[t[0]].y, by1 = by0;
    for (int i = 1; i < 3; ++i) {
      bx0 = std::min(bx0, v[t[i]].x);
      bx1 = std::max(bx1, v[t[i]].x);
      by0 = std::min(by0, v[t[i]].y);
      by1 = std::max(by1, v[t[i]].y);
    }
    const double px = 1e-9 * (w + h), py = px;
    const int i0 = clamp_i((bx0 - px - x0_) / dx_, nx_), i1 = clamp_i((bx1 + px - x0_) / dx_, nx_);
    const int j0 = clamp_i((by0 - py - y0_) / dy_, ny_), j1 = clamp_i((by1 + py - y0_) / dy_, ny_);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(k);
    }
  }
}

std::optional<std::pair<std::size_t, std::array<double, 3>>> PointLocator::locate(const Point& x, double tol) const {
  const auto& v = mesh_->vertices();
  auto barycentric = [&](std::size_t k) {
    const auto& t = mesh_->triangles()[k];
    const Point &a = v[t[0]], &b = v[t[1]], &c = v[t[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((x.x - a.x) * (c.y - a.y) - (c.x - a.x) * (x.y - a.y)) / det;
    const double l2 = ((b.x - a.x) * (x.y - a.y) - (x.x - a.x) * (b.y - a.y)) / det;
    return std::array<double, 3>{1.0 - l1 - l2, l1, l2};
  };
  std::optional<std::pair<std::size_t, std::array<double, 3>>> best;
  double best_min = -std::numeric_limits<double>::infinity();
  auto scan = [&](std::size_t bucket) {
    for (std::size_t k : buckets_[bucket]) {
      const auto l = barycentric(k);
      const double m = std::min({l[0], l[1], l[2]});
      if (m > best_min) {
        best_min = m;
        best = {k, l};
      }
    }
  };
  const int i = static_cast<int>(std::floor((x.x - x0_) / dx_));
  const int j = static_cast<int>(std::floor((x.y - y0_) / dy_));
  // Search the bucket and, for boundary tolerance, its neighbours.
  for (int dj = -1; dj <= 1; ++dj) {
    for (int di = -1; di <= 1; ++di) {
      const int ii = i + di, jj = j + dj;
      if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_) continue;
      if ((di != 0 || dj != 0) && best_min >= 0.0) continue;
      scan(static_cast<std::size_t>(jj) * nx_ + ii);
    }
  }
  if (!best || best_min < -tol) return std::nullopt;
  return best;
}

Field cross_mesh_project(const Field& f, const SpacePtr& target, double tol) {
  f.check();
  const auto& src = *f.space;
  const auto& tgt = *target;
  if (f.space == target) return f;
  PointLocator locator(src.mesh_ptr());
  const auto& rule = triangle_rule(kDegree);
  const bool vel = f.kind == FieldKind::Velocity;
  const int nn = tgt.n_nodes();
  Vector rhs = Vector::Zero(vel ? tgt.n_velocity() : tgt.n_pressure());
  for (std::size_t k = 0; k < tgt.mesh().n_triangles(); ++k) {
    const auto e = element_data(tgt, k, rule);
    for (int q = 0; q < e.n_q; ++q) {
      const auto hit = locator.locate(e.x[q], tol);
      if (!hit) {
        throw Error("cross_mesh_project: point (" + std::to_string(e.x[q].x) + ", " + std::to_string(e.x[q].y) +
                    ") lies outside the source mesh");
      }
      if (vel) {
        const auto val = evaluate_velocity(src, f.coeffs, hit->first, hit->second);
        const auto& nodes = tgt.element_nodes(k);
        for (int a = 0; a < 6; ++a) {
          rhs[nodes[a]] += e.weight[q] * val.u[0] * e.phi[q][a];
          rhs[nn + nodes[a]] += e.weight[q] * val.u[1] * e.phi[q][a];
        }
      } else {
        const double pv = evaluate_pressure(src, f.coeffs, hit->first, hit->second);
        const auto d = tgt.element_pressure_dofs(k);
        for (int a = 0; a < 3; ++a) rhs[d[a]] += e.weight[q] * pv * e.psi[q][a];
      }
    }
  }
  const SparseMatrix m = assemble_mass(tgt, f.kind);
  return Field{target, f.kind, SparseLU(m).solve(rhs), f.time};
}

std::vector<LineSample> line_sample(const Field& u, double y, int n_points) {
  u.check();
  if (u.kind != FieldKind::Velocity) throw Error("line_sample needs a velocity field");
  if (n_points < 1) throw Error("line_sample needs at least one point");
  const auto& sp = *u.space;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  for (const auto& p : sp.mesh().vertices()) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
  }
  PointLocator locator(sp.mesh_ptr());
  std::vector<LineSample> out;
  out.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double x = n_points == 1 ? x0 : x0 + (x1 - x0) * i / (n_points - 1);
    LineSample s{x, std::nullopt};
    if (const auto hit = locator.locate({x, y}, 1e-12)) {
      const auto val = evaluate_velocity(sp, u.coeffs, hit->first, hit->second);
      s.magnitude = std::hypot(val.u[0], val.u[1]);
    }
    out.push_back(s);
  }
  return out;
}

void DiagnosticsSeries::write_csv(std::ostream& os) const {
  os << "t,energy,p_norm,div,C_D,C_L,C_D_ex,C_L_ey,E_u\n";
  os << std::setprecision(17);
  for (const auto& r : records) {
    os << r.t << ',' << r.energy << ',' << r.p_norm << ',' << r.div << ',';
    if (r.forces) {
      os << r.forces->c_d << ',' << r.forces->c_l << ',' << r.forces->c_d_ex << ',' << r.forces->c_l_ey << ',';
    } else {
      os << ",,,,";
    }
    if (r.e_u) os << *r.e_u;
    os << '\n';
  }
}

void DiagnosticsSeries::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  write_csv(os);
  if (!os) throw Error("write failed: " + path.string());
}

DiagnosticsRecorder::DiagnosticsRecorder(SpacePtr space, double nu, double u_ref, double l_ref)
    : space_(std::move(space)), nu_(nu), u_ref_(u_ref), l_ref_(l_ref), forces_(find_obstacle(space_)) {}

DiagnosticsRecord DiagnosticsRecorder::record(const Field& u, const Field& p, const Field* reference) const {
  DiagnosticsRecord r;
  r.t = u.time;
  r.energy = integral_of_square(u);
  r.p_norm = l2_norm(p);
  r.div = divergence_norm(u);
  if (forces_) r.forces = forces_->evaluate(u, p, nu_, u_ref_, l_ref_);
  if (reference) r.e_u = relative_error(*reference, u);
  return r;
}

}  // namespace efvms
