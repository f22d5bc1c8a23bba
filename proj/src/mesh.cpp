#include "efvms/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "efvms/errors.hpp"

namespace efvms {

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::map<EdgeKey, int> count_edges(const std::vector<std::array<int, 3>>& triangles) {
  std::map<EdgeKey, int> counts;
  for (const auto& t : triangles) {
    for (int e = 0; e < 3; ++e) ++counts[edge_key(t[e], t[(e + 1) % 3])];
  }
  return counts;
}

// Boundary edges of a triangulation, oriented with the domain on the left.
std::vector<std::array<int, 2>> oriented_boundary(const std::vector<std::array<int, 3>>& triangles) {
  const auto counts = count_edges(triangles);
  std::vector<std::array<int, 2>> out;
  for (const auto& t : triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e];
      const int b = t[(e + 1) % 3];
      if (counts.at(edge_key(a, b)) == 1) out.push_back({a, b});
    }
  }
  return out;
}

}  // namespace

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Inlet:
      return "inlet";
    case BoundaryTag::Walls:
      return "walls";
    case BoundaryTag::Outflow:
      return "outflow";
  }
  return "unknown";
}

BoundaryTag boundary_tag_from_string(const std::string& name) {
  if (name == "inlet") return BoundaryTag::Inlet;
  if (name == "walls") return BoundaryTag::Walls;
  if (name == "outflow") return BoundaryTag::Outflow;
  throw Error("unknown boundary tag '" + name + "'");
}

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Mesh::Mesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles,
           std::vector<BoundaryEdge> boundary_edges)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), boundary_(std::move(boundary_edges)) {
  const int nv = static_cast<int>(vertices_.size());
  if (triangles_.empty()) throw Error("mesh has no triangles");
  diameters_.reserve(triangles_.size());
  for (std::size_t k = 0; k < triangles_.size(); ++k) {
    const auto& t = triangles_[k];
    for (int v : t) {
      if (v < 0 || v >= nv) throw Error("triangle " + std::to_string(k) + " references invalid vertex");
    }
    if (!(signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]) > 0.0)) {
      throw Error("triangle " + std::to_string(k) + " has non-positive signed area");
    }
    const double h = std::max({distance(vertices_[t[0]], vertices_[t[1]]), distance(vertices_[t[1]], vertices_[t[2]]),
                               distance(vertices_[t[2]], vertices_[t[0]])});
    diameters_.push_back(h);
  }

  const auto counts = count_edges(triangles_);
  std::map<EdgeKey, int> tagged;
  for (const auto& be : boundary_) {
    const auto key = edge_key(be.v[0], be.v[1]);
    const auto it = counts.find(key);
    if (it == counts.end() || it->second != 1) {
      throw Error("boundary edge (" + std::to_string(be.v[0]) + "," + std::to_string(be.v[1]) +
                  ") does not belong to exactly one triangle");
    }
    if (!tagged.emplace(key, 1).second) throw Error("boundary edge tagged twice");
  }
  for (const auto& [key, count] : counts) {
    if (count > 2) throw Error("edge shared by more than two triangles");
    if (count == 1 && !tagged.contains(key)) {
      throw Error("untagged boundary edge (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")");
    }
  }
}

double Mesh::area(std::size_t k) const {
  const auto& t = triangles_[k];
  return signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
}

double Mesh::total_area() const {
  double s = 0.0;
  for (std::size_t k = 0; k < triangles_.size(); ++k) s += area(k);
  return s;
}

bool Mesh::has_tag(BoundaryTag tag) const {
  return std::any_of(boundary_.begin(), boundary_.end(), [tag](const BoundaryEdge& e) { return e.tag == tag; });
}

std::uint64_t Mesh::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : vertices_) {
    mix(&p.x, sizeof(double));
    mix(&p.y, sizeof(double));
  }
  for (const auto& t : triangles_) mix(t.data(), sizeof(int) * 3);
  for (const auto& e : boundary_) {
    mix(e.v.data(), sizeof(int) * 2);
    mix(&e.tag, sizeof(e.tag));
  }
  return h;
}

Mesh build_rectangle_mesh(int nx, int ny, const Rectangle& bounds, const RectangleTags& tags) {
  if (nx < 1 || ny < 1) throw Error("rectangle mesh needs nx, ny >= 1 (got " + std::to_string(nx) + ", " +
                                    std::to_string(ny) + ")");
  if (!(bounds.x1 > bounds.x0) || !(bounds.y1 > bounds.y0)) throw Error("degenerate rectangle bounds");
  std::vector<Point> vertices;
  vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Endpoints are assigned exactly so boundary coordinates carry no round-off.
      const double x = i == nx ? bounds.x1 : bounds.x0 + (bounds.x1 - bounds.x0) * i / nx;
      const double y = j == ny ? bounds.y1 : bounds.y0 + (bounds.y1 - bounds.y0) * j / ny;
      vertices.push_back({x, y});
    }
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> triangles;
  triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  std::vector<BoundaryEdge> boundary;
  for (int i = 0; i < nx; ++i) {
    boundary.push_back({{id(i, 0), id(i + 1, 0)}, tags.bottom});
    boundary.push_back({{id(i + 1, ny), id(i, ny)}, tags.top});
  }
  for (int j = 0; j < ny; ++j) {
    boundary.push_back({{id(nx, j), id(nx, j + 1)}, tags.right});
    boundary.push_back({{id(0, j + 1), id(0, j)}, tags.left});
  }
  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

namespace {

// Uniform subdivision of [a, b] into n cells, endpoints exact.
std::vector<double> uniform_nodes(double a, double b, int n) {
  std::vector<double> out(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) out[i] = a + (b - a) * i / n;
  out.front() = a;
  out.back() = b;
  return out;
}

// Spacing grows geometrically from `first` by `ratio` and saturates at `cap`;
// the whole list is rescaled to cover [a, b] exactly.
std::vector<double> graded_nodes(double a, double b, double first, double ratio, double cap) {
  std::vector<double> spacing;
  double total = 0.0;
  double s = first;
  while (total < b - a) {
    spacing.push_back(s);
    total += s;
    s = std::min(s * ratio, cap);
  }
  // Drop a trailing sliver rather than stretch everything.
  if (spacing.size() > 1 && total - (b - a) > 0.5 * spacing.back()) {
    total -= spacing.back();
    spacing.pop_back();
  }
  std::vector<double> out{a};
  const double scale = (b - a) / total;
  double x = a;
  for (double d : spacing) {
    x += d * scale;
    out.push_back(x);
  }
  out.back() = b;
  return out;
}

// Geometric layer parameters τ_0 = 0 < ... < τ_n = 1 with first step
// `first/length` and last step not exceeding `last/length`.
std::vector<double> radial_layers(double length, double first, double last) {
  if (first >= length) return {0.0, 1.0};
  for (int n = 1; n < 400; ++n) {
    // Solve first * (q^n - 1) / (q - 1) = length for q >= 1.
    auto total = [&](double q) { return std::abs(q - 1.0) < 1e-14 ? first * n : first * (std::pow(q, n) - 1.0) / (q - 1.0); };
    if (total(1.0) > length) continue;
    double lo = 1.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(mid) < length ? lo : hi) = mid;
    }
    const double q = 0.5 * (lo + hi);
    if (std::abs(total(q) - length) > 1e-9 * length) continue;
    if (first * std::pow(q, n - 1) <= last) {
      std::vector<double> tau(static_cast<std::size_t>(n + 1), 0.0);
      double acc = 0.0;
      double step = first;
      for (int j = 1; j <= n; ++j) {
        acc += step;
        tau[j] = acc / length;
        step *= q;
      }
      tau.back() = 1.0;
      return tau;
    }
  }
  throw Error("cannot fit radial layers between obstacle and block boundary");
}

class TriangleCollector {
 public:
  explicit TriangleCollector(const std::vector<Point>& vertices) : vertices_(vertices) {}

  void add_quad(int a, int b, int c, int d) {
    // Split along the shorter diagonal.
    if (distance(vertices_[a], vertices_[c]) <= distance(vertices_[b], vertices_[d])) {
      add(a, b, c);
      add(a, c, d);
    } else {
      add(a, b, d);
      add(b, c, d);
    }
  }

  void add(int a, int b, int c) {
    if (signed_area(vertices_[a], vertices_[b], vertices_[c]) < 0.0) std::swap(b, c);
    triangles.push_back({a, b, c});
  }

  std::vector<std::array<int, 3>> triangles;

 private:
  const std::vector<Point>& vertices_;
};

}  // namespace

Mesh build_cylinder_channel_mesh(double target_h, double refinement, const CylinderChannelGeometry& g) {
  if (!(target_h > 0.0)) throw Error("cylinder mesh: target_h must be positive (got " + std::to_string(target_h) + ")");
  if (!(refinement >= 1.0)) {
    throw Error("cylinder mesh: refinement_near_cylinder must be >= 1 (got " + std::to_string(refinement) + ")");
  }
  const double half = 0.75 * std::min({g.cx, g.cy, g.height - g.cy, g.length - g.cx});
  if (!(g.radius > 0.0) || half < 1.5 * g.radius) {
    throw Error("cylinder mesh: obstacle radius " + std::to_string(g.radius) + " does not fit inside the channel");
  }
  const double h_near = target_h / refinement;
  const double pi = std::numbers::pi;
  const double cell_far = target_h / std::sqrt(2.0);
  const int n_side = std::max({4, static_cast<int>(std::ceil(2.0 * pi * g.radius / (4.0 * 1.15 * h_near))),
                               static_cast<int>(std::ceil(2.0 * half / cell_far))});
  const int n_circle = 4 * n_side;
  if (2.0 * pi * g.radius / n_circle > target_h) {
    throw Error("cylinder mesh: target_h too large to resolve the obstacle with >= 16 segments");
  }
  const double d = 2.0 * half / n_side;

  auto count = [d](double width) { return std::max(1, static_cast<int>(std::ceil(width / d - 1e-9))); };
  const double xl = g.cx - half, xr = g.cx + half, yb = g.cy - half, yt = g.cy + half;
  std::vector<double> xs = uniform_nodes(0.0, xl, count(xl));
  {
    const auto mid = uniform_nodes(xl, xr, n_side);
    xs.insert(xs.end(), mid.begin() + 1, mid.end());
  }
  const int ix_left = static_cast<int>(xs.size()) - 1 - n_side;
  const int ix_right = static_cast<int>(xs.size()) - 1;
  std::vector<double> ys = uniform_nodes(0.0, yb, count(yb));
  {
    const auto mid = uniform_nodes(yb, yt, n_side);
    ys.insert(ys.end(), mid.begin() + 1, mid.end());
  }
  const int iy_bottom = static_cast<int>(ys.size()) - 1 - n_side;
  const int iy_top = static_cast<int>(ys.size()) - 1;
  {
    const auto top = uniform_nodes(yt, g.height, count(g.height - yt));
    ys.insert(ys.end(), top.begin() + 1, top.end());
  }
  double dy_max = 0.0;
  for (std::size_t j = 1; j < ys.size(); ++j) dy_max = std::max(dy_max, ys[j] - ys[j - 1]);
  const double dx_max = std::sqrt(std::max(target_h * target_h - dy_max * dy_max, d * d));
  {
    const auto right = graded_nodes(xr, g.length, d, 1.1, dx_max);
    xs.insert(xs.end(), right.begin() + 1, right.end());
  }

  const int nxs = static_cast<int>(xs.size());
  const int nys = static_cast<int>(ys.size());
  std::vector<Point> vertices;
  std::vector<int> grid_id(static_cast<std::size_t>(nxs * nys), -1);
  auto inside_block = [&](int i, int j) { return i > ix_left && i < ix_right && j > iy_bottom && j < iy_top; };
  for (int j = 0; j < nys; ++j) {
    for (int i = 0; i < nxs; ++i) {
      if (inside_block(i, j)) continue;
      grid_id[j * nxs + i] = static_cast<int>(vertices.size());
      vertices.push_back({xs[i], ys[j]});
    }
  }
  auto gid = [&](int i, int j) { return grid_id[j * nxs + i]; };

  // Square perimeter, counter-clockwise from the (xr, yb) corner.
  auto square_index = [&](int k) -> std::pair<int, int> {
    const int side = k / n_side;
    const int off = k % n_side;
    switch (side) {
      case 0:
        return {ix_right, iy_bottom + off};
      case 1:
        return {ix_right - off, iy_top};
      case 2:
        return {ix_left, iy_top - off};
      default:
        return {ix_left + off, iy_bottom};
    }
  };

  // Radial steps stretch by up to (√2·half − r)/(half − r) ≈ 1.6 towards the block corners.
  const auto tau = radial_layers(half - g.radius, 0.45 * h_near, 0.5 * d);
  const int n_layers = static_cast<int>(tau.size()) - 1;
  std::vector<int> ring_id(static_cast<std::size_t>(n_circle * (n_layers + 1)));
  for (int k = 0; k < n_circle; ++k) {
    const auto [si, sj] = square_index(k);
    const Point outer{xs[si], ys[sj]};
    const double theta = -0.25 * pi + 2.0 * pi * k / n_circle;
    const Point inner{g.cx + g.radius * std::cos(theta), g.cy + g.radius * std::sin(theta)};
    for (int j = 0; j < n_layers; ++j) {
      ring_id[j * n_circle + k] = static_cast<int>(vertices.size());
      if (j == 0) {
        vertices.push_back(inner);
      } else {
        vertices.push_back({inner.x + tau[j] * (outer.x - inner.x), inner.y + tau[j] * (outer.y - inner.y)});
      }
    }
    ring_id[n_layers * n_circle + k] = gid(si, sj);
  }

  TriangleCollector tri(vertices);
  for (int j = 0; j + 1 < nys; ++j) {
    for (int i = 0; i + 1 < nxs; ++i) {
      if (i >= ix_left && i < ix_right && j >= iy_bottom && j < iy_top) continue;
      tri.add_quad(gid(i, j), gid(i + 1, j), gid(i + 1, j + 1), gid(i, j + 1));
    }
  }
  for (int j = 0; j < n_layers; ++j) {
    for (int k = 0; k < n_circle; ++k) {
      const int k1 = (k + 1) % n_circle;
      tri.add_quad(ring_id[j * n_circle + k], ring_id[(j + 1) * n_circle + k], ring_id[(j + 1) * n_circle + k1],
                   ring_id[j * n_circle + k1]);
    }
  }

  std::vector<BoundaryEdge> boundary;
  const double tol = 1e-12 * std::max(g.length, g.height);
  for (const auto& e : oriented_boundary(tri.triangles)) {
    const Point& a = vertices[e[0]];
    const Point& b = vertices[e[1]];
    BoundaryTag tag = BoundaryTag::Walls;
    if (std::abs(a.x) <= tol && std::abs(b.x) <= tol) {
      tag = BoundaryTag::Inlet;
    } else if (std::abs(a.x - g.length) <= tol && std::abs(b.x - g.length) <= tol) {
      tag = BoundaryTag::Outflow;
    }
    boundary.push_back({e, tag});
  }
  return Mesh(std::move(vertices), std::move(tri.triangles), std::move(boundary));
}

MeshStats mesh_stats(const Mesh& m) {
  MeshStats s;
  s.n_vertices = m.n_vertices();
  s.n_triangles = m.n_triangles();
  const auto& h = m.element_diameters();
  s.h_min = *std::min_element(h.begin(), h.end());
  s.h_max = *std::max_element(h.begin(), h.end());
  s.shortest_edge = std::numeric_limits<double>::infinity();
  const auto& v = m.vertices();
  for (const auto& t : m.triangles()) {
    for (int e = 0; e < 3; ++e) s.shortest_edge = std::min(s.shortest_edge, distance(v[t[e]], v[t[(e + 1) % 3]]));
  }
  return s;
}

namespace {
constexpr const char* kMeshMagic = "efvms-mesh";
constexpr int kMeshVersion = 1;
}  // namespace

void save_mesh(const Mesh& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << kMeshMagic << ' ' << kMeshVersion << '\n';
  out << "vertices " << m.n_vertices() << '\n';
  for (const auto& p : m.vertices()) out << p.x << ' ' << p.y << '\n';
  out << "triangles " << m.n_triangles() << '\n';
  for (const auto& t : m.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "boundary " << m.boundary_edges().size() << '\n';
  for (const auto& e : m.boundary_edges()) out << e.v[0] << ' ' << e.v[1] << ' ' << to_string(e.tag) << '\n';
  out << "end\n";
  if (!out) throw Error("failed writing mesh to '" + path.string() + "'");
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError("unexpected end of mesh file", line_no_ + 1);
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_no_); }

  std::size_t header(const std::string& keyword) {
    auto ss = next();
    std::string word;
    long long n = -1;
    if (!(ss >> word >> n) || word != keyword || n < 0) fail("expected '" + keyword + " <count>'");
    return static_cast<std::size_t>(n);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh file '" + path.string() + "'");
  LineReader reader(in);
  {
    auto ss = reader.next();
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != kMeshMagic) reader.fail("not an efvms mesh file");
    if (version != kMeshVersion) reader.fail("unsupported mesh version " + std::to_string(version));
  }
  std::vector<Point> vertices(reader.header("vertices"));
  for (auto& p : vertices) {
    auto ss = reader.next();
    if (!(ss >> p.x >> p.y)) reader.fail("malformed vertex record");
  }
  std::vector<std::array<int, 3>> triangles(reader.header("triangles"));
  for (auto& t : triangles) {
    auto ss = reader.next();
    if (!(ss >> t[0] >> t[1] >> t[2])) reader.fail("malformed triangle record");
  }
  std::vector<BoundaryEdge> boundary(reader.header("boundary"));
  for (auto& e : boundary) {
    auto ss = reader.next();
    std::string tag;
    if (!(ss >> e.v[0] >> e.v[1] >> tag)) reader.fail("malformed boundary record");
    try {
      e.tag = boundary_tag_from_string(tag);
    } catch (const Error&) {
      reader.fail("unknown boundary tag '" + tag + "'");
    }
  }
  {
    auto ss = reader.next();
    std::string word;
    if (!(ss >> word) || word != "end") reader.fail("missing 'end' marker");
  }
  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

}  // namespace efvms
