#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "efvms/diagnostics.hpp"
#include "efvms/errors.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace efvms;
using fixtures::velocity_of;

namespace {

SpacePtr cylinder_space() {
  static const SpacePtr sp = fixtures::space(std::make_shared<const Mesh>(build_cylinder_channel_mesh(0.1, 2.0)));
  return sp;
}

struct Edge {
  Point a, b;
};

// Boundary edges on the obstacle, oriented so that the left normal points into the fluid.
std::vector<Edge> obstacle_edges(const Mesh& m) {
  std::vector<Edge> out;
  for (const auto& e : m.boundary_edges()) {
    Point a = m.vertices()[e.v[0]], b = m.vertices()[e.v[1]];
    const double mx = 0.5 * (a.x + b.x) - 0.2, my = 0.5 * (a.y + b.y) - 0.2;
    if (std::hypot(mx, my) > 0.06) continue;
    const double nx = -(b.y - a.y), ny = b.x - a.x;
    if (nx * mx + ny * my < 0.0) std::swap(a, b);
    out.push_back({a, b});
  }
  return out;
}

std::array<double, 2> field_at(const Field& f, const PointLocator& loc, const Point& x) {
  const auto hit = loc.locate(x);
  REQUIRE(hit.has_value());
  return oracle::velocity_at(*f.space, f.coeffs, hit->first, hit->second).u;
}

std::array<double, 2> quadratic(const Point& p) {
  return {1.0 + p.x * p.y - 2.0 * p.y * p.y, p.x * p.x - 0.5 * p.y + 0.3};
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("norms") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(4, 4, 0.2, 41));
    const Field c = velocity_of(sp, [](const Point&) { return std::array<double, 2>{1.0, 2.0}; });
    CHECK(l2_norm(c) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
    const Field lin = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x, 0.0}; });
    CHECK(l2_norm(lin) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
    CHECK(divergence_norm(lin) == doctest::Approx(1.0).epsilon(1e-12));
    const Field rot = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x * p.x, -2.0 * p.x * p.y}; });
    CHECK(divergence_norm(rot) < 1e-12);
    const Field pc = Field::pressure(sp, Vector::Constant(sp->n_pressure(), -3.0));
    CHECK(l2_norm(pc) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(relative_error(c, c) == 0.0);
    const Field c2 = Field::velocity(sp, 1.1 * c.coeffs);
    CHECK(relative_error(c, c2) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_AS(divergence_norm(pc), Error);
  }

  TEST_CASE("obstacle detection") {
    CHECK_FALSE(find_obstacle(fixtures::unit_square(3)).has_value());
    const auto ev = find_obstacle(cylinder_space());
    REQUIRE(ev.has_value());
    double perimeter = 0.0;
    for (const auto& e : obstacle_edges(cylinder_space()->mesh())) perimeter += std::hypot(e.b.x - e.a.x, e.b.y - e.a.y);
    CHECK(ev->perimeter() == doctest::Approx(perimeter).epsilon(1e-12));
    CHECK(perimeter == doctest::Approx(2.0 * M_PI * 0.05).epsilon(1e-2));
  }

  TEST_CASE("constant pressure exerts no net force") {
    const auto sp = cylinder_space();
    const ForceEvaluator ev(sp);
    const Field u = Field::zeros(sp, FieldKind::Velocity);
    const double c = 2.5, u_ref = 1.5, l_ref = 0.1;
    const Field p = Field::pressure(sp, Vector::Constant(sp->n_pressure(), c));
    const auto f = ev.evaluate(u, p, 1e-3, u_ref, l_ref);
    CHECK(std::abs(f.c_d) < 1e-12);
    CHECK(std::abs(f.c_d_ex) < 1e-12);
    CHECK(std::abs(f.c_l_ey) < 1e-12);
    CHECK(f.c_l == doctest::Approx(-2.0 / (u_ref * u_ref * l_ref) * c * ev.perimeter()).epsilon(1e-12));
  }

  TEST_CASE("uniform velocity gradient") {
    const auto sp = cylinder_space();
    const double g[2][2] = {{0.3, 1.2}, {-0.7, -0.3}};
    const Field u = velocity_of(sp, [&](const Point& x) {
      return std::array<double, 2>{g[0][0] * x.x + g[0][1] * x.y, g[1][0] * x.x + g[1][1] * x.y};
    });
    const Field p = Field::zeros(sp, FieldKind::Pressure);
    const double nu = 0.01;
    double cd = 0.0, cl = 0.0;
    for (const auto& e : obstacle_edges(sp->mesh())) {
      const double len = std::hypot(e.b.x - e.a.x, e.b.y - e.a.y);
      const double n[2] = {-(e.b.y - e.a.y) / len, (e.b.x - e.a.x) / len};
      const double t[2] = {n[1], -n[0]};
      for (int i = 0; i < 2; ++i) {
        const double traction = 2.0 * nu * (g[i][0] * n[0] + g[i][1] * n[1]);
        cd += len * traction * t[i];
        cl += len * traction * n[i];
      }
    }
    const auto f = drag_lift(u, p, nu, 1.0, 0.1);
    CHECK(f.c_d == doctest::Approx(20.0 * cd).epsilon(1e-10));
    CHECK(f.c_l == doctest::Approx(20.0 * cl).epsilon(1e-10));
    CHECK(std::abs(f.c_d_ex) < 1e-12);
    CHECK(std::abs(f.c_l_ey) < 1e-12);
  }

  TEST_CASE("point location") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(5, 5, 0.25, 42));
    const PointLocator loc(sp->mesh_ptr());
    std::mt19937 rng(43);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const Point x{d(rng), d(rng)};
      const auto hit = loc.locate(x);
      REQUIRE(hit.has_value());
      const auto& l = hit->second;
      const auto& t = sp->mesh().triangles()[hit->first];
      const auto& v = sp->mesh().vertices();
      double px = 0.0, py = 0.0;
      for (int j = 0; j < 3; ++j) {
        CHECK(l[j] >= -1e-10);
        px += l[j] * v[t[j]].x;
        py += l[j] * v[t[j]].y;
      }
      CHECK(px == doctest::Approx(x.x).epsilon(1e-12));
      CHECK(py == doctest::Approx(x.y).epsilon(1e-12));
    }
    CHECK_FALSE(loc.locate({1.5, 0.5}).has_value());
    CHECK_FALSE(loc.locate({-0.01, 0.5}).has_value());
    const PointLocator cyl(cylinder_space()->mesh_ptr());
    CHECK_FALSE(cyl.locate({0.2, 0.2}).has_value());
  }

  TEST_CASE("cross-mesh projection") {
    const auto a = fixtures::space(fixtures::jittered_rectangle(4, 4, 0.2, 44));
    const auto b = fixtures::space(fixtures::jittered_rectangle(5, 3, 0.2, 45));
    std::mt19937 rng(46);

    const Field r = fixtures::random_velocity(a, rng);
    const auto same = fixtures::space(a->mesh_ptr());
    CHECK((cross_mesh_project(r, same).coeffs - r.coeffs).norm() < 1e-10 * r.coeffs.norm());

    const Field q = velocity_of(a, quadratic);
    CHECK((cross_mesh_project(q, b).coeffs - velocity_of(b, quadratic).coeffs).norm() < 1e-10);

    const auto coarse = fixtures::unit_square(2);
    const auto fine = fixtures::unit_square(4);
    const Field rc = fixtures::random_velocity(coarse, rng);
    const Field rf = cross_mesh_project(rc, fine);
    const PointLocator lc(coarse->mesh_ptr()), lf(fine->mesh_ptr());
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
      const Point x{d(rng), d(rng)};
      const auto vc = field_at(rc, lc, x);
      const auto vf = field_at(rf, lf, x);
      CHECK(vf[0] == doctest::Approx(vc[0]).epsilon(1e-10));
      CHECK(vf[1] == doctest::Approx(vc[1]).epsilon(1e-10));
    }

    const Field pb = cross_mesh_project(Field::pressure(a, Vector::Constant(a->n_pressure(), 0.7)), b);
    CHECK((pb.coeffs.array() - 0.7).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("line sampling") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(4, 4, 0.2, 47));
    const Field q = velocity_of(sp, quadratic);
    const auto s = line_sample(q, 0.37, 11);
    REQUIRE(s.size() == 11);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].x == doctest::Approx(0.1 * i).epsilon(1e-12));
      REQUIRE(s[i].magnitude.has_value());
      const auto v = quadratic({s[i].x, 0.37});
      CHECK(*s[i].magnitude == doctest::Approx(std::hypot(v[0], v[1])).epsilon(1e-10));
    }
    for (const auto& o : line_sample(q, 1.5, 5)) CHECK_FALSE(o.magnitude.has_value());

    const auto cyl = line_sample(Field::zeros(cylinder_space(), FieldKind::Velocity), 0.2, 221);
    for (const auto& o : cyl) {
      if (std::abs(o.x - 0.2) < 0.045) CHECK_FALSE(o.magnitude.has_value());
      if (std::abs(o.x - 0.2) > 0.05 + 1e-9) CHECK(o.magnitude.has_value());
    }
    CHECK_THROWS_AS(line_sample(q, 0.5, 0), Error);
  }

  TEST_CASE("recorder and CSV") {
    const auto sp = cylinder_space();
    const DiagnosticsRecorder rec(sp, 1e-3, 1.0, 0.1);
    const Field u = velocity_of(sp, [](const Point& x) { return std::array<double, 2>{x.y, 0.0}; });
    const Field p = Field::pressure(sp, Vector::Constant(sp->n_pressure(), 1.0));
    const Field ref = Field::velocity(sp, 2.0 * u.coeffs);
    DiagnosticsSeries series;
    series.records.push_back(rec.record(u, p));
    series.records.push_back(rec.record(u, p, &ref));
    CHECK(series.records[0].forces.has_value());
    CHECK_FALSE(series.records[0].e_u.has_value());
    CHECK(*series.records[1].e_u == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(series.records[0].energy == doctest::Approx(l2_norm(u) * l2_norm(u)).epsilon(1e-12));
    CHECK(series.records[0].div == doctest::Approx(divergence_norm(u)).epsilon(1e-12));

    const DiagnosticsRecorder plain(fixtures::unit_square(2), 1e-3);
    const auto r = plain.record(Field::zeros(fixtures::unit_square(2), FieldKind::Velocity),
                                Field::zeros(fixtures::unit_square(2), FieldKind::Pressure));
    CHECK_FALSE(r.forces.has_value());

    std::ostringstream os;
    series.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,energy,p_norm,div,C_D,C_L,C_D_ex,C_L_ey,E_u");
    int rows = 0;
    while (std::getline(is, line)) {
      ++rows;
      CHECK(std::count(line.begin(), line.end(), ',') == 8);
    }
    CHECK(rows == 2);
  }
}
