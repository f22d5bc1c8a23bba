#include <doctest.h>

#include <cmath>
#include <random>

#include "efvms/assembly.hpp"
#include "efvms/errors.hpp"
#include "efvms/quadrature.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace efvms;
using fixtures::random_velocity;
using fixtures::velocity_of;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

double relative_diff(const DenseMatrix& a, const DenseMatrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

// ∫ ĉ(w; u, z) by the degree-10 oracle.
double skew_convection_oracle(const Field& w, const Field& u, const Field& z) {
  const auto& sp = *w.space;
  return oracle::integrate(sp, [&](std::size_t k, const std::array<double, 3>& l, const Point&) {
    const auto wv = oracle::velocity_at(sp, w.coeffs, k, l);
    const auto uv = oracle::velocity_at(sp, u.coeffs, k, l);
    const auto zv = oracle::velocity_at(sp, z.coeffs, k, l);
    double c1 = 0.0, c2 = 0.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        c1 += wv.u[j] * uv.grad[i][j] * zv.u[i];
        c2 += wv.u[j] * zv.grad[i][j] * uv.u[i];
      }
    }
    return 0.5 * (c1 - c2);
  });
}

// Small-scale extraction with the P1 interpolant: zero at vertices, value minus edge average at midpoints.
DenseMatrix small_scale_oracle(const TaylorHoodSpace& sp) {
  const int nn = sp.n_nodes(), nv = sp.n_pressure();
  DenseMatrix s = DenseMatrix::Zero(2 * nn, 2 * nn);
  for (int c = 0; c < 2; ++c) {
    for (int i = nv; i < nn; ++i) {
      const auto ends = sp.edge_vertices(i);
      s(c * nn + i, c * nn + i) = 1.0;
      s(c * nn + i, c * nn + ends[0]) = -0.5;
      s(c * nn + i, c * nn + ends[1]) = -0.5;
    }
  }
  return s;
}

}  // namespace

TEST_SUITE("fem") {
  TEST_CASE("triangle rules are exact for monomials up to their degree") {
    for (int d = 1; d <= 6; ++d) {
      const auto& rule = triangle_rule(d);
      CHECK(rule.degree >= d);
      for (int a = 0; a <= d; ++a) {
        for (int b = 0; a + b <= d; ++b) {
          double s = 0.0;
          for (const auto& n : rule.nodes) s += n.weight * std::pow(n.xi, a) * std::pow(n.eta, b);
          // ∫_T̂ x^a y^b = a! b! / (a + b + 2)!, and T̂ has area ½.
          const double exact = 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2);
          CHECK(s == doctest::Approx(exact).epsilon(1e-13));
        }
      }
    }
    CHECK_THROWS_AS(triangle_rule(7), Error);
  }

  TEST_CASE("oracle rule is exact to degree 10") {
    const auto rule = oracle::duffy_rule(6);
    for (int a = 0; a <= 10; ++a) {
      for (int b = 0; a + b <= 10; ++b) {
        double s = 0.0;
        for (const auto& n : rule) s += n.weight * std::pow(n.l1, a) * std::pow(n.l2, b);
        CHECK(s == doctest::Approx(2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("space dimensions and Dirichlet dofs") {
    const auto sp = fixtures::unit_square(2);
    // 9 vertices + 16 edges.
    CHECK(sp->n_nodes() == 25);
    CHECK(sp->n_velocity() == 50);
    CHECK(sp->n_pressure() == 9);
    CHECK(sp->n_total() == 59);
    // Boundary: 8 vertices + 8 edge midpoints, two components.
    CHECK(sp->dirichlet_dofs().size() == 32);
    CHECK(sp->pressure_pin().has_value());
    const auto ch = fixtures::channel(4, 2);
    CHECK_FALSE(ch->pressure_pin().has_value());
    for (int d : ch->dirichlet_dofs()) {
      const int node = d % ch->n_nodes();
      const auto& x = ch->nodes()[node];
      // Outflow nodes are free except at the wall corners.
      CHECK((x.x < 2.2 || x.y == 0.0 || x.y == 0.41));
    }
  }

  TEST_CASE("field length is checked") {
    const auto sp = fixtures::unit_square(1);
    CHECK_THROWS_AS(Field::velocity(sp, Vector::Zero(3)), Error);
    CHECK_NOTHROW(Field::pressure(sp, Vector::Zero(sp->n_pressure())));
  }

  TEST_CASE("P1 mass on a single right triangle") {
    const std::vector<Point> v{{0, 0}, {1, 0}, {0, 1}};
    auto m = std::make_shared<const Mesh>(
        v, std::vector<std::array<int, 3>>{{0, 1, 2}},
        std::vector<BoundaryEdge>{{{0, 1}, BoundaryTag::Walls}, {{1, 2}, BoundaryTag::Walls}, {{2, 0}, BoundaryTag::Walls}});
    const TaylorHoodSpace sp(m);
    const DenseMatrix mass = assemble_mass(sp, FieldKind::Pressure).to_dense();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(mass(i, j) == doctest::Approx((i == j ? 2.0 : 1.0) * 0.5 / 12.0).epsilon(1e-14));
    }
  }

  TEST_CASE("velocity mass integrates one over the cylinder domain") {
    const auto sp = fixtures::space(std::make_shared<const Mesh>(build_cylinder_channel_mesh(0.08, 3.0)));
    const SparseMatrix m = assemble_mass(*sp, FieldKind::Velocity);
    const Field one = velocity_of(sp, [](const Point&) { return std::array<double, 2>{1.0, 0.0}; });
    CHECK(one.coeffs.dot(m.multiply(one.coeffs)) == doctest::Approx(sp->mesh().total_area()).epsilon(1e-10));
  }

  TEST_CASE("mass, stiffness and grad-div match the degree-10 oracle on a distorted mesh") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(3, 3, 0.25, 17));
    CHECK(relative_diff(assemble_mass(*sp, FieldKind::Velocity).to_dense(), oracle::velocity_mass(*sp)) < 1e-13);
    CHECK(relative_diff(assemble_stiffness(*sp, FieldKind::Velocity).to_dense(), oracle::velocity_stiffness(*sp)) < 1e-13);
    CHECK(relative_diff(assemble_graddiv(*sp, 2.5).to_dense(), 2.5 * oracle::velocity_graddiv(*sp)) < 1e-13);
    const DenseMatrix a = assemble_stiffness(*sp, FieldKind::Velocity).to_dense();
    CHECK((a - a.transpose()).norm() <= 1e-13 * a.norm());
  }

  TEST_CASE("stiffness: constants in the kernel, linear field energy") {
    const auto sp = fixtures::unit_square(3);
    const SparseMatrix a = assemble_stiffness(*sp, FieldKind::Velocity);
    const Field c = velocity_of(sp, [](const Point&) { return std::array<double, 2>{2.0, -1.0}; });
    CHECK(a.multiply(c.coeffs).norm() < 1e-12);
    const Field x = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x, 0.0}; });
    CHECK(x.coeffs.dot(a.multiply(x.coeffs)) == doctest::Approx(1.0).epsilon(1e-13));
    const SparseMatrix ap = assemble_stiffness(*sp, FieldKind::Pressure);
    CHECK(ap.multiply(Vector::Ones(sp->n_pressure())).norm() < 1e-12);
  }

  TEST_CASE("divergence form") {
    const auto sp = fixtures::unit_square(3);
    const SparseMatrix b = assemble_divergence(*sp);
    CHECK(b.rows() == static_cast<std::size_t>(sp->n_pressure()));
    const Field free = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x, -p.y}; });
    CHECK(b.multiply(free.coeffs).lpNorm<Eigen::Infinity>() < 1e-12);
    const Field stretch = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x, 0.0}; });
    CHECK(Vector::Ones(sp->n_pressure()).dot(b.multiply(stretch.coeffs)) == doctest::Approx(1.0).epsilon(1e-13));

    const auto dist = fixtures::space(fixtures::jittered_rectangle(3, 2, 0.25, 5));
    std::mt19937 rng(2);
    const Field u = random_velocity(dist, rng);
    const Field p = fixtures::random_pressure(dist, rng);
    const double ref = oracle::integrate(*dist, [&](std::size_t k, const std::array<double, 3>& l, const Point&) {
      const auto v = oracle::velocity_at(*dist, u.coeffs, k, l);
      return oracle::pressure_at(*dist, p.coeffs, k, l) * (v.grad[0][0] + v.grad[1][1]);
    });
    CHECK(p.coeffs.dot(assemble_divergence(*dist).multiply(u.coeffs)) == doctest::Approx(ref).epsilon(1e-12));
  }

  TEST_CASE("grad-div form") {
    const auto sp = fixtures::unit_square(3);
    CHECK(assemble_graddiv(*sp, 0.0).max_abs() == 0.0);
    const SparseMatrix g = assemble_graddiv(*sp, 1.0);
    const Field free = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x, -p.y}; });
    CHECK(std::abs(free.coeffs.dot(g.multiply(free.coeffs))) < 1e-12);
    const Field radial = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x, p.y}; });
    CHECK(radial.coeffs.dot(g.multiply(radial.coeffs)) == doctest::Approx(4.0).epsilon(1e-13));
  }

  TEST_CASE("quadratic forms are symmetric and positive semidefinite") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(3, 3, 0.2, 9));
    std::mt19937 rng(21);
    std::vector<double> nu_t(sp->mesh().n_triangles());
    for (auto& v : nu_t) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const SparseMatrix forms[] = {assemble_mass(*sp, FieldKind::Velocity), assemble_stiffness(*sp, FieldKind::Velocity),
                                  assemble_graddiv(*sp, 1.0),
                                  assemble_smagorinsky(*sp, nu_t, LocalSmallScaleOperator::nested_p1())};
    for (const auto& f : forms) {
      const DenseMatrix d = f.to_dense();
      CHECK((d - d.transpose()).norm() <= 1e-13 * d.norm());
      for (int i = 0; i < 10; ++i) {
        const Vector x = oracle::random_vector(rng, sp->n_velocity());
        CHECK(x.dot(f.multiply(x)) >= -1e-13 * d.norm() * x.squaredNorm());
      }
    }
  }

  TEST_CASE("skew convection: hand example and oracle") {
    const auto sp = fixtures::unit_square(2);
    const Field w = velocity_of(sp, [](const Point&) { return std::array<double, 2>{1.0, 0.0}; });
    const Field u = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x, 0.0}; });
    // c(w; u, z) with z = u: ∫ 1·1·x = ½; the skew form vanishes for this pair.
    const double c_full = oracle::integrate(*sp, [&](std::size_t, const std::array<double, 3>&, const Point& x) { return x.x; });
    CHECK(c_full == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(apply_convection(w, u).dot(u.coeffs)) < 1e-14);

    const auto dist = fixtures::space(fixtures::jittered_rectangle(3, 3, 0.25, 4));
    std::mt19937 rng(6);
    const Field a = random_velocity(dist, rng), b = random_velocity(dist, rng), z = random_velocity(dist, rng);
    CHECK(apply_convection(a, b).dot(z.coeffs) == doctest::Approx(skew_convection_oracle(a, b, z)).epsilon(1e-12));
    CHECK((assemble_convection(a).multiply(b.coeffs) - apply_convection(a, b)).norm() < 1e-13);
  }

  TEST_CASE("skew convection vanishes on equal slots") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(4, 4, 0.2, 8));
    std::mt19937 rng(10);
    for (int i = 0; i < 20; ++i) {
      const Field w = random_velocity(sp, rng), v = random_velocity(sp, rng);
      const double c = apply_convection(w, v).dot(v.coeffs);
      CHECK(std::abs(c) <= 1e-12 * w.coeffs.norm() * v.coeffs.squaredNorm());
    }
  }

  TEST_CASE("convection Jacobian matches central differences") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(3, 3, 0.2, 3));
    std::mt19937 rng(12);
    const Field w = random_velocity(sp, rng);
    const SparseMatrix j = assemble_convection_jacobian(w);
    auto f = [&](const Vector& x) {
      const Field xf = Field::velocity(sp, x);
      return apply_convection(xf, xf);
    };
    for (int i = 0; i < 3; ++i) {
      const Vector d = oracle::random_vector(rng, sp->n_velocity());
      const Vector fd = oracle::central_difference(f, w.coeffs, d, 1e-7);
      const Vector jd = j.multiply(d);
      CHECK((fd - jd).norm() <= 1e-6 * jd.norm());
    }
  }

  TEST_CASE("eddy viscosity") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(3, 3, 0.2, 13));
    const Field c = velocity_of(sp, [](const Point&) { return std::array<double, 2>{3.0, 1.0}; });
    for (double v : eddy_viscosity(c, 0.1)) CHECK(std::abs(v) < 1e-14);
    const Field shear = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.y, 0.0}; });
    const auto nu = eddy_viscosity(shear, 0.1);
    const auto& h = sp->mesh().element_diameters();
    for (std::size_t k = 0; k < nu.size(); ++k) CHECK(nu[k] == doctest::Approx(0.01 * h[k] * h[k]).epsilon(1e-12));

    std::mt19937 rng(14);
    const Field r = random_velocity(sp, rng);
    const auto nr = eddy_viscosity(r, 0.2);
    for (std::size_t k = 0; k < nr.size(); ++k) {
      std::array<std::array<double, 2>, 2> mean{};
      const auto rule = oracle::duffy_rule(6);
      for (const auto& q : rule) {
        const auto v = oracle::velocity_at(*sp, r.coeffs, k, {1.0 - q.l1 - q.l2, q.l1, q.l2});
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) mean[a][b] += q.weight * v.grad[a][b];
        }
      }
      const double fro = std::sqrt(mean[0][0] * mean[0][0] + mean[0][1] * mean[0][1] + mean[1][0] * mean[1][0] +
                                   mean[1][1] * mean[1][1]);
      CHECK(nr[k] == doctest::Approx(0.04 * h[k] * h[k] * fro).epsilon(1e-12));
    }
  }

  TEST_CASE("Smagorinsky form") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(3, 3, 0.2, 15));
    const auto op = LocalSmallScaleOperator::nested_p1();
    std::vector<double> zero(sp->mesh().n_triangles(), 0.0);
    CHECK(assemble_smagorinsky(*sp, zero, op).max_abs() == 0.0);

    std::mt19937 rng(16);
    std::vector<double> nu_t(sp->mesh().n_triangles());
    for (auto& v : nu_t) v = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    const SparseMatrix as = assemble_smagorinsky(*sp, nu_t, op);
    // A field that is P1 on every element has no small scales.
    const Field large = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{2.0 * p.x - p.y, p.y + 1.0}; });
    CHECK(as.multiply(large.coeffs).norm() < 1e-12);

    const DenseMatrix s = small_scale_oracle(*sp);
    CHECK((small_scale_matrix(*sp, op).to_dense() - s).norm() == 0.0);
    const DenseMatrix weighted = oracle::assemble_velocity_form(
        *sp, [&](double, const auto& ga, int ca, double, const auto& gb, int cb, std::size_t k, const Point&) {
          return ca == cb ? nu_t[k] * (ga[0] * gb[0] + ga[1] * gb[1]) : 0.0;
        });
    CHECK(relative_diff(assemble_weighted_stiffness(*sp, nu_t).to_dense(), weighted) < 1e-13);
    CHECK(relative_diff(as.to_dense(), s.transpose() * weighted * s) < 1e-13);
  }

  TEST_CASE("Smagorinsky linearization matches central differences") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(3, 3, 0.2, 18));
    std::mt19937 rng(19);
    const Field u = random_velocity(sp, rng);
    const auto op = LocalSmallScaleOperator::nested_p1();
    const auto lin = smagorinsky_linearization(u, 0.1, op);
    const auto s = small_scale_matrix(*sp, op);
    const Field small = Field::velocity(sp, s.multiply(u.coeffs));
    const auto nu = eddy_viscosity(small, 0.1);
    for (std::size_t k = 0; k < nu.size(); ++k) CHECK(lin.nu_t[k] == doctest::Approx(nu[k]).epsilon(1e-12));
    CHECK((lin.residual - assemble_smagorinsky(*sp, nu, op).multiply(u.coeffs)).norm() <= 1e-12 * lin.residual.norm());
    auto f = [&](const Vector& x) { return smagorinsky_linearization(Field::velocity(sp, x), 0.1, op).residual; };
    for (int i = 0; i < 3; ++i) {
      const Vector d = oracle::random_vector(rng, sp->n_velocity());
      const Vector fd = oracle::central_difference(f, u.coeffs, d, 1e-7);
      const Vector jd = lin.jacobian.multiply(d);
      CHECK((fd - jd).norm() <= 1e-6 * jd.norm());
    }
  }

  TEST_CASE("Dirichlet elimination") {
    const auto sp = fixtures::unit_square(4);
    SparseMatrix a = assemble_stiffness(*sp, FieldKind::Velocity);
    Vector rhs = Vector::Zero(sp->n_velocity());
    CHECK_THROWS_WITH_AS(apply_dirichlet(a, rhs, *sp, Vector::Zero(3)), doctest::Contains("missing Dirichlet"), Error);

    // Harmonic extension of linear data is the data itself.
    const auto bc = BoundaryData::everywhere([](const Point& p, double) { return std::array<double, 2>{p.x, 2.0 * p.y - p.x}; });
    a = assemble_stiffness(*sp, FieldKind::Velocity);
    rhs.setZero();
    apply_dirichlet(a, rhs, *sp, bc.dof_values(*sp, 0.0));
    const DenseMatrix d = a.to_dense();
    const auto free = oracle::kept(sp->dirichlet_mask(), false);
    CHECK((oracle::submatrix(d, free, free) - oracle::submatrix(d, free, free).transpose()).norm() < 1e-13);
    const Vector x = SparseLU(a).solve(rhs);
    const Field exact = velocity_of(sp, [](const Point& p) { return std::array<double, 2>{p.x, 2.0 * p.y - p.x}; });
    CHECK((x - exact.coeffs).lpNorm<Eigen::Infinity>() < 1e-10);
    for (int dof : sp->dirichlet_dofs()) CHECK(x[dof] == exact.coeffs[dof]);
  }

  TEST_CASE("inlet parabola is reproduced at every node") {
    const auto sp = fixtures::channel(6, 4);
    const auto bc = BoundaryData::channel_parabola(0.41);
    CHECK(bc.value(BoundaryTag::Inlet, {0.0, 0.205}, 0.0)[0] == doctest::Approx(1.5).epsilon(1e-15));
    const Vector g = bc.dof_values(*sp, 0.0);
    const auto& dofs = sp->dirichlet_dofs();
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      const int node = dofs[i] % sp->n_nodes();
      const auto& p = sp->nodes()[node];
      const bool x_comp = dofs[i] < sp->n_nodes();
      double expect = 0.0;
      if (x_comp && p.x == 0.0) expect = 6.0 * p.y * (0.41 - p.y) / (0.41 * 0.41);
      CHECK(g[static_cast<Eigen::Index>(i)] == doctest::Approx(expect).epsilon(1e-15));
    }
  }
}
