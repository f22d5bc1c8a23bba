#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "efvms/errors.hpp"
#include "efvms/rom.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace efvms;

namespace {

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

struct ChannelRun {
  OperatorsPtr ops;
  BoundaryData bc;
  SnapshotSet snapshots;
};

// Ten unfiltered steps of channel flow from rest, one snapshot per step.
const ChannelRun& channel_run() {
  static const ChannelRun run = [] {
    ChannelRun r;
    r.ops = Operators::build(fixtures::channel(10, 4));
    r.bc = BoundaryData::channel_parabola(0.41);
    StrategyConfig c;
    c.strategy = Strategy::Unfiltered;
    c.nu = 1e-2;
    c.dt = 2e-2;
    c.t_final = 0.2;
    c.n_snapshots = 10;
    c.evolve.newton_tol = 1e-11;
    r.snapshots = efvms::run(c, Problem::at_rest(r.ops, r.bc)).snapshots;
    return r;
  }();
  return run;
}

std::shared_ptr<const ReducedOperators> reduced(const ReducedBasis& b, const Operators& ops) {
  return std::make_shared<const ReducedOperators>(project_operators(b, ops));
}

RomConfig rom_config(const ReducedBasis& b) {
  RomConfig c;
  c.nu = 1e-2;
  c.dt = 2e-2;
  c.delta = c.delta1 = 0.2;
  c.delta2 = 0.1;
  c.gamma_d = 1.0;
  c.r_u = b.r_u;
  c.r_bar_u = b.r_u / 2;
  c.newton_tol = 1e-12;
  return c;
}

}  // namespace

TEST_SUITE("rom") {
  TEST_CASE("POD agrees with the weighted SVD") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(3, 3, 0.2, 31));
    const auto ops = Operators::build(sp);
    std::mt19937 rng(32);
    const int m = 8;
    DenseMatrix y(sp->n_velocity(), m);
    for (int j = 0; j < m; ++j) y.col(j) = oracle::random_vector(rng, sp->n_velocity());
    const DenseMatrix g = oracle::velocity_mass(*sp);
    const Eigen::LLT<DenseMatrix> llt(g);
    const DenseMatrix lty = DenseMatrix(llt.matrixU()) * y;
    const Eigen::JacobiSVD<DenseMatrix> svd(lty, Eigen::ComputeThinU);

    const int r = 5;
    const PodResult res = pod(y, r, ops->mass);
    REQUIRE(res.eigenvalues.size() == m);
    for (int i = 0; i < m; ++i) {
      CHECK(res.eigenvalues[i] == doctest::Approx(svd.singularValues()[i] * svd.singularValues()[i]).epsilon(1e-10));
    }
    const DenseMatrix gram = res.modes.transpose() * g * res.modes;
    CHECK((gram - DenseMatrix::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-10);
    const DenseMatrix overlap = (DenseMatrix(llt.matrixU()) * res.modes).transpose() * svd.matrixU().leftCols(r);
    CHECK((overlap.cwiseAbs() - DenseMatrix::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-8);

    double err = 0.0, tail = 0.0, total = 0.0;
    for (int j = 0; j < m; ++j) {
      const Vector e = y.col(j) - res.modes * (res.modes.transpose() * (g * y.col(j)));
      err += e.dot(g * e);
    }
    for (int i = 0; i < m; ++i) (i >= r ? tail : total) += res.eigenvalues[i];
    CHECK(err == doctest::Approx(tail).epsilon(1e-9));
    CHECK(res.energy_fraction == doctest::Approx(total / (total + tail)).epsilon(1e-12));

    CHECK_THROWS_AS(pod(y, 0, ops->mass), Error);
    CHECK_THROWS_AS(pod(y, m + 1, ops->mass), Error);
    DenseMatrix dup(sp->n_velocity(), 3);
    dup << y.col(0), y.col(1), 2.0 * y.col(0) - y.col(1);
    CHECK(achievable_rank(pod(dup, 1, ops->mass).eigenvalues) == 2);
    CHECK_THROWS_AS(pod(dup, 3, ops->mass), Error);
  }

  TEST_CASE("supremizer") {
    const auto sp = fixtures::space(fixtures::jittered_rectangle(4, 4, 0.2, 33));
    const auto ops = Operators::build(sp);
    std::mt19937 rng(34);
    const Field p = fixtures::random_pressure(sp, rng);
    const Field s = supremizer(p, *ops);
    for (int d : sp->dirichlet_dofs()) CHECK(s.coeffs[d] == 0.0);
    const DenseMatrix u = oracle::velocity_stiffness(*sp) + oracle::velocity_mass(*sp);
    const Vector bp = ops->divergence.multiply_transpose(p.coeffs);
    for (int trial = 0; trial < 5; ++trial) {
      Vector tau = oracle::random_vector(rng, sp->n_velocity());
      for (int d : sp->dirichlet_dofs()) tau[d] = 0.0;
      CHECK(tau.dot(u * s.coeffs) == doctest::Approx(tau.dot(bp)).epsilon(1e-10));
    }
    const Field one = Field::pressure(sp, Vector::Ones(sp->n_pressure()));
    CHECK(supremizer(one, *ops).coeffs.cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(supremizer(fixtures::random_velocity(sp, rng), *ops), Error);
  }

  TEST_CASE("lifts") {
    const auto& run = channel_run();
    const auto& sp = *run.ops->space;
    const Vector stokes = make_lift(LiftKind::Stokes, run.snapshots, run.ops, run.bc, 1e-2);
    const Vector g = run.bc.dof_values(sp, 0.0);
    for (std::size_t i = 0; i < sp.dirichlet_dofs().size(); ++i) {
      CHECK(stokes[sp.dirichlet_dofs()[i]] == doctest::Approx(g[static_cast<Eigen::Index>(i)]).epsilon(1e-12));
    }
    CHECK(make_lift(LiftKind::FirstSnapshot, run.snapshots, run.ops, run.bc, 1e-2) ==
          run.snapshots.snapshots.front().u.coeffs);
    CHECK_THROWS_AS(make_lift(LiftKind::Stokes, run.snapshots, run.ops, BoundaryData::channel_parabola(0.41, 1.0, 1.0), 1e-2),
                    ConfigError);
  }

  TEST_CASE("basis structure") {
    const auto& run = channel_run();
    const auto& ops = *run.ops;
    const Vector lift = make_lift(LiftKind::Stokes, run.snapshots, run.ops, run.bc, 1e-2);
    const ReducedBasis b = build_basis(run.snapshots, ops, 4, 3, 3, lift);
    CHECK(b.r_us() == 7);
    CHECK(b.velocity.cols() == 7);
    CHECK(b.pressure.cols() == 3);
    const DenseMatrix mu = b.velocity.leftCols(4).transpose() * multiply(ops.mass, b.velocity.leftCols(4));
    CHECK((mu - DenseMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    const DenseMatrix mp = b.pressure.transpose() * multiply(ops.pressure_mass, b.pressure);
    CHECK((mp - DenseMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    for (int d : ops.space->dirichlet_dofs()) CHECK(b.velocity.row(d).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(build_basis(run.snapshots, ops, 4, 3, 3, Vector::Zero(5)), Error);
    CHECK_THROWS_AS(build_basis(SnapshotSet{}, ops, 1, 0, 1, lift), Error);
    CHECK_THROWS_AS(build_basis(run.snapshots, ops, 11, 0, 1, lift), Error);
  }

  TEST_CASE("reduced operators") {
    const auto& run = channel_run();
    const auto& ops = *run.ops;
    const auto sp = ops.space;
    const ReducedBasis b = build_basis(run.snapshots, ops, 4, 3, 3, make_lift(LiftKind::Stokes, run.snapshots, run.ops, run.bc, 1e-2));
    const ReducedOperators o = project_operators(b, ops);
    const int r = b.r_us();
    const DenseMatrix m = oracle::velocity_mass(*sp);
    CHECK((o.mass - b.velocity.transpose() * m * b.velocity).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((o.stiffness - b.velocity.transpose() * oracle::velocity_stiffness(*sp) * b.velocity).cwiseAbs().maxCoeff() <
          1e-9 * o.stiffness.cwiseAbs().maxCoeff());
    double scale = 0.0;
    for (double v : o.tensor) scale = std::max(scale, std::abs(v));
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < r; ++j) {
        for (int k = 0; k < r; ++k) CHECK(std::abs(o.c(i, j, k) + o.c(i, k, j)) < 1e-12 * scale);
      }
    }
    const Field phi1 = Field::velocity(sp, b.velocity.col(1));
    const Field phi2 = Field::velocity(sp, b.velocity.col(2));
    const Vector c12 = apply_convection(phi1, phi2);
    for (int k = 0; k < r; ++k) CHECK(o.c(1, 2, k) == doctest::Approx(b.velocity.col(k).dot(c12)).epsilon(1e-10));
    const Field lift = Field::velocity(sp, b.lift);
    CHECK(o.conv_lift_both[3] == doctest::Approx(b.velocity.col(3).dot(apply_convection(lift, lift))).epsilon(1e-10));
    CHECK(o.conv_lift_convecting(3, 1) == doctest::Approx(b.velocity.col(3).dot(apply_convection(lift, phi1))).epsilon(1e-10));
    CHECK(o.conv_lift_convected(3, 1) == doctest::Approx(b.velocity.col(3).dot(apply_convection(phi1, lift))).epsilon(1e-10));
  }

  TEST_CASE("reduced Jacobian matches finite differences") {
    const auto& run = channel_run();
    const ReducedBasis b = build_basis(run.snapshots, *run.ops, 4, 3, 3,
                                       make_lift(LiftKind::Stokes, run.snapshots, run.ops, run.bc, 1e-2));
    const RomStepper stepper(reduced(b, *run.ops), rom_config(b));
    std::mt19937 rng(35);
    const Vector x = oracle::random_vector(rng, b.r_us() + b.r_p);
    const Vector prev = oracle::random_vector(rng, b.r_us());
    const auto [res, jac] = stepper.residual_and_jacobian(x, prev);
    auto f = [&](const Vector& z) { return stepper.residual_and_jacobian(z, prev).first; };
    for (int t = 0; t < 3; ++t) {
      const Vector d = oracle::random_vector(rng, static_cast<int>(x.size()));
      CHECK(rel(jac * d, oracle::central_difference(f, x, d, 1e-6)) < 1e-7);
    }
  }

  TEST_CASE("single-mode filter is a scalar division") {
    const auto& run = channel_run();
    const ReducedBasis b = build_basis(run.snapshots, *run.ops, 1, 0, 1,
                                       make_lift(LiftKind::Stokes, run.snapshots, run.ops, run.bc, 1e-2));
    const auto o = reduced(b, *run.ops);
    const RomConfig c = rom_config(b);
    const RomStepper stepper(o, c);
    const Vector a = Vector::Constant(1, 0.7);
    const double k = c.delta * c.delta * o->stiffness(0, 0) + o->mass(0, 0) + c.gamma_d * o->graddiv(0, 0);
    CHECK(stepper.filter_homogeneous(a, c.delta)[0] == doctest::Approx(o->mass(0, 0) * 0.7 / k).epsilon(1e-13));
    const double large = (o->mass(0, 0) * 0.7 - c.delta * c.delta * o->stiffness_lift[0] - c.gamma_d * o->graddiv_lift[0]) / k;
    CHECK(stepper.filter_large(a, c.delta)[0] == doctest::Approx(large).epsilon(1e-13));
  }

  TEST_CASE("reduced strategies") {
    const auto& run = channel_run();
    const ReducedBasis b = build_basis(run.snapshots, *run.ops, 4, 3, 3,
                                       make_lift(LiftKind::Stokes, run.snapshots, run.ops, run.bc, 1e-2));
    const auto o = reduced(b, *run.ops);
    const auto& last = run.snapshots.snapshots.back();
    const ReducedState s0 = project_state(last.u, last.p, b, *run.ops);

    RomConfig c = rom_config(b);
    const RomStepper stepper(o, c);
    const ReducedState w = stepper.evolve(s0);
    CHECK(w.t == doctest::Approx(s0.t + c.dt));
    CHECK(rel(grom_step(s0, stepper).a_u, w.a_u) == 0.0);
    CHECK(rel(efrom_step(s0, stepper).a_u, stepper.filter_large(w.a_u, c.delta)) < 1e-14);
    const Vector large = stepper.filter_large(w.a_u, c.delta1);
    CHECK(rel(effc_rom_step(s0, stepper).a_u, large + stepper.filter_homogeneous(w.a_u - large, c.delta2)) < 1e-13);
    Vector small = Vector::Zero(b.r_us());
    for (int i = c.r_bar_u; i < c.r_u; ++i) small[i] = w.a_u[i];
    CHECK(rel(epfc_rom_step(s0, stepper).a_u, w.a_u - small + stepper.filter_homogeneous(small, c.delta)) < 1e-13);

    RomConfig z = c;
    z.delta = z.delta1 = z.delta2 = 0.0;
    z.gamma_d = 0.0;
    const RomStepper zero(o, z);
    for (RomStrategy s : {RomStrategy::EF, RomStrategy::EFFC, RomStrategy::EPFC}) {
      CHECK(rel(zero.step(s, s0).a_u, w.a_u) < 1e-10);
    }
    RomConfig full = c;
    full.r_bar_u = full.r_u;
    CHECK(rel(RomStepper(o, full).step(RomStrategy::EPFC, s0).a_u, w.a_u) == 0.0);
    full.r_bar_u = full.r_u + 1;
    CHECK_THROWS_AS(RomStepper(o, full).step(RomStrategy::EPFC, s0), ConfigError);

    const auto traj = rom_run(RomStrategy::EFFC, stepper, s0, 3);
    REQUIRE(traj.size() == 4);
    CHECK(traj[3].t == doctest::Approx(s0.t + 3 * c.dt));
  }

  TEST_CASE("expand and project are inverse on the basis") {
    const auto& run = channel_run();
    const ReducedBasis b = build_basis(run.snapshots, *run.ops, 4, 3, 3,
                                       make_lift(LiftKind::Stokes, run.snapshots, run.ops, run.bc, 1e-2));
    std::mt19937 rng(36);
    ReducedState s{oracle::random_vector(rng, b.r_us()), oracle::random_vector(rng, b.r_p), 0.5};
    const auto [u, p] = expand(s, b, run.ops->space);
    CHECK(u.time == 0.5);
    const ReducedState back = project_state(u, p, b, *run.ops);
    CHECK(rel(back.a_u, s.a_u) < 1e-9);
    CHECK(rel(back.a_p, s.a_p) < 1e-9);
    CHECK_THROWS_AS(expand(ReducedState{Vector::Zero(2), s.a_p, 0.0}, b, run.ops->space), Error);
  }

  TEST_CASE("names") {
    for (RomStrategy s : {RomStrategy::Galerkin, RomStrategy::EF, RomStrategy::EFFC, RomStrategy::EPFC}) {
      CHECK(rom_strategy_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(rom_strategy_from_string("pod"), ConfigError);
  }
}
