#include "efvms/rom.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "efvms/errors.hpp"

namespace efvms {

namespace {

// (A + M) on homogeneous-Dirichlet velocities, factored once.
class SupremizerSolver {
 public:
  explicit SupremizerSolver(const Operators& ops) : ops_(ops), lu_(constrained(ops)) {}

  Vector solve(const Vector& p) const {
    Vector rhs = ops_.divergence.multiply_transpose(p);
    for (int d : ops_.space->dirichlet_dofs()) rhs[d] = 0.0;
    return lu_.solve(rhs);
  }

 private:
  static SparseMatrix constrained(const Operators& ops) {
    SparseMatrix u = ops.stiffness;
    u.axpy(1.0, ops.mass);
    Vector dummy = Vector::Zero(static_cast<Eigen::Index>(u.rows()));
    apply_dirichlet(u, dummy, ops.space->dirichlet_dofs(), Vector::Zero(static_cast<Eigen::Index>(ops.space->dirichlet_dofs().size())));
    return u;
  }

  const Operators& ops_;
  SparseLU lu_;
};

SparseMatrix u_product(const Operators& ops) {
  SparseMatrix u = ops.stiffness;
  u.axpy(1.0, ops.mass);
  return u;
}

}  // namespace

int achievable_rank(const Vector& eigenvalues) {
  if (eigenvalues.size() == 0 || !(eigenvalues[0] > 0.0)) return 0;
  int r = 0;
  while (r < eigenvalues.size() && eigenvalues[r] > kRankTolerance * eigenvalues[0]) ++r;
  return r;
}

PodResult pod(const DenseMatrix& y, int r, const SparseMatrix& gramian) {
  const int m = static_cast<int>(y.cols());
  if (r < 1 || r > m) {
    throw Error("POD rank " + std::to_string(r) + " outside [1, " + std::to_string(m) + "] snapshots");
  }
  if (static_cast<Eigen::Index>(gramian.rows()) != y.rows()) throw Error("POD Gramian dimension mismatch");
  const DenseMatrix gy = multiply(gramian, y);
  DenseMatrix c = y.transpose() * gy;
  c = 0.5 * (c + c.transpose()).eval();
  const auto eig = symmetric_eig(c);
  PodResult out;
  out.eigenvalues = eig.values;
  const int rank = achievable_rank(eig.values);
  if (r > rank) {
    throw Error("POD rank " + std::to_string(r) + " requested but the snapshots have numerical rank " +
                std::to_string(rank));
  }
  out.modes.resize(y.rows(), r);
  for (int i = 0; i < r; ++i) out.modes.col(i) = y * eig.vectors.col(i) / std::sqrt(eig.values[i]);
  double total = 0.0, kept = 0.0;
  for (int i = 0; i < eig.values.size(); ++i) {
    const double l = std::max(eig.values[i], 0.0);
    total += l;
    if (i < r) kept += l;
  }
  out.energy_fraction = total > 0.0 ? kept / total : 1.0;
  return out;
}

Field supremizer(const Field& p, const Operators& ops) {
  p.check();
  if (p.kind != FieldKind::Pressure) throw Error("supremizer needs a pressure field");
  if (p.space != ops.space) throw Error("supremizer: pressure on a different space");
  return Field::velocity(ops.space, SupremizerSolver(ops).solve(p.coeffs), p.time);
}

Vector make_lift(LiftKind kind, const SnapshotSet& snapshots, const OperatorsPtr& ops, const BoundaryData& bc,
                 double nu) {
  if (bc.time_dependent()) throw ConfigError("reduced models need time-independent Dirichlet data");
  if (kind == LiftKind::FirstSnapshot) {
    if (snapshots.snapshots.empty()) throw Error("no snapshot to use as lift");
    return snapshots.snapshots.front().u.coeffs;
  }
  return solve_stokes(ops, bc, 0.0, nu).first.coeffs;
}

ReducedBasis build_basis(const SnapshotSet& snapshots, const Operators& ops, int r_u, int r_s, int r_p, Vector lift) {
  snapshots.check();
  const int m = static_cast<int>(snapshots.size());
  if (m == 0) throw Error("empty snapshot set");
  if (r_s < 0 || r_u < 1 || r_p < 1) throw Error("basis ranks must be positive (r_s may be zero)");
  const auto& sp = *ops.space;
  if (lift.size() != sp.n_velocity()) throw Error("lift has wrong dimension");
  DenseMatrix yu(sp.n_velocity(), m), yp(sp.n_pressure(), m);
  for (int i = 0; i < m; ++i) {
    yu.col(i) = snapshots.snapshots[i].u.coeffs - lift;
    yp.col(i) = snapshots.snapshots[i].p.coeffs;
  }
  ReducedBasis b;
  b.r_u = r_u;
  b.r_s = r_s;
  b.r_p = r_p;
  b.lift = std::move(lift);
  auto pu = pod(yu, r_u, ops.mass);
  auto pp = pod(yp, r_p, ops.pressure_mass);
  b.velocity_eigenvalues = pu.eigenvalues;
  b.pressure_eigenvalues = pp.eigenvalues;
  b.velocity.resize(sp.n_velocity(), r_u + r_s);
  b.velocity.leftCols(r_u) = pu.modes;
  if (r_s > 0) {
    SupremizerSolver solver(ops);
    DenseMatrix ys(sp.n_velocity(), m);
    for (int i = 0; i < m; ++i) ys.col(i) = solver.solve(yp.col(i));
    auto ps = pod(ys, r_s, u_product(ops));
    b.supremizer_eigenvalues = ps.eigenvalues;
    b.velocity.rightCols(r_s) = ps.modes;
    const DenseMatrix g = b.velocity.transpose() * multiply(ops.mass, b.velocity);
    const auto eig = symmetric_eig(0.5 * (g + g.transpose()));
    const int rank = achievable_rank(eig.values);
    if (rank < r_u + r_s) {
      throw Error("velocity and supremizer modes are linearly dependent: achievable rank " + std::to_string(rank) +
                  " of " + std::to_string(r_u + r_s));
    }
  }
  b.pressure = pp.modes;
  return b;
}

ReducedOperators project_operators(const ReducedBasis& basis, const Operators& ops) {
  const DenseMatrix& phi = basis.velocity;
  const Vector& l = basis.lift;
  const int r = basis.r_us();
  ReducedOperators o;
  o.r_us = r;
  o.r_p = basis.r_p;
  o.mass = phi.transpose() * multiply(ops.mass, phi);
  o.stiffness = phi.transpose() * multiply(ops.stiffness, phi);
  o.graddiv = phi.transpose() * multiply(ops.graddiv, phi);
  o.divergence = basis.pressure.transpose() * multiply(ops.divergence, phi);
  o.mass_lift = phi.transpose() * ops.mass.multiply(l);
  o.stiffness_lift = phi.transpose() * ops.stiffness.multiply(l);
  o.graddiv_lift = phi.transpose() * ops.graddiv.multiply(l);
  o.divergence_lift = basis.pressure.transpose() * ops.divergence.multiply(l);

  const SparseMatrix cl = assemble_convection(Field::velocity(ops.space, l));
  o.conv_lift_convecting = phi.transpose() * multiply(cl, phi);
  o.conv_lift_both = phi.transpose() * cl.multiply(l);
  o.conv_lift_convected.resize(r, r);
  o.tensor.assign(static_cast<std::size_t>(r) * r * r, 0.0);
  for (int i = 0; i < r; ++i) {
    const SparseMatrix ci = assemble_convection(Field::velocity(ops.space, phi.col(i)));
    const DenseMatrix slice = phi.transpose() * multiply(ci, phi);  // [k][j]
    for (int j = 0; j < r; ++j) {
      for (int k = 0; k < r; ++k) o.tensor[(static_cast<std::size_t>(i) * r + j) * r + k] = slice(k, j);
    }
    o.conv_lift_convected.col(i) = phi.transpose() * ci.multiply(l);
  }
  return o;
}

std::string to_string(RomStrategy s) {
  switch (s) {
    case RomStrategy::Galerkin:
      return "g-rom";
    case RomStrategy::EF:
      return "ef-rom";
    case RomStrategy::EFFC:
      return "effc-rom";
    case RomStrategy::EPFC:
      return "epfc-rom";
  }
  return "unknown";
}

RomStrategy rom_strategy_from_string(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (RomStrategy s : {RomStrategy::Galerkin, RomStrategy::EF, RomStrategy::EFFC, RomStrategy::EPFC}) {
    if (to_string(s) == n) return s;
  }
  throw ConfigError("unknown reduced strategy '" + name + "'");
}

RomStepper::RomStepper(std::shared_ptr<const ReducedOperators> ops, RomConfig cfg) : ops_(std::move(ops)), cfg_(cfg) {
  if (!(cfg_.nu > 0.0) || !(cfg_.dt > 0.0)) throw ConfigError("reduced model needs positive viscosity and time step");
  if (!(cfg_.newton_tol > 0.0) || cfg_.newton_max_iter < 1) throw ConfigError("invalid reduced Newton settings");
  if (cfg_.r_u < 0 || cfg_.r_u > ops_->r_us) throw ConfigError("r_u exceeds the reduced velocity dimension");
  for (double d : {cfg_.delta, cfg_.delta1, cfg_.delta2}) {
    if (d < 0.0) throw ConfigError("filter radii must be non-negative");
    if (!filters_.count(d)) filters_.emplace(d, factor_filter(d));
  }
}

Eigen::PartialPivLU<DenseMatrix> RomStepper::factor_filter(double delta) const {
  const DenseMatrix k = delta * delta * ops_->stiffness + ops_->mass + cfg_.gamma_d * ops_->graddiv;
  return Eigen::PartialPivLU<DenseMatrix>(k);
}

Vector RomStepper::solve_filter(double delta, const Vector& rhs) const {
  const auto it = filters_.find(delta);
  if (it != filters_.end()) return it->second.solve(rhs);
  return factor_filter(delta).solve(rhs);
}

Vector RomStepper::filter_large(const Vector& a, double delta) const {
  const Vector rhs = ops_->mass * a - delta * delta * ops_->stiffness_lift - cfg_.gamma_d * ops_->graddiv_lift;
  return solve_filter(delta, rhs);
}

Vector RomStepper::filter_homogeneous(const Vector& a, double delta) const {
  return solve_filter(delta, ops_->mass * a);
}

std::pair<Vector, DenseMatrix> RomStepper::residual_and_jacobian(const Vector& x, const Vector& a_prev) const {
  const auto& o = *ops_;
  const int r = o.r_us, rp = o.r_p;
  if (x.size() != r + rp || a_prev.size() != r) throw Error("reduced state has wrong dimension");
  const Vector a = x.head(r);
  const Vector ap = x.tail(rp);
  // n[j][k] = Σ_i a_i c_ijk ; q[i][k] = Σ_j a_j c_ijk
  DenseMatrix n = DenseMatrix::Zero(r, r), q = DenseMatrix::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      const double* t = &o.tensor[(static_cast<std::size_t>(i) * r + j) * r];
      for (int k = 0; k < r; ++k) {
        n(j, k) += a[i] * t[k];
        q(i, k) += a[j] * t[k];
      }
    }
  }
  Vector res(r + rp);
  Vector conv = o.conv_lift_both + o.conv_lift_convecting * a + o.conv_lift_convected * a + n.transpose() * a;
  res.head(r) = o.mass * (a - a_prev) / cfg_.dt + cfg_.nu * (o.stiffness * a + o.stiffness_lift) + conv -
                o.divergence.transpose() * ap;
  res.tail(rp) = -(o.divergence * a + o.divergence_lift);
  DenseMatrix jac = DenseMatrix::Zero(r + rp, r + rp);
  jac.topLeftCorner(r, r) = o.mass / cfg_.dt + cfg_.nu * o.stiffness + o.conv_lift_convecting + o.conv_lift_convected +
                            q.transpose() + n.transpose();
  jac.topRightCorner(r, rp) = -o.divergence.transpose();
  jac.bottomLeftCorner(rp, r) = -o.divergence;
  return {res, jac};
}

ReducedState RomStepper::evolve(const ReducedState& s) const {
  const int r = ops_->r_us, rp = ops_->r_p;
  Vector x(r + rp);
  x << s.a_u, s.a_p;
  for (int it = 1;; ++it) {
    auto [res, jac] = residual_and_jacobian(x, s.a_u);
    const double norm = res.norm();
    if (!std::isfinite(norm)) throw ConvergenceError("reduced Newton diverged", norm);
    if (norm <= cfg_.newton_tol) break;
    if (it > cfg_.newton_max_iter) throw ConvergenceError("reduced Newton did not converge", norm);
    x -= Eigen::PartialPivLU<DenseMatrix>(jac).solve(res);
  }
  return {x.head(r), x.tail(rp), s.t + cfg_.dt};
}

ReducedState RomStepper::step(RomStrategy strategy, const ReducedState& s) const {
  ReducedState w = evolve(s);
  switch (strategy) {
    case RomStrategy::Galerkin:
      break;
    case RomStrategy::EF:
      w.a_u = filter_large(w.a_u, cfg_.delta);
      break;
    case RomStrategy::EFFC: {
      const Vector large = filter_large(w.a_u, cfg_.delta1);
      const Vector small = w.a_u - large;
      w.a_u = large + filter_homogeneous(small, cfg_.delta2);
      break;
    }
    case RomStrategy::EPFC: {
      if (cfg_.r_bar_u < 0 || cfg_.r_bar_u > cfg_.r_u) {
        throw ConfigError("r_bar_u = " + std::to_string(cfg_.r_bar_u) + " outside [0, " + std::to_string(cfg_.r_u) + "]");
      }
      Vector small = Vector::Zero(w.a_u.size());
      small.segment(cfg_.r_bar_u, cfg_.r_u - cfg_.r_bar_u) = w.a_u.segment(cfg_.r_bar_u, cfg_.r_u - cfg_.r_bar_u);
      if (cfg_.r_bar_u < cfg_.r_u) w.a_u = (w.a_u - small) + filter_homogeneous(small, cfg_.delta);
      break;
    }
  }
  return w;
}

ReducedState grom_step(const ReducedState& s, const RomStepper& stepper) { return stepper.step(RomStrategy::Galerkin, s); }
ReducedState efrom_step(const ReducedState& s, const RomStepper& stepper) { return stepper.step(RomStrategy::EF, s); }
ReducedState effc_rom_step(const ReducedState& s, const RomStepper& stepper) {
  return stepper.step(RomStrategy::EFFC, s);
}
ReducedState epfc_rom_step(const ReducedState& s, const RomStepper& stepper) {
  return stepper.step(RomStrategy::EPFC, s);
}

std::pair<Field, Field> expand(const ReducedState& s, const ReducedBasis& basis, const SpacePtr& space) {
  if (s.a_u.size() != basis.r_us() || s.a_p.size() != basis.r_p) throw Error("reduced state does not match the basis");
  return {Field::velocity(space, basis.lift + basis.velocity * s.a_u, s.t),
          Field::pressure(space, basis.pressure * s.a_p, s.t)};
}

ReducedState project_state(const Field& u, const Field& p, const ReducedBasis& basis, const Operators& ops) {
  const DenseMatrix mu = basis.velocity.transpose() * multiply(ops.mass, basis.velocity);
  const DenseMatrix mp = basis.pressure.transpose() * multiply(ops.pressure_mass, basis.pressure);
  ReducedState s;
  s.a_u = mu.ldlt().solve(basis.velocity.transpose() * ops.mass.multiply(u.coeffs - basis.lift));
  s.a_p = mp.ldlt().solve(basis.pressure.transpose() * ops.pressure_mass.multiply(p.coeffs));
  s.t = u.time;
  return s;
}

std::vector<ReducedState> rom_run(RomStrategy strategy, const RomStepper& stepper, const ReducedState& initial,
                                  int n_steps) {
  std::vector<ReducedState> out{initial};
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  for (int n = 0; n < n_steps; ++n) {
    try {
      out.push_back(stepper.step(strategy, out.back()));
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("reduced step " + std::to_string(n + 1) + ": " + e.what(), e.residual());
    }
  }
  return out;
}

}  // namespace efvms
