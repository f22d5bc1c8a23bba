#include "efvms/evolve.hpp"

#include <cmath>
#include <optional>

#include "efvms/errors.hpp"

namespace efvms {

namespace {

constexpr int kConvectionDegree = 6;

// Adds alpha * (velocity-pattern matrix) into the velocity block of a mixed matrix.
void add_velocity_block(SparseMatrix& mixed, const SparseMatrix& v, double alpha) {
  const auto off = v.row_offsets();
  const auto col = v.col_indices();
  const auto val = v.values();
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (int k = off[i]; k < off[i + 1]; ++k) mixed.add(static_cast<int>(i), col[k], alpha * val[k]);
  }
}

// −B into the pressure rows and −Bᵀ into the pressure columns.
void add_divergence_blocks(SparseMatrix& mixed, const SparseMatrix& b, int nu) {
  const auto off = b.row_offsets();
  const auto col = b.col_indices();
  const auto val = b.values();
  for (std::size_t q = 0; q < b.rows(); ++q) {
    for (int k = off[q]; k < off[q + 1]; ++k) {
      mixed.add(nu + static_cast<int>(q), col[k], -val[k]);
      mixed.add(col[k], nu + static_cast<int>(q), -val[k]);
    }
  }
}

void constrain(SparseMatrix& j, const std::vector<char>& constrained) {
  const auto off = j.row_offsets();
  const auto col = j.col_indices();
  auto val = j.values();
  for (std::size_t i = 0; i < j.rows(); ++i) {
    for (int k = off[i]; k < off[i + 1]; ++k) {
      if (constrained[i]) {
        val[k] = static_cast<std::size_t>(col[k]) == i ? 1.0 : 0.0;
      } else if (constrained[col[k]]) {
        val[k] = 0.0;
      }
    }
  }
}

}  // namespace

void EvolveConfig::validate() const {
  if (!(nu > 0.0)) throw ConfigError("viscosity must be positive");
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(newton_tol > 0.0)) throw ConfigError("Newton tolerance must be positive");
  if (newton_max_iter < 1) throw ConfigError("Newton iteration limit must be at least 1");
  if (c_s < 0.0) throw ConfigError("Smagorinsky constant must be non-negative");
}

struct Evolver::Solver {
  std::optional<SparseLU> lu;
};

Evolver::Evolver(OperatorsPtr ops, EvolveConfig cfg) : ops_(std::move(ops)), cfg_(cfg), solver_(std::make_unique<Solver>()) {
  cfg_.validate();
  const auto& sp = *ops_->space;
  const int nu = sp.n_velocity();
  constant_ = mixed_pattern(sp);
  add_velocity_block(constant_, ops_->mass, 1.0 / cfg_.dt);
  add_velocity_block(constant_, ops_->stiffness, cfg_.nu);
  add_divergence_blocks(constant_, ops_->divergence, nu);

  const auto& vp = ops_->mass;
  velocity_to_mixed_.resize(vp.nnz());
  {
    const auto off = vp.row_offsets();
    const auto col = vp.col_indices();
    for (std::size_t i = 0; i < vp.rows(); ++i) {
      for (int k = off[i]; k < off[i + 1]; ++k) {
        velocity_to_mixed_[k] = static_cast<int>(constant_.find(static_cast<int>(i), col[k]));
      }
    }
  }
  element_positions_.resize(sp.mesh().n_triangles());
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto dv = sp.element_velocity_dofs(k);
    for (int i = 0; i < 12; ++i) {
      for (int j = 0; j < 12; ++j) element_positions_[k][12 * i + j] = static_cast<int>(constant_.find(dv[i], dv[j]));
    }
  }
  constrained_.assign(static_cast<std::size_t>(sp.n_total()), 0);
  for (int d : sp.dirichlet_dofs()) constrained_[d] = 1;
  if (sp.pressure_pin()) constrained_[nu + *sp.pressure_pin()] = 1;
}

Evolver::~Evolver() = default;
Evolver::Evolver(Evolver&&) noexcept = default;
Evolver& Evolver::operator=(Evolver&&) noexcept = default;

void Evolver::assemble(const Vector& state, const Vector& u_prev, Vector* residual, SparseMatrix* jacobian) const {
  const auto& sp = *ops_->space;
  const int nu = sp.n_velocity();
  if (state.size() != sp.n_total() || u_prev.size() != nu) throw Error("evolve: state has wrong dimension");

  if (residual) {
    *residual = constant_.multiply(state);
    residual->head(nu) -= ops_->mass.multiply(u_prev) / cfg_.dt;
  }
  if (jacobian) {
    *jacobian = constant_;
  }
  if (cfg_.convection) {
    const auto& rule = triangle_rule(kConvectionDegree);
    Eigen::Matrix<double, 12, 1> r;
    Eigen::Matrix<double, 12, 12> jl;
    auto jv = jacobian ? jacobian->values() : std::span<double>{};
    for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
      const auto e = element_data(sp, k, rule);
      const auto dv = sp.element_velocity_dofs(k);
      std::array<double, 12> wl{};
      for (int i = 0; i < 12; ++i) wl[i] = state[dv[i]];
      convection_element(e, wl, residual ? &r : nullptr, jacobian ? &jl : nullptr);
      if (residual) {
        for (int i = 0; i < 12; ++i) (*residual)[dv[i]] += r[i];
      }
      if (jacobian) {
        const auto& pos = element_positions_[k];
        for (int i = 0; i < 12; ++i) {
          for (int j = 0; j < 12; ++j) jv[pos[12 * i + j]] += jl(i, j);
        }
      }
    }
  }
  if (cfg_.smagorinsky_enabled && cfg_.c_s > 0.0) {
    const auto lin = smagorinsky_linearization(Field::velocity(ops_->space, state.head(nu)), cfg_.c_s, cfg_.small_scale);
    if (residual) residual->head(nu) += lin.residual;
    if (jacobian) {
      auto jv = jacobian->values();
      const auto sv = lin.jacobian.values();
      for (std::size_t k = 0; k < sv.size(); ++k) jv[velocity_to_mixed_[k]] += sv[k];
    }
  }
}

std::pair<Vector, SparseMatrix> Evolver::residual_and_jacobian(const Vector& state, const Vector& u_prev) const {
  Vector r;
  SparseMatrix j;
  assemble(state, u_prev, &r, &j);
  return {std::move(r), std::move(j)};
}

Vector Evolver::residual(const Vector& state, const Vector& u_prev) const {
  Vector r;
  assemble(state, u_prev, &r, nullptr);
  return r;
}

EvolveResult Evolver::step(const Field& u_prev, const Field& p_guess, const BoundaryData& bc, double t_next) {
  const auto& sp = *ops_->space;
  if (u_prev.space.get() != &sp || p_guess.space.get() != &sp) throw Error("evolve: fields live on a different space");
  u_prev.check();
  p_guess.check();
  const int nu = sp.n_velocity();
  Vector x(sp.n_total());
  x.head(nu) = u_prev.coeffs;
  x.tail(sp.n_pressure()) = p_guess.coeffs;
  Vector w = x.head(nu);
  impose_dirichlet(sp, bc.dof_values(sp, t_next), w);
  x.head(nu) = w;
  if (sp.pressure_pin()) x[nu + *sp.pressure_pin()] = 0.0;

  EvolveResult out;
  Vector r;
  SparseMatrix j;
  for (int it = 1;; ++it) {
    assemble(x, u_prev.coeffs, &r, &j);
    for (std::size_t i = 0; i < constrained_.size(); ++i) {
      if (constrained_[i]) r[static_cast<Eigen::Index>(i)] = 0.0;
    }
    const double norm = r.norm();
    out.residuals.push_back(norm);
    if (!std::isfinite(norm)) throw ConvergenceError("Newton iteration diverged", norm);
    if (norm <= cfg_.newton_tol) {
      out.newton_iters = it;
      break;
    }
    if (it > cfg_.newton_max_iter) {
      throw ConvergenceError("Newton did not converge in " + std::to_string(cfg_.newton_max_iter) +
                                 " iterations (residual " + std::to_string(norm) + ")",
                             norm);
    }
    constrain(j, constrained_);
    if (solver_->lu) {
      solver_->lu->refactor(j);
    } else {
      solver_->lu.emplace(j);
    }
    x -= solver_->lu->solve(r);
  }
  out.w = Field::velocity(ops_->space, x.head(nu), t_next);
  out.p = Field::pressure(ops_->space, x.tail(sp.n_pressure()), t_next);
  return out;
}

EvolveResult evolve_step(const Field& u_prev, const Field& p_guess, const BoundaryData& bc, double t_next,
                         const EvolveConfig& cfg) {
  Evolver ev(Operators::build(u_prev.space), cfg);
  return ev.step(Field::velocity(ev.operators()->space, u_prev.coeffs, u_prev.time),
                 Field::pressure(ev.operators()->space, p_guess.coeffs, p_guess.time), bc, t_next);
}

std::pair<Vector, SparseMatrix> newton_residual_and_jacobian(const Vector& state, const Field& u_prev,
                                                             const EvolveConfig& cfg) {
  Evolver ev(Operators::build(u_prev.space), cfg);
  return ev.residual_and_jacobian(state, u_prev.coeffs);
}

std::pair<Field, Field> solve_stokes(const OperatorsPtr& ops, const BoundaryData& bc, double t, double nu) {
  if (!(nu > 0.0)) throw ConfigError("viscosity must be positive");
  const auto& sp = *ops->space;
  const int n_u = sp.n_velocity();
  SparseMatrix k = mixed_pattern(sp);
  add_velocity_block(k, ops->stiffness, nu);
  add_divergence_blocks(k, ops->divergence, n_u);
  std::vector<int> dofs = sp.dirichlet_dofs();
  Vector g = bc.dof_values(sp, t);
  if (sp.pressure_pin()) {
    dofs.push_back(n_u + *sp.pressure_pin());
    g.conservativeResize(g.size() + 1);
    g[g.size() - 1] = 0.0;
  }
  Vector rhs = Vector::Zero(sp.n_total());
  apply_dirichlet(k, rhs, dofs, g);
  const Vector x = SparseLU(k).solve(rhs);
  return {Field::velocity(ops->space, x.head(n_u), t), Field::pressure(ops->space, x.tail(sp.n_pressure()), t)};
}

}  // namespace efvms
