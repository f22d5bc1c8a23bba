#include "efvms/filters.hpp"

#include <mutex>

#include "efvms/errors.hpp"

namespace efvms {

namespace {

std::shared_ptr<const CachedSystem> make_system(SparseMatrix k, std::vector<int> constrained) {
  SparseMatrix c = k;
  Vector dummy = Vector::Zero(static_cast<Eigen::Index>(k.rows()));
  apply_dirichlet(c, dummy, constrained, Vector::Zero(static_cast<Eigen::Index>(constrained.size())));
  return std::make_shared<const CachedSystem>(CachedSystem{std::move(k), SparseLU(c), std::move(constrained)});
}

// Solves the constrained system with prescribed values g on the constrained dofs.
Vector constrained_solve(const CachedSystem& s, Vector rhs, const Vector& g) {
  Vector lift = Vector::Zero(rhs.size());
  for (std::size_t i = 0; i < s.constrained.size(); ++i) lift[s.constrained[i]] = g[static_cast<Eigen::Index>(i)];
  rhs -= s.matrix.multiply(lift);
  for (std::size_t i = 0; i < s.constrained.size(); ++i) rhs[s.constrained[i]] = g[static_cast<Eigen::Index>(i)];
  return s.lu.solve(rhs);
}

template <typename Factory, typename Key, typename Map>
std::shared_ptr<const CachedSystem> cached(std::shared_mutex& mutex, Map& cache, const Key& key, Factory&& make) {
  {
    std::shared_lock lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto built = make();
  std::unique_lock lock(mutex);
  return cache.emplace(key, std::move(built)).first->second;
}

void check_velocity(const Field& f, const TaylorHoodSpace& sp) {
  f.check();
  if (f.kind != FieldKind::Velocity) throw Error("filters act on velocity fields only");
  if (f.space.get() != &sp) throw Error("field lives on a different space than the filter");
}

}  // namespace

CoarseSpace::CoarseSpace(OperatorsPtr ops, Kind kind) : ops_(std::move(ops)), kind_(kind) {
  const auto& sp = *ops_->space;
  const int nn = sp.n_nodes();
  if (kind_ == Kind::Fine) {
    prolongation_ = SparseMatrix::identity(static_cast<std::size_t>(sp.n_velocity()));
    coarse_to_fine_.resize(static_cast<std::size_t>(sp.n_velocity()));
    for (int i = 0; i < sp.n_velocity(); ++i) coarse_to_fine_[i] = i;
    coarse_dirichlet_ = sp.dirichlet_dofs();
    return;
  }
  const int nv = sp.n_pressure();
  std::vector<SparseMatrix::Triplet> t;
  for (int c = 0; c < 2; ++c) {
    for (int node = 0; node < nn; ++node) {
      if (node < nv) {
        t.push_back({c * nn + node, c * nv + node, 1.0});
      } else {
        const auto ab = sp.edge_vertices(node);
        t.push_back({c * nn + node, c * nv + ab[0], 0.5});
        t.push_back({c * nn + node, c * nv + ab[1], 0.5});
      }
    }
    for (int v = 0; v < nv; ++v) {
      coarse_to_fine_.push_back(c * nn + v);
    }
  }
  prolongation_ = SparseMatrix::from_triplets(static_cast<std::size_t>(sp.n_velocity()), static_cast<std::size_t>(2 * nv),
                                              std::move(t));
  for (int i = 0; i < 2 * nv; ++i) {
    if (sp.dirichlet_mask()[coarse_to_fine_[i]]) coarse_dirichlet_.push_back(i);
  }
}

LocalSmallScaleOperator CoarseSpace::small_scale_operator() const {
  return kind_ == Kind::NestedP1 ? LocalSmallScaleOperator::nested_p1() : LocalSmallScaleOperator::none();
}

Field CoarseSpace::interpolate(const Field& w) const {
  check_velocity(w, *ops_->space);
  Vector c(dimension());
  for (int i = 0; i < dimension(); ++i) c[i] = w.coeffs[coarse_to_fine_[i]];
  return Field::velocity(ops_->space, prolongation_.multiply(c), w.time);
}

std::shared_ptr<const CachedSystem> CoarseSpace::factorization(double gamma_p) const {
  return cached(mutex_, cache_, gamma_p, [&] {
    SparseMatrix fine = ops_->mass;
    fine.axpy(gamma_p, ops_->graddiv);
    // Pᵀ K P, entry by entry.
    const auto& p = prolongation_;
    const auto poff = p.row_offsets();
    const auto pcol = p.col_indices();
    const auto pval = p.values();
    const auto off = fine.row_offsets();
    const auto col = fine.col_indices();
    const auto val = fine.values();
    std::vector<SparseMatrix::Triplet> t;
    for (std::size_t i = 0; i < fine.rows(); ++i) {
      for (int k = off[i]; k < off[i + 1]; ++k) {
        const int j = col[k];
        for (int a = poff[i]; a < poff[i + 1]; ++a) {
          for (int b = poff[j]; b < poff[j + 1]; ++b) t.push_back({pcol[a], pcol[b], pval[a] * val[k] * pval[b]});
        }
      }
    }
    auto kc = SparseMatrix::from_triplets(p.cols(), p.cols(), std::move(t));
    return make_system(std::move(kc), coarse_dirichlet_);
  });
}

Field CoarseSpace::l2_projection(const Field& w, double gamma_p) const {
  check_velocity(w, *ops_->space);
  if (gamma_p < 0.0) throw Error("grad-div penalty must be non-negative");
  const auto sys = factorization(gamma_p);
  Vector g(static_cast<Eigen::Index>(coarse_dirichlet_.size()));
  for (std::size_t i = 0; i < coarse_dirichlet_.size(); ++i) g[static_cast<Eigen::Index>(i)] = w.coeffs[coarse_to_fine_[coarse_dirichlet_[i]]];
  const Vector xc = constrained_solve(*sys, prolongation_.multiply_transpose(ops_->mass.multiply(w.coeffs)), g);
  Vector u = prolongation_.multiply(xc);
  for (int d : ops_->space->dirichlet_dofs()) u[d] = w.coeffs[d];
  return Field::velocity(ops_->space, std::move(u), w.time);
}

FilterBank::FilterBank(OperatorsPtr ops) : ops_(std::move(ops)) {}

std::shared_ptr<const CachedSystem> FilterBank::factorization(double delta, double gamma_d) const {
  return cached(mutex_, cache_, std::pair{delta, gamma_d}, [&] {
    SparseMatrix k = ops_->mass;
    k.axpy(delta * delta, ops_->stiffness);
    k.axpy(gamma_d, ops_->graddiv);
    return make_system(std::move(k), ops_->space->dirichlet_dofs());
  });
}

Field FilterBank::solve(const CachedSystem& system, const Field& w, FilterBC bc) const {
  const auto& dofs = ops_->space->dirichlet_dofs();
  Vector g = Vector::Zero(static_cast<Eigen::Index>(dofs.size()));
  if (bc == FilterBC::MatchDirichlet) {
    for (std::size_t i = 0; i < dofs.size(); ++i) g[static_cast<Eigen::Index>(i)] = w.coeffs[dofs[i]];
  }
  return Field::velocity(ops_->space, constrained_solve(system, ops_->mass.multiply(w.coeffs), g), w.time);
}

Field FilterBank::differential(const Field& w, double delta, double gamma_d, FilterBC bc) const {
  check_velocity(w, *ops_->space);
  if (delta < 0.0 || gamma_d < 0.0) throw Error("filter radius and grad-div penalty must be non-negative");
  return solve(*factorization(delta, gamma_d), w, bc);
}

Field FilterBank::nonlinear(const Field& w_small, double c_s, FilterBC bc) const {
  check_velocity(w_small, *ops_->space);
  SparseMatrix k = assemble_weighted_stiffness(*ops_->space, eddy_viscosity(w_small, c_s));
  k.axpy(1.0, ops_->mass);
  return solve(*make_system(std::move(k), ops_->space->dirichlet_dofs()), w_small, bc);
}

Field FilterBank::ad_deconvolve_order1(const Field& u, double delta, double gamma_d, FilterBC bc) const {
  const Field f1 = differential(u, delta, gamma_d, bc);
  const Field f2 = differential(f1, delta, gamma_d, bc);
  return Field::velocity(ops_->space, 2.0 * f1.coeffs - f2.coeffs, u.time);
}

std::size_t FilterBank::cached_factorizations() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

Field differential_filter(const Field& w, double delta, double gamma_d, FilterBC bc) {
  return FilterBank(Operators::build(w.space)).differential(w, delta, gamma_d, bc);
}

Field nonlinear_filter(const Field& w_small, double c_s, FilterBC bc) {
  return FilterBank(Operators::build(w_small.space)).nonlinear(w_small, c_s, bc);
}

Field l2_projection_postprocess(const Field& w, const CoarseSpace& coarse, double gamma_p) {
  return coarse.l2_projection(w, gamma_p);
}

Field small_scales(const Field& w, const Field& large) {
  w.check();
  large.check();
  if (w.space != large.space || w.kind != large.kind) throw Error("small_scales: fields live on different spaces");
  return Field{w.space, w.kind, w.coeffs - large.coeffs, w.time};
}

Field ad_deconvolve_order1(const Field& u, double delta, double gamma_d, FilterBC bc) {
  return FilterBank(Operators::build(u.space)).ad_deconvolve_order1(u, delta, gamma_d, bc);
}

}  // namespace efvms
