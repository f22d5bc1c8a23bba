#include "efvms/assembly.hpp"

#include <algorithm>
#include <cmath>

#include "efvms/errors.hpp"

namespace efvms {

namespace {

constexpr int kStandardDegree = 5;
constexpr int kConvectionDegree = 6;

// Local scalar P2 node -> (vertex a, vertex b) for edges, in local numbering.
constexpr std::array<std::array<int, 2>, 3> kLocalEdges{{{0, 1}, {1, 2}, {2, 0}}};

template <std::size_t R, std::size_t C, typename Local>
void scatter(SparseMatrix& m, const std::array<int, R>& rows, const std::array<int, C>& cols, const Local& local) {
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double v = local(i, j);
      if (v != 0.0) m.add(rows[i], cols[j], v);
    }
  }
}

std::array<int, 6> scalar_dofs(const TaylorHoodSpace& sp, std::size_t k) { return sp.element_nodes(k); }

std::array<double, 6> local_coeffs(const Vector& v, const std::array<int, 6>& nodes, int offset) {
  std::array<double, 6> c{};
  for (int a = 0; a < 6; ++a) c[a] = v[offset + nodes[a]];
  return c;
}

}  // namespace

void p2_basis(const std::array<double, 3>& l, const std::array<std::array<double, 2>, 3>& gl,
              std::array<double, 6>& phi, std::array<std::array<double, 2>, 6>& dphi) {
  for (int i = 0; i < 3; ++i) {
    phi[i] = l[i] * (2.0 * l[i] - 1.0);
    const double d = 4.0 * l[i] - 1.0;
    dphi[i] = {d * gl[i][0], d * gl[i][1]};
  }
  for (int e = 0; e < 3; ++e) {
    const int i = kLocalEdges[e][0], j = kLocalEdges[e][1];
    phi[3 + e] = 4.0 * l[i] * l[j];
    dphi[3 + e] = {4.0 * (l[j] * gl[i][0] + l[i] * gl[j][0]), 4.0 * (l[j] * gl[i][1] + l[i] * gl[j][1])};
  }
}

namespace {

std::array<std::array<double, 2>, 3> barycentric_gradients(const Point& p0, const Point& p1, const Point& p2,
                                                            double& area) {
  const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
  area = 0.5 * det;
  return {{{(p1.y - p2.y) / det, (p2.x - p1.x) / det},
           {(p2.y - p0.y) / det, (p0.x - p2.x) / det},
           {(p0.y - p1.y) / det, (p1.x - p0.x) / det}}};
}

}  // namespace

ElementData element_data(const TaylorHoodSpace& sp, std::size_t k, const TriangleRule& rule) {
  ElementData e;
  const auto& t = sp.mesh().triangles()[k];
  const auto& v = sp.mesh().vertices();
  e.grad_lambda = barycentric_gradients(v[t[0]], v[t[1]], v[t[2]], e.area);
  e.n_q = static_cast<int>(rule.nodes.size());
  if (e.n_q > ElementData::kMaxNodes) throw Error("quadrature rule too large");
  for (int q = 0; q < e.n_q; ++q) {
    const auto& n = rule.nodes[q];
    const std::array<double, 3> l{1.0 - n.xi - n.eta, n.xi, n.eta};
    e.weight[q] = e.area * n.weight;
    e.x[q] = {l[0] * v[t[0]].x + l[1] * v[t[1]].x + l[2] * v[t[2]].x,
              l[0] * v[t[0]].y + l[1] * v[t[1]].y + l[2] * v[t[2]].y};
    p2_basis(l, e.grad_lambda, e.phi[q], e.dphi[q]);
    e.psi[q] = l;
  }
  return e;
}

VelocityPointValue evaluate_velocity(const TaylorHoodSpace& sp, const Vector& coeffs, std::size_t k,
                                     const std::array<double, 3>& l) {
  const auto& t = sp.mesh().triangles()[k];
  const auto& v = sp.mesh().vertices();
  double area = 0.0;
  const auto gl = barycentric_gradients(v[t[0]], v[t[1]], v[t[2]], area);
  std::array<double, 6> phi{};
  std::array<std::array<double, 2>, 6> dphi{};
  p2_basis(l, gl, phi, dphi);
  const auto& nodes = sp.element_nodes(k);
  VelocityPointValue out;
  for (int c = 0; c < 2; ++c) {
    for (int a = 0; a < 6; ++a) {
      const double coef = coeffs[c * sp.n_nodes() + nodes[a]];
      out.u[c] += coef * phi[a];
      out.grad[c][0] += coef * dphi[a][0];
      out.grad[c][1] += coef * dphi[a][1];
    }
  }
  return out;
}

double evaluate_pressure(const TaylorHoodSpace& sp, const Vector& coeffs, std::size_t k,
                         const std::array<double, 3>& l) {
  const auto& t = sp.mesh().triangles()[k];
  return l[0] * coeffs[t[0]] + l[1] * coeffs[t[1]] + l[2] * coeffs[t[2]];
}

SparseMatrix velocity_pattern(const TaylorHoodSpace& sp) {
  std::vector<std::vector<int>> cols(static_cast<std::size_t>(sp.n_velocity()));
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto d = sp.element_velocity_dofs(k);
    for (int i : d) cols[i].insert(cols[i].end(), d.begin(), d.end());
  }
  return SparseMatrix::pattern(sp.n_velocity(), sp.n_velocity(), std::move(cols));
}

SparseMatrix pressure_pattern(const TaylorHoodSpace& sp) {
  std::vector<std::vector<int>> cols(static_cast<std::size_t>(sp.n_pressure()));
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto d = sp.element_pressure_dofs(k);
    for (int i : d) cols[i].insert(cols[i].end(), d.begin(), d.end());
  }
  return SparseMatrix::pattern(sp.n_pressure(), sp.n_pressure(), std::move(cols));
}

SparseMatrix divergence_pattern(const TaylorHoodSpace& sp) {
  std::vector<std::vector<int>> cols(static_cast<std::size_t>(sp.n_pressure()));
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto dv = sp.element_velocity_dofs(k);
    for (int q : sp.element_pressure_dofs(k)) cols[q].insert(cols[q].end(), dv.begin(), dv.end());
  }
  return SparseMatrix::pattern(sp.n_pressure(), sp.n_velocity(), std::move(cols));
}

SparseMatrix mixed_pattern(const TaylorHoodSpace& sp) {
  const int nu = sp.n_velocity();
  std::vector<std::vector<int>> cols(static_cast<std::size_t>(sp.n_total()));
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto dv = sp.element_velocity_dofs(k);
    auto dp = sp.element_pressure_dofs(k);
    for (int& q : dp) q += nu;
    for (int i : dv) {
      cols[i].insert(cols[i].end(), dv.begin(), dv.end());
      cols[i].insert(cols[i].end(), dp.begin(), dp.end());
    }
    for (int q : dp) cols[q].insert(cols[q].end(), dv.begin(), dv.end());
  }
  for (int q = nu; q < sp.n_total(); ++q) cols[q].push_back(q);
  return SparseMatrix::pattern(sp.n_total(), sp.n_total(), std::move(cols));
}

namespace {

// Scalar 6x6 element matrices.
using Local6 = Eigen::Matrix<double, 6, 6>;

Local6 local_mass(const ElementData& e) {
  Local6 m = Local6::Zero();
  for (int q = 0; q < e.n_q; ++q) {
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) m(a, b) += e.weight[q] * e.phi[q][a] * e.phi[q][b];
    }
  }
  return m;
}

Local6 local_stiffness(const ElementData& e) {
  Local6 m = Local6::Zero();
  for (int q = 0; q < e.n_q; ++q) {
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        m(a, b) += e.weight[q] * (e.dphi[q][a][0] * e.dphi[q][b][0] + e.dphi[q][a][1] * e.dphi[q][b][1]);
      }
    }
  }
  return m;
}

void scatter_block_diagonal(SparseMatrix& m, const TaylorHoodSpace& sp, std::size_t k, const Local6& local) {
  const auto nodes = scalar_dofs(sp, k);
  const int nn = sp.n_nodes();
  for (int c = 0; c < 2; ++c) {
    std::array<int, 6> d{};
    for (int a = 0; a < 6; ++a) d[a] = c * nn + nodes[a];
    scatter(m, d, d, [&](std::size_t i, std::size_t j) { return local(static_cast<int>(i), static_cast<int>(j)); });
  }
}

}  // namespace

SparseMatrix assemble_mass(const TaylorHoodSpace& sp, FieldKind kind) {
  const auto& rule = triangle_rule(kStandardDegree);
  if (kind == FieldKind::Pressure) {
    SparseMatrix m = pressure_pattern(sp);
    for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
      const auto e = element_data(sp, k, rule);
      const auto d = sp.element_pressure_dofs(k);
      scatter(m, d, d, [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (int q = 0; q < e.n_q; ++q) s += e.weight[q] * e.psi[q][a] * e.psi[q][b];
        return s;
      });
    }
    return m;
  }
  SparseMatrix m = velocity_pattern(sp);
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) scatter_block_diagonal(m, sp, k, local_mass(element_data(sp, k, rule)));
  return m;
}

SparseMatrix assemble_stiffness(const TaylorHoodSpace& sp, FieldKind kind) {
  const auto& rule = triangle_rule(kStandardDegree);
  if (kind == FieldKind::Pressure) {
    SparseMatrix m = pressure_pattern(sp);
    for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
      const auto e = element_data(sp, k, rule);
      const auto d = sp.element_pressure_dofs(k);
      scatter(m, d, d, [&](std::size_t a, std::size_t b) {
        return e.area * (e.grad_lambda[a][0] * e.grad_lambda[b][0] + e.grad_lambda[a][1] * e.grad_lambda[b][1]);
      });
    }
    return m;
  }
  SparseMatrix m = velocity_pattern(sp);
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    scatter_block_diagonal(m, sp, k, local_stiffness(element_data(sp, k, rule)));
  }
  return m;
}

SparseMatrix assemble_weighted_stiffness(const TaylorHoodSpace& sp, const std::vector<double>& coefficient) {
  if (coefficient.size() != sp.mesh().n_triangles()) throw Error("one coefficient per element required");
  const auto& rule = triangle_rule(kStandardDegree);
  SparseMatrix m = velocity_pattern(sp);
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    if (coefficient[k] == 0.0) continue;
    scatter_block_diagonal(m, sp, k, coefficient[k] * local_stiffness(element_data(sp, k, rule)));
  }
  return m;
}

SparseMatrix assemble_divergence(const TaylorHoodSpace& sp) {
  const auto& rule = triangle_rule(kStandardDegree);
  SparseMatrix m = divergence_pattern(sp);
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto e = element_data(sp, k, rule);
    const auto dv = sp.element_velocity_dofs(k);
    const auto dp = sp.element_pressure_dofs(k);
    scatter(m, dp, dv, [&](std::size_t i, std::size_t j) {
      const int c = j < 6 ? 0 : 1;
      const int a = static_cast<int>(j) % 6;
      double s = 0.0;
      for (int q = 0; q < e.n_q; ++q) s += e.weight[q] * e.psi[q][i] * e.dphi[q][a][c];
      return s;
    });
  }
  return m;
}

SparseMatrix assemble_graddiv(const TaylorHoodSpace& sp, double gamma) {
  const auto& rule = triangle_rule(kStandardDegree);
  SparseMatrix m = velocity_pattern(sp);
  if (gamma == 0.0) return m;
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto e = element_data(sp, k, rule);
    const auto dv = sp.element_velocity_dofs(k);
    scatter(m, dv, dv, [&](std::size_t i, std::size_t j) {
      const int ci = i < 6 ? 0 : 1, a = static_cast<int>(i) % 6;
      const int cj = j < 6 ? 0 : 1, b = static_cast<int>(j) % 6;
      double s = 0.0;
      for (int q = 0; q < e.n_q; ++q) s += e.weight[q] * e.dphi[q][a][ci] * e.dphi[q][b][cj];
      return gamma * s;
    });
  }
  return m;
}

namespace {

// Scalar skew block S[b][a] = ½ ∫ [(w·∇φ_a) φ_b − (w·∇φ_b) φ_a].
Local6 local_convection(const ElementData& e, const std::array<double, 6>& wx, const std::array<double, 6>& wy) {
  Local6 s = Local6::Zero();
  for (int q = 0; q < e.n_q; ++q) {
    double w0 = 0.0, w1 = 0.0;
    for (int a = 0; a < 6; ++a) {
      w0 += wx[a] * e.phi[q][a];
      w1 += wy[a] * e.phi[q][a];
    }
    std::array<double, 6> adv{};
    for (int a = 0; a < 6; ++a) adv[a] = w0 * e.dphi[q][a][0] + w1 * e.dphi[q][a][1];
    for (int b = 0; b < 6; ++b) {
      for (int a = 0; a < 6; ++a) s(b, a) += 0.5 * e.weight[q] * (adv[a] * e.phi[q][b] - adv[b] * e.phi[q][a]);
    }
  }
  return s;
}

void check_velocity(const Field& f) {
  f.check();
  if (f.kind != FieldKind::Velocity) throw Error("velocity field expected");
}

}  // namespace

SparseMatrix assemble_convection(const Field& w) {
  check_velocity(w);
  const auto& sp = *w.space;
  const auto& rule = triangle_rule(kConvectionDegree);
  SparseMatrix m = velocity_pattern(sp);
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto e = element_data(sp, k, rule);
    const auto nodes = scalar_dofs(sp, k);
    scatter_block_diagonal(m, sp, k,
                           local_convection(e, local_coeffs(w.coeffs, nodes, 0), local_coeffs(w.coeffs, nodes, sp.n_nodes())));
  }
  return m;
}

Vector apply_convection(const Field& w, const Field& u) {
  check_velocity(w);
  check_velocity(u);
  if (w.space != u.space) throw Error("convection: fields live on different spaces");
  const auto& sp = *w.space;
  const auto& rule = triangle_rule(kConvectionDegree);
  const int nn = sp.n_nodes();
  Vector r = Vector::Zero(sp.n_velocity());
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto e = element_data(sp, k, rule);
    const auto nodes = scalar_dofs(sp, k);
    const Local6 s = local_convection(e, local_coeffs(w.coeffs, nodes, 0), local_coeffs(w.coeffs, nodes, nn));
    for (int c = 0; c < 2; ++c) {
      Eigen::Matrix<double, 6, 1> uc;
      for (int a = 0; a < 6; ++a) uc[a] = u.coeffs[c * nn + nodes[a]];
      const Eigen::Matrix<double, 6, 1> rc = s * uc;
      for (int b = 0; b < 6; ++b) r[c * nn + nodes[b]] += rc[b];
    }
  }
  return r;
}

void convection_element(const ElementData& e, const std::array<double, 12>& w, Eigen::Matrix<double, 12, 1>* residual,
                        Eigen::Matrix<double, 12, 12>* jacobian) {
  if (residual) residual->setZero();
  if (jacobian) jacobian->setZero();
  for (int q = 0; q < e.n_q; ++q) {
    const auto& phi = e.phi[q];
    const auto& dphi = e.dphi[q];
    std::array<double, 2> wq{0.0, 0.0};
    std::array<std::array<double, 2>, 2> grad{};
    for (int a = 0; a < 6; ++a) {
      for (int c = 0; c < 2; ++c) {
        wq[c] += w[6 * c + a] * phi[a];
        grad[c][0] += w[6 * c + a] * dphi[a][0];
        grad[c][1] += w[6 * c + a] * dphi[a][1];
      }
    }
    const double hw = 0.5 * e.weight[q];
    std::array<double, 6> adv{};
    for (int a = 0; a < 6; ++a) adv[a] = wq[0] * dphi[a][0] + wq[1] * dphi[a][1];
    // (w·∇)w at the node, and (w·∇φ_b) for test functions.
    const std::array<double, 2> wgw{wq[0] * grad[0][0] + wq[1] * grad[0][1], wq[0] * grad[1][0] + wq[1] * grad[1][1]};
    if (residual) {
      // ½ [ ((w·∇)w)_d φ_b − (w·∇φ_b) w_d ]
      for (int d = 0; d < 2; ++d) {
        for (int b = 0; b < 6; ++b) (*residual)[6 * d + b] += hw * (wgw[d] * phi[b] - adv[b] * wq[d]);
      }
    }
    if (jacobian) {
      for (int d = 0; d < 2; ++d) {
        for (int b = 0; b < 6; ++b) {
          auto row = jacobian->row(6 * d + b);
          // convected slot: ½ [(w·∇φ_a) φ_b − (w·∇φ_b) φ_a] δ_cd
          for (int a = 0; a < 6; ++a) row[6 * d + a] += hw * (adv[a] * phi[b] - adv[b] * phi[a]);
          // convecting slot: ½ φ_a [∂_c w_d φ_b − ∂_c φ_b w_d]
          for (int c = 0; c < 2; ++c) {
            const double f = grad[d][c] * phi[b] - dphi[b][c] * wq[d];
            for (int a = 0; a < 6; ++a) row[6 * c + a] += hw * phi[a] * f;
          }
        }
      }
    }
  }
}

SparseMatrix assemble_convection_jacobian(const Field& w) {
  check_velocity(w);
  const auto& sp = *w.space;
  const auto& rule = triangle_rule(kConvectionDegree);
  SparseMatrix m = velocity_pattern(sp);
  Eigen::Matrix<double, 12, 12> local;
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto e = element_data(sp, k, rule);
    const auto dv = sp.element_velocity_dofs(k);
    std::array<double, 12> wl{};
    for (int i = 0; i < 12; ++i) wl[i] = w.coeffs[dv[i]];
    convection_element(e, wl, nullptr, &local);
    scatter(m, dv, dv, [&](std::size_t i, std::size_t j) { return local(static_cast<int>(i), static_cast<int>(j)); });
  }
  return m;
}

namespace {

// Element-mean gradient G[c][j] of the velocity, exact for P2 (gradient is
// linear, so its mean is its centroid value).
std::array<std::array<double, 2>, 2> mean_gradient(const TaylorHoodSpace& sp, const Vector& coeffs, std::size_t k) {
  return evaluate_velocity(sp, coeffs, k, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}).grad;
}

double frobenius(const std::array<std::array<double, 2>, 2>& g) {
  return std::sqrt(g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
}

}  // namespace

std::vector<double> eddy_viscosity(const Field& u_small, double c_s) {
  check_velocity(u_small);
  const auto& sp = *u_small.space;
  const auto& h = sp.mesh().element_diameters();
  std::vector<double> nu(sp.mesh().n_triangles());
  for (std::size_t k = 0; k < nu.size(); ++k) {
    nu[k] = c_s * c_s * h[k] * h[k] * frobenius(mean_gradient(sp, u_small.coeffs, k));
  }
  return nu;
}

LocalSmallScaleOperator LocalSmallScaleOperator::nested_p1() {
  LocalSmallScaleOperator op;
  for (int e = 0; e < 3; ++e) {
    op.matrix(3 + e, 3 + e) = 1.0;
    op.matrix(3 + e, kLocalEdges[e][0]) = -0.5;
    op.matrix(3 + e, kLocalEdges[e][1]) = -0.5;
  }
  return op;
}

LocalSmallScaleOperator LocalSmallScaleOperator::none() { return {}; }

SparseMatrix small_scale_matrix(const TaylorHoodSpace& sp, const LocalSmallScaleOperator& op) {
  // Rows of the local operator are node-owned and identical across elements
  // sharing the node, so each global row is written exactly once.
  const int nn = sp.n_nodes();
  std::vector<char> done(static_cast<std::size_t>(nn), 0);
  std::vector<SparseMatrix::Triplet> t;
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto nodes = sp.element_nodes(k);
    for (int a = 0; a < 6; ++a) {
      if (done[nodes[a]]) continue;
      done[nodes[a]] = 1;
      for (int b = 0; b < 6; ++b) {
        const double v = op.matrix(a, b);
        if (v == 0.0) continue;
        t.push_back({nodes[a], nodes[b], v});
        t.push_back({nn + nodes[a], nn + nodes[b], v});
      }
    }
  }
  return SparseMatrix::from_triplets(sp.n_velocity(), sp.n_velocity(), std::move(t));
}

SparseMatrix assemble_smagorinsky(const TaylorHoodSpace& sp, const std::vector<double>& nu_t,
                                  const LocalSmallScaleOperator& op) {
  if (nu_t.size() != sp.mesh().n_triangles()) throw Error("one eddy viscosity per element required");
  const auto& rule = triangle_rule(kStandardDegree);
  SparseMatrix m = velocity_pattern(sp);
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    if (nu_t[k] == 0.0) continue;
    const Local6 a = local_stiffness(element_data(sp, k, rule));
    scatter_block_diagonal(m, sp, k, nu_t[k] * op.matrix.transpose() * a * op.matrix);
  }
  return m;
}

SmagorinskyLinearization smagorinsky_linearization(const Field& u, double c_s, const LocalSmallScaleOperator& op) {
  check_velocity(u);
  const auto& sp = *u.space;
  const auto& rule = triangle_rule(kStandardDegree);
  const auto& h = sp.mesh().element_diameters();
  const int nn = sp.n_nodes();
  SmagorinskyLinearization out;
  out.residual = Vector::Zero(sp.n_velocity());
  out.jacobian = velocity_pattern(sp);
  out.nu_t.assign(sp.mesh().n_triangles(), 0.0);
  const std::array<double, 3> centroid{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  for (std::size_t k = 0; k < sp.mesh().n_triangles(); ++k) {
    const auto e = element_data(sp, k, rule);
    const auto nodes = scalar_dofs(sp, k);
    std::array<double, 6> phi_c{};
    std::array<std::array<double, 2>, 6> dphi_c{};
    p2_basis(centroid, e.grad_lambda, phi_c, dphi_c);

    std::array<Eigen::Matrix<double, 6, 1>, 2> s;
    for (int c = 0; c < 2; ++c) {
      Eigen::Matrix<double, 6, 1> uc;
      for (int a = 0; a < 6; ++a) uc[a] = u.coeffs[c * nn + nodes[a]];
      s[c] = op.matrix * uc;
    }
    std::array<std::array<double, 2>, 2> g{};
    for (int c = 0; c < 2; ++c) {
      for (int j = 0; j < 2; ++j) {
        for (int a = 0; a < 6; ++a) g[c][j] += s[c][a] * dphi_c[a][j];
      }
    }
    const double norm = frobenius(g);
    const double scale = c_s * c_s * h[k] * h[k];
    const double nu = scale * norm;
    out.nu_t[k] = nu;
    const Local6 a = local_stiffness(e);
    std::array<Eigen::Matrix<double, 6, 1>, 2> as{a * s[0], a * s[1]};
    // ∂ν/∂s_d[b] = scale * Σ_j G[d][j] ∂_jφ_b / |G|
    std::array<Eigen::Matrix<double, 6, 1>, 2> dnu;
    for (int d = 0; d < 2; ++d) {
      for (int b = 0; b < 6; ++b) {
        dnu[d][b] = norm > 0.0 ? scale * (g[d][0] * dphi_c[b][0] + g[d][1] * dphi_c[b][1]) / norm : 0.0;
      }
    }
    Eigen::Matrix<double, 12, 12> local = Eigen::Matrix<double, 12, 12>::Zero();
    for (int c = 0; c < 2; ++c) {
      const Eigen::Matrix<double, 6, 1> rc = op.matrix.transpose() * (nu * as[c]);
      for (int b = 0; b < 6; ++b) out.residual[c * nn + nodes[b]] += rc[b];
      for (int d = 0; d < 2; ++d) {
        Local6 inner = as[c] * dnu[d].transpose();
        if (c == d) inner += nu * a;
        local.block<6, 6>(c * 6, d * 6) = op.matrix.transpose() * inner * op.matrix;
      }
    }
    const auto dv = sp.element_velocity_dofs(k);
    scatter(out.jacobian, dv, dv, [&](std::size_t i, std::size_t j) { return local(static_cast<int>(i), static_cast<int>(j)); });
  }
  return out;
}

void apply_dirichlet(SparseMatrix& system, Vector& rhs, const std::vector<int>& dofs, const Vector& values) {
  if (static_cast<std::size_t>(values.size()) != dofs.size()) {
    std::string missing;
    for (std::size_t i = static_cast<std::size_t>(values.size()); i < dofs.size() && i < static_cast<std::size_t>(values.size()) + 8; ++i) {
      missing += " " + std::to_string(dofs[i]);
    }
    throw Error("missing Dirichlet values: got " + std::to_string(values.size()) + " for " + std::to_string(dofs.size()) +
                " dofs; first unmatched dofs:" + missing);
  }
  const std::size_t n = system.rows();
  std::vector<char> fixed(n, 0);
  Vector g = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    fixed[dofs[i]] = 1;
    g[dofs[i]] = values[static_cast<Eigen::Index>(i)];
  }
  const auto off = system.row_offsets();
  const auto col = system.col_indices();
  auto val = system.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = off[i]; k < off[i + 1]; ++k) {
      const int j = col[k];
      if (fixed[i]) {
        val[k] = (static_cast<std::size_t>(j) == i) ? 1.0 : 0.0;
      } else if (fixed[j]) {
        rhs[static_cast<Eigen::Index>(i)] -= val[k] * g[j];
        val[k] = 0.0;
      }
    }
  }
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    if (system.find(dofs[i], dofs[i]) < 0) throw Error("Dirichlet dof " + std::to_string(dofs[i]) + " has no diagonal entry");
    rhs[dofs[i]] = values[static_cast<Eigen::Index>(i)];
  }
}

void apply_dirichlet(SparseMatrix& system, Vector& rhs, const TaylorHoodSpace& sp, const Vector& values) {
  apply_dirichlet(system, rhs, sp.dirichlet_dofs(), values);
}

std::shared_ptr<const Operators> Operators::build(SpacePtr space) {
  auto ops = std::make_shared<Operators>();
  ops->mass = assemble_mass(*space, FieldKind::Velocity);
  ops->stiffness = assemble_stiffness(*space, FieldKind::Velocity);
  ops->graddiv = assemble_graddiv(*space, 1.0);
  ops->divergence = assemble_divergence(*space);
  ops->pressure_mass = assemble_mass(*space, FieldKind::Pressure);
  ops->space = std::move(space);
  return ops;
}

}  // namespace efvms
