// Energy, Galerkin residual, KKT tangent and second variation of the scaled
// bar problem on a fixed computational domain.
//
// With s = y / lambda and h(y) = s + u(s) the energy reads
//   E = int [eps^2 / (2 lambda^3)] (u'')^2 + lambda W*((1 + u') / lambda) ds.
// The residual is lambda^3 dE/dU, so its field block is
//   int eps^2 u'' phi'' + lambda^3 S*(H) phi' ds,   H = (1 + u') / lambda.
//
// The unilateral constraint u' + 1 >= 0 is enforced at "constraint points":
// every node and every element midpoint.  Point j is node j/2 for even j and
// the midpoint of element (j-1)/2 for odd j.  A cubic element whose three
// points are active is exactly linear with u' = -1, so fully broken elements
// carry no spurious bending and the feasible set stays fixed and convex.
#pragma once

#include "ifrac/constitutive.hpp"
#include "ifrac/mesh.hpp"

#include <Eigen/Sparse>

#include <stdexcept>
#include <vector>

namespace ifrac {

struct ConstraintViolation : std::domain_error {
  using std::domain_error::domain_error;
};

struct ScaledProblem {
  double epsilon = 0.1;
  double lambda = 1.0;
  ConstitutiveModel model{};
  Mesh mesh{};

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (mesh.n_elems < 2) throw std::invalid_argument("mesh needs at least two elements");
  }
};

inline int n_constraint_points(const Mesh& mesh) { return 2 * mesh.n_elems + 1; }
inline bool is_node_point(int j) { return j % 2 == 0; }
inline int point_node(int j) { return j / 2; }
inline double point_coordinate(const Mesh& mesh, int j) { return mesh.s_min + 0.5 * j * mesh.h(); }

// Sparse gradient of u' at constraint point j with respect to the global dofs.
struct ConstraintRow {
  int first_dof;
  int count;
  std::array<double, 4> coef;
};

inline ConstraintRow constraint_row(const Mesh& mesh, int j) {
  if (is_node_point(j)) return {2 * point_node(j) + 1, 1, {1.0, 0.0, 0.0, 0.0}};
  const int e = (j - 1) / 2;
  const double h = mesh.h();
  return {2 * e, 4, {-1.5 / h, -0.25, 1.5 / h, -0.25}};
}

inline double point_slope(const HermiteField& field, int j) {
  const auto row = constraint_row(field.mesh, j);
  if (row.count == 1) return field.dofs[row.first_dof];
  const Eigen::Vector4d ue = field.dofs.segment<4>(row.first_dof);
  return element_derivative(row.coef, ue);
}

// u' + 1 at a constraint point (non-negative on the admissible set).
inline double constraint_value(const HermiteField& field, int j) { return point_slope(field, j) + 1.0; }

inline bool is_boundary_dof(const Mesh& mesh, int dof) { return dof == 0 || dof == 2 * mesh.n_elems; }

namespace detail {

// Calls visit(e, q, weight*h, shape, du, d2u) at every quadrature point.
template <class Visit>
void for_each_quadrature_point(const HermiteField& field, Visit&& visit) {
  const auto rule = gauss4();
  const double h = field.mesh.h();
  std::array<HermiteShape<double>, 4> shapes;
  for (int q = 0; q < 4; ++q) shapes[q] = shape_eval(rule.points[q], h);
  for (int e = 0; e < field.mesh.n_elems; ++e) {
    const Eigen::Vector4d ue = field.element_dofs(e);
    for (int q = 0; q < 4; ++q) {
      const auto& sh = shapes[q];
      const double du = element_derivative(sh.dN, ue), d2u = element_derivative(sh.d2N, ue);
      visit(e, q, rule.weights[q] * h, sh, du, d2u);
    }
  }
}

inline void check_admissible(const ScaledProblem& problem, const HermiteField& field, double tol = 1e-10) {
  for (int j = 0; j < n_constraint_points(field.mesh); ++j) {
    const double H = constraint_value(field, j) / problem.lambda;
    if (H < -tol)
      throw ConstraintViolation("inverse strain " + std::to_string(H) + " below zero at constraint point " +
                                std::to_string(j));
  }
}

}  // namespace detail

// Total scaled energy.  Admissibility is checked at the constraint points;
// between them the inverse law is continued smoothly (see
// eval_inverse_extended).
inline double energy(const ScaledProblem& problem, const HermiteField& field) {
  problem.validate();
  detail::check_admissible(problem, field);
  const double lam = problem.lambda;
  const double bend = problem.epsilon * problem.epsilon / (2.0 * lam * lam * lam);
  double total = 0.0;
  detail::for_each_quadrature_point(field, [&](int, int, double w, const auto&, double du, double d2u) {
    const double H = (1.0 + du) / lam;
    total += w * (bend * d2u * d2u + lam * eval_inverse_extended(problem.model, H).Wstar);
  });
  return total;
}

// Derivative of the energy with respect to lambda at fixed dofs.  At an
// equilibrium this is the load conjugate to the stretch.
inline double energy_lambda_derivative(const ScaledProblem& problem, const HermiteField& field) {
  const double lam = problem.lambda;
  const double eps2 = problem.epsilon * problem.epsilon;
  double total = 0.0;
  detail::for_each_quadrature_point(field, [&](int, int, double w, const auto&, double du, double d2u) {
    const double H = (1.0 + du) / lam;
    const auto inv = eval_inverse_extended(problem.model, H);
    total += w * (-1.5 * eps2 / (lam * lam * lam * lam) * d2u * d2u + inv.Wstar - H * inv.Sstar);
  });
  return total;
}

// Gradient of the Lagrangian  lambda^3 E(U) - lambda^4 sum_j mu_j (u'_j + 1)
// with respect to (U, mu_active).  Boundary value rows hold the dof itself.
// `mu` has one entry per constraint point and must vanish off `active`.
inline Eigen::VectorXd residual(const ScaledProblem& problem, const HermiteField& field, const Eigen::VectorXd& mu,
                                const std::vector<int>& active) {
  problem.validate();
  const Mesh& mesh = field.mesh;
  const int nd = mesh.n_dofs();
  if (field.dofs.size() != nd || mu.size() != n_constraint_points(mesh))
    throw std::invalid_argument("residual: dimension mismatch");
  const double lam = problem.lambda;
  const double lam3 = lam * lam * lam, lam4 = lam3 * lam;
  const double eps2 = problem.epsilon * problem.epsilon;
  Eigen::VectorXd r = Eigen::VectorXd::Zero(nd + static_cast<int>(active.size()));
  detail::for_each_quadrature_point(field, [&](int e, int, double w, const auto& sh, double du, double d2u) {
    const double S = eval_inverse_extended(problem.model, (1.0 + du) / lam).Sstar;
    for (int a = 0; a < 4; ++a) r[2 * e + a] += w * (eps2 * d2u * sh.d2N[a] + lam3 * S * sh.dN[a]);
  });
  for (int j : active) {
    const auto row = constraint_row(mesh, j);
    for (int a = 0; a < row.count; ++a) r[row.first_dof + a] -= lam4 * mu[j] * row.coef[a];
  }
  for (int dof : {0, 2 * mesh.n_elems}) r[dof] = field.dofs[dof];
  for (std::size_t i = 0; i < active.size(); ++i) r[nd + i] = -lam4 * constraint_value(field, active[i]);
  return r;
}

struct KktSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd residual;
  std::vector<int> active;
};

namespace detail {

inline std::vector<Eigen::Triplet<double>> field_block_triplets(const ScaledProblem& problem,
                                                                const HermiteField& field, double bend_coef,
                                                                double stiff_coef) {
  const double lam = problem.lambda;
  const double eps2 = problem.epsilon * problem.epsilon;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(16 * 4 * field.mesh.n_elems);
  std::array<double, 16> ke{};
  int current = -1;
  auto flush = [&](int e) {
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) trip.emplace_back(2 * e + a, 2 * e + b, ke[4 * a + b]);
    ke.fill(0.0);
  };
  for_each_quadrature_point(field, [&](int e, int, double w, const auto& sh, double du, double) {
    if (e != current) {
      if (current >= 0) flush(current);
      current = e;
    }
    const double M = eval_inverse_extended(problem.model, (1.0 + du) / lam).Mstar;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        ke[4 * a + b] += w * (bend_coef * eps2 * sh.d2N[a] * sh.d2N[b] + stiff_coef * M * sh.dN[a] * sh.dN[b]);
  });
  if (current >= 0) flush(current);
  return trip;
}

}  // namespace detail

// Hessian of the Lagrangian, with boundary value dofs eliminated
// symmetrically.  Layout: field dofs first, then one row per active point.
inline KktSystem assemble_kkt(const ScaledProblem& problem, const HermiteField& field, const Eigen::VectorXd& mu,
                              const std::vector<int>& active) {
  const Mesh& mesh = field.mesh;
  const int nd = mesh.n_dofs();
  const int m = static_cast<int>(active.size());
  const double lam = problem.lambda;
  const double lam4 = lam * lam * lam * lam;
  auto trip = detail::field_block_triplets(problem, field, 1.0, lam * lam);
  for (int i = 0; i < m; ++i) {
    const auto row = constraint_row(mesh, active[i]);
    for (int a = 0; a < row.count; ++a) {
      trip.emplace_back(row.first_dof + a, nd + i, -lam4 * row.coef[a]);
      trip.emplace_back(nd + i, row.first_dof + a, -lam4 * row.coef[a]);
    }
  }
  std::vector<Eigen::Triplet<double>> kept;
  kept.reserve(trip.size() + 2);
  for (const auto& t : trip)
    if (!is_boundary_dof(mesh, t.row()) && !is_boundary_dof(mesh, t.col())) kept.push_back(t);
  kept.emplace_back(0, 0, 1.0);
  kept.emplace_back(2 * mesh.n_elems, 2 * mesh.n_elems, 1.0);
  KktSystem sys;
  sys.matrix.resize(nd + m, nd + m);
  sys.matrix.setFromTriplets(kept.begin(), kept.end());
  sys.residual = residual(problem, field, mu, active);
  sys.active = active;
  return sys;
}

inline KktSystem tangent(const ScaledProblem& problem, const HermiteField& field, const std::vector<int>& active) {
  return assemble_kkt(problem, field, Eigen::VectorXd::Zero(n_constraint_points(field.mesh)), active);
}

// Matrix G with V^T G V = (1/lambda^3) int eps^2 (v'')^2 + lambda^2 M*(H) (v')^2 ds.
inline Eigen::SparseMatrix<double> second_variation_matrix(const ScaledProblem& problem, const HermiteField& field) {
  const double lam = problem.lambda;
  const double inv3 = 1.0 / (lam * lam * lam);
  auto trip = detail::field_block_triplets(problem, field, inv3, lam * lam * inv3);
  Eigen::SparseMatrix<double> G(field.mesh.n_dofs(), field.mesh.n_dofs());
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

}  // namespace ifrac
