// Uniform 1D meshes, cubic Hermite shape functions and Gauss quadrature.
//
// Each node carries two unknowns, the value u_k and the physical slope u'_k.
// Global dof layout is [u_0, u'_0, u_1, u'_1, ...].
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace ifrac {

struct Mesh {
  int n_elems = 2;
  double s_min = 0.0;
  double s_max = 1.0;

  int n_nodes() const { return n_elems + 1; }
  int n_dofs() const { return 2 * n_nodes(); }
  double h() const { return (s_max - s_min) / n_elems; }
  double node(int k) const { return s_min + (s_max - s_min) * k / n_elems; }
};

inline Mesh make_mesh(int n_elems, double s_min, double s_max) {
  if (n_elems < 2) throw std::invalid_argument("mesh needs at least two elements");
  if (!(s_max > s_min)) throw std::invalid_argument("mesh needs s_max > s_min");
  return Mesh{n_elems, s_min, s_max};
}

template <class Real = double>
struct QuadratureRule {
  std::array<Real, 4> points;
  std::array<Real, 4> weights;
};

// Four-point Gauss-Legendre rule mapped to [0, 1].
template <class Real = double>
QuadratureRule<Real> gauss4() {
  using std::sqrt;
  const Real r = sqrt(Real(30));
  const Real a = sqrt((Real(3) - Real(2) * sqrt(Real(6) / Real(5))) / Real(7));
  const Real b = sqrt((Real(3) + Real(2) * sqrt(Real(6) / Real(5))) / Real(7));
  const Real wa = (Real(18) + r) / Real(36);
  const Real wb = (Real(18) - r) / Real(36);
  QuadratureRule<Real> q;
  q.points = {(Real(1) - b) / 2, (Real(1) - a) / 2, (Real(1) + a) / 2, (Real(1) + b) / 2};
  q.weights = {wb / 2, wa / 2, wa / 2, wb / 2};
  return q;
}

// Shape functions on an element of length h at reference coordinate xi.
// Index order matches local dofs (u_left, u'_left, u_right, u'_right);
// derivatives are with respect to the physical coordinate.
template <class Real = double>
struct HermiteShape {
  std::array<Real, 4> N;
  std::array<Real, 4> dN;
  std::array<Real, 4> d2N;
  std::array<Real, 4> d3N;
};

template <class Real = double>
HermiteShape<Real> shape_eval(Real xi, Real h) {
  const Real x2 = xi * xi, x3 = x2 * xi;
  HermiteShape<Real> s;
  s.N = {1 - 3 * x2 + 2 * x3, h * (xi - 2 * x2 + x3), 3 * x2 - 2 * x3, h * (x3 - x2)};
  s.dN = {(6 * x2 - 6 * xi) / h, 1 - 4 * xi + 3 * x2, (6 * xi - 6 * x2) / h, 3 * x2 - 2 * xi};
  s.d2N = {(12 * xi - 6) / (h * h), (6 * xi - 4) / h, (6 - 12 * xi) / (h * h), (6 * xi - 2) / h};
  s.d3N = {12 / (h * h * h), 6 / (h * h), -12 / (h * h * h), 6 / (h * h)};
  return s;
}

// Derivative of an element cubic from derivative weights w.  The two value
// weights are exact negatives of each other, so the nodal values only enter
// through their difference.  Large values then do not cancel in round-off.
template <class Real>
double element_derivative(const std::array<Real, 4>& w, const Eigen::Vector4d& ue) {
  return w[2] * (ue[2] - ue[0]) + w[1] * ue[1] + w[3] * ue[3];
}

struct HermiteField {
  Mesh mesh;
  Eigen::VectorXd dofs;

  HermiteField() = default;
  HermiteField(const Mesh& m) : mesh(m), dofs(Eigen::VectorXd::Zero(m.n_dofs())) {}
  HermiteField(const Mesh& m, Eigen::VectorXd d) : mesh(m), dofs(std::move(d)) {
    if (dofs.size() != mesh.n_dofs()) throw std::invalid_argument("HermiteField: dof count does not match mesh");
  }

  double value(int k) const { return dofs[2 * k]; }
  double slope(int k) const { return dofs[2 * k + 1]; }
  Eigen::Vector4d element_dofs(int e) const { return dofs.segment<4>(2 * e); }
};

struct FieldValue {
  double u;
  double du;
  double d2u;
};

// Element index and local coordinate of a point; the last element owns s_max.
inline std::pair<int, double> locate(const Mesh& mesh, double s) {
  if (s < mesh.s_min - 1e-14 || s > mesh.s_max + 1e-14) throw std::out_of_range("point outside mesh domain");
  const double t = (s - mesh.s_min) / mesh.h();
  int e = std::clamp(static_cast<int>(std::floor(t)), 0, mesh.n_elems - 1);
  return {e, std::clamp(t - e, 0.0, 1.0)};
}

inline FieldValue eval_field(const HermiteField& field, double s) {
  auto [e, xi] = locate(field.mesh, s);
  const auto sh = shape_eval(xi, field.mesh.h());
  const Eigen::Vector4d ue = field.element_dofs(e);
  FieldValue v{0, element_derivative(sh.dN, ue), element_derivative(sh.d2N, ue)};
  for (int a = 0; a < 4; ++a) v.u += sh.N[a] * ue[a];
  return v;
}

// Nodal interpolant of a function given with its derivative.
template <class F, class DF>
HermiteField interpolate(const Mesh& mesh, F&& f, DF&& df) {
  HermiteField field(mesh);
  for (int k = 0; k < mesh.n_nodes(); ++k) {
    const double s = mesh.node(k);
    field.dofs[2 * k] = f(s);
    field.dofs[2 * k + 1] = df(s);
  }
  return field;
}

}  // namespace ifrac
