// Crack topology of an equilibrium, configurational driving forces, crack-set
// irreversibility and the translation families of floating good regions.
//
// A node is broken when its inverse strain vanishes.  Maximal runs of broken
// nodes form broken intervals.  Every broken interval collapses to a single
// material point x = s + u(s), which is one crack.  Its endpoints that are not
// domain ends are crack faces.
#pragma once

#include "ifrac/activeset.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ifrac {

struct DegenerateFace : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct WindowExceeded : std::out_of_range {
  using std::out_of_range::out_of_range;
};

enum class FaceOrientation { GoodLeft, GoodRight };

struct CrackFace {
  int node = 0;
  double s_face = 0.0;
  double y_face = 0.0;
  double x_face = 0.0;
  FaceOrientation orientation = FaceOrientation::GoodLeft;
  double phi = 0.0;
};

struct NodeInterval {
  int first_node = 0;
  int last_node = 0;
  double a = 0.0;
  double b = 0.0;
};

struct CrackTopology {
  std::vector<NodeInterval> broken_intervals;
  std::vector<NodeInterval> good_intervals;
  std::vector<CrackFace> faces;
  std::vector<double> material_crack_set;

  bool broken() const { return !broken_intervals.empty(); }
};

inline CrackTopology crack_topology(const EquilibriumState& state, double tol_H = 1e-10) {
  const Mesh& mesh = state.mesh();
  const int N = mesh.n_elems;
  std::vector<char> is_broken(N + 1, 0);
  for (int k = 0; k <= N; ++k) is_broken[k] = (1.0 + state.field.slope(k)) / state.lambda <= tol_H;

  CrackTopology topo;
  int k = 0;
  while (k <= N) {
    const int start = k;
    while (k + 1 <= N && is_broken[k + 1] == is_broken[start]) ++k;
    NodeInterval iv{start, k, mesh.node(start), mesh.node(k)};
    if (is_broken[start]) {
      if (start == k) throw DegenerateFace("broken interval reduced to the single node " + std::to_string(start));
      topo.broken_intervals.push_back(iv);
    }
    ++k;
  }
  // Good intervals are the open gaps between broken intervals.
  double left = mesh.s_min;
  int left_node = 0;
  for (const auto& b : topo.broken_intervals) {
    if (b.first_node > left_node) topo.good_intervals.push_back({left_node, b.first_node, left, b.a});
    left = b.b;
    left_node = b.last_node;
  }
  if (left_node < N || topo.broken_intervals.empty()) topo.good_intervals.push_back({left_node, N, left, mesh.s_max});

  for (const auto& b : topo.broken_intervals) {
    const double xa = b.a + state.field.value(b.first_node);
    const double xb = b.b + state.field.value(b.last_node);
    if (b.first_node > 0)
      topo.faces.push_back({b.first_node, b.a, state.lambda * b.a, xa, FaceOrientation::GoodLeft, 0.0});
    if (b.last_node < N)
      topo.faces.push_back({b.last_node, b.b, state.lambda * b.b, xb, FaceOrientation::GoodRight, 0.0});
    const double x = 0.5 * (xa + xb);
    if (topo.material_crack_set.empty() || std::abs(topo.material_crack_set.back() - x) > 1e-8)
      topo.material_crack_set.push_back(x);
  }
  return topo;
}

// Multiplier density in the deformed frame on a broken interval, averaged over
// element midpoints away from the interval ends.  A midpoint multiplier
// carries two thirds of an element's share (Simpson weights), so its density
// per unit s is 1.5 m / h; one more factor lambda converts to per unit y.
inline double broken_density(const EquilibriumState& state, const NodeInterval& iv) {
  const int ne = iv.last_node - iv.first_node;
  const int skip = ne >= 3 ? 1 : 0;
  double sum = 0.0;
  int count = 0;
  for (int e = iv.first_node + skip; e < iv.last_node - skip; ++e) {
    sum += state.mu[2 * e + 1];
    ++count;
  }
  return state.lambda * 1.5 * (sum / count) / state.mesh().h();
}

inline double element_third_derivative(const HermiteField& field, int e) {
  const auto sh = shape_eval(0.5, field.mesh.h());
  return element_derivative(sh.d3N, field.element_dofs(e));
}

struct DrivingForce {
  double phi;          // jump of the multiplier density, right minus left
  double phi_bending;  // -eps^2 [[h''']] from the good-side third derivative
};

// The good-side h''' is extrapolated linearly to the face from the second and
// third good elements; the element straddling the face is skipped because its
// cubic averages over the kink.
inline DrivingForce driving_force(const ScaledProblem& problem, const EquilibriumState& state,
                                  const CrackTopology& topo, const CrackFace& face) {
  const NodeInterval* iv = nullptr;
  for (const auto& b : topo.broken_intervals)
    if (b.first_node == face.node || b.last_node == face.node) iv = &b;
  if (!iv) throw std::invalid_argument("driving_force: face does not belong to the topology");
  const double density = broken_density(state, *iv);
  const double lam3 = state.lambda * state.lambda * state.lambda;
  const double eps2 = problem.epsilon * problem.epsilon;
  const int N = state.mesh().n_elems;
  double third = 0.0;
  if (face.orientation == FaceOrientation::GoodLeft) {
    const int e2 = std::max(face.node - 2, 0), e3 = std::max(face.node - 3, 0);
    const double t2 = element_third_derivative(state.field, e2), t3 = element_third_derivative(state.field, e3);
    third = (t2 + 1.5 * (t2 - t3)) / lam3;
    return {density, eps2 * third};
  }
  const int e2 = std::min(face.node + 1, N - 1), e3 = std::min(face.node + 2, N - 1);
  const double t2 = element_third_derivative(state.field, e2), t3 = element_third_derivative(state.field, e3);
  third = (t2 + 1.5 * (t2 - t3)) / lam3;
  return {-density, -eps2 * third};
}

struct Dissipation {
  double D;
  bool admissible;
};

inline Dissipation dissipation_rate(double phi, double V) {
  const double D = phi * V;
  return {D, D >= 0.0};
}

inline bool check_irreversibility(const CrackTopology& prev, const CrackTopology& next, double tol_x) {
  for (double x : prev.material_crack_set) {
    bool found = false;
    for (double y : next.material_crack_set) found = found || std::abs(x - y) <= tol_x;
    if (!found) return false;
  }
  return true;
}

// Good intervals bounded by crack faces at both ends.
inline std::vector<NodeInterval> floating_regions(const CrackTopology& topo, const Mesh& mesh) {
  std::vector<NodeInterval> out;
  for (const auto& g : topo.good_intervals)
    if (g.first_node > 0 && g.last_node < mesh.n_elems) out.push_back(g);
  return out;
}

// Least-squares multipliers on `active` for a given field: the field rows of
// the Lagrangian gradient are made as small as possible.
inline Eigen::VectorXd recover_multipliers(const ScaledProblem& problem, const HermiteField& field,
                                           const std::vector<int>& active) {
  const Mesh& mesh = field.mesh;
  const int np = n_constraint_points(mesh);
  const int m = static_cast<int>(active.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(np);
  if (m == 0) return mu;
  const Eigen::VectorXd r = residual(problem, field, mu, active);
  const double lam4 = std::pow(problem.lambda, 4);
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < m; ++i) {
    const auto row = constraint_row(mesh, active[i]);
    for (int a = 0; a < row.count; ++a)
      if (!is_boundary_dof(mesh, row.first_dof + a)) trip.emplace_back(row.first_dof + a, i, lam4 * row.coef[a]);
  }
  Eigen::SparseMatrix<double> C(mesh.n_dofs(), m);
  C.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd rf = r.head(mesh.n_dofs());
  for (int dof : {0, 2 * mesh.n_elems}) rf[dof] = 0.0;
  Eigen::SparseMatrix<double> CtC = C.transpose() * C;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(CtC);
  const Eigen::VectorXd sol = ldlt.solve(C.transpose() * rf);
  for (int i = 0; i < m; ++i) mu[active[i]] = sol[i];
  return mu;
}

// Moves floating region `region_index` by `shift` whole elements; the broken
// intervals on either side grow or shrink to absorb the motion.
inline EquilibriumState translate_region(const ScaledProblem& problem, const EquilibriumState& state,
                                         int region_index, int shift) {
  const auto topo = crack_topology(state);
  const Mesh& mesh = state.mesh();
  const auto regions = floating_regions(topo, mesh);
  if (region_index < 0 || region_index >= static_cast<int>(regions.size()))
    throw std::out_of_range("translate_region: no floating region with index " + std::to_string(region_index));
  if (shift == 0) return state;
  const auto& g = regions[region_index];
  const int a = g.first_node, b = g.last_node;
  const NodeInterval* lb = nullptr;
  const NodeInterval* rb = nullptr;
  for (const auto& iv : topo.broken_intervals) {
    if (iv.last_node == a) lb = &iv;
    if (iv.first_node == b) rb = &iv;
  }
  const int q = lb->first_node, t = rb->last_node;
  const int kmin = q + 1 - a, kmax = t - 1 - b;
  if (shift < kmin || shift > kmax)
    throw WindowExceeded("translation by " + std::to_string(shift) + " elements leaves the admissible window [" +
                         std::to_string(kmin) + ", " + std::to_string(kmax) + "]");

  EquilibriumState out = state;
  const double h = mesh.h();
  const double x_left = mesh.node(q) + state.field.value(q);
  const double x_right = mesh.node(t) + state.field.value(t);
  for (int i = q; i <= t; ++i) {
    if (i >= a + shift && i <= b + shift) {
      out.field.dofs[2 * i] = state.field.value(i - shift) - shift * h;
      out.field.dofs[2 * i + 1] = state.field.slope(i - shift);
    } else {
      out.field.dofs[2 * i] = (i < a + shift ? x_left : x_right) - mesh.node(i);
      out.field.dofs[2 * i + 1] = -1.0;
    }
  }
  std::vector<int> active;
  for (int j : state.active)
    if (j < 2 * q || j > 2 * t) active.push_back(j);
  for (int j = 2 * q; j <= 2 * (a + shift); ++j) active.push_back(j);
  for (int j : state.active)
    if (j > 2 * a && j < 2 * b) active.push_back(j + 2 * shift);
  for (int j = 2 * (b + shift); j <= 2 * t; ++j) active.push_back(j);
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  out.active = active;
  ScaledProblem p = problem;
  p.lambda = state.lambda;
  out.mu = recover_multipliers(p, out.field, out.active);
  out.residual_norm = residual(p, out.field, out.mu, out.active).norm();
  return out;
}

// Translation by an offset theta in the deformed frame, rounded to whole
// elements.
inline EquilibriumState translate_family(const ScaledProblem& problem, const EquilibriumState& state,
                                         int region_index, double theta) {
  const int shift = static_cast<int>(std::lround(theta / (state.lambda * state.mesh().h())));
  return translate_region(problem, state, region_index, shift);
}

}  // namespace ifrac
