// Continuation in the stretch lambda: the homogeneous branch, detection of its
// bifurcations, and the nonhomogeneous branches traced on one half-period cell
// [0, 1/n] before odd-periodic extension to the whole bar.
//
// A nonhomogeneous branch leaves its bifurcation point downward in lambda
// (subcritical pitchfork).  It is followed down until the inverse strain
// touches zero, then traced forward again as a broken branch.  Broken states
// are predicted by stretching the previous one: the good region keeps its
// deformed shape and the extra length is added as vacuum at the crack.
#pragma once

#include "ifrac/postprocess.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifrac {

enum class Side { A, B };
inline const char* to_string(Side s) { return s == Side::A ? "A" : "B"; }

struct NonConvergence : std::runtime_error {
  double lambda;
  NonConvergence(const std::string& what, double lam) : std::runtime_error(what), lambda(lam) {}
};
struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContinuationPlan {
  double epsilon = 0.1;
  ConstitutiveModel model{};
  double lambda_start = 1.0;
  double lambda_end = 2.0;
  double step = 0.01;
  int n_max = 6;
  int total_elements = 600;  // a branch-n cell gets total_elements / n elements
  double switch_amplitude = 1e-2;  // relative to the cell length
  SolverOptions solver{};
  StabilityOptions stability{};
  bool keep_states = false;

  int elements_per_cell(int n) const { return std::max(total_elements / n, 1); }

  void validate() const {
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
    if (!(lambda_start >= 1.0)) throw std::invalid_argument("lambda_start must be at least 1");
    if (!(lambda_end > lambda_start)) throw std::invalid_argument("lambda_end must exceed lambda_start");
    if (!(step > 0)) throw std::invalid_argument("step must be positive");
    if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");
    for (int n = 1; n <= n_max; ++n)
      if (elements_per_cell(n) < 10) throw std::invalid_argument("fewer than 10 elements per cell");
    if (!(switch_amplitude > 0)) throw std::invalid_argument("switch amplitude must be positive");
    solver.validate();
  }
};

inline ScaledProblem make_problem(const ContinuationPlan& plan, const Mesh& mesh, double lambda) {
  return ScaledProblem{plan.epsilon, lambda, plan.model, mesh};
}

inline EquilibriumState homogeneous_state(const ScaledProblem& problem) {
  EquilibriumState st = blank_state(problem.mesh, problem.lambda, 0);
  const double rn = residual(problem, st.field, st.mu, st.active).norm();
  if (rn > 1e-12) throw std::logic_error("homogeneous state failed its residual check");
  st.converged = true;
  st.status = SolveStatus::Converged;
  st.residual_norm = rn;
  return st;
}

namespace detail {

// Second variation with the two end value dofs removed, in sparse form.
inline Eigen::SparseMatrix<double> interior_second_variation(const ScaledProblem& problem,
                                                             const HermiteField& field) {
  const auto G = second_variation_matrix(problem, field);
  const int nd = field.mesh.n_dofs();
  const int last = 2 * field.mesh.n_elems;
  std::vector<Eigen::Triplet<double>> trip;
  auto map = [last](int d) { return d < last ? d - 1 : d - 2; };
  for (int c = 0; c < G.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(G, c); it; ++it)
      if (it.row() != 0 && it.row() != last && it.col() != 0 && it.col() != last)
        trip.emplace_back(map(it.row()), map(it.col()), it.value());
  Eigen::SparseMatrix<double> R(nd - 2, nd - 2);
  R.setFromTriplets(trip.begin(), trip.end());
  return R;
}

inline int negative_count(const Eigen::SparseMatrix<double>& A) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) return -1;
  const Eigen::VectorXd D = ldlt.vectorD();
  int c = 0;
  for (int i = 0; i < D.size(); ++i) c += D[i] < 0.0;
  return c;
}

inline int homogeneous_negative_count(const ScaledProblem& base, double lambda) {
  ScaledProblem p = base;
  p.lambda = lambda;
  return negative_count(interior_second_variation(p, HermiteField(p.mesh)));
}

// Eigenvector of the interior second variation closest to zero, by inverse
// iteration, returned on the full dof layout (end values zero).
inline Eigen::VectorXd near_null_vector(const ScaledProblem& problem) {
  const auto A = interior_second_variation(problem, HermiteField(problem.mesh));
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(A.rows());
  for (int i = 0; i < x.size(); ++i) x[i] += 0.1 * std::sin(0.7 * i);
  for (int it = 0; it < 8; ++it) {
    x = ldlt.solve(x);
    x /= x.norm();
  }
  const int last = 2 * problem.mesh.n_elems;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(problem.mesh.n_dofs());
  for (int d = 1; d < last; ++d) full[d] = x[d - 1];
  full[last + 1] = x[last - 1];
  return full;
}

inline int slope_sign_changes(const Eigen::VectorXd& v) {
  const int nn = static_cast<int>(v.size() / 2);
  double vmax = 0.0;
  for (int k = 0; k < nn; ++k) vmax = std::max(vmax, std::abs(v[2 * k + 1]));
  int changes = 0, last_sign = 0;
  for (int k = 0; k < nn; ++k) {
    const double d = v[2 * k + 1];
    if (std::abs(d) < 1e-6 * vmax) continue;
    const int sg = d > 0 ? 1 : -1;
    if (last_sign != 0 && sg != last_sign) ++changes;
    last_sign = sg;
  }
  return changes;
}

}  // namespace detail

struct Bifurcation {
  double lambda;
  int mode;
};

// Bifurcation loads of the homogeneous branch on `mesh`, from the inertia of
// the second variation: the k-th load is where the negative count reaches k.
// The count increases with lambda for the laws in use, so each load is
// located by bisection.
inline std::vector<Bifurcation> detect_bifurcations(double epsilon, const ConstitutiveModel& model, const Mesh& mesh,
                                                    double lambda_lo, double lambda_hi, int n_max,
                                                    double tol = 1e-10) {
  if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");
  const ScaledProblem base{epsilon, lambda_lo, model, mesh};
  const int c_lo = detail::homogeneous_negative_count(base, lambda_lo);
  const int c_hi = detail::homogeneous_negative_count(base, lambda_hi);
  if (c_hi <= c_lo) throw NotFound("no eigenvalue crossing in the scanned stretch range");
  std::vector<Bifurcation> out;
  for (int k = c_lo + 1; k <= std::min(c_hi, c_lo + n_max); ++k) {
    double a = lambda_lo, b = lambda_hi;
    while (b - a > tol) {
      const double mid = 0.5 * (a + b);
      (detail::homogeneous_negative_count(base, mid) >= k ? b : a) = mid;
    }
    ScaledProblem p = base;
    p.lambda = 0.5 * (a + b);
    const int mode = detail::slope_sign_changes(detail::near_null_vector(p));
    out.push_back({p.lambda, mode});
  }
  return out;
}

// Critical load of a branch computed on its own cell, where it is the first
// crossing.
inline double cell_critical_load(const ContinuationPlan& plan, int n) {
  const Mesh cell = make_mesh(plan.elements_per_cell(n), 0.0, 1.0 / n);
  const auto b = detect_bifurcations(plan.epsilon, plan.model, cell, 1.0, 1.5 + 4.0 * plan.epsilon * n + 1.0, 1);
  return b.front().lambda;
}

// Critical eigenmode of the cell, scaled to unit maximal value and oriented so
// that the slope at s = 0 is positive.
inline Eigen::VectorXd cell_mode(const ScaledProblem& problem) {
  Eigen::VectorXd v = detail::near_null_vector(problem);
  double vmax = 0.0;
  for (int k = 0; k < problem.mesh.n_nodes(); ++k) vmax = std::max(vmax, std::abs(v[2 * k]));
  v /= vmax;
  if (v[1] < 0) v = -v;
  return v;
}

inline EquilibriumState branch_switch(const ScaledProblem& problem, double lambda_n, int n, Side side,
                                      double amplitude) {
  ScaledProblem at_critical = problem;
  at_critical.lambda = lambda_n;
  EquilibriumState st = blank_state(problem.mesh, problem.lambda, n);
  if (amplitude == 0.0) return st;
  const double sign = side == Side::A ? 1.0 : -1.0;
  st.field.dofs = sign * amplitude * cell_mode(at_critical);
  st.field.dofs[0] = 0.0;
  st.field.dofs[2 * problem.mesh.n_elems] = 0.0;
  return st;
}

// Odd reflection of the cell solution about its right end, repeated with
// period 2/n.  Multipliers are reflected evenly.
inline EquilibriumState extend_symmetric(const EquilibriumState& cell, int n) {
  const Mesh& cm = cell.mesh();
  if (n < 1) throw std::invalid_argument("extend_symmetric: n must be positive");
  const int Nc = cm.n_elems;
  const double L = cm.s_max - cm.s_min;
  const Mesh full = make_mesh(n * Nc, cm.s_min, cm.s_min + n * L);
  EquilibriumState out = blank_state(full, cell.lambda, cell.branch);
  for (int c = 0; c < n; ++c) {
    const bool odd = c % 2 == 1;
    for (int k = 0; k <= Nc; ++k) {
      const int i = c * Nc + k;
      const int src = odd ? Nc - k : k;
      out.field.dofs[2 * i] = odd ? -cell.field.value(src) : cell.field.value(src);
      out.field.dofs[2 * i + 1] = cell.field.slope(src);
    }
    for (int j = 0; j <= 2 * Nc; ++j) out.mu[c * 2 * Nc + j] = cell.mu[odd ? 2 * Nc - j : j];
    // A point shared by two cells takes the point force of both.
    if (c > 0) out.mu[c * 2 * Nc] *= 2.0;
    for (int j : cell.active) out.active.push_back(c * 2 * Nc + (odd ? 2 * Nc - j : j));
  }
  std::sort(out.active.begin(), out.active.end());
  out.active.erase(std::unique(out.active.begin(), out.active.end()), out.active.end());
  out.converged = cell.converged;
  out.status = cell.status;
  out.newton_iterations = cell.newton_iterations;
  return out;
}

// Stretch predictor for a broken cell state: the deformed shape of the good
// part is kept and the added length becomes vacuum at the crack end (right
// end for side A, left end for side B).
inline EquilibriumState stretch_predict(const EquilibriumState& old, double lambda_new, Side side) {
  const Mesh& mesh = old.mesh();
  const double L = mesh.s_max - mesh.s_min;
  const double lo = old.lambda;
  const double shift = side == Side::A ? 0.0 : (lambda_new - lo) * L;
  EquilibriumState st = blank_state(mesh, lambda_new, old.branch);
  for (int k = 0; k <= mesh.n_elems; ++k) {
    const double s = mesh.node(k);
    const double y_old = lambda_new * (s - mesh.s_min) - shift;
    const double tiny = 1e-12 * L;
    double h, dh;
    if (y_old < -tiny) {
      h = mesh.s_min;
      dh = 0.0;
    } else if (y_old > lo * L + tiny) {
      h = mesh.s_max;
      dh = 0.0;
    } else {
      const double so = std::clamp(mesh.s_min + y_old / lo, mesh.s_min, mesh.s_max);
      const auto v = eval_field(old.field, so);
      h = so + v.u;
      dh = (1.0 + v.du) / lo;
    }
    st.field.dofs[2 * k] = h - s;
    st.field.dofs[2 * k + 1] = lambda_new * dh - 1.0;
  }
  st.field.dofs[0] = 0.0;
  st.field.dofs[2 * mesh.n_elems] = 0.0;
  for (int j = 0; j < n_constraint_points(mesh); ++j)
    if (constraint_value(st.field, j) <= 1e-9) st.active.push_back(j);
  return st;
}

struct BranchSample {
  double lambda = 1.0;
  double energy = 0.0;
  StressSummary stress{};
  Verdict verdict = Verdict::Inconsistent;
  int n_zero = 0;
  int n_negative = 0;
  int P = 0;
  int n_crack_faces = 0;
  int n_material_cracks = 0;
  std::vector<double> crack_set;
  bool broken = false;
  double residual_norm = 0.0;
  KktReport kkt{};
  std::optional<EquilibriumState> state;  // full-bar state when kept
};

struct BranchRecord {
  int branch = 0;
  Side side = Side::A;
  double lambda_critical = 0.0;
  double lambda_break = 0.0;  // last unbroken stretch before the crack opens
  std::vector<BranchSample> samples;  // in path order
  bool irreversible = true;
};

// Post-processing of a full-bar state into a diagram sample.
inline BranchSample make_sample(const ContinuationPlan& plan, const EquilibriumState& full) {
  const ScaledProblem p = make_problem(plan, full.mesh(), full.lambda);
  BranchSample s;
  s.lambda = full.lambda;
  s.energy = energy(p, full.field);
  s.stress = stress(p, full);
  const auto topo = crack_topology(full);
  const auto rep = analyze_stability(p, full, plan.stability);
  s.verdict = rep.verdict;
  s.n_zero = rep.n_zero;
  s.n_negative = rep.n_negative;
  s.P = rep.P;
  s.n_crack_faces = static_cast<int>(topo.faces.size());
  s.n_material_cracks = static_cast<int>(topo.material_crack_set.size());
  s.crack_set = topo.material_crack_set;
  s.broken = topo.broken();
  s.kkt = kkt_report(p, full);
  s.residual_norm = s.kkt.residual;
  if (plan.keep_states) s.state = full;
  return s;
}

inline BranchRecord homogeneous_branch(const ContinuationPlan& plan) {
  plan.validate();
  const Mesh mesh = make_mesh(plan.total_elements, 0.0, 1.0);
  BranchRecord rec;
  rec.branch = 0;
  const int steps = static_cast<int>(std::floor((plan.lambda_end - plan.lambda_start) / plan.step + 1e-9));
  for (int i = 0; i <= steps; ++i) {
    const double lam = plan.lambda_start + i * plan.step;
    rec.samples.push_back(make_sample(plan, homogeneous_state(make_problem(plan, mesh, lam))));
  }
  return rec;
}

namespace detail {

inline double value_amplitude(const EquilibriumState& st) {
  double a = 0.0;
  for (int k = 0; k < st.mesh().n_nodes(); ++k) a = std::max(a, std::abs(st.field.value(k)));
  return a;
}

}  // namespace detail

// Traces branch n on side A or B.  `lambda_n`, when given, is the critical
// load on the cell mesh; otherwise it is computed.
inline BranchRecord continue_branch(const ContinuationPlan& plan, int n, Side side,
                                    std::optional<double> lambda_n = std::nullopt) {
  plan.validate();
  const int Nc = plan.elements_per_cell(n);
  const double L = 1.0 / n;
  const Mesh cell = make_mesh(Nc, 0.0, L);
  const double lam_c = lambda_n ? *lambda_n : cell_critical_load(plan, n);
  if (!(lam_c > plan.lambda_start && lam_c < plan.lambda_end))
    throw std::invalid_argument("branch " + std::to_string(n) + ": critical load outside the stretch range");

  BranchRecord rec;
  rec.branch = n;
  rec.side = side;
  rec.lambda_critical = lam_c;
  auto solve_at = [&](EquilibriumState guess) {
    return solve_equilibrium(make_problem(plan, cell, guess.lambda), std::move(guess), plan.solver);
  };
  // Extended states are re-converged on the whole bar.  The cell residual
  // grows with the number of copies, and whole-bar Newton steps bring it back
  // to the round-off floor.
  auto whole_bar = [&](const EquilibriumState& cs) {
    EquilibriumState full = extend_symmetric(cs, n);
    if (n == 1) return full;
    const ScaledProblem p = make_problem(plan, full.mesh(), full.lambda);
    full.residual_norm = residual(p, full.field, full.mu, full.active).norm();
    EquilibriumState polished = solve_equilibrium(p, full, plan.solver);
    if (polished.converged && polished.residual_norm < full.residual_norm) return polished;
    return full;
  };
  auto record = [&](const EquilibriumState& cs) { rec.samples.push_back(make_sample(plan, whole_bar(cs))); };

  // First point just below the critical load.
  const double first_offset = 1e-3;
  EquilibriumState cur;
  {
    const ScaledProblem p0 = make_problem(plan, cell, lam_c - first_offset);
    const double delta = plan.switch_amplitude * L;
    bool ok = false;
    for (double amp : {delta, 5.0 * delta}) {
      cur = solve_at(branch_switch(p0, lam_c, n, side, amp));
      if (cur.converged && cur.active.empty() && detail::value_amplitude(cur) > 0.1 * delta) {
        ok = true;
        break;
      }
    }
    if (!ok) throw NonConvergence("branch switch failed to leave the homogeneous state", lam_c - first_offset);
  }
  record(cur);

  // Downward unbroken segment with a secant predictor.
  std::optional<EquilibriumState> prev;
  double dl = first_offset;
  const double min_step = 1e-7;
  while (dl >= min_step && cur.lambda > plan.lambda_start) {
    const double lam = std::max(cur.lambda - dl, plan.lambda_start);
    EquilibriumState guess = cur;
    if (prev) {
      const double r = (cur.lambda - lam) / (prev->lambda - cur.lambda);
      guess.field.dofs = cur.field.dofs + r * (cur.field.dofs - prev->field.dofs);
    }
    guess.lambda = lam;
    // Any activation rejects the step, so a short active-set budget suffices.
    SolverOptions probe = plan.solver;
    probe.max_activeset = 2;
    EquilibriumState next = solve_equilibrium(make_problem(plan, cell, lam), std::move(guess), probe);
    const bool accept = next.converged && next.active.empty() &&
                        detail::value_amplitude(next) >= 0.5 * detail::value_amplitude(cur);
    if (!accept) {
      dl *= 0.5;
      continue;
    }
    prev = std::move(cur);
    cur = std::move(next);
    record(cur);
    dl = std::min(2.0 * dl, plan.step);
  }
  rec.lambda_break = cur.lambda;
  if (cur.lambda <= plan.lambda_start) return rec;

  // Forward broken segment on the global grid, starting once the opening
  // spans at least two elements.
  const double min_gap = 2.0 * plan.lambda_end / Nc;
  int grid = static_cast<int>(std::ceil((cur.lambda + min_gap - plan.lambda_start) / plan.step - 1e-9));
  std::optional<CrackTopology> last_topo;
  const double tol_x = 1.0 / (2.0 * n * Nc);
  for (;; ++grid) {
    const double target = plan.lambda_start + grid * plan.step;
    if (target > plan.lambda_end + 1e-12) break;
    double reached = cur.lambda;
    int halvings = 0;
    while (reached < target) {
      double lam = target;
      for (int h = 0; h < halvings; ++h) lam = reached + 0.5 * (lam - reached);
      EquilibriumState next = solve_at(stretch_predict(cur, lam, side));
      if (!next.converged) {
        if (++halvings > 6)
          throw NonConvergence("branch " + std::to_string(n) + to_string(side) + ": " + to_string(next.status), lam);
        continue;
      }
      cur = std::move(next);
      reached = cur.lambda;
      halvings = std::max(halvings - 1, 0);
    }
    const auto full = whole_bar(cur);
    const auto topo = crack_topology(full);
    if (last_topo && !check_irreversibility(*last_topo, topo, tol_x)) rec.irreversible = false;
    last_topo = topo;
    rec.samples.push_back(make_sample(plan, full));
  }
  return rec;
}

}  // namespace ifrac
