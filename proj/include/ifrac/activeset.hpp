// Primal active-set Newton solver for the discrete KKT system at fixed stretch.
#pragma once

#include "ifrac/assembly.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ifrac {

struct SolverOptions {
  double tol_abs = 1e-9;
  double tol_rel = 1e-9;
  int max_newton = 50;
  int max_activeset = 100;
  double activation_tol = 1e-12;
  double deactivation_tol = 1e-12;
  // The residual of fine meshes bottoms out near 1e-9: the value dofs are
  // stored to about 1e-16 and meet bending entries of order eps^2/h^3.  Once
  // the residual is within floor_factor of the target, Newton steps that fail
  // to halve it count as stagnation; after `stagnation_steps` of them the
  // best iterate seen is accepted.
  double floor_factor = 1e3;
  int stagnation_steps = 3;

  void validate() const {
    if (!(tol_abs > 0 && tol_rel > 0 && activation_tol > 0 && deactivation_tol > 0))
      throw std::invalid_argument("solver tolerances must be positive");
    if (max_newton < 1 || max_activeset < 1 || stagnation_steps < 1) throw std::invalid_argument("solver iteration limits must be positive");
  }
};

enum class SolveStatus { Converged, NonConvergence, SingularTangent };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::NonConvergence: return "non-convergence";
    case SolveStatus::SingularTangent: return "singular tangent";
  }
  return "unknown";
}

struct EquilibriumState {
  double lambda = 1.0;
  int branch = 0;
  HermiteField field;
  Eigen::VectorXd mu;       // one entry per constraint point, zero when inactive
  std::vector<int> active;  // sorted constraint-point indices
  bool converged = false;
  double residual_norm = 0.0;
  SolveStatus status = SolveStatus::NonConvergence;
  int newton_iterations = 0;

  const Mesh& mesh() const { return field.mesh; }

  std::vector<int> active_nodes() const {
    std::vector<int> nodes;
    for (int j : active)
      if (is_node_point(j)) nodes.push_back(point_node(j));
    return nodes;
  }

  // Multiplier carried by each node (zero off the active set).
  Eigen::VectorXd nodal_mu() const {
    Eigen::VectorXd out(field.mesh.n_nodes());
    for (int k = 0; k < out.size(); ++k) out[k] = mu[2 * k];
    return out;
  }
};

// Zero field and multipliers on the given mesh.
inline EquilibriumState blank_state(const Mesh& mesh, double lambda, int branch = 0) {
  EquilibriumState s;
  s.lambda = lambda;
  s.branch = branch;
  s.field = HermiteField(mesh);
  s.mu = Eigen::VectorXd::Zero(n_constraint_points(mesh));
  return s;
}

struct KktReport {
  double dual = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double residual = 0.0;
};

inline KktReport kkt_report(const ScaledProblem& problem, const EquilibriumState& state) {
  KktReport rep;
  const int np = n_constraint_points(state.mesh());
  for (int j = 0; j < np; ++j) {
    const double g = constraint_value(state.field, j);
    rep.dual = std::max(rep.dual, -state.mu[j]);
    rep.primal = std::max(rep.primal, -g);
    rep.complementarity = std::max(rep.complementarity, std::abs(state.mu[j] * g));
  }
  ScaledProblem p = problem;
  p.lambda = state.lambda;
  rep.residual = residual(p, state.field, state.mu, state.active).norm();
  return rep;
}

namespace detail {

inline double slope_change(const Mesh& mesh, const Eigen::VectorXd& dU, int j) {
  const auto row = constraint_row(mesh, j);
  double v = 0.0;
  for (int a = 0; a < row.count; ++a) v += row.coef[a] * dU[row.first_dof + a];
  return v;
}

inline void insert_sorted(std::vector<int>& v, int j) {
  auto it = std::lower_bound(v.begin(), v.end(), j);
  if (it == v.end() || *it != j) v.insert(it, j);
}

}  // namespace detail

// Newton iterations on the equality-constrained system for the current active
// set.  Steps that would cross an inactive constraint are shortened to the
// first crossing and the blocking points join the active set.  Outer updates
// add every violated point, or drop the single most negative multiplier.
inline EquilibriumState solve_equilibrium(const ScaledProblem& problem_in, EquilibriumState guess,
                                          const SolverOptions& options = {}) {
  options.validate();
  ScaledProblem problem = problem_in;
  problem.lambda = guess.lambda;
  problem.validate();
  EquilibriumState st = std::move(guess);
  const Mesh mesh = st.field.mesh;
  const int nd = mesh.n_dofs();
  const int np = n_constraint_points(mesh);
  if (st.mu.size() != np) st.mu = Eigen::VectorXd::Zero(np);
  std::sort(st.active.begin(), st.active.end());
  st.active.erase(std::unique(st.active.begin(), st.active.end()), st.active.end());
  st.field.dofs[0] = 0.0;
  st.field.dofs[2 * mesh.n_elems] = 0.0;
  for (int j = 0; j < np; ++j)
    if (constraint_value(st.field, j) < -options.activation_tol) detail::insert_sorted(st.active, j);
  {
    Eigen::VectorXd keep = Eigen::VectorXd::Zero(np);
    for (int j : st.active) keep[j] = st.mu[j];
    st.mu = keep;
  }

  st.converged = false;
  st.status = SolveStatus::NonConvergence;
  st.newton_iterations = 0;
  double target = -1.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;

  for (int outer = 0; outer < options.max_activeset; ++outer) {
    bool inner_ok = false;
    int stagnant = 0;
    std::optional<EquilibriumState> best;
    for (int it = 0; it < options.max_newton; ++it) {
      KktSystem sys = assemble_kkt(problem, st.field, st.mu, st.active);
      const double rn = sys.residual.norm();
      if (target < 0) target = options.tol_abs + options.tol_rel * rn;
      st.residual_norm = rn;
      if (rn <= target) {
        inner_ok = true;
        break;
      }
      sys.matrix.makeCompressed();
      lu.analyzePattern(sys.matrix);
      lu.factorize(sys.matrix);
      if (lu.info() != Eigen::Success) {
        st.status = SolveStatus::SingularTangent;
        return st;
      }
      const Eigen::VectorXd delta = lu.solve(-sys.residual);
      if (lu.info() != Eigen::Success || !delta.allFinite()) {
        st.status = SolveStatus::SingularTangent;
        return st;
      }
      ++st.newton_iterations;
      const Eigen::VectorXd dU = delta.head(nd);

      double alpha = 1.0;
      std::vector<int> blocking;
      std::size_t ai = 0;
      for (int j = 0; j < np; ++j) {
        if (ai < st.active.size() && st.active[ai] == j) {
          ++ai;
          continue;
        }
        const double dg = detail::slope_change(mesh, dU, j);
        if (dg >= 0.0) continue;
        const double g = std::max(constraint_value(st.field, j), 0.0);
        const double a = g / -dg;
        if (a < alpha * (1.0 - 1e-12)) {
          alpha = a;
          blocking.assign(1, j);
        } else if (a <= alpha * (1.0 + 1e-12)) {
          blocking.push_back(j);
        }
      }

      const auto apply = [&](double a) {
        st.field.dofs += a * dU;
        for (std::size_t i = 0; i < st.active.size(); ++i) st.mu[st.active[i]] += a * delta[nd + i];
      };

      if (!blocking.empty() && alpha < 1.0) {
        apply(alpha);
        for (int j : blocking) detail::insert_sorted(st.active, j);
        best.reset();
        stagnant = 0;
        continue;
      }
      blocking.clear();
      const EquilibriumState before = st;
      apply(1.0);
      double rn_new = residual(problem, st.field, st.mu, st.active).norm();
      double step = 1.0;
      for (int halving = 0; halving < 10 && !(rn_new <= rn); ++halving) {
        step *= 0.5;
        st.field = before.field;
        st.mu = before.mu;
        apply(step);
        rn_new = residual(problem, st.field, st.mu, st.active).norm();
      }
      if (rn <= options.floor_factor * target && rn_new > 0.5 * rn) {
        st.residual_norm = rn_new;
        if (!best || before.residual_norm < best->residual_norm) best = before;
        if (!best || st.residual_norm < best->residual_norm) best = st;
        if (++stagnant >= options.stagnation_steps) {
          st = std::move(*best);
          inner_ok = true;
          break;
        }
      }
    }
    if (!inner_ok) return st;

    std::vector<int> violated;
    std::size_t ai = 0;
    for (int j = 0; j < np; ++j) {
      if (ai < st.active.size() && st.active[ai] == j) {
        ++ai;
        continue;
      }
      if (constraint_value(st.field, j) < -options.activation_tol) violated.push_back(j);
    }
    if (!violated.empty()) {
      for (int j : violated) detail::insert_sorted(st.active, j);
      continue;
    }
    int worst = -1;
    double worst_mu = -options.deactivation_tol;
    for (int j : st.active)
      if (st.mu[j] < worst_mu) {
        worst_mu = st.mu[j];
        worst = j;
      }
    if (worst >= 0) {
      st.active.erase(std::find(st.active.begin(), st.active.end(), worst));
      st.mu[worst] = 0.0;
      continue;
    }
    st.converged = true;
    st.status = SolveStatus::Converged;
    return st;
  }
  return st;
}

}  // namespace ifrac
