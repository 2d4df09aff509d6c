// Local stability of equilibria from the second variation restricted to
// admissible variations: both dofs vanish at broken nodes, values vanish at
// the bar ends.  Removing the broken nodes decouples the matrix into one block
// per good interval, so the spectrum is assembled block by block.
#pragma once

#include "ifrac/cracks.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifrac {

enum class Verdict { Stable, Unstable, Marginal, Inconsistent };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "Stable";
    case Verdict::Unstable: return "Unstable";
    case Verdict::Marginal: return "Marginal";
    case Verdict::Inconsistent: return "Inconsistent";
  }
  return "Unknown";
}

inline Verdict verdict_from_string(const std::string& s) {
  for (Verdict v : {Verdict::Stable, Verdict::Unstable, Verdict::Marginal, Verdict::Inconsistent})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

struct StabilityReport {
  std::vector<double> eigenvalues;
  int n_zero = 0;
  int n_negative = 0;
  int P = 0;
  double scale = 1.0;
  Verdict verdict = Verdict::Inconsistent;
};

struct ReducedHessian {
  Eigen::MatrixXd matrix;
  std::vector<int> kept_dofs;
  // [begin, end) ranges of kept indices that couple only among themselves.
  std::vector<std::pair<int, int>> blocks;
};

inline std::vector<char> broken_nodes(const EquilibriumState& state, double tol_H = 1e-10) {
  std::vector<char> out(state.mesh().n_nodes(), 0);
  for (int k = 0; k < state.mesh().n_nodes(); ++k) out[k] = (1.0 + state.field.slope(k)) / state.lambda <= tol_H;
  return out;
}

inline ReducedHessian reduced_hessian(const ScaledProblem& problem, const EquilibriumState& state) {
  ScaledProblem p = problem;
  p.lambda = state.lambda;
  const Mesh& mesh = state.mesh();
  const auto broken = broken_nodes(state);
  ReducedHessian red;
  int block_start = -1;
  for (int k = 0; k < mesh.n_nodes(); ++k) {
    if (broken[k]) {
      if (block_start >= 0) red.blocks.push_back({block_start, int(red.kept_dofs.size())});
      block_start = -1;
      continue;
    }
    if (block_start < 0) block_start = int(red.kept_dofs.size());
    if (k != 0 && k != mesh.n_elems) red.kept_dofs.push_back(2 * k);
    red.kept_dofs.push_back(2 * k + 1);
  }
  if (block_start >= 0) red.blocks.push_back({block_start, int(red.kept_dofs.size())});

  const Eigen::SparseMatrix<double> G = second_variation_matrix(p, state.field);
  std::vector<int> index(mesh.n_dofs(), -1);
  for (std::size_t i = 0; i < red.kept_dofs.size(); ++i) index[red.kept_dofs[i]] = static_cast<int>(i);
  const int n = static_cast<int>(red.kept_dofs.size());
  red.matrix = Eigen::MatrixXd::Zero(n, n);
  for (int c = 0; c < G.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(G, c); it; ++it) {
      const int i = index[it.row()], j = index[it.col()];
      if (i >= 0 && j >= 0) red.matrix(i, j) = it.value();
    }
  return red;
}

namespace detail {

inline int half_bandwidth(const Eigen::MatrixXd& A) {
  int kd = 0;
  for (int j = 0; j < A.cols(); ++j)
    for (int i = 0; i < j; ++i)
      if (A(i, j) != 0.0) kd = std::max(kd, j - i);
  return kd;
}

// Upper band in LAPACK column-major layout.
inline std::vector<double> upper_band(const Eigen::MatrixXd& A, int kd) {
  const int n = static_cast<int>(A.rows());
  std::vector<double> ab(static_cast<std::size_t>(kd + 1) * n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int i = std::max(0, j - kd); i <= j; ++i) ab[kd + i - j + static_cast<std::size_t>(j) * (kd + 1)] = A(i, j);
  return ab;
}

inline void require_symmetric(const Eigen::MatrixXd& G, const char* who) {
  if (G.rows() != G.cols()) throw std::invalid_argument(std::string(who) + ": matrix not square");
  if (G.size() == 0) return;
  const double tol = 1e-12 * std::max(1.0, G.cwiseAbs().maxCoeff());
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > tol) throw std::invalid_argument(std::string(who) + ": matrix not symmetric");
}

}  // namespace detail

// Sorted eigenvalues of a symmetric matrix.  The reduced Hessians are banded,
// so the band routine does the work in O(n^2) instead of O(n^3).
inline std::vector<double> eigen_spectrum(const Eigen::MatrixXd& G) {
  detail::require_symmetric(G, "eigen_spectrum");
  const int n = static_cast<int>(G.rows());
  if (n == 0) return {};
  const int kd = detail::half_bandwidth(G);
  auto ab = detail::upper_band(G, kd);
  std::vector<double> w(n);
  const lapack_int info = LAPACKE_dsbev(LAPACK_COL_MAJOR, 'N', 'U', n, kd, ab.data(), kd + 1, w.data(), nullptr, 1);
  if (info != 0) throw std::runtime_error("eigen_spectrum: eigensolver failed");
  return w;
}

struct LowModes {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // unit columns
};

// The `count` smallest eigenpairs of a symmetric banded matrix.
inline LowModes lowest_modes(const Eigen::MatrixXd& G, int count) {
  detail::require_symmetric(G, "lowest_modes");
  const int n = static_cast<int>(G.rows());
  count = std::min(count, n);
  LowModes out;
  if (count <= 0) return out;
  const int kd = detail::half_bandwidth(G);
  auto ab = detail::upper_band(G, kd);
  std::vector<double> q(static_cast<std::size_t>(n) * n), w(n), z(static_cast<std::size_t>(n) * count);
  std::vector<lapack_int> ifail(n);
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, kd, ab.data(), kd + 1, q.data(), n, 0.0,
                                         0.0, 1, count, 0.0, &found, w.data(), z.data(), n, ifail.data());
  if (info != 0 || found != count) throw std::runtime_error("lowest_modes: eigensolver failed");
  out.values = Eigen::Map<Eigen::VectorXd>(w.data(), count);
  out.vectors = Eigen::Map<Eigen::MatrixXd>(z.data(), n, count);
  return out;
}

inline int count_floating_regions(const CrackTopology& topo, const Mesh& mesh) {
  return static_cast<int>(floating_regions(topo, mesh).size());
}

inline StabilityReport classify(const std::vector<double>& spectrum, int P, double zero_tol = 1e-13) {
  StabilityReport rep;
  rep.eigenvalues = spectrum;
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end());
  rep.P = P;
  rep.scale = 1.0;
  if (!spectrum.empty())
    rep.scale = std::max({std::abs(rep.eigenvalues.front()), std::abs(rep.eigenvalues.back()), 1.0});
  const double thr = zero_tol * rep.scale;
  for (double b : rep.eigenvalues) {
    if (b < -thr) ++rep.n_negative;
    else if (b <= thr) ++rep.n_zero;
  }
  if (rep.n_negative >= 1) rep.verdict = Verdict::Unstable;
  else if (rep.n_zero < P) rep.verdict = Verdict::Inconsistent;
  else if (rep.n_zero == P) rep.verdict = Verdict::Stable;
  else rep.verdict = Verdict::Marginal;
  return rep;
}

// Discrete translation mode of a floating region as a vector over all dofs:
// nodal value (1 + u') / lambda and nodal slope u'' / lambda, with u''
// averaged across the node.  Zero outside the open region.
inline Eigen::VectorXd translation_mode(const EquilibriumState& state, const NodeInterval& region) {
  const Mesh& mesh = state.mesh();
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(mesh.n_dofs());
  for (int k = region.first_node + 1; k < region.last_node; ++k) {
    const double left = eval_field(state.field, mesh.node(k) - 1e-9 * mesh.h()).d2u;
    const double right = eval_field(state.field, mesh.node(k) + 1e-9 * mesh.h()).d2u;
    xi[2 * k] = (1.0 + state.field.slope(k)) / state.lambda;
    xi[2 * k + 1] = 0.5 * (left + right) / state.lambda;
  }
  return xi;
}

struct TranslationMode {
  double eigenvalue = 0.0;  // raw eigenvalue of the aligned mode
  double alignment = 0.0;   // |cos| between the mode and the translation vector
  bool discounted = false;
};

struct StabilityOptions {
  double zero_tol = 1e-13;
  // Minimum |cos| for an eigenvector to be taken as a region's translation mode.
  double min_alignment = 0.99;
  // Number of lowest eigenpairs searched for the translation mode.
  int search_modes = 4;
};

struct StabilityAnalysis {
  StabilityReport report;
  std::vector<TranslationMode> translations;
};

// Spectrum of the reduced second variation with the translation direction of
// every floating region projected out.  On a fixed mesh a crack face falls
// inside an element, so the translation eigenvalue is small but not zero and
// its sign is arbitrary.  The eigenvector aligned with the region's
// translation vector stands for that direction and enters the spectrum as an
// exact zero.  A region without such an eigenvector keeps its raw spectrum,
// which then shows up as Inconsistent or Unstable.
inline StabilityAnalysis analyze_stability_detailed(const ScaledProblem& problem, const EquilibriumState& state,
                                                    const StabilityOptions& options = {}) {
  const auto topo = crack_topology(state);
  const auto red = reduced_hessian(problem, state);
  const Mesh& mesh = state.mesh();
  const auto regions = floating_regions(topo, mesh);
  StabilityAnalysis out;
  std::vector<double> spectrum;
  for (auto [b, e] : red.blocks) {
    const Eigen::MatrixXd block = red.matrix.block(b, b, e - b, e - b);
    auto ev = eigen_spectrum(block);
    const int first_node = red.kept_dofs[b] / 2;
    for (const auto& g : regions) {
      if (first_node != g.first_node + 1) continue;
      const Eigen::VectorXd full = translation_mode(state, g);
      Eigen::VectorXd xi(e - b);
      for (int i = b; i < e; ++i) xi[i - b] = full[red.kept_dofs[i]];
      xi.normalize();
      const auto low = lowest_modes(block, options.search_modes);
      TranslationMode tm;
      int best = -1;
      for (int c = 0; c < low.values.size(); ++c) {
        const double cosine = std::abs(low.vectors.col(c).dot(xi));
        if (cosine > tm.alignment) {
          tm.alignment = cosine;
          tm.eigenvalue = low.values[c];
          best = c;
        }
      }
      if (best >= 0 && tm.alignment >= options.min_alignment) {
        tm.discounted = true;
        ev[best] = 0.0;
      }
      out.translations.push_back(tm);
    }
    spectrum.insert(spectrum.end(), ev.begin(), ev.end());
  }
  out.report = classify(spectrum, static_cast<int>(regions.size()), options.zero_tol);
  return out;
}

inline StabilityReport analyze_stability(const ScaledProblem& problem, const EquilibriumState& state,
                                         const StabilityOptions& options = {}) {
  return analyze_stability_detailed(problem, state, options).report;
}

// Largest relative residual ||G xi|| / ||xi|| over the floating regions,
// with G the reduced second variation.
inline double translation_mode_check(const ScaledProblem& problem, const EquilibriumState& state,
                                     const CrackTopology& topo) {
  ScaledProblem p = problem;
  p.lambda = state.lambda;
  const auto red = reduced_hessian(p, state);
  const Eigen::SparseMatrix<double> G = second_variation_matrix(p, state.field);
  double worst = 0.0;
  for (const auto& g : floating_regions(topo, state.mesh())) {
    const Eigen::VectorXd xi = translation_mode(state, g);
    const Eigen::VectorXd Gx = G * xi;
    double num = 0.0;
    for (int d : red.kept_dofs) num += Gx[d] * Gx[d];
    worst = std::max(worst, std::sqrt(num) / xi.norm());
  }
  return worst;
}

}  // namespace ifrac
