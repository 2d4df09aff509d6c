// Shared fixtures: random admissible fields and cached branch traces.
#pragma once

#include "ifrac/continuation.hpp"

#include <map>
#include <random>
#include <tuple>

namespace testing_support {

// Random field with |u'| well below 1, so every constraint holds strictly.
// Nodal values are scaled by h so that value differences stay slope-sized.
inline ifrac::HermiteField random_field(const ifrac::Mesh& mesh, unsigned seed, double amplitude = 0.05) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  ifrac::HermiteField f(mesh);
  for (int i = 0; i < mesh.n_dofs(); ++i) f.dofs[i] = (i % 2 == 0 ? mesh.h() : 1.0) * dist(rng);
  f.dofs[0] = 0.0;
  f.dofs[2 * mesh.n_elems] = 0.0;
  return f;
}

// Branch trace with states kept, computed once per (n, side, elements).
inline const ifrac::BranchRecord& traced_branch(int n, ifrac::Side side, int elements, double lambda_end = 1.9) {
  static std::map<std::tuple<int, int, int, double>, ifrac::BranchRecord> cache;
  const auto key = std::make_tuple(n, static_cast<int>(side), elements, lambda_end);
  auto it = cache.find(key);
  if (it == cache.end()) {
    ifrac::ContinuationPlan plan;
    plan.total_elements = elements;
    plan.lambda_end = lambda_end;
    plan.keep_states = true;
    it = cache.emplace(key, ifrac::continue_branch(plan, n, side)).first;
  }
  return it->second;
}

inline const ifrac::BranchSample& sample_at(const ifrac::BranchRecord& rec, double lambda) {
  for (const auto& s : rec.samples)
    if (std::abs(s.lambda - lambda) < 1e-9) return s;
  throw std::out_of_range("no sample at the requested stretch");
}

}  // namespace testing_support
