#include "ifrac/continuation.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using ifrac::Side;
using testing_support::traced_branch;

// Root of eps^2 (n pi)^2 + lambda^2 M*(1/lambda) = 0 for M*(H) = 6 H - 4, by
// bisection on [1, 3].
double scalar_critical_load(double eps, int n) {
  const double pi = std::acos(-1.0);
  auto g = [&](double lam) { return eps * eps * n * n * pi * pi + lam * lam * (6.0 / lam - 4.0); };
  double a = 1.0, b = 3.0;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    (g(m) > 0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

TEST(Bifurcations, MatchTheScalarOracle) {
  const auto model = ifrac::ConstitutiveModel::cubic();
  const auto bifs = ifrac::detect_bifurcations(0.1, model, ifrac::make_mesh(600, 0.0, 1.0), 1.0, 2.0, 6);
  ASSERT_EQ(bifs.size(), 6u);
  for (int n = 1; n <= 6; ++n) {
    const double ref = scalar_critical_load(0.1, n);
    EXPECT_LE(std::abs(bifs[n - 1].lambda - ref) / ref, 1e-4) << "n = " << n;
    EXPECT_EQ(bifs[n - 1].mode, n);
  }
  EXPECT_NEAR(bifs[0].lambda, 1.5163, 2e-3);
}

TEST(Bifurcations, CellLoadEqualsTheFullBarLoad) {
  ifrac::ContinuationPlan plan;
  for (int n = 1; n <= 3; ++n) {
    const double ref = scalar_critical_load(0.1, n);
    EXPECT_LE(std::abs(ifrac::cell_critical_load(plan, n) - ref) / ref, 1e-4) << "n = " << n;
  }
}

TEST(Bifurcations, SmallerEpsilonMovesTheFirstLoadTowardOnePointFive) {
  const auto model = ifrac::ConstitutiveModel::cubic();
  const auto mesh = ifrac::make_mesh(300, 0.0, 1.0);
  const double a = ifrac::detect_bifurcations(0.1, model, mesh, 1.0, 2.0, 1).front().lambda;
  const double b = ifrac::detect_bifurcations(0.05, model, mesh, 1.0, 2.0, 1).front().lambda;
  EXPECT_LT(std::abs(b - 1.5), std::abs(a - 1.5));
}

TEST(Bifurcations, NoCrossingInRange) {
  const auto model = ifrac::ConstitutiveModel::cubic();
  EXPECT_THROW(ifrac::detect_bifurcations(0.1, model, ifrac::make_mesh(100, 0.0, 1.0), 1.0, 1.2, 3),
               ifrac::NotFound);
}

TEST(Homogeneous, BranchLosesStabilityAtTheFirstLoad) {
  ifrac::ContinuationPlan plan;
  plan.total_elements = 120;
  plan.lambda_end = 1.7;
  plan.step = 0.05;
  const auto rec = ifrac::homogeneous_branch(plan);
  ASSERT_EQ(rec.samples.size(), 15u);
  const double lam1 = scalar_critical_load(0.1, 1);
  for (const auto& s : rec.samples) {
    EXPECT_EQ(s.P, 0);
    EXPECT_FALSE(s.broken);
    EXPECT_EQ(s.verdict, s.lambda < lam1 ? ifrac::Verdict::Stable : ifrac::Verdict::Unstable) << s.lambda;
    const double H = 1.0 / s.lambda;
    EXPECT_NEAR(s.energy, s.lambda * H * (1 - H) * (1 - H), 1e-14);
  }
}

TEST(Branches, SidesHaveEqualEnergies) {
  const auto& a = traced_branch(1, Side::A, 120);
  const auto& b = traced_branch(1, Side::B, 120);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_DOUBLE_EQ(a.samples[i].lambda, b.samples[i].lambda);
    EXPECT_NEAR(a.samples[i].energy, b.samples[i].energy, 1e-10);
  }
}

TEST(Branches, UnbrokenPartIsUnstableAndBrokenPartIsStable) {
  const auto& rec = traced_branch(1, Side::A, 120);
  int broken = 0, unbroken = 0;
  for (const auto& s : rec.samples) {
    if (s.broken) {
      ++broken;
      EXPECT_EQ(s.verdict, ifrac::Verdict::Stable) << s.lambda;
    } else {
      ++unbroken;
      EXPECT_EQ(s.verdict, ifrac::Verdict::Unstable) << s.lambda;
    }
  }
  EXPECT_GT(broken, 5);
  EXPECT_GT(unbroken, 5);
  EXPECT_TRUE(rec.irreversible);
  EXPECT_GT(rec.lambda_break, 1.1);
  EXPECT_LT(rec.lambda_break, 1.2);
}

// On a coarse mesh the energy still moves slightly as the crack faces pass
// from one element to the next.
TEST(Branches, BrokenEnergyIsConstantAlongTheBranch) {
  const auto& rec = traced_branch(1, Side::A, 120);
  double lo = 1e9, hi = -1e9;
  for (const auto& s : rec.samples)
    if (s.broken) {
      lo = std::min(lo, s.energy);
      hi = std::max(hi, s.energy);
    }
  EXPECT_LE(hi - lo, 1e-4 * hi);
}

TEST(Branches, EveryStateSatisfiesTheKktConditions) {
  for (int n : {1, 3}) {
    const auto& rec = traced_branch(n, Side::A, 150);
    for (const auto& s : rec.samples) {
      EXPECT_LE(s.kkt.dual, 1e-12) << n << " " << s.lambda;
      EXPECT_LE(s.kkt.primal, 1e-10) << n << " " << s.lambda;
      EXPECT_LE(s.kkt.complementarity, 1e-10) << n << " " << s.lambda;
    }
  }
}

TEST(Extension, MultiCellStatesAreEquilibria) {
  // Interior cell boundaries carry point forces from both neighbours.
  for (Side side : {Side::A, Side::B}) {
    const auto& rec = traced_branch(3, side, 150);
    for (const auto& s : rec.samples) EXPECT_LE(s.residual_norm, 1e-7) << s.lambda;
  }
}

TEST(Extension, OddReflectionOfTheCell) {
  auto cell = ifrac::blank_state(ifrac::make_mesh(4, 0.0, 0.5), 1.3, 2);
  for (int k = 1; k < 4; ++k) cell.field.dofs[2 * k] = 0.01 * k;
  for (int k = 0; k <= 4; ++k) cell.field.dofs[2 * k + 1] = 0.02 * (k - 2);
  const auto full = ifrac::extend_symmetric(cell, 2);
  ASSERT_EQ(full.mesh().n_elems, 8);
  for (int k = 0; k <= 4; ++k) {
    EXPECT_EQ(full.field.value(8 - k), -cell.field.value(k));
    EXPECT_EQ(full.field.slope(8 - k), cell.field.slope(k));
  }
}

TEST(Plan, Validation) {
  ifrac::ContinuationPlan plan;
  plan.lambda_end = 0.9;
  EXPECT_THROW(plan.validate(), std::invalid_argument);
  plan = {};
  plan.total_elements = 30;
  EXPECT_THROW(plan.validate(), std::invalid_argument);
  plan = {};
  plan.step = 0.0;
  EXPECT_THROW(plan.validate(), std::invalid_argument);
}

TEST(Plan, CriticalLoadOutsideRangeIsRejected) {
  ifrac::ContinuationPlan plan;
  plan.total_elements = 120;
  plan.lambda_end = 1.4;
  EXPECT_THROW(ifrac::continue_branch(plan, 1, Side::A), std::invalid_argument);
}

}  // namespace
