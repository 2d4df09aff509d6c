#include "ifrac/cracks.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace {

using ifrac::Side;

// Field with slope -1 (fully opened) on the listed node ranges and a gentle
// compensating stretch elsewhere.
ifrac::EquilibriumState synthetic(int n_elems, std::vector<std::pair<int, int>> broken, double lambda = 1.5) {
  auto st = ifrac::blank_state(ifrac::make_mesh(n_elems, 0.0, 1.0), lambda);
  for (auto [a, b] : broken)
    for (int k = a; k <= b; ++k) st.field.dofs[2 * k + 1] = -1.0;
  return st;
}

TEST(Topology, InteriorCrackHasTwoFaces) {
  const auto topo = ifrac::crack_topology(synthetic(20, {{5, 8}}));
  ASSERT_EQ(topo.broken_intervals.size(), 1u);
  EXPECT_EQ(topo.broken_intervals[0].first_node, 5);
  EXPECT_EQ(topo.broken_intervals[0].last_node, 8);
  ASSERT_EQ(topo.faces.size(), 2u);
  EXPECT_EQ(topo.faces[0].orientation, ifrac::FaceOrientation::GoodLeft);
  EXPECT_EQ(topo.faces[1].orientation, ifrac::FaceOrientation::GoodRight);
  EXPECT_DOUBLE_EQ(topo.faces[0].y_face, 1.5 * 0.25);
  EXPECT_EQ(topo.good_intervals.size(), 2u);
  EXPECT_EQ(topo.material_crack_set.size(), 1u);
  EXPECT_TRUE(topo.broken());
}

TEST(Topology, EndCrackHasOneFace) {
  const auto topo = ifrac::crack_topology(synthetic(20, {{16, 20}}));
  EXPECT_EQ(topo.faces.size(), 1u);
  EXPECT_EQ(topo.good_intervals.size(), 1u);
  EXPECT_TRUE(ifrac::floating_regions(topo, ifrac::make_mesh(20, 0.0, 1.0)).empty());
}

TEST(Topology, RegionBetweenTwoCracksFloats) {
  const auto st = synthetic(30, {{4, 6}, {20, 23}});
  const auto topo = ifrac::crack_topology(st);
  const auto regions = ifrac::floating_regions(topo, st.mesh());
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].first_node, 6);
  EXPECT_EQ(regions[0].last_node, 20);
}

TEST(Topology, UnbrokenStateHasNoCracks) {
  const auto topo = ifrac::crack_topology(synthetic(10, {}));
  EXPECT_FALSE(topo.broken());
  EXPECT_EQ(topo.good_intervals.size(), 1u);
}

TEST(Topology, SingleBrokenNodeIsDegenerate) {
  EXPECT_THROW(ifrac::crack_topology(synthetic(10, {{4, 4}})), ifrac::DegenerateFace);
}

TEST(Irreversibility, ContainmentWithinTolerance) {
  ifrac::CrackTopology a, b, c;
  a.material_crack_set = {0.5};
  b.material_crack_set = {0.5 + 1e-4, 0.8};
  c.material_crack_set = {0.7};
  EXPECT_TRUE(ifrac::check_irreversibility(a, b, 1e-3));
  EXPECT_FALSE(ifrac::check_irreversibility(a, c, 1e-3));
  EXPECT_FALSE(ifrac::check_irreversibility(a, b, 1e-5));
}

TEST(Dissipation, SignOfTheRate) {
  EXPECT_TRUE(ifrac::dissipation_rate(1.0, 0.5).admissible);
  EXPECT_FALSE(ifrac::dissipation_rate(-1.0, 0.5).admissible);
  EXPECT_DOUBLE_EQ(ifrac::dissipation_rate(-2.0, -0.5).D, 1.0);
}

TEST(JumpCondition, MultiplierJumpMatchesTheBendingJump) {
  for (auto [n, side] : {std::pair{1, Side::A}, std::pair{2, Side::B}}) {
    const auto& rec = testing_support::traced_branch(n, side, 300);
    const auto& st = *testing_support::sample_at(rec, 1.9).state;
    const ifrac::ScaledProblem p{0.1, st.lambda, ifrac::ConstitutiveModel::cubic(), st.mesh()};
    const auto topo = ifrac::crack_topology(st);
    ASSERT_FALSE(topo.faces.empty());
    for (const auto& f : topo.faces) {
      const auto d = ifrac::driving_force(p, st, topo, f);
      EXPECT_EQ(d.phi > 0, d.phi_bending > 0);
      EXPECT_LE(std::abs(d.phi - d.phi_bending), 0.2 * std::abs(d.phi));
    }
  }
}

class FloatingRegion : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto& rec = testing_support::traced_branch(2, Side::B, 300);
    state = *testing_support::sample_at(rec, 1.9).state;
    problem = ifrac::ScaledProblem{0.1, state.lambda, ifrac::ConstitutiveModel::cubic(), state.mesh()};
  }
  ifrac::EquilibriumState state;
  ifrac::ScaledProblem problem;
};

TEST_F(FloatingRegion, IntegerTranslationKeepsEnergyAndEquilibrium) {
  const double e0 = ifrac::energy(problem, state.field);
  for (int shift : {-3, -1, 1, 3}) {
    const auto moved = ifrac::translate_region(problem, state, 0, shift);
    EXPECT_LE(std::abs(ifrac::energy(problem, moved.field) - e0), 1e-9) << shift;
    EXPECT_LE(moved.residual_norm, 1e-8) << shift;
  }
}

TEST_F(FloatingRegion, ZeroShiftIsIdentity) {
  const auto same = ifrac::translate_family(problem, state, 0, 0.0);
  EXPECT_EQ(same.field.dofs, state.field.dofs);
}

TEST_F(FloatingRegion, OversizedShiftLeavesTheWindow) {
  EXPECT_THROW(ifrac::translate_region(problem, state, 0, 1000), ifrac::WindowExceeded);
  EXPECT_THROW(ifrac::translate_region(problem, state, 3, 1), std::out_of_range);
}

TEST_F(FloatingRegion, RecoveredMultipliersMatchTheSolver) {
  const auto mu = ifrac::recover_multipliers(problem, state.field, state.active);
  EXPECT_LE((mu - state.mu).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, state.mu.cwiseAbs().maxCoeff()));
}

TEST_F(FloatingRegion, BrokenDensityIsPositive) {
  const auto topo = ifrac::crack_topology(state);
  for (const auto& iv : topo.broken_intervals) EXPECT_GT(ifrac::broken_density(state, iv), 0.0);
}

}  // namespace
