#include "ifrac/activeset.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace {

using ifrac::Side;

TEST(Solver, HomogeneousStateIsAFixedPoint) {
  const ifrac::ScaledProblem p{0.1, 1.7, ifrac::ConstitutiveModel::cubic(), ifrac::make_mesh(40, 0.0, 1.0)};
  const auto st = ifrac::solve_equilibrium(p, ifrac::blank_state(p.mesh, 1.7));
  EXPECT_TRUE(st.converged);
  EXPECT_EQ(st.status, ifrac::SolveStatus::Converged);
  EXPECT_TRUE(st.active.empty());
  EXPECT_LE(st.field.dofs.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Solver, RecoversABrokenEquilibriumFromAPerturbedGuess) {
  const auto& rec = testing_support::traced_branch(1, Side::A, 120);
  const auto& ref = *testing_support::sample_at(rec, 1.7).state;
  ASSERT_FALSE(ref.active.empty());
  const ifrac::ScaledProblem p{0.1, ref.lambda, ifrac::ConstitutiveModel::cubic(), ref.mesh()};

  auto guess = ref;
  guess.active.clear();
  guess.mu.setZero();
  const auto noise = testing_support::random_field(ref.mesh(), 7, 0.02);
  guess.field.dofs += noise.dofs;
  const auto st = ifrac::solve_equilibrium(p, guess);
  ASSERT_TRUE(st.converged);
  const auto kkt = ifrac::kkt_report(p, st);
  EXPECT_GE(-kkt.dual, -1e-12);
  EXPECT_LE(kkt.primal, 1e-10);
  EXPECT_LE(kkt.complementarity, 1e-10);
  EXPECT_LE((st.field.dofs - ref.field.dofs).cwiseAbs().maxCoeff(), 1e-6);
}

// The solver is local: this guess is far from equilibrium, so the stretch is
// chosen where it still reaches a broken state.
TEST(Solver, ViolatedPointsAreActivated) {
  const ifrac::ScaledProblem p{0.1, 1.4, ifrac::ConstitutiveModel::cubic(), ifrac::make_mesh(30, 0.0, 1.0)};
  auto guess = ifrac::blank_state(p.mesh, 1.4);
  for (int k = 10; k <= 12; ++k) guess.field.dofs[2 * k + 1] = -1.2;
  const auto st = ifrac::solve_equilibrium(p, guess);
  ASSERT_TRUE(st.converged);
  EXPECT_FALSE(st.active.empty());
  for (int j = 0; j < ifrac::n_constraint_points(p.mesh); ++j)
    EXPECT_GE(ifrac::constraint_value(st.field, j), -1e-10) << "point " << j;
  for (int j : st.active) EXPECT_GE(st.mu[j], -1e-12);
}

TEST(Solver, ReportsNonConvergenceWhenTheBudgetIsTooSmall) {
  const auto& rec = testing_support::traced_branch(1, Side::A, 120);
  const auto& ref = *testing_support::sample_at(rec, 1.5).state;
  const ifrac::ScaledProblem p{0.1, 1.5, ifrac::ConstitutiveModel::cubic(), ref.mesh()};
  auto guess = ifrac::blank_state(ref.mesh(), 1.5);
  guess.field.dofs = 0.5 * ref.field.dofs;
  ifrac::SolverOptions opt;
  opt.max_newton = 1;
  opt.max_activeset = 1;
  const auto st = ifrac::solve_equilibrium(p, guess, opt);
  EXPECT_FALSE(st.converged);
  EXPECT_EQ(st.status, ifrac::SolveStatus::NonConvergence);
}

TEST(Solver, OptionValidation) {
  ifrac::SolverOptions opt;
  opt.tol_abs = 0.0;
  EXPECT_THROW(opt.validate(), std::invalid_argument);
  opt = {};
  opt.max_newton = 0;
  EXPECT_THROW(opt.validate(), std::invalid_argument);
}

TEST(State, NodalMultipliersAndActiveNodes) {
  auto st = ifrac::blank_state(ifrac::make_mesh(4, 0.0, 1.0), 1.5);
  st.active = {2, 3, 4};
  st.mu[2] = 0.5;
  st.mu[3] = 0.25;
  st.mu[4] = 0.75;
  EXPECT_EQ(st.active_nodes(), (std::vector<int>{1, 2}));
  EXPECT_EQ(st.nodal_mu()[1], 0.5);
  EXPECT_EQ(st.nodal_mu()[2], 0.75);
}

}  // namespace
