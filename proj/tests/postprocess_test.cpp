#include "ifrac/postprocess.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

namespace {

namespace fs = std::filesystem;
using ifrac::Side;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ifrac_postprocess_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Stress, HomogeneousClosedForm) {
  const auto mesh = ifrac::make_mesh(20, 0.0, 1.0);
  const auto model = ifrac::ConstitutiveModel::cubic();
  // sigma = W*(H) - H S*(H) = 2 H^2 (1 - H) at H = 1/2.
  const auto s2 = ifrac::stress({0.1, 2.0, model, mesh}, ifrac::blank_state(mesh, 2.0));
  EXPECT_NEAR(s2.mean, 0.25, 1e-14);
  EXPECT_LE(s2.max_dev, 1e-12);
  const auto s1 = ifrac::stress({0.1, 1.0, model, mesh}, ifrac::blank_state(mesh, 1.0));
  EXPECT_EQ(s1.mean, 0.0);
}

TEST(Stress, BrokenStatesCarryLittleStress) {
  const auto& rec = testing_support::traced_branch(1, Side::A, 300);
  for (const auto& s : rec.samples) {
    if (s.broken) {
      EXPECT_LE(std::abs(s.stress.mean), 1e-3) << s.lambda;
    }
  }
}

TEST(ForwardMap, HomogeneousIsLinear) {
  const auto st = ifrac::blank_state(ifrac::make_mesh(10, 0.0, 1.0), 1.3);
  const auto fm = ifrac::forward_map(st, 11);
  EXPECT_TRUE(fm.jumps.empty());
  ASSERT_EQ(fm.samples.size(), 11u);
  for (const auto& p : fm.samples) EXPECT_NEAR(p.f, 1.3 * p.x, 1e-14);
}

TEST(ForwardMap, OpeningsAndGoodLengthAddUpToTheStretch) {
  const auto& rec = testing_support::traced_branch(2, Side::B, 300);
  const auto& st = *testing_support::sample_at(rec, 1.9).state;
  const auto fm = ifrac::forward_map(st, 301);
  double openings = 0.0;
  for (const auto& j : fm.jumps) openings += j.f_plus - j.f_minus;
  EXPECT_NEAR(openings + fm.good_length, st.lambda, 1e-8);
  EXPECT_EQ(fm.jumps.size(), 2u);
}

TEST(Numbers, ShortestRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = d(rng) * std::pow(10.0, double(i % 30) - 15.0);
    EXPECT_EQ(ifrac::parse_number(ifrac::format_number(v)), v);
  }
  EXPECT_EQ(ifrac::format_number(0.25), "0.25");
  EXPECT_THROW(ifrac::parse_number("1.5x"), std::invalid_argument);
}

ifrac::DiagramRow sample_row() {
  ifrac::DiagramRow r;
  r.branch = 2;
  r.side = "B";
  r.lambda = 1.9;
  r.energy = 0.1234567890123456789;
  r.stress_mean = -3.5e-7;
  r.stress_dev = 1.0 / 3.0;
  r.verdict = "Stable";
  r.P = 1;
  r.n_crack_faces = 4;
  r.n_material_cracks = 2;
  return r;
}

TEST(Diagram, EmptyRowsGiveAHeaderOnlyFile) {
  const auto dir = scratch_dir("empty");
  ifrac::write_records({}, {}, dir, ifrac::OutputFormat::Csv);
  EXPECT_EQ(slurp(dir / "diagram.csv"),
            "branch,side,lambda,energy,stress_mean,stress_dev,verdict,P,n_crack_faces,n_material_cracks\n");
}

TEST(Diagram, CsvAndJsonRoundTrip) {
  ifrac::DiagramRow hom;
  hom.lambda = 1.0;
  const std::vector<ifrac::DiagramRow> rows{hom, sample_row()};
  const auto dir = scratch_dir("rows");
  ifrac::write_records(rows, {}, dir, ifrac::OutputFormat::Csv);
  ifrac::write_records(rows, {}, dir, ifrac::OutputFormat::Json);
  EXPECT_EQ(ifrac::read_diagram_csv(dir / "diagram.csv"), rows);
  EXPECT_EQ(ifrac::read_diagram_json(dir / "diagram.json"), rows);
  EXPECT_EQ(ifrac::read_diagram_csv(dir / "diagram.csv")[0].energy, 0.0);
}

TEST(Diagram, MalformedCsvIsReported) {
  const auto dir = scratch_dir("bad");
  fs::create_directories(dir);
  ifrac::write_text(dir / "diagram.csv", "branch,side\n1,A\n");
  EXPECT_THROW(ifrac::read_diagram_csv(dir / "diagram.csv"), std::runtime_error);
  EXPECT_THROW(ifrac::read_diagram_csv(dir / "missing.csv"), std::runtime_error);
}

TEST(Snapshot, RoundTripPreservesEveryField) {
  const auto& rec = testing_support::traced_branch(2, Side::B, 300);
  const auto& st = *testing_support::sample_at(rec, 1.9).state;
  const ifrac::ScaledProblem p{0.1, st.lambda, ifrac::ConstitutiveModel::cubic(), st.mesh()};
  const auto snap = ifrac::make_snapshot(p, st, "B");
  EXPECT_EQ(ifrac::snapshot_filename(snap), "branch2B_lambda1.9.json");
  const auto dir = scratch_dir("snap");
  ifrac::write_records({}, {snap}, dir, ifrac::OutputFormat::Csv);
  const auto back = ifrac::read_snapshot(dir / "branch2B_lambda1.9.json");
  EXPECT_EQ(back.lambda, snap.lambda);
  EXPECT_EQ(back.u, snap.u);
  EXPECT_EQ(back.du, snap.du);
  EXPECT_EQ(back.mu_points, snap.mu_points);
  EXPECT_EQ(back.active_points, snap.active_points);
  EXPECT_EQ(back.broken_intervals, snap.broken_intervals);
  EXPECT_EQ(back.material_crack_set, snap.material_crack_set);
  for (double H : back.H) EXPECT_GE(H, -1e-10);
  const auto restored = ifrac::state_from_snapshot(back);
  EXPECT_EQ(restored.field.dofs, st.field.dofs);
  EXPECT_EQ(restored.active, st.active);
}

TEST(Snapshot, LengthMismatchIsRejected) {
  const auto st = ifrac::blank_state(ifrac::make_mesh(4, 0.0, 1.0), 1.2);
  const ifrac::ScaledProblem p{0.1, 1.2, ifrac::ConstitutiveModel::cubic(), st.mesh()};
  auto j = ifrac::to_json(ifrac::make_snapshot(p, st, "A"));
  j["u"] = std::vector<double>{0.0, 0.0};
  EXPECT_THROW(ifrac::snapshot_from_json(nlohmann::json::parse(j.dump())), std::runtime_error);
}

}  // namespace
