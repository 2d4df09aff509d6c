// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.  All reference values and oracles are computed here
// independently of the library code paths they check.

#include "ifrac/pipeline.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>

namespace {

namespace fs = std::filesystem;
using ifrac::Side;

constexpr double kEpsilon = 0.1;

int g_failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& measured) {
  std::printf("criterion %2d: %s  %s  [%s]\n", id, pass ? "PASS" : "FAIL", what.c_str(), measured.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string label(const ifrac::BranchRecord& r) { return std::to_string(r.branch) + ifrac::to_string(r.side); }

ifrac::ScaledProblem problem_for(const ifrac::EquilibriumState& st) {
  return ifrac::ScaledProblem{kEpsilon, st.lambda, ifrac::ConstitutiveModel::cubic(), st.mesh()};
}

const ifrac::BranchSample* sample_at(const ifrac::BranchRecord& rec, double lambda) {
  for (const auto& s : rec.samples)
    if (std::abs(s.lambda - lambda) < 1e-9) return &s;
  return nullptr;
}

// Root of eps^2 (n pi)^2 + lambda^2 M(1/lambda) for the cubic law
// W(H) = H (1 - H)^2, whose second derivative gives lambda^2 M = 6 lambda - 4 lambda^2.
double scalar_oracle(int n) {
  const double pi = std::acos(-1.0);
  auto g = [&](double lam) { return kEpsilon * kEpsilon * n * n * pi * pi + 6.0 * lam - 4.0 * lam * lam; };
  double a = 1.0, b = 3.0;
  while (b - a > 1e-14) {
    const double m = 0.5 * (a + b);
    (g(m) > 0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

void criterion_1_2(const ifrac::TraceResult& res) {
  const auto& b = res.bifurcations;
  const double l1 = b.empty() ? 0.0 : b[0].lambda;
  report(1, !b.empty() && std::abs(l1 - 1.5163) <= 2e-3, "first bifurcation load within 2e-3 of 1.5163",
         fmt("lambda_1 = %.8f", l1));
  bool ok = b.size() == 6;
  double worst = 0.0;
  for (int n = 1; n <= static_cast<int>(b.size()); ++n) {
    const double ref = scalar_oracle(n);
    worst = std::max(worst, std::abs(b[n - 1].lambda - ref) / ref);
  }
  ok = ok && worst <= 1e-4;
  report(2, ok, "bifurcation loads n=1..6 match the scalar bisection root to 1e-4",
         fmt("%zu loads, worst relative difference %.3e", b.size(), worst));
}

void criterion_3(const ifrac::TraceResult& res) {
  const ifrac::BranchRecord* one = nullptr;
  for (const auto& r : res.branches)
    if (r.branch == 1 && r.side == Side::A) one = &r;
  // Homogeneous energy of the unit bar: lambda W(1/lambda).
  auto homogeneous = [](double lam) { return lam * (1.0 / lam) * (1 - 1.0 / lam) * (1 - 1.0 / lam); };
  double cross = -1.0;
  const ifrac::BranchSample* prev = nullptr;
  for (const auto& s : one->samples) {
    if (!s.broken) {
      prev = nullptr;
      continue;
    }
    const double d = s.energy - homogeneous(s.lambda);
    if (d < 0) {
      if (prev) {
        const double dp = prev->energy - homogeneous(prev->lambda);
        cross = prev->lambda + (s.lambda - prev->lambda) * dp / (dp - d);
      }
      break;
    }
    prev = &s;
  }
  report(3, cross > 0 && std::abs(cross - 1.2409) <= 5e-3,
         "broken n=1 energy drops below the homogeneous energy within 5e-3 of 1.2409", fmt("crossover %.6f", cross));
}

void criterion_4(const ifrac::TraceResult& res) {
  double mean = 0.0, dev = 0.0;
  int count = 0;
  for (const auto& r : res.branches)
    for (const auto& s : r.samples)
      if (s.broken) {
        ++count;
        mean = std::max(mean, std::abs(s.stress.mean));
        dev = std::max(dev, s.stress.max_dev);
      }
  report(4, count > 0 && mean <= 1e-6 && dev <= 1e-6, "broken samples carry zero stress to 1e-6",
         fmt("%d broken samples, max |mean| %.3e, max deviation %.3e", count, mean, dev));
}

void criterion_5(const ifrac::TraceResult& res) {
  const std::map<std::string, int> expected{{"1A", 0}, {"1B", 0}, {"2A", 0}, {"2B", 1}, {"3A", 1}, {"3B", 1},
                                            {"4A", 1}, {"4B", 2}, {"5A", 2}, {"5B", 2}, {"6A", 2}, {"6B", 3}};
  bool ok = true;
  std::string table;
  for (const auto& r : res.branches) {
    const auto* s = sample_at(r, 1.9);
    const std::string key = label(r);
    if (!s) {
      ok = false;
      table += key + ":missing ";
      continue;
    }
    const bool good = s->verdict == ifrac::Verdict::Stable && s->P == expected.at(key) && s->n_zero == s->P;
    ok = ok && good;
    table += key + ":" + ifrac::to_string(s->verdict) + "/P" + std::to_string(s->P) + " ";
  }
  int unbroken = 0, unstable = 0;
  for (const auto& r : res.branches)
    for (const auto& s : r.samples)
      if (!s.broken) {
        ++unbroken;
        if (s.verdict == ifrac::Verdict::Unstable) ++unstable;
      }
  ok = ok && res.branches.size() == 12 && unbroken > 0 && unstable == unbroken;
  report(5, ok, "stability gallery at 1.9 and unbroken nonhomogeneous samples unstable",
         table + fmt("| unbroken unstable %d/%d", unstable, unbroken));
}

void criterion_6(const ifrac::TraceResult& res) {
  ifrac::KktReport worst;
  int count = 0;
  auto visit = [&](const ifrac::BranchSample& s) {
    ++count;
    worst.dual = std::max(worst.dual, s.kkt.dual);
    worst.primal = std::max(worst.primal, s.kkt.primal);
    worst.complementarity = std::max(worst.complementarity, s.kkt.complementarity);
  };
  for (const auto& s : res.homogeneous.samples) visit(s);
  for (const auto& r : res.branches)
    for (const auto& s : r.samples) visit(s);
  const bool ok = worst.dual <= 1e-12 && worst.primal <= 1e-10 && worst.complementarity <= 1e-10;
  report(6, ok, "multiplier sign, feasibility and complementarity on every converged state",
         fmt("%d states, max -mu %.2e, max -g %.2e, max |mu g| %.2e", count, worst.dual, worst.primal,
             worst.complementarity));
}

// Central-difference checks of residual against energy and of the tangent
// against the residual, relative in the Euclidean norm over interior dofs.
void criterion_7() {
  double worst_grad = 0.0, worst_tan = 0.0;
  for (unsigned seed = 0; seed < 10; ++seed) {
    const ifrac::Mesh mesh = ifrac::make_mesh(12, 0.0, 1.0);
    const ifrac::ScaledProblem p{kEpsilon, 1.1 + 0.08 * seed, ifrac::ConstitutiveModel::cubic(), mesh};
    std::mt19937 rng(1000 + seed);
    std::uniform_real_distribution<double> dist(-0.06, 0.06);
    ifrac::HermiteField f(mesh);
    for (int i = 0; i < mesh.n_dofs(); ++i) f.dofs[i] = (i % 2 == 0 ? mesh.h() : 1.0) * dist(rng);
    f.dofs[0] = f.dofs[2 * mesh.n_elems] = 0.0;
    const std::vector<int> active{static_cast<int>(2 * (seed % 5) + 3)};
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(ifrac::n_constraint_points(mesh));
    mu[active[0]] = 0.3;
    const double t = 1e-6, lam3 = std::pow(p.lambda, 3);
    const Eigen::VectorXd r0 = ifrac::residual(p, f, Eigen::VectorXd::Zero(mu.size()), {});
    const Eigen::MatrixXd K(ifrac::assemble_kkt(p, f, mu, active).matrix);
    double gn = 0, gd = 0, tn = 0, td = 0;
    for (int i = 0; i < mesh.n_dofs(); ++i) {
      if (ifrac::is_boundary_dof(mesh, i)) continue;
      auto fp = f, fm = f;
      fp.dofs[i] += t;
      fm.dofs[i] -= t;
      const double fd = lam3 * (ifrac::energy(p, fp) - ifrac::energy(p, fm)) / (2 * t);
      gn += (fd - r0[i]) * (fd - r0[i]);
      gd += r0[i] * r0[i];
      const Eigen::VectorXd col = (ifrac::residual(p, fp, mu, active) - ifrac::residual(p, fm, mu, active)) / (2 * t);
      for (int k = 0; k < col.size(); ++k) {
        if (k < mesh.n_dofs() && ifrac::is_boundary_dof(mesh, k)) continue;
        tn += (col[k] - K(k, i)) * (col[k] - K(k, i));
        td += K(k, i) * K(k, i);
      }
    }
    worst_grad = std::max(worst_grad, std::sqrt(gn / gd));
    worst_tan = std::max(worst_tan, std::sqrt(tn / td));
  }
  report(7, worst_grad <= 1e-6 && worst_tan <= 1e-6, "finite-difference gradient and tangent checks on 10 states",
         fmt("worst relative: gradient %.2e, tangent %.2e", worst_grad, worst_tan));
}

struct JumpStats {
  bool signs_agree = true;
  double worst = 0.0;  // largest relative difference over faces
  int faces = 0;
};

JumpStats jump_stats(const ifrac::BranchSample& s) {
  JumpStats js;
  const auto& st = *s.state;
  const auto topo = ifrac::crack_topology(st);
  for (const auto& f : topo.faces) {
    const auto d = ifrac::driving_force(problem_for(st), st, topo, f);
    ++js.faces;
    if ((d.phi > 0) != (d.phi_bending > 0)) js.signs_agree = false;
    js.worst = std::max(js.worst, std::abs(d.phi - d.phi_bending) / std::abs(d.phi));
  }
  return js;
}

void criterion_8(const ifrac::TraceResult& coarse, const std::vector<ifrac::BranchRecord>& fine) {
  bool ok = true;
  double worst = 0.0;
  int faces = 0;
  for (const auto& r : coarse.branches)
    for (const auto& s : r.samples)
      if (s.broken) {
        const auto js = jump_stats(s);
        faces += js.faces;
        ok = ok && js.signs_agree;
        worst = std::max(worst, js.worst);
      }
  ok = ok && faces > 0 && worst <= 0.2;
  std::string trend;
  for (const auto& rf : fine) {
    const ifrac::BranchRecord* rc = nullptr;
    for (const auto& r : coarse.branches)
      if (r.branch == rf.branch && r.side == rf.side) rc = &r;
    const auto* sc = sample_at(*rc, 1.9);
    const auto* sf = sample_at(rf, 1.9);
    if (!sc || !sf) {
      ok = false;
      continue;
    }
    const auto jc = jump_stats(*sc), jf = jump_stats(*sf);
    ok = ok && jf.signs_agree && jf.worst <= jc.worst;
    trend += fmt(" %s %.4f->%.4f", label(rf).c_str(), jc.worst, jf.worst);
  }
  report(8, ok, "multiplier jump matches the bending jump in sign and within 20%, improving with refinement",
         fmt("%d faces, worst relative difference %.4f; at 1.9, N=600->1200:", faces, worst) + trend);
}

void criterion_9(const ifrac::TraceResult& res) {
  bool ok = true;
  std::string bad;
  for (const auto& r : res.branches) {
    // Containment within half a node spacing, checked here on the samples.
    const double tol = 0.5 / r.samples.front().state->mesh().n_elems;
    const std::vector<double>* prev = nullptr;
    bool branch_ok = r.irreversible;
    for (const auto& s : r.samples) {
      if (prev)
        for (double x : *prev) {
          bool found = false;
          for (double y : s.crack_set) found = found || std::abs(x - y) <= tol;
          branch_ok = branch_ok && found;
        }
      prev = &s.crack_set;
    }
    if (!branch_ok) bad += " " + label(r);
    ok = ok && branch_ok;
  }
  report(9, ok, "material crack sets only grow along every branch",
         ok ? std::string("all 12 branches") : "violations on" + bad);
}

void criterion_10(const ifrac::TraceResult& res) {
  double dE = 0.0, resid = 0.0, mode = 0.0;
  int regions = 0;
  bool window_ok = true;
  for (const auto& r : res.branches) {
    const auto* s = sample_at(r, 1.9);
    if (!s) continue;
    const auto& st = *s->state;
    const auto p = problem_for(st);
    const auto topo = ifrac::crack_topology(st);
    const auto floating = ifrac::floating_regions(topo, st.mesh());
    const double e0 = ifrac::energy(p, st.field);
    for (int g = 0; g < static_cast<int>(floating.size()); ++g) {
      ++regions;
      bool moved_any = false;
      for (int shift : {-1, 1}) {
        try {
          const auto moved = ifrac::translate_region(p, st, g, shift);
          dE = std::max(dE, std::abs(ifrac::energy(p, moved.field) - e0));
          resid = std::max(resid, moved.residual_norm);
          moved_any = true;
        } catch (const ifrac::WindowExceeded&) {
        }
      }
      window_ok = window_ok && moved_any;
    }
    mode = std::max(mode, ifrac::translation_mode_check(p, st, topo));
  }
  const bool ok = regions > 0 && window_ok && dE <= 1e-9 && resid <= 1e-8 && mode <= 1e-4;
  report(10, ok, "floating-region translations keep energy and equilibrium; translation mode in the kernel",
         fmt("%d regions, max |dE| %.2e, max residual %.2e, max |G xi|/|xi| %.3e", regions, dE, resid, mode));
}

void criterion_11() {
  auto f = [](double s) { return std::sin(3 * s) * std::exp(s); };
  auto df = [](double s) { return std::exp(s) * (std::sin(3 * s) + 3 * std::cos(3 * s)); };
  auto error = [&](int n) {
    const auto mesh = ifrac::make_mesh(n, 0.0, 1.0);
    const auto field = ifrac::interpolate(mesh, f, df);
    double worst = 0.0;
    for (int i = 0; i <= 200 * n; ++i) {
      const double s = double(i) / (200 * n);
      worst = std::max(worst, std::abs(ifrac::eval_field(field, s).u - f(s)));
    }
    return worst;
  };
  bool ok = true;
  std::string ratios;
  double prev = error(8);
  for (int n : {16, 32, 64}) {
    const double e = error(n);
    ok = ok && prev / e >= 14.0 && prev / e <= 18.0;
    ratios += fmt(" %.3f", prev / e);
    prev = e;
  }
  report(11, ok, "Hermite interpolation error ratio per mesh doubling in [14, 18]", "ratios" + ratios);
}

std::map<std::string, std::string> directory_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    out[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

void criterion_12() {
  const fs::path root = fs::temp_directory_path() / "ifrac_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  double seconds[2];
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path dir = root / ("run" + std::to_string(i));
    const std::string cmd = std::string(IFRAC_CLI_PATH) + " trace --out " + dir.string() + " > " +
                            (root / ("log" + std::to_string(i))).string() + " 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    const int status = std::system(cmd.c_str());
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    codes[i] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  bool same = false;
  std::size_t files = 0;
  if (codes[0] == 0 && codes[1] == 0) {
    const auto a = directory_contents(root / "run0"), b = directory_contents(root / "run1");
    same = a == b;
    files = a.size();
  }
  const bool ok = codes[0] == 0 && codes[1] == 0 && seconds[0] < 600 && seconds[1] < 600 && same;
  report(12, ok, "default trace finishes within 10 minutes and is byte-reproducible",
         fmt("exit %d/%d, %.1f s and %.1f s, %zu files, identical %s", codes[0], codes[1], seconds[0], seconds[1],
             files, same ? "yes" : "no"));
  fs::remove_all(root);
}

}  // namespace

int main() {
  try {
    ifrac::RunConfig config;  // defaults: eps 0.1, n = 1..6, 600 elements
    const auto t0 = std::chrono::steady_clock::now();
    const ifrac::TraceResult res = ifrac::run_trace(config, true);
    std::printf("traced %zu branches at %d elements in %.1f s\n", res.branches.size(), config.elements,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    criterion_1_2(res);
    criterion_3(res);
    criterion_4(res);
    criterion_5(res);
    criterion_6(res);
    criterion_7();

    // Refined traces for the convergence part of the jump check.
    ifrac::ContinuationPlan fine_plan = config.plan();
    fine_plan.total_elements = 2 * config.elements;
    // Far enough to include the sixth critical load (about 1.954).
    fine_plan.lambda_end = 1.96;
    fine_plan.keep_states = true;
    std::vector<ifrac::BranchRecord> fine;
    for (int n = 1; n <= config.n_max; ++n)
      for (Side side : {Side::A, Side::B}) fine.push_back(ifrac::continue_branch(fine_plan, n, side));
    criterion_8(res, fine);

    criterion_9(res);
    criterion_10(res);
    criterion_11();
    criterion_12();
  } catch (const std::exception& e) {
    std::printf("acceptance run aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d of 12 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
