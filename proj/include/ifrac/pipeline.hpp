// End-to-end trace run: bifurcation detection on the homogeneous branch,
// continuation of every (mode, side) branch, diagram rows and snapshots.
#pragma once

#include "ifrac/continuation.hpp"
#include "ifrac/postprocess.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ifrac {

struct RunConfig {
  double epsilon = 0.1;
  std::string model = "cubic";  // "cubic" or "lj"
  double lj_A = 1.0;
  double lj_B = 2.0;
  double lj_m = 2.0;
  double lj_n = 1.0;
  int n_max = 6;
  int elements = 600;  // branch n runs on a cell of elements / n elements
  double lambda_start = 1.0;
  double lambda_end = 2.0;
  double step = 0.01;
  double tol = 1e-9;
  double zero_tol = 1e-13;
  std::vector<double> snapshot_lambdas{1.4, 1.9};
  std::string out = "out";
  std::string format = "csv";
  int jobs = 1;

  ConstitutiveModel constitutive() const {
    if (model == "cubic") return ConstitutiveModel::cubic();
    if (model == "lj") return ConstitutiveModel::general_lj(lj_A, lj_B, lj_m, lj_n);
    throw std::invalid_argument("unknown model '" + model + "' (expected cubic or lj)");
  }

  OutputFormat output_format() const {
    if (format == "csv") return OutputFormat::Csv;
    if (format == "json") return OutputFormat::Json;
    throw std::invalid_argument("unknown format '" + format + "' (expected csv or json)");
  }

  ContinuationPlan plan() const {
    ContinuationPlan p;
    p.epsilon = epsilon;
    p.model = constitutive();
    p.lambda_start = lambda_start;
    p.lambda_end = lambda_end;
    p.step = step;
    p.n_max = n_max;
    p.total_elements = elements;
    p.solver.tol_abs = tol;
    p.solver.tol_rel = tol;
    p.stability.zero_tol = zero_tol;
    return p;
  }

  void validate() const {
    plan().validate();
    output_format();
    if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
    if (!(zero_tol > 0)) throw std::invalid_argument("zero-tol must be positive");
  }
};

// Effective configuration as key=value lines; keys are the CLI flag names,
// so the file can be passed back through --config.
inline std::string config_echo(const RunConfig& c) {
  std::ostringstream o;
  o << "epsilon=" << format_number(c.epsilon) << "\n";
  o << "model=" << c.model << "\n";
  o << "lj-A=" << format_number(c.lj_A) << "\n";
  o << "lj-B=" << format_number(c.lj_B) << "\n";
  o << "lj-m=" << format_number(c.lj_m) << "\n";
  o << "lj-n=" << format_number(c.lj_n) << "\n";
  o << "n-max=" << c.n_max << "\n";
  o << "elements=" << c.elements << "\n";
  o << "lambda-start=" << format_number(c.lambda_start) << "\n";
  o << "lambda-end=" << format_number(c.lambda_end) << "\n";
  o << "step=" << format_number(c.step) << "\n";
  o << "tol=" << format_number(c.tol) << "\n";
  o << "zero-tol=" << format_number(c.zero_tol) << "\n";
  o << "snapshot-lambdas=";
  for (std::size_t i = 0; i < c.snapshot_lambdas.size(); ++i)
    o << (i ? "," : "") << format_number(c.snapshot_lambdas[i]);
  o << "\n";
  o << "format=" << c.format << "\n";
  // The output directory and job count do not affect results.
  return o.str();
}

struct TraceResult {
  std::vector<Bifurcation> bifurcations;
  BranchRecord homogeneous;
  std::vector<BranchRecord> branches;  // n = 1..n_max, side A then B
};

// Runs `count` independent jobs on up to `jobs` threads.  The first failure is
// rethrown after all workers finish.
template <class Job>
void run_parallel(int count, int jobs, Job&& job) {
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min(jobs, count); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline TraceResult run_trace(const RunConfig& config, bool keep_states = false) {
  config.validate();
  ContinuationPlan plan = config.plan();
  plan.keep_states = keep_states;
  TraceResult res;
  const Mesh bar = make_mesh(plan.total_elements, 0.0, 1.0);
  res.bifurcations =
      detect_bifurcations(plan.epsilon, plan.model, bar, plan.lambda_start, plan.lambda_end, plan.n_max);
  res.homogeneous = homogeneous_branch(plan);
  res.branches.resize(2 * plan.n_max);
  run_parallel(2 * plan.n_max, config.jobs, [&](int i) {
    res.branches[i] = continue_branch(plan, i / 2 + 1, i % 2 == 0 ? Side::A : Side::B);
  });
  return res;
}

inline DiagramRow diagram_row(int branch, Side side, const BranchSample& s) {
  DiagramRow r;
  r.branch = branch;
  r.side = to_string(side);
  r.lambda = s.lambda;
  r.energy = s.energy;
  r.stress_mean = s.stress.mean;
  r.stress_dev = s.stress.max_dev;
  r.verdict = to_string(s.verdict);
  r.P = s.P;
  r.n_crack_faces = s.n_crack_faces;
  r.n_material_cracks = s.n_material_cracks;
  return r;
}

// Homogeneous rows (grid points plus the detected bifurcation loads, in
// increasing stretch) followed by every branch in path order.
inline std::vector<DiagramRow> diagram_rows(const RunConfig& config, const TraceResult& res) {
  const ContinuationPlan plan = config.plan();
  std::vector<BranchSample> hom = res.homogeneous.samples;
  const Mesh bar = make_mesh(plan.total_elements, 0.0, 1.0);
  for (const auto& b : res.bifurcations)
    hom.push_back(make_sample(plan, homogeneous_state(make_problem(plan, bar, b.lambda))));
  std::stable_sort(hom.begin(), hom.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
  std::vector<DiagramRow> rows;
  for (const auto& s : hom) rows.push_back(diagram_row(0, Side::A, s));
  for (const auto& rec : res.branches)
    for (const auto& s : rec.samples) rows.push_back(diagram_row(rec.branch, rec.side, s));
  return rows;
}

inline bool matches_any(double lambda, const std::vector<double>& targets) {
  for (double t : targets)
    if (std::abs(lambda - t) <= 1e-9) return true;
  return false;
}

// Snapshots of the homogeneous branch and of every branch at the requested
// stretches.  Requires a trace run with kept states.
inline std::vector<SolutionSnapshot> trace_snapshots(const RunConfig& config, const TraceResult& res) {
  const ContinuationPlan plan = config.plan();
  std::vector<SolutionSnapshot> out;
  const Mesh bar = make_mesh(plan.total_elements, 0.0, 1.0);
  for (double lam : config.snapshot_lambdas) {
    if (lam < plan.lambda_start || lam > plan.lambda_end) continue;
    const ScaledProblem p = make_problem(plan, bar, lam);
    out.push_back(make_snapshot(p, homogeneous_state(p), "A"));
  }
  for (const auto& rec : res.branches)
    for (const auto& s : rec.samples) {
      if (!s.state || !matches_any(s.lambda, config.snapshot_lambdas)) continue;
      out.push_back(make_snapshot(make_problem(plan, s.state->mesh(), s.lambda), *s.state, to_string(rec.side)));
    }
  return out;
}

inline std::string branch_summary(const TraceResult& res, OutputFormat format) {
  if (format == OutputFormat::Csv) {
    std::string text = "branch,side,lambda_critical,lambda_break,n_samples,irreversible\n";
    text += "0,A,,," + std::to_string(res.homogeneous.samples.size()) + ",true\n";
    for (const auto& r : res.branches)
      text += std::to_string(r.branch) + "," + to_string(r.side) + "," + format_number(r.lambda_critical) + "," +
              format_number(r.lambda_break) + "," + std::to_string(r.samples.size()) + "," +
              (r.irreversible ? "true" : "false") + "\n";
    return text;
  }
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  nlohmann::ordered_json h;
  h["branch"] = 0;
  h["side"] = "A";
  h["n_samples"] = res.homogeneous.samples.size();
  h["irreversible"] = true;
  arr.push_back(h);
  for (const auto& r : res.branches) {
    nlohmann::ordered_json j;
    j["branch"] = r.branch;
    j["side"] = to_string(r.side);
    j["lambda_critical"] = r.lambda_critical;
    j["lambda_break"] = r.lambda_break;
    j["n_samples"] = r.samples.size();
    j["irreversible"] = r.irreversible;
    arr.push_back(j);
  }
  return arr.dump(1) + "\n";
}

inline std::string bifurcation_table(const std::vector<Bifurcation>& bifs, OutputFormat format) {
  if (format == OutputFormat::Csv) {
    std::string text = "index,lambda,mode\n";
    for (std::size_t i = 0; i < bifs.size(); ++i)
      text += std::to_string(i + 1) + "," + format_number(bifs[i].lambda) + "," + std::to_string(bifs[i].mode) + "\n";
    return text;
  }
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < bifs.size(); ++i)
    arr.push_back({{"index", i + 1}, {"lambda", bifs[i].lambda}, {"mode", bifs[i].mode}});
  return arr.dump(1) + "\n";
}

// Writes diagram, branch summary, bifurcation table, snapshots and the
// configuration echo into the output directory.
inline void write_trace(const RunConfig& config, const TraceResult& res) {
  const std::filesystem::path dir = config.out;
  const OutputFormat fmt = config.output_format();
  write_records(diagram_rows(config, res), trace_snapshots(config, res), dir, fmt);
  const std::string ext = fmt == OutputFormat::Csv ? ".csv" : ".json";
  write_text(dir / ("branches" + ext), branch_summary(res, fmt));
  write_text(dir / ("bifurcations" + ext), bifurcation_table(res.bifurcations, fmt));
  write_text(dir / "run_config", config_echo(config));
}

}  // namespace ifrac
