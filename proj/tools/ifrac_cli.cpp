// Command-line driver: trace, stability, family-check and inspect.
//
// Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.

#include "ifrac/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kNumericalFailure = 1;
constexpr int kUsageError = 2;

void add_run_options(CLI::App& app, ifrac::RunConfig& c) {
  app.add_option("--epsilon", c.epsilon, "regularization length")->capture_default_str();
  app.add_option("--model", c.model, "constitutive law: cubic or lj")->capture_default_str();
  app.add_option("--lj-A", c.lj_A, "Lennard-Jones attraction coefficient")->capture_default_str();
  app.add_option("--lj-B", c.lj_B, "Lennard-Jones repulsion coefficient")->capture_default_str();
  app.add_option("--lj-m", c.lj_m, "Lennard-Jones repulsion exponent")->capture_default_str();
  app.add_option("--lj-n", c.lj_n, "Lennard-Jones attraction exponent")->capture_default_str();
  app.add_option("--n-max", c.n_max, "highest branch mode")->capture_default_str();
  app.add_option("--elements", c.elements, "elements on the whole bar; branch n uses elements/n per cell")
      ->capture_default_str();
  app.add_option("--lambda-start", c.lambda_start)->capture_default_str();
  app.add_option("--lambda-end", c.lambda_end)->capture_default_str();
  app.add_option("--step", c.step, "stretch increment")->capture_default_str();
  app.add_option("--tol", c.tol, "absolute and relative Newton tolerance")->capture_default_str();
  app.add_option("--zero-tol", c.zero_tol, "zero-eigenvalue threshold relative to the spectral scale")
      ->capture_default_str();
  app.add_option("--snapshot-lambdas", c.snapshot_lambdas, "stretches at which snapshots are written")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--out", c.out, "output directory")->capture_default_str();
  app.add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app.add_option("--jobs", c.jobs, "concurrent branch jobs")->check(CLI::PositiveNumber)->capture_default_str();
}

int cmd_trace(const ifrac::RunConfig& config) {
  const auto res = ifrac::run_trace(config, true);
  ifrac::write_trace(config, res);
  std::printf("bifurcations:");
  for (const auto& b : res.bifurcations) std::printf(" %.10g(mode %d)", b.lambda, b.mode);
  std::printf("\n");
  for (const auto& r : res.branches)
    std::printf("branch %d%s: critical %.10g, breaks below %.10g, %zu samples, irreversible %s\n", r.branch,
                ifrac::to_string(r.side), r.lambda_critical, r.lambda_break, r.samples.size(),
                r.irreversible ? "yes" : "no");
  std::printf("wrote %s\n", config.out.c_str());
  return 0;
}

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ifrac::SolutionSnapshot read_input(const std::string& path) {
  try {
    return ifrac::read_snapshot(path);
  } catch (const std::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

ifrac::EquilibriumState load_state(const std::string& path, ifrac::ScaledProblem& problem) {
  const auto snap = read_input(path);
  problem = ifrac::ScaledProblem{snap.epsilon, snap.lambda, snap.model, snap.mesh};
  return ifrac::state_from_snapshot(snap);
}

int cmd_stability(const ifrac::RunConfig& config, const std::string& path, int head) {
  ifrac::ScaledProblem problem;
  const auto state = load_state(path, problem);
  ifrac::StabilityOptions opt;
  opt.zero_tol = config.zero_tol;
  const auto an = ifrac::analyze_stability_detailed(problem, state, opt);
  const auto& rep = an.report;
  nlohmann::ordered_json j;
  j["lambda"] = state.lambda;
  j["verdict"] = ifrac::to_string(rep.verdict);
  j["P"] = rep.P;
  j["n_zero"] = rep.n_zero;
  j["n_negative"] = rep.n_negative;
  j["scale"] = rep.scale;
  j["dimension"] = rep.eigenvalues.size();
  std::vector<double> first(rep.eigenvalues.begin(),
                            rep.eigenvalues.begin() + std::min<std::size_t>(head, rep.eigenvalues.size()));
  j["spectrum_head"] = first;
  nlohmann::ordered_json modes = nlohmann::ordered_json::array();
  for (const auto& t : an.translations)
    modes.push_back({{"eigenvalue", t.eigenvalue}, {"alignment", t.alignment}, {"discounted", t.discounted}});
  j["translation_modes"] = modes;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_family_check(const std::string& path, int region, double theta) {
  ifrac::ScaledProblem problem;
  const auto state = load_state(path, problem);
  const auto moved = ifrac::translate_family(problem, state, region, theta);
  const int shift = static_cast<int>(std::lround(theta / (state.lambda * state.mesh().h())));
  nlohmann::ordered_json j;
  j["region"] = region;
  j["theta"] = theta;
  j["shift_elements"] = shift;
  j["energy_delta"] = ifrac::energy(problem, moved.field) - ifrac::energy(problem, state.field);
  j["residual"] = moved.residual_norm;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_inspect(const std::string& path) {
  const auto snap = read_input(path);
  std::printf("branch %d%s  lambda %.10g  epsilon %g  elements %d\n", snap.branch, snap.side.c_str(), snap.lambda,
              snap.epsilon, snap.mesh.n_elems);
  std::printf("broken intervals:");
  for (auto [a, b] : snap.broken_intervals) std::printf(" [%.6g, %.6g]", a, b);
  std::printf("\nmaterial cracks:");
  for (double x : snap.material_crack_set) std::printf(" %.10g", x);
  std::printf("\n%6s %14s %14s %16s %16s %16s %16s\n", "node", "s", "y", "u", "u'", "H", "mu");
  for (std::size_t k = 0; k < snap.s.size(); ++k)
    std::printf("%6zu %14.8g %14.8g %16.9g %16.9g %16.9g %16.9g\n", k, snap.s[k], snap.y[k], snap.u[k], snap.du[k],
                snap.H[k], snap.mu[k]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ifrac::RunConfig config;
  CLI::App app{"Inverse-deformation fracture of a bar: branch tracing and stability"};
  app.set_config("--config", "", "flat key=value file; command-line flags take precedence");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  add_run_options(app, config);

  auto* trace = app.add_subcommand("trace", "trace the homogeneous branch and every bifurcating branch");
  trace->fallthrough();

  std::string snapshot;
  int head = 10;
  auto* stability = app.add_subcommand("stability", "stability report of a snapshot as JSON");
  stability->add_option("snapshot", snapshot, "snapshot file")->required()->check(CLI::ExistingFile);
  stability->add_option("--head", head, "number of smallest eigenvalues printed")->capture_default_str();
  stability->fallthrough();

  int region = 0;
  double theta = 0.0;
  auto* family = app.add_subcommand("family-check", "translate a floating region and report energy and residual");
  family->add_option("snapshot", snapshot, "snapshot file")->required()->check(CLI::ExistingFile);
  family->add_option("--region", region, "floating region index")->capture_default_str();
  family->add_option("--theta", theta, "translation in the deformed frame")->capture_default_str();
  family->fallthrough();

  auto* inspect = app.add_subcommand("inspect", "print a snapshot as a table");
  inspect->add_option("snapshot", snapshot, "snapshot file")->required()->check(CLI::ExistingFile);
  inspect->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    config.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kUsageError;
  }

  try {
    if (trace->parsed()) return cmd_trace(config);
    if (stability->parsed()) return cmd_stability(config, snapshot, head);
    if (family->parsed()) return cmd_family_check(snapshot, region, theta);
    if (inspect->parsed()) return cmd_inspect(snapshot);
  } catch (const ifrac::WindowExceeded& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericalFailure;
  } catch (const ifrac::NonConvergence& e) {
    std::fprintf(stderr, "error: %s (lambda %.10g)\n", e.what(), e.lambda);
    return kNumericalFailure;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericalFailure;
  }
  return kUsageError;
}
