// Stress, forward deformation, and serialization of diagram rows and
// solution snapshots.
#pragma once

#include "ifrac/stability.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ifrac {

struct StressSummary {
  double mean = 0.0;
  double max_dev = 0.0;
};

// Cauchy stress  sigma = eps^2 (H'' H - H'^2 / 2) + W*(H) - S*(H) H  at every
// Gauss point, with H = (1 + u') / lambda, H' = u'' / lambda^2 and
// H'' = u''' / lambda^3 from the element cubic.  The mean is the
// quadrature-weighted average over the bar.
inline StressSummary stress(const ScaledProblem& problem, const EquilibriumState& state) {
  const double lam = state.lambda;
  const double eps2 = problem.epsilon * problem.epsilon;
  std::vector<double> sig;
  std::vector<double> wts;
  sig.reserve(4 * state.mesh().n_elems);
  detail::for_each_quadrature_point(state.field, [&](int e, int, double w, const auto& sh, double du, double d2u) {
    const double d3u = element_derivative(sh.d3N, state.field.element_dofs(e));
    const double H = (1.0 + du) / lam, dH = d2u / (lam * lam), d2H = d3u / (lam * lam * lam);
    const auto inv = eval_inverse_extended(problem.model, H);
    sig.push_back(eps2 * (d2H * H - 0.5 * dH * dH) + inv.Wstar - inv.Sstar * H);
    wts.push_back(w);
  });
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    num += wts[i] * sig[i];
    den += wts[i];
  }
  StressSummary out;
  out.mean = num / den;
  for (double s : sig) out.max_dev = std::max(out.max_dev, std::abs(s - out.mean));
  return out;
}

struct ForwardSample {
  double x;
  double f;
};
struct ForwardJump {
  double x_c;
  double f_minus;
  double f_plus;
};
struct ForwardMap {
  std::vector<ForwardSample> samples;
  std::vector<ForwardJump> jumps;
  double good_length = 0.0;
};

// The forward map f = h^{-1} sampled on the good set, with one jump per crack.
inline ForwardMap forward_map(const EquilibriumState& state, int n_samples) {
  const auto topo = crack_topology(state);
  const Mesh& mesh = state.mesh();
  const double lam = state.lambda;
  ForwardMap fm;
  for (const auto& g : topo.good_intervals) {
    fm.good_length += lam * (g.b - g.a);
    for (int i = 0; i < n_samples; ++i) {
      const double s = mesh.s_min + (mesh.s_max - mesh.s_min) * i / std::max(n_samples - 1, 1);
      if (s < g.a || s > g.b) continue;
      fm.samples.push_back({s + eval_field(state.field, s).u, lam * s});
    }
  }
  for (const auto& b : topo.broken_intervals) {
    const double x = b.a + state.field.value(b.first_node);
    fm.jumps.push_back({x, lam * b.a, lam * b.b});
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

struct DiagramRow {
  int branch = 0;
  std::string side = "A";
  double lambda = 1.0;
  double energy = 0.0;
  double stress_mean = 0.0;
  double stress_dev = 0.0;
  std::string verdict = "Stable";
  int P = 0;
  int n_crack_faces = 0;
  int n_material_cracks = 0;

  bool operator==(const DiagramRow&) const = default;
};

inline const char* diagram_header() {
  return "branch,side,lambda,energy,stress_mean,stress_dev,verdict,P,n_crack_faces,n_material_cracks";
}

inline std::string to_csv_line(const DiagramRow& r) {
  std::string s = std::to_string(r.branch) + "," + r.side + "," + format_number(r.lambda) + "," +
                  format_number(r.energy) + "," + format_number(r.stress_mean) + "," + format_number(r.stress_dev) +
                  "," + r.verdict + "," + std::to_string(r.P) + "," + std::to_string(r.n_crack_faces) + "," +
                  std::to_string(r.n_material_cracks);
  return s;
}

inline nlohmann::ordered_json to_json(const DiagramRow& r) {
  nlohmann::ordered_json j;
  j["branch"] = r.branch;
  j["side"] = r.side;
  j["lambda"] = r.lambda;
  j["energy"] = r.energy;
  j["stress_mean"] = r.stress_mean;
  j["stress_dev"] = r.stress_dev;
  j["verdict"] = r.verdict;
  j["P"] = r.P;
  j["n_crack_faces"] = r.n_crack_faces;
  j["n_material_cracks"] = r.n_material_cracks;
  return j;
}

inline DiagramRow diagram_row_from_json(const nlohmann::json& j) {
  DiagramRow r;
  r.branch = j.at("branch").get<int>();
  r.side = j.at("side").get<std::string>();
  r.lambda = j.at("lambda").get<double>();
  r.energy = j.at("energy").get<double>();
  r.stress_mean = j.at("stress_mean").get<double>();
  r.stress_dev = j.at("stress_dev").get<double>();
  r.verdict = j.at("verdict").get<std::string>();
  r.P = j.at("P").get<int>();
  r.n_crack_faces = j.at("n_crack_faces").get<int>();
  r.n_material_cracks = j.at("n_material_cracks").get<int>();
  return r;
}

inline std::vector<DiagramRow> read_diagram_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != diagram_header()) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<DiagramRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    DiagramRow r;
    r.branch = std::stoi(f[0]);
    r.side = f[1];
    r.lambda = parse_number(f[2]);
    r.energy = parse_number(f[3]);
    r.stress_mean = parse_number(f[4]);
    r.stress_dev = parse_number(f[5]);
    r.verdict = f[6];
    r.P = std::stoi(f[7]);
    r.n_crack_faces = std::stoi(f[8]);
    r.n_material_cracks = std::stoi(f[9]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<DiagramRow> read_diagram_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in);
  std::vector<DiagramRow> rows;
  for (const auto& e : j) rows.push_back(diagram_row_from_json(e));
  return rows;
}

struct SolutionSnapshot {
  double lambda = 1.0;
  int branch = 0;
  std::string side = "A";
  double epsilon = 0.1;
  ConstitutiveModel model{};
  Mesh mesh{};
  std::vector<double> s, u, du, mu;  // nodal
  std::vector<double> y, h, H;
  std::vector<double> mu_points;  // every constraint point
  std::vector<int> active_points;
  std::vector<std::pair<double, double>> broken_intervals;
  std::vector<double> face_s;
  std::vector<double> material_crack_set;
};

inline SolutionSnapshot make_snapshot(const ScaledProblem& problem, const EquilibriumState& state,
                                      const std::string& side) {
  SolutionSnapshot snap;
  snap.lambda = state.lambda;
  snap.branch = state.branch;
  snap.side = side;
  snap.epsilon = problem.epsilon;
  snap.model = problem.model;
  snap.mesh = state.mesh();
  for (int k = 0; k < snap.mesh.n_nodes(); ++k) {
    const double s = snap.mesh.node(k);
    snap.s.push_back(s);
    snap.u.push_back(state.field.value(k));
    snap.du.push_back(state.field.slope(k));
    snap.mu.push_back(state.mu[2 * k]);
    snap.y.push_back(state.lambda * s);
    snap.h.push_back(s + state.field.value(k));
    snap.H.push_back((1.0 + state.field.slope(k)) / state.lambda);
  }
  snap.mu_points.assign(state.mu.data(), state.mu.data() + state.mu.size());
  snap.active_points = state.active;
  const auto topo = crack_topology(state);
  for (const auto& b : topo.broken_intervals) snap.broken_intervals.push_back({b.a, b.b});
  for (const auto& f : topo.faces) snap.face_s.push_back(f.s_face);
  snap.material_crack_set = topo.material_crack_set;
  return snap;
}

inline EquilibriumState state_from_snapshot(const SolutionSnapshot& snap) {
  EquilibriumState st = blank_state(snap.mesh, snap.lambda, snap.branch);
  for (int k = 0; k < snap.mesh.n_nodes(); ++k) {
    st.field.dofs[2 * k] = snap.u.at(k);
    st.field.dofs[2 * k + 1] = snap.du.at(k);
  }
  for (std::size_t j = 0; j < snap.mu_points.size(); ++j) st.mu[j] = snap.mu_points[j];
  st.active = snap.active_points;
  st.converged = true;
  st.status = SolveStatus::Converged;
  return st;
}

inline nlohmann::ordered_json to_json(const SolutionSnapshot& s) {
  nlohmann::ordered_json j;
  j["lambda"] = s.lambda;
  j["branch"] = s.branch;
  j["side"] = s.side;
  j["epsilon"] = s.epsilon;
  nlohmann::ordered_json m;
  const auto& p = s.model.parameters();
  m["kind"] = s.model.kind() == LawKind::Cubic ? "cubic" : "lj";
  m["A"] = p.A;
  m["B"] = p.B;
  m["m"] = p.m;
  m["n"] = p.n;
  j["model"] = m;
  j["mesh"] = {{"n_elems", s.mesh.n_elems}, {"s_min", s.mesh.s_min}, {"s_max", s.mesh.s_max}};
  j["s"] = s.s;
  j["u"] = s.u;
  j["du"] = s.du;
  j["mu"] = s.mu;
  j["y"] = s.y;
  j["h"] = s.h;
  j["H"] = s.H;
  j["mu_points"] = s.mu_points;
  j["active_points"] = s.active_points;
  nlohmann::ordered_json topo;
  nlohmann::ordered_json bi = nlohmann::ordered_json::array();
  for (auto [a, b] : s.broken_intervals) bi.push_back({a, b});
  topo["broken_intervals"] = bi;
  topo["faces"] = s.face_s;
  topo["material_crack_set"] = s.material_crack_set;
  j["topology"] = topo;
  return j;
}

inline SolutionSnapshot snapshot_from_json(const nlohmann::json& j) {
  SolutionSnapshot s;
  s.lambda = j.at("lambda").get<double>();
  s.branch = j.at("branch").get<int>();
  s.side = j.at("side").get<std::string>();
  s.epsilon = j.at("epsilon").get<double>();
  const auto& m = j.at("model");
  if (m.at("kind").get<std::string>() == "cubic") s.model = ConstitutiveModel::cubic();
  else
    s.model = ConstitutiveModel::general_lj(m.at("A").get<double>(), m.at("B").get<double>(), m.at("m").get<double>(),
                                            m.at("n").get<double>());
  s.mesh = make_mesh(j.at("mesh").at("n_elems").get<int>(), j.at("mesh").at("s_min").get<double>(),
                     j.at("mesh").at("s_max").get<double>());
  s.s = j.at("s").get<std::vector<double>>();
  s.u = j.at("u").get<std::vector<double>>();
  s.du = j.at("du").get<std::vector<double>>();
  s.mu = j.at("mu").get<std::vector<double>>();
  s.y = j.at("y").get<std::vector<double>>();
  s.h = j.at("h").get<std::vector<double>>();
  s.H = j.at("H").get<std::vector<double>>();
  s.mu_points = j.at("mu_points").get<std::vector<double>>();
  s.active_points = j.at("active_points").get<std::vector<int>>();
  for (const auto& b : j.at("topology").at("broken_intervals")) s.broken_intervals.push_back({b[0], b[1]});
  s.face_s = j.at("topology").at("faces").get<std::vector<double>>();
  s.material_crack_set = j.at("topology").at("material_crack_set").get<std::vector<double>>();
  const std::size_t n = s.mesh.n_nodes();
  for (auto* v : {&s.s, &s.u, &s.du, &s.mu, &s.y, &s.h, &s.H})
    if (v->size() != n) throw std::runtime_error("snapshot: nodal array length does not match mesh");
  if (s.mu_points.size() != static_cast<std::size_t>(n_constraint_points(s.mesh)))
    throw std::runtime_error("snapshot: constraint-point array length does not match mesh");
  return s;
}

inline SolutionSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open snapshot " + path.string());
  return snapshot_from_json(nlohmann::json::parse(in));
}

inline std::string snapshot_filename(const SolutionSnapshot& s) {
  return "branch" + std::to_string(s.branch) + s.side + "_lambda" + format_number(s.lambda) + ".json";
}

enum class OutputFormat { Csv, Json };

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline void write_records(const std::vector<DiagramRow>& rows, const std::vector<SolutionSnapshot>& snapshots,
                          const std::filesystem::path& out_dir, OutputFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  if (format == OutputFormat::Csv) {
    std::string text = std::string(diagram_header()) + "\n";
    for (const auto& r : rows) text += to_csv_line(r) + "\n";
    write_text(out_dir / "diagram.csv", text);
  } else {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    write_text(out_dir / "diagram.json", arr.dump(1) + "\n");
  }
  for (const auto& s : snapshots) write_text(out_dir / snapshot_filename(s), to_json(s).dump() + "\n");
}

}  // namespace ifrac
