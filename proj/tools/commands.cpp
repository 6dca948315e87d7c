// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "delaytk/graph.hpp"
#include "delaytk/lambert_solver.hpp"
#include "delaytk/simulate.hpp"
#include "delaytk/spectrum_oracle.hpp"
#include "delaytk/stability.hpp"
#include "delaytk/system.hpp"

namespace delaytk::app {

using nlohmann::json;

namespace {

// z3 has no tolerance of its own in InvariantReport
constexpr double kZ3Tol = 1e-9;
constexpr double kReconstructionTol = 1e-6;

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

json cjson(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

json cvec(const Eigen::VectorXcd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(cjson(v(i)));
  return a;
}

json rvec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// inf/nan would silently become null
json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json graph_json(const std::string& spec, const Graph& g) {
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back({e.i + 1, e.j + 1});
  const Eigen::VectorXi d = g.degrees();
  return {{"spec", spec}, {"n", g.size()}, {"edges", edges}, {"degrees", std::vector<int>(d.begin(), d.end())}};
}

json head(Command cmd, const RunConfig& cfg) {
  return {{"command", command_name(cmd)}, {"seed", cfg.seed}, {"config", to_json(cfg)}};
}

const char* guess_name(GuessKind k) {
  switch (k) {
    case GuessKind::modal: return "modal";
    case GuessKind::modal_agreement_pair: return "modal_agreement_pair";
    case GuessKind::spectral_mixing: return "spectral_mixing";
    case GuessKind::eigenvector_exact: return "eigenvector_exact";
  }
  return "?";
}

json roots_json(const ComplexSpectrum& spec) {
  json a = json::array();
  for (const auto& r : spec.roots)
    a.push_back({{"re", r.s.real()}, {"im", r.s.imag()}, {"residual", r.residual}, {"multiplicity", r.multiplicity}});
  return a;
}

json check(double value, double tol) { return {{"value", value}, {"tol", tol}, {"pass", value < tol}}; }

json invariants_json(const InvariantReport& inv) {
  return {{"upper_block", check(inv.upper_block, 1e-9)},
          {"symmetry_w21", check(inv.symmetry_w21, 1e-7)},
          {"symmetry_w22", check(inv.symmetry_w22, 1e-7)},
          {"commutator", check(inv.commutator, 1e-7)},
          {"commutator_shifted", check(inv.commutator_shifted, 1e-7)},
          {"z3", check(inv.z3, kZ3Tol)},
          {"fixed_point", check(inv.fixed_point, 1e-7)},
          {"zero_eigenvalues_m", inv.zero_eigenvalues_m},
          {"null_dim_w", inv.null_dim_w},
          {"all_pass", inv.lemma_structure_ok() && inv.z3 < kZ3Tol && inv.fixed_point_ok()}};
}

bool invariants_pass(const InvariantReport& inv) {
  return inv.lemma_structure_ok() && inv.z3 < kZ3Tol && inv.fixed_point_ok();
}

HistorySpec default_history(int n, const SimConfig& sim) {
  HistorySpec h;
  if (sim.x0.empty()) {
    h.x0 = Eigen::VectorXd::LinSpaced(n, 1.0, n) / n;
    h.x0.array() -= h.x0.mean();
  } else {
    h.x0 = Eigen::Map<const Eigen::VectorXd>(sim.x0.data(), n);
  }
  h.v0 = sim.v0.empty() ? Eigen::VectorXd::Zero(n) : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(sim.v0.data(), n));
  return h;
}

struct SimSummary {
  Trajectory traj;
  HistorySpec hist;
  json summary;
};

SimSummary run_simulation(const SystemMatrices& sys, double tau, const SimConfig& sim) {
  SimSummary out;
  out.hist = default_history(sys.agents, sim);
  out.traj = integrate(sys, Delay(tau), out.hist, sim.t_f, sim.h.value_or(tau / 50.0));
  const auto dis = disagreement(out.traj);
  out.summary = {{"tau", tau},
                 {"history", {{"kind", "constant"}, {"x0", rvec(out.hist.x0)}, {"v0", rvec(out.hist.v0)}}},
                 {"h", out.traj.h},
                 {"t_f", sim.t_f},
                 {"samples", out.traj.samples()},
                 {"t_end", out.traj.t.back()},
                 {"nu", finite_or_null(out.traj.nu)},
                 {"divergent", out.traj.divergent},
                 {"delta_initial", dis.front()},
                 {"delta_final", finite_or_null(dis.back())}};
  return out;
}

struct MarginSummary {
  json lambert, oracle;
  std::optional<double> tau_lambert, tau_oracle;
  std::string trace_csv;
};

std::string trace_csv(const DelayMarginResult& res) {
  std::ostringstream os;
  os.precision(17);
  os << "tau,eta1,mu1,abscissa,stable,oracle_stable,ambiguous,necessary,rebootstrapped,max_imag,"
        "reconstruction_error,membership_ratio,upper_block,symmetry_w21,symmetry_w22,commutator,"
        "commutator_shifted,z3,fixed_point\n";
  for (const auto& p : res.verdict_trace) {
    const auto& inv = p.invariants;
    os << p.tau << ',' << p.eta1 << ',' << p.mu1 << ',' << p.abscissa << ',' << p.stable << ',' << p.oracle_stable
       << ',' << p.ambiguous << ',' << p.necessary << ',' << p.rebootstrapped << ',' << p.max_imag << ','
       << p.reconstruction_error << ',' << p.membership_ratio << ',' << inv.upper_block << ',' << inv.symmetry_w21
       << ',' << inv.symmetry_w22 << ',' << inv.commutator << ',' << inv.commutator_shifted << ',' << inv.z3 << ','
       << inv.fixed_point << '\n';
  }
  return os.str();
}

MarginSummary run_margin(const SystemMatrices& sys, const SweepConfig& sw, std::uint64_t seed, json& timing,
                         const std::string& key) {
  MarginSummary out;
  Stopwatch clock;
  try {
    const DelayMarginResult res = sweep_delay(sys, sw.tau_start, sw.delta_tau, sw.tau_max, SweepOptions{seed});
    int rebootstraps = 0, ambiguous = 0, disagreements = 0, invariant_violations = 0, reconstruction_failures = 0,
        membership_failures = 0, counterexamples = 0;
    json trace = json::array();
    for (const auto& p : res.verdict_trace) {
      rebootstraps += p.rebootstrapped;
      ambiguous += p.ambiguous;
      disagreements += p.stable != p.oracle_stable && !p.ambiguous;
      invariant_violations += !p.ambiguous && !invariants_pass(p.invariants);
      reconstruction_failures += !(p.reconstruction_error <= kReconstructionTol);
      membership_failures += !(p.membership_ratio < 1.0);
      counterexamples += p.stable && !p.necessary;
      trace.push_back({p.tau, p.eta1, p.mu1, p.abscissa, p.stable, p.oracle_stable});
    }
    out.tau_lambert = res.tau_star;
    out.lambert = {{"method", "lambert_sweep"},
                   {"tau_star", res.tau_star},
                   {"delta_tau", res.delta_tau},
                   {"reached_tau_max", res.reached_tau_max},
                   {"trace_length", res.verdict_trace.size()},
                   {"rebootstraps", rebootstraps},
                   {"ambiguous_points", ambiguous},
                   {"oracle_disagreements", disagreements},
                   {"invariant_violations", invariant_violations},
                   {"reconstruction_failures", reconstruction_failures},
                   {"membership_failures", membership_failures},
                   {"necessity_counterexamples", counterexamples},
                   {"trace_columns", {"tau", "eta1", "mu1", "abscissa", "stable", "oracle_stable"}},
                   {"trace", trace}};
    out.trace_csv = trace_csv(res);
  } catch (const Error& e) {
    out.lambert = {{"method", "lambert_sweep"}, {"error", {{"code", to_string(e.code())}, {"message", e.message()}}}};
  }
  timing[key + "sweep"] = clock.lap();
  try {
    const double t = first_critical_delay(sys, Delay(sw.tau_start), Delay(sw.tau_max), sw.oracle_scan, sw.bisection_tol);
    out.tau_oracle = t;
    out.oracle = {{"method", "oracle_bisection"}, {"tau_star", t}, {"tol", sw.bisection_tol}, {"scan_step", sw.oracle_scan}};
  } catch (const Error& e) {
    out.oracle = {{"method", "oracle_bisection"}, {"error", {{"code", to_string(e.code())}, {"message", e.message()}}}};
  }
  timing[key + "bisection"] = clock.lap();
  return out;
}

int margin_exit(const json& lambert) {
  if (!lambert.contains("error")) return exit_stable;
  const std::string code = lambert["error"]["code"];
  for (auto c : {ErrorCode::UnstableAtStart, ErrorCode::NonConvergence, ErrorCode::GridTooCoarse})
    if (code == to_string(c)) return exit_code_for(c);
  return exit_nonconvergence;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonConvergence:
    case ErrorCode::NotDiagonalizable:
    case ErrorCode::InsufficientRoots:
    case ErrorCode::SingularM22:
    case ErrorCode::NonRealSpectrum:
    case ErrorCode::PairingMismatch:
      return exit_nonconvergence;
    case ErrorCode::GridTooCoarse:
      return exit_grid;
    case ErrorCode::UnstableAtStart:
      return exit_unstable;
    default:
      return exit_invalid;
  }
}

CommandResult cmd_analyze(const RunConfig& cfg) {
  CommandResult r;
  Stopwatch clock;
  const Graph g = resolve_graph(cfg.graph, cfg.seed);
  const SystemMatrices sys = assemble(g, cfg.gamma);
  const Delay tau(*cfg.tau);

  const ComplexSpectrum spectrum = leading_roots(sys, tau, static_cast<std::size_t>(sys.dim()));
  const double abscissa = rightmost_abscissa(sys, tau);
  r.timing["oracle"] = clock.lap();

  const Bootstrap boot = bootstrap_solve(sys, tau, spectrum, cfg.seed);
  const auto candidates = branch_sweep(sys, tau, boot.result);
  const std::size_t pick = dominant_candidate(candidates, sys, tau);
  const LambertSolution& sol = candidates[pick];
  r.timing["solve"] = clock.lap();

  const StabilityVerdict v = verdict(sol, sys, tau, false);
  const SpectralCheck sc = spectral_check(sys, tau, sol.S);
  r.timing["verdict"] = clock.lap();

  json cands = json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    cands.push_back({{"branches", c.branches},
                     {"fixed_point_residual", c.invariants.fixed_point},
                     {"fixed_point", c.invariants.fixed_point_ok()},
                     {"eta1", eta_mu(c, sys, tau, false).eta(0)}});
  }
  json eig_s = json::array();
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(sol.S, false).eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    eig_s.push_back({{"re", ev(i).real()}, {"im", ev(i).imag()}, {"residual", std::abs(char_residual(ev(i), sys, tau))}});

  const bool oracle_stable = abscissa < 0.0;
  r.report = head(Command::analyze, cfg);
  r.report["graph"] = graph_json(cfg.graph, g);
  r.report["tau"] = tau.value();
  r.report["oracle"] = {{"abscissa", abscissa}, {"stable", oracle_stable}, {"roots", roots_json(spectrum)}};
  r.report["solver"] = {{"guess", guess_name(boot.kind)},
                        {"attempts", boot.attempts},
                        {"iterations", boot.result.iterations},
                        {"residual", boot.result.residual},
                        {"noise_floor", boot.result.noise_floor}};
  r.report["candidates"] = cands;
  r.report["selected_candidate"] = pick;
  r.report["solution"] = {
      {"branches", sol.branches},
      {"m", cvec(sol.m)},
      {"w", cvec(sol.w)},
      {"w_tilde", cvec(sol.w_tilde)},
      {"ordering", sol.ordering == ZOrdering::z2_z1inv ? "W22*Z2*inv(Z1)" : "W22*Z1*inv(Z2)"},
      {"residual_z2_z1inv", sol.residual_z2_z1inv},
      {"residual_z1_z2inv", sol.residual_z1_z2inv},
      {"ambiguous", sol.ambiguous},
      {"eig_S", eig_s},
      {"membership_ratio", sc.max_residual_ratio},
      {"tracks_rightmost", tracks_rightmost(sc, abscissa)}};
  r.report["invariants"] = invariants_json(sol.invariants);
  r.report["verdict"] = {{"eta", rvec(v.eta)},
                         {"mu", rvec(v.mu)},
                         {"eta1", v.eta1},
                         {"mu1", v.mu1},
                         {"stable", v.stable},
                         {"ambiguous", v.ambiguous},
                         {"necessary_condition", v.necessary},
                         {"s_roots", cvec(v.s_roots)},
                         {"reconstruction_error", finite_or_null(v.reconstruction_error)},
                         {"max_imag", v.max_imag},
                         {"oracle_stable", oracle_stable},
                         {"agrees_with_oracle", v.stable == oracle_stable}};
  r.exit_code = v.stable ? exit_stable : exit_unstable;
  return r;
}

CommandResult cmd_margin(const RunConfig& cfg) {
  CommandResult r;
  const Graph g = resolve_graph(cfg.graph, cfg.seed);
  const SystemMatrices sys = assemble(g, cfg.gamma);
  MarginSummary m = run_margin(sys, cfg.sweep, cfg.seed, r.timing, "");
  r.report = head(Command::margin, cfg);
  r.report["graph"] = graph_json(cfg.graph, g);
  r.report["lambert"] = m.lambert;
  r.report["oracle"] = m.oracle;
  if (m.tau_lambert && m.tau_oracle) {
    const double gap = std::abs(*m.tau_lambert - *m.tau_oracle);
    r.report["gap"] = gap;
    r.report["gap_within_two_steps"] = gap <= 2.0 * cfg.sweep.delta_tau;
  } else {
    r.report["gap"] = nullptr;
    r.report["gap_within_two_steps"] = nullptr;
  }
  r.csv = m.trace_csv;
  r.csv_name = "trace.csv";
  r.exit_code = margin_exit(m.lambert);
  return r;
}

CommandResult cmd_simulate(const RunConfig& cfg) {
  CommandResult r;
  Stopwatch clock;
  const Graph g = resolve_graph(cfg.graph, cfg.seed);
  const SystemMatrices sys = assemble(g, cfg.gamma);
  SimSummary s = run_simulation(sys, *cfg.tau, cfg.sim);
  r.timing["integrate"] = clock.lap();
  r.report = head(Command::simulate, cfg);
  r.report["graph"] = graph_json(cfg.graph, g);
  r.report.update(s.summary);
  std::ostringstream os;
  write_csv(os, s.traj);
  r.csv = os.str();
  r.csv_name = "trajectory.csv";
  r.exit_code = s.traj.divergent ? exit_divergence : exit_stable;
  return r;
}

CommandResult cmd_oracle(const RunConfig& cfg) {
  CommandResult r;
  Stopwatch clock;
  std::optional<Graph> g;
  const SystemMatrices sys = [&] {
    if (cfg.system) return SystemMatrices::generic(cfg.system->T, cfg.system->Td);
    g = resolve_graph(cfg.graph, cfg.seed);
    return assemble(*g, cfg.gamma);
  }();
  const Delay tau(*cfg.tau);
  SearchRegion region = bounding_region(sys, tau, cfg.oracle.re_min.value_or(-2.0));
  if (cfg.oracle.re_max) region.re_max = *cfg.oracle.re_max;
  if (cfg.oracle.im_max) region.im_max = *cfg.oracle.im_max;
  if (cfg.oracle.grid_step) region.grid_step = *cfg.oracle.grid_step;

  ComplexSpectrum spec;
  int refinements = 0;
  for (;; ++refinements) {
    try {
      spec = find_roots(sys, tau, region);
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::GridTooCoarse || refinements == 2) throw;
      region.grid_step /= 2.0;
    }
  }
  r.timing["find_roots"] = clock.lap();

  r.report = head(Command::oracle, cfg);
  if (g) r.report["graph"] = graph_json(cfg.graph, *g);
  r.report["tau"] = tau.value();
  r.report["region"] = {{"re_min", region.re_min},
                        {"re_max", region.re_max},
                        {"im_max", region.im_max},
                        {"grid_step", region.grid_step},
                        {"refinements", refinements}};
  r.report["roots"] = roots_json(spec);

  std::ostringstream os;
  os.precision(17);
  os << "re,im,residual,multiplicity\n";
  for (const auto& root : spec.roots)
    os << root.s.real() << ',' << root.s.imag() << ',' << root.residual << ',' << root.multiplicity << '\n';
  r.csv = os.str();
  r.csv_name = "spectrum.csv";
  return r;
}

CommandResult cmd_compare(const RunConfig& cfg) {
  CommandResult r;
  r.report = head(Command::compare, cfg);
  json rows = json::array();
  std::ostringstream os;
  os.precision(17);
  os << "graph,n,tau_star_lambert,tau_star_oracle,gap,nu,delta_final\n";
  for (std::size_t i = 0; i < cfg.compare_graphs.size(); ++i) {
    const std::string& spec = cfg.compare_graphs[i];
    const Graph g = resolve_graph(spec, cfg.seed);
    const SystemMatrices sys = assemble(g, cfg.gamma);
    const std::string key = "graph" + std::to_string(i + 1) + ".";
    MarginSummary m = run_margin(sys, cfg.sweep, cfg.seed, r.timing, key);
    Stopwatch clock;
    SimSummary s = run_simulation(sys, cfg.compare_tau, cfg.sim);
    r.timing[key + "simulate"] = clock.lap();

    json row = {{"graph", graph_json(spec, g)}, {"lambert", m.lambert}, {"oracle", m.oracle}, {"simulation", s.summary}};
    row["lambert"].erase("trace");
    row["lambert"].erase("trace_columns");
    std::optional<double> gap;
    if (m.tau_lambert && m.tau_oracle) gap = std::abs(*m.tau_lambert - *m.tau_oracle);
    row["gap"] = gap ? json(*gap) : json(nullptr);
    rows.push_back(row);
    if (r.exit_code == exit_stable) r.exit_code = margin_exit(m.lambert);

    auto opt = [](const std::optional<double>& v) { return v ? json(*v).dump() : std::string(); };
    os << spec << ',' << g.size() << ',' << opt(m.tau_lambert) << ',' << opt(m.tau_oracle) << ',' << opt(gap) << ','
       << s.summary["nu"].dump() << ',' << s.summary["delta_final"].dump() << '\n';
  }
  r.report["common_tau"] = cfg.compare_tau;
  r.report["rows"] = rows;
  r.csv = os.str();
  r.csv_name = "compare.csv";
  return r;
}

CommandResult run(Command cmd, const RunConfig& cfg) {
  try {
    validate(cfg, cmd);
    switch (cmd) {
      case Command::analyze: return cmd_analyze(cfg);
      case Command::margin: return cmd_margin(cfg);
      case Command::simulate: return cmd_simulate(cfg);
      case Command::oracle: return cmd_oracle(cfg);
      case Command::compare: return cmd_compare(cfg);
    }
  } catch (const Error& e) {
    CommandResult r;
    r.exit_code = exit_code_for(e.code());
    r.report = head(cmd, cfg);
    r.report["error"] = {{"code", to_string(e.code())}, {"message", e.message()}};
    return r;
  }
  return {};
}

std::string render(const CommandResult& r, Command cmd, const RunConfig& cfg) {
  const std::string format = cfg.format.empty() ? (cmd == Command::oracle ? "csv" : "json") : cfg.format;
  if (format == "csv" && !r.report.contains("error")) return r.csv;
  return r.report.dump(2) + "\n";
}

void write_outputs(const CommandResult& r, const RunConfig& cfg) {
  if (cfg.out_dir.empty()) return;
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  auto write = [&dir](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + (dir / name).string());
    f << text;
  };
  write("report.json", r.report.dump(2) + "\n");
  write("timing.json", r.timing.dump(2) + "\n");
  if (!r.csv_name.empty() && !r.report.contains("error")) write(r.csv_name, r.csv);
}

}  // namespace delaytk::app
