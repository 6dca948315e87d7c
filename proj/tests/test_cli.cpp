#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "commands.hpp"
#include "config.hpp"
#include "delaytk/error.hpp"

using namespace delaytk;
using namespace delaytk::app;
using nlohmann::json;

namespace {

const double kK2Critical = std::acos(-1.0 / 3.0) / std::numbers::sqrt2;

RunConfig k2(std::optional<double> tau) {
  RunConfig c;
  c.graph = "path:2";
  c.tau = tau;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("delaytk_test_cli_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

int run_binary(const std::string& args, const std::filesystem::path& stdout_file) {
  const std::string cmd = std::string(DELAYTK_CLI) + " " + args + " > " + stdout_file.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("config parsing, defaults and flag precedence") {
  RunConfig c = config_from_json(json::parse(R"({"graph": "topo.txt", "gamma": 2, "tau": 0.3,
      "sweep": {"delta_tau": 0.01}, "sim": {"t_f": 3}})"),
                                 "/base");
  CHECK(c.graph == "/base/topo.txt");
  CHECK(c.gamma == 2.0);
  CHECK(c.seed == 42);
  CHECK(c.sweep.delta_tau == 0.01);
  CHECK(c.sweep.tau_start == 0.001);
  CHECK(c.sim.t_f == 3.0);

  FlagOverrides f;
  f.gamma = 0.5;
  f.seed = 7;
  f.graph = "cycle:5";
  apply_flags(c, f);
  CHECK(c.gamma == 0.5);
  CHECK(c.seed == 7);
  CHECK(c.graph == "cycle:5");
  CHECK(c.tau == 0.3);
  CHECK(to_json(c)["seed"] == 7);

  CHECK(config_from_json(json::parse(R"({"graph": "cycle:5"})"), "/base").graph == "cycle:5");
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"gama": 1})")), Error);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"sweep": {"delta": 1}})")), Error);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"tau": "x"})")), Error);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"system": {"T": [[0, 1], [0]], "Td": [[1]]}})")), Error);
}

TEST_CASE("graph specs") {
  CHECK(resolve_graph("cycle:5", 42).size() == 5);
  CHECK(resolve_graph("path:4", 42).edges().size() == 3);
  CHECK(resolve_graph("random:6:0.5", 42).edges() ==
        resolve_graph(std::string(DELAYTK_DATA_DIR) + "/topologies/random6.txt", 0).edges());
  CHECK_THROWS_AS(resolve_graph("cycle:x", 42), Error);
  CHECK_THROWS_AS(resolve_graph("", 42), Error);
}

TEST_CASE("validation happens before computing") {
  CHECK(run(Command::analyze, k2(std::nullopt)).exit_code == exit_invalid);
  CHECK(run(Command::analyze, k2(-1.0)).exit_code == exit_invalid);
  RunConfig c = k2(0.05);
  c.gamma = 0.0;
  const CommandResult r = run(Command::analyze, c);
  CHECK(r.exit_code == exit_invalid);
  CHECK(r.report["error"]["code"] == "ZeroGamma");
  c = k2(0.05);
  c.graph = "/nonexistent/graph.txt";
  CHECK(run(Command::analyze, c).exit_code == exit_invalid);
  c = k2(0.5);
  c.sim.h = 0.1;
  CHECK(run(Command::simulate, c).exit_code == exit_invalid);
  c = k2(0.5);
  c.sim.x0 = {1.0, 2.0, 3.0};
  CHECK(run(Command::simulate, c).exit_code == exit_invalid);
  c = k2(0.5);
  c.system = SystemOverride{Eigen::MatrixXd::Zero(1, 1), -Eigen::MatrixXd::Ones(1, 1)};
  CHECK(run(Command::analyze, c).exit_code == exit_invalid);
  c = k2(std::nullopt);
  c.sweep.tau_max = 0.0005;
  CHECK(run(Command::margin, c).exit_code == exit_invalid);
}

TEST_CASE("analyze K2 on both sides of the margin") {
  const CommandResult lo = run(Command::analyze, k2(0.05));
  CHECK(lo.exit_code == exit_stable);
  CHECK(lo.report["verdict"]["stable"] == true);
  CHECK(lo.report["verdict"]["agrees_with_oracle"] == true);
  CHECK(lo.report["invariants"]["all_pass"] == true);
  CHECK(lo.report["seed"] == 42);
  for (const auto& root : lo.report["oracle"]["roots"]) CHECK(root.contains("residual"));
  for (const auto& root : lo.report["solution"]["eig_S"]) CHECK(root["residual"].get<double>() < 1e-6);

  const CommandResult hi = run(Command::analyze, k2(5.0));
  CHECK(hi.exit_code == exit_unstable);
  CHECK(hi.report["verdict"]["stable"] == false);
  CHECK(hi.report["oracle"]["stable"] == false);
}

TEST_CASE("oracle command") {
  RunConfig c;
  c.tau = 1.0;
  c.system = SystemOverride{Eigen::MatrixXd::Zero(1, 1), -Eigen::MatrixXd::Ones(1, 1)};
  CommandResult r = run(Command::oracle, c);
  CHECK(r.exit_code == 0);
  REQUIRE(!r.report["roots"].empty());
  // rightmost root of s + e^{-s} = 0 is W0(-1)
  CHECK(r.report["roots"][0]["re"].get<double>() == doctest::Approx(-0.31813150520476413).epsilon(1e-9));
  CHECK(r.report["roots"][0]["im"].get<double>() == doctest::Approx(1.3372357014306895).epsilon(1e-9));
  CHECK(r.csv.starts_with("re,im,residual,multiplicity\n"));
  CHECK(render(r, Command::oracle, c) == r.csv);

  c.oracle.re_min = 5.0;
  c.oracle.re_max = 6.0;
  r = run(Command::oracle, c);
  CHECK(r.exit_code == 0);
  CHECK(r.csv == "re,im,residual,multiplicity\n");

  RunConfig g = k2(0.5);
  r = run(Command::oracle, g);
  CHECK(r.exit_code == 0);
  double prev = 1e300;
  for (const auto& root : r.report["roots"]) {
    CHECK(root["re"].get<double>() <= prev);
    prev = root["re"].get<double>();
  }
}

TEST_CASE("simulate writes a trajectory and flags divergence") {
  RunConfig c = k2(0.5);
  CommandResult r = run(Command::simulate, c);
  CHECK(r.exit_code == exit_stable);
  CHECK(r.report["divergent"] == false);
  CHECK(r.report["nu"].get<double>() >= 0.0);
  CHECK(r.report["history"]["kind"] == "constant");
  CHECK(r.csv.starts_with("t,x_1,x_2,v_1,v_2,u_1,u_2,rho\n"));

  c.gamma = -3.0;
  c.tau = 0.1;
  c.sim.t_f = 60.0;
  r = run(Command::simulate, c);
  CHECK(r.exit_code == exit_divergence);
  CHECK(r.report["divergent"] == true);
  CHECK(r.report["t_end"].get<double>() < 60.0);
  CHECK(!r.csv.empty());
}

TEST_CASE("margin on K2 matches the closed form") {
  RunConfig c = k2(std::nullopt);
  c.sweep.tau_max = 2.0;
  const CommandResult r = run(Command::margin, c);
  CHECK(r.exit_code == exit_stable);
  const double lambert = r.report["lambert"]["tau_star"];
  const double oracle = r.report["oracle"]["tau_star"];
  CHECK(std::abs(oracle - kK2Critical) <= 1e-4);
  CHECK(std::abs(lambert - kK2Critical) <= 2 * c.sweep.delta_tau);
  CHECK(r.report["gap_within_two_steps"] == true);
  CHECK(r.report["lambert"]["trace_length"] == r.report["lambert"]["trace"].size());
  CHECK(r.report["lambert"]["invariant_violations"] == 0);
}

TEST_CASE("compare is deterministic") {
  RunConfig c;
  c.compare_graphs = {"path:2", "cycle:3"};
  c.sweep.delta_tau = 0.01;
  c.sweep.tau_max = 2.0;
  const CommandResult a = run(Command::compare, c);
  const CommandResult b = run(Command::compare, c);
  CHECK(a.exit_code == 0);
  CHECK(a.report.dump() == b.report.dump());
  CHECK(a.report["rows"].size() == 2);
  CHECK(a.timing.contains("graph1.sweep"));
  CHECK(!a.report.contains("timing"));
  for (const auto& row : a.report["rows"]) CHECK(row["simulation"]["nu"].get<double>() >= 0.0);
}

TEST_CASE("binary: exit codes and output files") {
  const auto dir = scratch_dir("bin");
  CHECK(run_binary("--help", dir / "help.txt") == 0);
  CHECK(run_binary("analyze --bogus", dir / "x.txt") == exit_invalid);
  CHECK(run_binary("analyze --graph /nonexistent --tau 1", dir / "x.txt") == exit_invalid);
  CHECK(run_binary("analyze --graph path:2 --tau 0.05", dir / "a.json") == exit_stable);
  CHECK(json::parse(slurp(dir / "a.json"))["verdict"]["stable"] == true);
  CHECK(run_binary("analyze --graph path:2 --tau 5", dir / "b.json") == exit_unstable);

  // flags override the config file
  const auto cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"graph": "path:2", "tau": 5.0, "seed": 9})";
  CHECK(run_binary("analyze --config " + cfg.string() + " --tau 0.05", dir / "c.json") == exit_stable);
  CHECK(json::parse(slurp(dir / "c.json"))["seed"] == 9);

  const auto out = dir / "sim";
  CHECK(run_binary("simulate --graph path:2 --tau 0.5 --out " + out.string(), dir / "s.json") == exit_stable);
  CHECK(std::filesystem::exists(out / "report.json"));
  CHECK(std::filesystem::exists(out / "timing.json"));
  CHECK(slurp(out / "trajectory.csv").starts_with("t,x_1,x_2,"));
  CHECK(slurp(out / "report.json") == slurp(dir / "s.json"));
  CHECK(run_binary("simulate --graph path:2 --tau 0.5 --format csv", dir / "s.csv") == exit_stable);
  CHECK(slurp(dir / "s.csv") == slurp(out / "trajectory.csv"));
}
