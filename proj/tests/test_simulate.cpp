#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "delaytk/error.hpp"
#include "delaytk/simulate.hpp"

using namespace delaytk;

namespace {

const double kK2Critical = std::acos(-1.0 / 3.0) / std::numbers::sqrt2;

HistorySpec hist(std::initializer_list<double> x, std::initializer_list<double> v) {
  HistorySpec h;
  h.x0 = Eigen::Map<const Eigen::VectorXd>(x.begin(), static_cast<Eigen::Index>(x.size()));
  h.v0 = Eigen::Map<const Eigen::VectorXd>(v.begin(), static_cast<Eigen::Index>(v.size()));
  return h;
}

}  // namespace

TEST_CASE("consensus at rest stays put") {
  const SystemMatrices sys = assemble(Graph::cycle(5), 1.0);
  const HistorySpec h = hist({0.7, 0.7, 0.7, 0.7, 0.7}, {0, 0, 0, 0, 0});
  const Trajectory tr = integrate(sys, Delay(0.3), h, 6.0, 0.3 / 50);
  CHECK(tr.controls.isZero(0.0));
  CHECK(tr.nu == 0.0);
  for (Eigen::Index k = 0; k < tr.states.rows(); ++k) CHECK(tr.states.row(k).head(5).isConstant(0.7, 0.0));
  for (double d : disagreement(tr)) CHECK(d == 0.0);
}

TEST_CASE("drifting consensus picks up a delay lag") {
  // x = (c + w t) 1 is not a solution: neighbours are seen w tau behind
  const SystemMatrices sys = assemble(Graph::path(2), 1.0);
  const HistorySpec h = hist({0.0, 0.0}, {1.0, 1.0});
  const Trajectory tr = integrate(sys, Delay(0.5), h, 2.0, 0.5 / 50);
  const Eigen::Index k = tr.states.rows() - 1;
  CHECK(tr.controls.row(k).cwiseAbs().maxCoeff() > 1e-3);
  // but the two agents stay symmetric
  CHECK(std::abs(tr.states(k, 0) - tr.states(k, 1)) < 1e-12);
}

TEST_CASE("K2 control at t = 0 with x = (1, 0)") {
  const SystemMatrices sys = assemble(Graph::path(2), 1.0);
  const HistorySpec h = hist({1.0, 0.0}, {0.0, 0.0});
  const Trajectory tr = integrate(sys, Delay(0.5), h, 1.0, 0.5 / 50);
  CHECK(tr.controls(0, 0) == -1.0);
  CHECK(tr.controls(0, 1) == 1.0);
}

TEST_CASE("state derivative matches (v, u)") {
  const Graph g = Graph::random(6, 0.5, 42);
  const double gamma = 1.0;
  const SystemMatrices sys = assemble(g, gamma);
  const HistorySpec h = hist({0.1, -0.4, 0.9, 0.3, -0.2, 0.5}, {0.2, 0.0, -0.1, 0.0, 0.3, -0.3});
  const Delay tau(0.4);
  const Trajectory tr = integrate(sys, tau, h, 3.0, 0.4 / 50);
  const Eigen::MatrixXd u = control_inputs(g, gamma, tr, h, tau);
  CHECK((u - tr.controls).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((tr.derivatives.leftCols(6) - tr.states.rightCols(6)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("energy index by trapezoid") {
  Trajectory tr;
  tr.h = 0.25;
  tr.t = {0.0, 0.25, 0.5, 0.75, 1.0};
  tr.states = Eigen::MatrixXd::Zero(5, 4);
  tr.controls = Eigen::MatrixXd::Zero(5, 2);
  tr.controls.col(1).setConstant(3.0);
  const Energy e = energy(tr);
  CHECK(e.nu == doctest::Approx(9.0));
  for (double r : e.rho) CHECK(r == 9.0);

  tr.controls.setZero();
  CHECK(energy(tr).nu == 0.0);
}

TEST_CASE("disagreement metric") {
  Trajectory tr;
  tr.states = Eigen::MatrixXd(1, 4);
  tr.states << 1.0, -1.0, 0.0, 0.0;
  CHECK(disagreement(tr)[0] == 2.0);
  tr.states << 1.0, -1.0, 0.5, -0.25;
  CHECK(disagreement(tr)[0] == 2.75);
}

TEST_CASE("fourth-order convergence on a smooth stable run") {
  const SystemMatrices sys = assemble(Graph::cycle(5), 1.0);
  const HistorySpec h = hist({0.0, 0.2, 0.4, 0.6, 0.8}, {0, 0, 0, 0, 0});
  const Delay tau(0.5);
  auto end = [&](double step) {
    const Trajectory tr = integrate(sys, tau, h, 3.0, step);
    return Eigen::VectorXd(tr.states.bottomRows(1).transpose());
  };
  const Eigen::VectorXd ref = end(0.5 / 160);
  const double e1 = (end(0.5 / 20) - ref).norm();
  const double e2 = (end(0.5 / 40) - ref).norm();
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("K2 decays below and grows above the margin") {
  const SystemMatrices sys = assemble(Graph::path(2), 1.0);
  const HistorySpec h = hist({1.0, -1.0}, {0.0, 0.0});
  {
    const double t = 0.5 * kK2Critical;
    const Trajectory tr = integrate(sys, Delay(t), h, 60.0, t / 50);
    const auto d = disagreement(tr);
    CHECK(d.back() < 1e-3 * d.front());
    CHECK_FALSE(tr.divergent);
  }
  {
    const double t = 1.2 * kK2Critical;
    const Trajectory tr = integrate(sys, Delay(t), h, 60.0, t / 50);
    const auto d = disagreement(tr);
    CHECK(d.back() > d.front());
  }
}

TEST_CASE("divergence truncates the trajectory") {
  const SystemMatrices sys = assemble(Graph::path(2), 1.0);
  const HistorySpec h = hist({1.0, -1.0}, {0.0, 0.0});
  const Trajectory tr = integrate(sys, Delay(3.0), h, 2000.0, 3.0 / 20);
  CHECK(tr.divergent);
  CHECK(tr.t.back() < 2000.0);
  CHECK(tr.states.allFinite());
  CHECK(tr.rho.size() == tr.t.size());
}

TEST_CASE("step size and input validation") {
  const SystemMatrices sys = assemble(Graph::path(2), 1.0);
  const HistorySpec h = hist({1.0, -1.0}, {0.0, 0.0});
  CHECK_THROWS_WITH_AS(integrate(sys, Delay(0.5), h, 1.0, 0.03), doctest::Contains("StepTooLarge"), Error);
  CHECK_NOTHROW(integrate(sys, Delay(0.5), h, 1.0, 0.025));
  CHECK_THROWS_AS(integrate(sys, Delay(0.5), h, -1.0, 0.01), Error);
  CHECK_THROWS_AS(integrate(sys, Delay(0.5), hist({1.0}, {0.0}), 1.0, 0.01), Error);
  CHECK_THROWS_AS(integrate(sys, Delay(0.5), hist({NAN, 0.0}, {0.0, 0.0}), 1.0, 0.01), Error);
}

TEST_CASE("trajectory CSV layout") {
  const SystemMatrices sys = assemble(Graph::path(2), 1.0);
  const Trajectory tr = integrate(sys, Delay(0.5), hist({1.0, -1.0}, {0.0, 0.0}), 0.1, 0.025);
  std::ostringstream os;
  write_csv(os, tr);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,x_1,x_2,v_1,v_2,u_1,u_2,rho");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 5);
}
