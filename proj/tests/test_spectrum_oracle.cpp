#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "delaytk/error.hpp"
#include "delaytk/lambert_w.hpp"
#include "delaytk/spectrum_oracle.hpp"

using namespace delaytk;

namespace {

SystemMatrices scalar_benchmark() {
  return SystemMatrices::generic(Eigen::MatrixXd::Zero(1, 1), -Eigen::MatrixXd::Ones(1, 1));
}

SystemMatrices k2(double gamma = 1.0) {
  const std::vector<std::pair<int, int>> e = {{1, 2}};
  return assemble(Graph::from_edge_list(2, e), gamma);
}

// Exact crossing of the disagreement mode of K2 with gamma = 1:
// s^2 + (1 + s)(1 + e^{-s tau}) = 0 has s = i sqrt(2) at tau = arccos(-1/3) / sqrt(2).
const double kK2Critical = std::acos(-1.0 / 3.0) / std::numbers::sqrt2;

}  // namespace

TEST_CASE("scalar benchmark roots are the Lambert W branches of -tau") {
  const SystemMatrices s = scalar_benchmark();
  SearchRegion region{-4.0, 1.0, 40.0, 0.05};
  const ComplexSpectrum spec = find_roots(s, Delay(1.0), region);
  REQUIRE(!spec.roots.empty());
  CHECK(std::abs(spec.roots[0].s - cplx(-0.31813150520476413, 1.3372357014306895)) < 1e-10);
  // s = W_k(-1) for tau = 1; every branch inside the region must appear
  int expected = 0;
  for (int k = -10; k <= 10; ++k) {
    const cplx w = lambert_w(k, -1.0);
    if (w.imag() < 0.0 || w.real() < region.re_min || w.imag() > region.im_max) continue;
    ++expected;
    bool found = false;
    for (const auto& r : spec.roots) found = found || std::abs(r.s - w) < 1e-9;
    CHECK_MESSAGE(found, "missing root W_" << k << "(-1) = " << w);
  }
  CHECK(static_cast<int>(spec.roots.size()) == expected);
}

TEST_CASE("structural zero root is found and all roots satisfy the residual tolerance") {
  for (double tau : {0.05, 0.4, 1.2}) {
    const SystemMatrices s = k2();
    const ComplexSpectrum spec = find_roots(s, Delay(tau), bounding_region(s, Delay(tau), -3.0));
    bool zero = false;
    for (const auto& r : spec.roots) {
      zero = zero || is_structural_zero(r.s);
      CHECK(r.residual < 1e-8 * residual_scale(r.s, s));
      CHECK(std::abs(char_residual(std::conj(r.s), s, Delay(tau))) < 1e-8 * residual_scale(r.s, s));
    }
    CHECK(zero);
    for (std::size_t i = 1; i < spec.roots.size(); ++i) CHECK(spec.roots[i - 1].s.real() >= spec.roots[i].s.real());
  }
}

TEST_CASE("K2 at small delay is close to the undelayed spectrum") {
  const SystemMatrices s = k2();
  Eigen::MatrixXd comp = s.T + s.Td;
  const Eigen::VectorXcd undelayed = Eigen::EigenSolver<Eigen::MatrixXd>(comp).eigenvalues();
  const double tau = 0.01;
  const ComplexSpectrum spec = find_roots(s, Delay(tau), bounding_region(s, Delay(tau), -3.0));
  for (Eigen::Index i = 0; i < undelayed.size(); ++i) {
    cplx u = undelayed(i);
    if (u.imag() < 0.0) u = std::conj(u);
    double best = INFINITY;
    for (const auto& r : spec.roots) best = std::min(best, std::abs(r.s - u));
    CHECK(best < 10.0 * tau);
  }
}

TEST_CASE("rightmost abscissa") {
  CHECK(rightmost_abscissa(k2(), Delay(1e-4)) < 0.0);
  CHECK(std::abs(rightmost_abscissa(scalar_benchmark(), Delay(std::numbers::pi / 2))) < 1e-9);
  const double a = rightmost_abscissa(k2(), Delay(0.8));
  const double b = rightmost_abscissa(k2(), Delay(0.8001));
  CHECK(std::abs(a - b) < 1e-3);
  CHECK(rightmost_abscissa(k2(), Delay(kK2Critical - 0.01)) < 0.0);
  CHECK(rightmost_abscissa(k2(), Delay(kK2Critical + 0.01)) > 0.0);
}

TEST_CASE("bisection reproduces classical critical delays") {
  const double t1 = critical_delay_bisection(scalar_benchmark(), Delay(1.0), Delay(2.0), 1e-4);
  CHECK(std::abs(t1 - std::numbers::pi / 2) <= 1e-4);
  const double t2 = critical_delay_bisection(k2(), Delay(1.0), Delay(1.6), 1e-4);
  CHECK(std::abs(t2 - kK2Critical) <= 1e-4);
  try {
    critical_delay_bisection(scalar_benchmark(), Delay(1.8), Delay(2.0), 1e-4);
    FAIL("expected BracketInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BracketInvalid);
  }
}

TEST_CASE("first crossing scan") {
  const double t1 = first_critical_delay(scalar_benchmark(), Delay(0.1), Delay(4.0), 0.3, 1e-4);
  CHECK(std::abs(t1 - std::numbers::pi / 2) <= 1e-4);
  const double t2 = first_critical_delay(k2(), Delay(0.01), Delay(3.0), 0.25, 1e-4);
  CHECK(std::abs(t2 - kK2Critical) <= 1e-4);
  // crossing in the last partial step
  const double t3 = first_critical_delay(scalar_benchmark(), Delay(1.0), Delay(1.6), 0.5, 1e-4);
  CHECK(std::abs(t3 - std::numbers::pi / 2) <= 1e-4);
  for (auto [lo, hi] : {std::pair{1.0, 1.5}, std::pair{1.7, 2.5}}) {
    try {
      first_critical_delay(scalar_benchmark(), Delay(lo), Delay(hi), 0.2, 1e-4);
      FAIL("expected BracketInvalid");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BracketInvalid);
    }
  }
}

TEST_CASE("roots are stable under grid refinement") {
  for (const Graph& g : {Graph::cycle(5), Graph::path(4)}) {
    const SystemMatrices s = assemble(g, 1.0);
    const Delay tau(0.6);
    SearchRegion coarse = bounding_region(s, tau, -2.0);
    SearchRegion fine = coarse;
    fine.grid_step *= 0.5;
    const ComplexSpectrum a = find_roots(s, tau, coarse);
    const ComplexSpectrum b = find_roots(s, tau, fine);
    REQUIRE(a.roots.size() == b.roots.size());
    for (std::size_t i = 0; i < a.roots.size(); ++i) {
      CHECK(std::abs(a.roots[i].s - b.roots[i].s) < 1e-6);
      CHECK(a.roots[i].multiplicity == b.roots[i].multiplicity);
    }
  }
}

TEST_CASE("cycle graphs have semisimple double roots") {
  const SystemMatrices s = assemble(Graph::cycle(5), 1.0);
  const ComplexSpectrum spec = find_roots(s, Delay(0.5), bounding_region(s, Delay(0.5), -2.0));
  int doubles = 0;
  for (const auto& r : spec.roots) doubles += r.multiplicity == 2;
  CHECK(doubles > 0);
}

TEST_CASE("region validation") {
  CHECK_THROWS_AS(find_roots(k2(), Delay(1.0), SearchRegion{1.0, 0.0, 1.0, 0.05}), Error);
  CHECK_THROWS_AS(find_roots(k2(), Delay(1.0), SearchRegion{-1.0, 0.0, 1.0, 0.5}), Error);
  CHECK_THROWS_AS(find_roots(k2(), Delay(1.0), SearchRegion{-1.0, 0.0, -1.0, 0.05}), Error);
  CHECK(max_grid_step(Delay(10.0)) == doctest::Approx(std::numbers::pi / 100.0));
}

TEST_CASE("leading roots reach the requested count") {
  const SystemMatrices s = assemble(Graph::path(4), 1.0);
  const ComplexSpectrum spec = leading_roots(s, Delay(0.3), 8);
  CHECK(spec.total_count() >= 8);
}
