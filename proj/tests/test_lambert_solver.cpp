#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "delaytk/error.hpp"
#include "delaytk/lambert_solver.hpp"

using namespace delaytk;

namespace {

SystemMatrices k2() { return assemble(Graph::path(2), 1.0); }

LambertSolution bootstrap_solution(const SystemMatrices& sys, Delay tau) {
  const ComplexSpectrum spec = leading_roots(sys, tau, static_cast<std::size_t>(sys.dim()));
  const SolveResult r = bootstrap_solve(sys, tau, spec).result;
  return build_solution(sys, tau, r.Q, r.policy);
}

}  // namespace

TEST_CASE("branch policy follows the reference value") {
  Eigen::VectorXcd m(2);
  m << -0.3, 0.5;
  CHECK(BranchPolicy::principal().choose(m) == std::vector<int>{0, 0});

  Eigen::VectorXcd ref(2);
  ref << lambert_w(0, 0.5) + 0.01, lambert_w(-1, -0.3) - 0.02;
  CHECK(BranchPolicy::tracking(ref).choose(m) == std::vector<int>{-1, 0});

  ref << lambert_w(0, -0.3), lambert_w(1, 0.5);
  CHECK(BranchPolicy::tracking(ref).choose(m) == std::vector<int>{0, 1});
}

TEST_CASE("K2 at tau = 0.05 converges from the mixed guess") {
  const SystemMatrices sys = k2();
  const Delay tau(0.05);
  const ComplexSpectrum spec = leading_roots(sys, tau, 4);
  const InitialGuess g = initial_guess(sys, tau, spec, GuessKind::spectral_mixing, 42);
  CHECK(g.S0.topRows(2).isApprox(sys.T.topRows(2)));

  const SolveResult r = solve(sys, tau, g.Q, BranchPolicy::tracking(g.reference));
  CHECK(r.residual < 1e-9);
  CHECK_FALSE(r.noise_floor);

  const LambertSolution sol = build_solution(sys, tau, r.Q, r.policy);
  CHECK((sol.M - tau.value() * sys.Td * sol.Q).norm() == 0.0);
  CHECK(sol.invariants.lemma_structure_ok());
  CHECK(sol.invariants.fixed_point_ok());
  CHECK(sol.invariants.z3 < 1e-9);
  CHECK(sol.invariants.zero_eigenvalues_m == 2);
  CHECK(sol.invariants.null_dim_w == 2);
  CHECK(sol.W_bar.isApprox(-sol.W21));

  const SpectralCheck sc = spectral_check(sys, tau, sol.S);
  CHECK(sc.members_ok());
  CHECK(sc.rightmost == doctest::Approx(rightmost_abscissa(sys, tau)).epsilon(1e-8));
}

TEST_CASE("guess built from the solvent's own eigenvectors is a fixed point") {
  const SystemMatrices sys = assemble(Graph::cycle(5), 1.0);
  const Delay tau(0.3);
  const ComplexSpectrum spec = leading_roots(sys, tau, 10);
  const InitialGuess g = initial_guess(sys, tau, spec, GuessKind::eigenvector_exact);
  CHECK(fixed_point_residual(sys, tau, g.S0) < 1e-12);
  const SolveResult r = solve(sys, tau, g.Q, BranchPolicy::tracking(g.reference));
  CHECK(r.iterations <= 3);

  // an exact fixed point is returned untouched
  const SolveResult again = solve(sys, tau, r.Q, r.policy);
  CHECK(again.iterations == 0);
  CHECK(again.Q == r.Q);
}

TEST_CASE("modal guess on a regular graph satisfies the block invariants") {
  const SystemMatrices sys = assemble(Graph::cycle(5), 1.0);
  for (double t : {0.05, 0.312, 0.8, 1.5}) {
    CAPTURE(t);
    const Delay tau(t);
    const ComplexSpectrum spec = leading_roots(sys, tau, 10);
    const InitialGuess g = initial_guess(sys, tau, spec, GuessKind::modal);
    const SolveResult r = solve(sys, tau, g.Q, BranchPolicy::tracking(g.reference));
    CHECK(r.iterations == 0);
    const LambertSolution sol = build_solution(sys, tau, r.Q, r.policy);
    const InvariantReport& inv = sol.invariants;
    CHECK(inv.upper_block < 1e-9);
    CHECK(inv.symmetry_w21 < 1e-7);
    CHECK(inv.symmetry_w22 < 1e-7);
    CHECK(inv.commutator < 1e-7);
    CHECK(inv.commutator_shifted < 1e-7);
    CHECK(inv.z3 < 1e-9);
    CHECK(inv.zero_eigenvalues_m >= 5);
    CHECK(inv.null_dim_w == 5);
    CHECK(inv.fixed_point_ok());
    CHECK(sol.ordering == ZOrdering::z2_z1inv);
    CHECK_FALSE(sol.ambiguous);
    CHECK(sol.residual_z1_z2inv > 1e3 * sol.residual_z2_z1inv);
    CHECK(tracks_rightmost(spectral_check(sys, tau, sol.S), rightmost_abscissa(sys, tau)));
  }
}

TEST_CASE("agreement-mode pair becomes rightmost on the triangle") {
  // past tau ~ 1.67 the rightmost nonzero root of K3 belongs to the
  // all-ones mode, which the plain modal guess fills with 0 and a real root
  const SystemMatrices sys = assemble(Graph::cycle(3), 1.0);
  const Delay tau(1.671);
  const ComplexSpectrum spec = leading_roots(sys, tau, 6);
  const double abscissa = rightmost_abscissa(sys, tau);
  const InitialGuess plain = initial_guess(sys, tau, spec, GuessKind::modal);
  const SolveResult rp = solve(sys, tau, plain.Q, BranchPolicy::tracking(plain.reference));
  CHECK_FALSE(tracks_rightmost(spectral_check(sys, tau, build_solution(sys, tau, rp.Q, rp.policy).S), abscissa));

  const Bootstrap b = bootstrap_solve(sys, tau, spec);
  CHECK(b.kind == GuessKind::modal_agreement_pair);
  const LambertSolution sol = build_solution(sys, tau, b.result.Q, b.result.policy);
  CHECK(sol.invariants.lemma_structure_ok());
  CHECK(sol.invariants.fixed_point_ok());
  const SpectralCheck sc = spectral_check(sys, tau, sol.S);
  CHECK(sc.members_ok());
  CHECK(std::abs(sc.rightmost - abscissa) < 1e-8);
}

TEST_CASE("modal guess is rejected off the regular class") {
  const SystemMatrices sys = assemble(Graph::path(4), 1.0);
  const Delay tau(0.3);
  CHECK_THROWS_AS(initial_guess(sys, tau, leading_roots(sys, tau, 8), GuessKind::modal), Error);
}

TEST_CASE("non-regular graph: fixed point holds but the blocks are not symmetric") {
  const SystemMatrices sys = assemble(Graph::path(4), 1.0);
  const Delay tau(0.8);
  const LambertSolution sol = bootstrap_solution(sys, tau);
  CHECK(sol.invariants.fixed_point_ok());
  CHECK(sol.invariants.upper_block < 1e-9);
  CHECK(sol.invariants.z3 < 1e-9);
  CHECK(sol.invariants.symmetry_w22 > 1e-3);
  CHECK(spectral_check(sys, tau, sol.S).members_ok());
}

TEST_CASE("bootstrap reproduces the rightmost root across topologies") {
  for (const Graph& g : {Graph::path(2), Graph::cycle(5), Graph::path(4), Graph::random(6, 0.5, 42)}) {
    const SystemMatrices sys = assemble(g, 1.0);
    for (double t : {0.01, 0.2, 0.9}) {
      CAPTURE(g.size());
      CAPTURE(t);
      const Delay tau(t);
      const LambertSolution sol = bootstrap_solution(sys, tau);
      CHECK(sol.residual_fixed_point < 1e-7);
      CHECK(tracks_rightmost(spectral_check(sys, tau, sol.S), rightmost_abscissa(sys, tau)));
    }
  }
}

TEST_CASE("too few roots") {
  const SystemMatrices sys = k2();
  const Delay tau(0.05);
  ComplexSpectrum spec = leading_roots(sys, tau, 4);
  spec.roots.resize(1);
  CHECK_THROWS_WITH_AS(initial_guess_Q(sys, tau, spec), doctest::Contains("InsufficientRoots"), Error);
}

TEST_CASE("singular M22 is rejected") {
  const SystemMatrices sys = k2();
  Eigen::MatrixXd X(2, 4);
  X << 0.3, -0.1, 1.0, 1.0,  //
      0.2, 0.4, 1.0, 1.0;
  const Eigen::MatrixXd B = sys.Td.bottomRows(2);
  const Eigen::MatrixXd Q = B.completeOrthogonalDecomposition().solve(X);
  try {
    (void)build_solution(sys, Delay(0.5), Q);
    FAIL("expected SingularM22");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularM22);
  }
}

TEST_CASE("zero guess does not silently produce a wrong solvent") {
  const SystemMatrices sys = k2();
  const Delay tau(0.5);
  try {
    const SolveResult r = solve(sys, tau, Eigen::MatrixXd::Zero(4, 4), BranchPolicy::principal());
    const LambertSolution sol = build_solution(sys, tau, r.Q, r.policy);
    CHECK(sol.invariants.fixed_point_ok());
    // whatever it converged to is flagged if it misses the rightmost root
    const SpectralCheck sc = spectral_check(sys, tau, sol.S);
    CHECK(sc.members_ok());
    if (std::abs(sc.rightmost - rightmost_abscissa(sys, tau)) > 1e-6)
      CHECK_FALSE(tracks_rightmost(sc, rightmost_abscissa(sys, tau)));
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::NonConvergence || e.code() == ErrorCode::NotDiagonalizable));
  }
}

TEST_CASE("branch sweep yields a second candidate only for m in [-1/e, 0)") {
  for (const Graph& g : {Graph::path(2), Graph::cycle(5)}) {
    const SystemMatrices sys = assemble(g, 1.0);
    for (double t : {0.05, 0.5, 1.2}) {
      CAPTURE(t);
      const Delay tau(t);
      const ComplexSpectrum spec = leading_roots(sys, tau, static_cast<std::size_t>(sys.dim()));
      const std::vector<LambertSolution> cands = branch_sweep(sys, tau, spec);
      REQUIRE(!cands.empty());
      bool real_fold = false;
      for (Eigen::Index i = 0; i < cands[0].m.size(); ++i) {
        const cplx m = cands[0].m(i);
        if (std::abs(m.imag()) <= 1e-12 * (1.0 + std::abs(m)) && m.real() < 0.0 && m.real() >= -std::exp(-1.0))
          real_fold = true;
      }
      CHECK(cands.size() == (real_fold ? 2u : 1u));
      CHECK(cands[0].invariants.fixed_point_ok());
      CHECK(spectral_check(sys, tau, cands[0].S).members_ok());
      if (cands.size() == 2) {
        CHECK(cands[0].branches != cands[1].branches);
        if (!cands[1].invariants.fixed_point_ok()) CHECK(cands[0].Q == cands[1].Q);
      }
    }
  }
}

TEST_CASE("solver needs the block form") {
  const SystemMatrices s = SystemMatrices::generic(Eigen::MatrixXd::Zero(1, 1), -Eigen::MatrixXd::Ones(1, 1));
  CHECK_THROWS_AS(solve_Q(s, Delay(1.0), Eigen::MatrixXd::Zero(1, 1)), Error);
}
