// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "delaytk/lambert_w.hpp"
#include "delaytk/spectrum_oracle.hpp"
#include "delaytk/system.hpp"

namespace delaytk {

// Branch choice for the eigenvalues m_i of M22.
//  principal: k = 0 everywhere.
//  tracking:  per eigenvalue the k in -3..3 whose W_k(m_i) is closest to a
//             reference value, matched greedily; used for continuation in
//             tau, where real w crossing -1 moves m_i through the fold at -1/e
//             and onto W_{-1}.
class BranchPolicy {
 public:
  static BranchPolicy principal() { return BranchPolicy({}, false); }
  static BranchPolicy tracking(Eigen::VectorXcd reference) { return BranchPolicy(std::move(reference), true); }

  bool is_tracking() const noexcept { return tracking_; }
  const Eigen::VectorXcd& reference() const noexcept { return reference_; }
  std::vector<int> choose(const Eigen::VectorXcd& m) const;

 private:
  BranchPolicy(Eigen::VectorXcd reference, bool tracking) : reference_(std::move(reference)), tracking_(tracking) {}
  Eigen::VectorXcd reference_;
  bool tracking_;
};

// modal: regular consensus graphs only; each eigenspace of A receives the
// two rightmost roots of its own scalar characteristic factor.
// modal_agreement_pair: same, except the all-ones eigenspace receives its
// rightmost complex pair, for delays where that pair is the rightmost root.
enum class GuessKind { spectral_mixing, eigenvector_exact, modal, modal_agreement_pair };

bool is_regular(const SystemMatrices& sys);

struct InitialGuess {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd S0;
  Eigen::VectorXcd roots;      // the 2n selected characteristic roots
  Eigen::VectorXcd reference;  // eig of the lower-right block of tau (S0 - T)
  GuessKind kind = GuessKind::spectral_mixing;
};

// Picks the 2n rightmost roots (with multiplicity, conjugate-closed) whose
// characteristic null vectors are linearly independent, builds a real S0
// with that spectrum and returns the minimum-norm Q0 with
// tau Td Q0 = tau (S0 - T) e^{(S0 - T) tau}.
InitialGuess initial_guess(const SystemMatrices& sys, Delay tau, const ComplexSpectrum& spectrum,
                           GuessKind kind = GuessKind::spectral_mixing, std::uint64_t seed = 42);
Eigen::MatrixXd initial_guess_Q(const SystemMatrices& sys, Delay tau, const ComplexSpectrum& spectrum,
                                std::uint64_t seed = 42);

struct SolveOptions {
  int max_iterations = 200;
  double fd_step = 1e-7;
};

struct SolveResult {
  Eigen::MatrixXd Q;
  BranchPolicy policy = BranchPolicy::principal();  // reference updated to the solution
  int iterations = 0;
  double residual = 0.0;  // ||F(Q)||_F
  // line search stalled above the target with ||F|| < 1e-7 (1 + ||Td||);
  // happens where M22 is close to defective and F cannot be evaluated finer
  bool noise_floor = false;
};

// Newton on F(Q) = W(tau Td Q) e^{W(tau Td Q) + tau T} - tau Td with a
// finite-difference Jacobian and backtracking line search. Only X = [A gA] Q
// enters F, so Newton runs on X and Q is returned as pinv([A gA]) X.
SolveResult solve(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& Q0, BranchPolicy policy,
                  const SolveOptions& options = {});
Eigen::MatrixXd solve_Q(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& Q0);

double fixed_point_residual(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& S);

struct InvariantReport {
  double upper_block = 0.0;    // max |entry| in rows 1..n of W(M)
  double symmetry_w21 = 0.0;   // ||X - X^T|| / (1 + ||X||)
  double symmetry_w22 = 0.0;
  double commutator = 0.0;     // ||[W21, W22]|| / (1 + ||W21|| ||W22||)
  double commutator_shifted = 0.0;  // same for W21 - tau D, W22 - tau g D
  double z3 = 0.0;             // ||Z3|| with unit eigenvector columns
  int zero_eigenvalues_m = 0;  // eigenvalues of M with |m| <= tol
  int null_dim_w = 0;          // dim ker W(M)
  double fixed_point = 0.0;    // ||S - T - Td e^{-S tau}|| / (1 + ||T|| + ||Td||)

  bool lemma_structure_ok() const;
  bool fixed_point_ok() const { return fixed_point < 1e-7; }
};

enum class ZOrdering { z2_z1inv, z1_z2inv };

// Z = [[Z1, Z3], [Z2, Z4]]: the first n columns span ker M, the last n are
// eigenvectors of the nonzero m_i sorted by descending Re W(m_i), then Im.
struct LambertSolution {
  Eigen::MatrixXd Q, M;
  Eigen::VectorXcd eigvals_M;
  Eigen::VectorXcd m;  // eigenvalues of M22, in Z4 column order
  std::vector<int> branches;
  Eigen::MatrixXcd Z1, Z2, Z3, Z4;
  Eigen::MatrixXd W_of_M;
  Eigen::MatrixXd W22, W21;  // lower blocks of W(M)
  Eigen::MatrixXd W_bar;     // -W21
  Eigen::VectorXcd w, w_tilde;  // eig(W22), eig(W_bar)
  Eigen::MatrixXd S;
  double residual_fixed_point = 0.0;
  ZOrdering ordering = ZOrdering::z2_z1inv;
  double residual_z2_z1inv = 0.0, residual_z1_z2inv = 0.0;
  bool ambiguous = false;
  InvariantReport invariants;
};

LambertSolution build_solution(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& Q,
                               const BranchPolicy& policy = BranchPolicy::principal());

struct SpectralCheck {
  double max_residual_ratio = 0.0;  // max |det N(s)| / (1e-8 (1+|s|)^2n) over eig(S)
  double rightmost = 0.0;           // max Re over nonzero eig(S)
  bool members_ok() const { return max_residual_ratio < 1.0; }
};
SpectralCheck spectral_check(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& S);

// True when S reproduces the oracle's rightmost nonzero root.
bool tracks_rightmost(const SpectralCheck& check, double oracle_abscissa);

struct Bootstrap {
  SolveResult result;
  GuessKind kind = GuessKind::spectral_mixing;
  int attempts = 0;
};

// Tries the modal (regular graphs), mixing and eigenvector-exact guesses in
// turn, accepting the first converged solvent that tracks the rightmost root
// of `spectrum`.
Bootstrap bootstrap_solve(const SystemMatrices& sys, Delay tau, const ComplexSpectrum& spectrum,
                          std::uint64_t seed = 42);

// Solutions for branch 0 and, where some m_i is real in [-1/e, 0), for the
// toggled 0 <-> -1 choice on those eigenvalues. The toggled candidate is
// re-solved when Newton converges on that branch; otherwise it is W(M) of the
// first solution on the toggled branch and generally not a fixed point.
std::vector<LambertSolution> branch_sweep(const SystemMatrices& sys, Delay tau, const ComplexSpectrum& spectrum,
                                          std::uint64_t seed = 42);
// Same, starting from an already converged branch-0 solve.
std::vector<LambertSolution> branch_sweep(const SystemMatrices& sys, Delay tau, const SolveResult& base);

}  // namespace delaytk
