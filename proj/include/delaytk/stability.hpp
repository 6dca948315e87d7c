// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "delaytk/graph.hpp"
#include "delaytk/lambert_solver.hpp"

namespace delaytk {

// eta: eigenvalues of W22/tau - g D, mu: eigenvalues of -W_bar/tau - D, both
// sorted descending. eta_paired/mu_paired hold the values read off one
// common eigenbasis, index i of one belonging with index i of the other.
struct EtaMu {
  Eigen::VectorXd eta, mu;
  Eigen::VectorXd eta_paired, mu_paired;
  // index into mu (sorted) of the zero eigenvalue carried by the agreement
  // direction; -1 when the solvent holds a nonzero root pair there instead
  Eigen::Index structural = -1;
  double max_imag = 0.0;  // largest |Im| discarded from eta and mu
  double mu_excluding_structural() const;
};

// strict: throw NonRealSpectrum when an imaginary part exceeds 1e-7 (1 + ||.||);
// otherwise keep real parts and report max_imag.
EtaMu eta_mu(const LambertSolution& sol, const SystemMatrices& sys, Delay tau, bool strict = true);

// Roots of s^2 - eta_i s - mu_i for each i.
Eigen::VectorXcd reconstruct_roots(const Eigen::VectorXd& eta, const Eigen::VectorXd& mu);

// Largest distance in an optimal-greedy matching of two multisets.
double multiset_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b);

// Reconstructs from the common-basis pairing, falling back to a search over
// pairings for n <= 8. Throws PairingMismatch when none matches eig(S) within tol.
Eigen::VectorXcd reconstruct_checked(const EtaMu& em, const Eigen::MatrixXd& S, double tol = 1e-6);

bool necessary_condition(const LambertSolution& sol, const SystemMatrices& sys, Delay tau);
bool necessary_condition(const LambertSolution& sol, const Graph& g, double gamma, Delay tau);

struct StabilityVerdict {
  Eigen::VectorXd eta, mu;
  Eigen::VectorXcd s_roots;
  double eta1 = 0.0;
  double mu1 = 0.0;  // largest mu apart from the structural zero
  bool stable = false;
  bool ambiguous = false;
  bool necessary = false;
  double reconstruction_error = 0.0;  // multiset distance to eig(S); inf on PairingMismatch
  double max_imag = 0.0;
};

StabilityVerdict verdict(const LambertSolution& sol, const SystemMatrices& sys, Delay tau, bool strict = true);

// Among branch_sweep candidates that are fixed points, the one with the
// larger eta1. The first candidate is always eligible.
std::size_t dominant_candidate(const std::vector<LambertSolution>& candidates, const SystemMatrices& sys, Delay tau);

enum class MarginMethod { lambert_sweep, oracle_bisection };

struct SweepPoint {
  double tau = 0.0;
  double eta1 = 0.0, mu1 = 0.0;
  double abscissa = 0.0;  // oracle rightmost nonzero root
  bool stable = false;
  bool oracle_stable = false;
  bool ambiguous = false;
  bool necessary = false;
  bool rebootstrapped = false;
  double max_imag = 0.0;  // imaginary part discarded from eta/mu
  InvariantReport invariants;
  double reconstruction_error = 0.0;
  double membership_ratio = 0.0;  // spectral_check max residual ratio
};

struct DelayMarginResult {
  double tau_star = 0.0;
  double delta_tau = 0.0;
  MarginMethod method = MarginMethod::lambert_sweep;
  bool reached_tau_max = false;
  std::vector<SweepPoint> verdict_trace;
};

struct SweepOptions {
  std::uint64_t seed = 42;
};

DelayMarginResult sweep_delay(const SystemMatrices& sys, double tau_start, double delta_tau, double tau_max,
                              const SweepOptions& options = {});

}  // namespace delaytk
