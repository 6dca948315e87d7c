// SPDX-License-Identifier: Apache-2.0
#include "delaytk/stability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "delaytk/error.hpp"
#include "delaytk/parallel.hpp"

namespace delaytk {

namespace {

Eigen::VectorXd real_sorted_eigenvalues(const Eigen::MatrixXd& m, const char* what, bool strict, double& max_imag) {
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues();
  const double tol = 1e-7 * (1.0 + m.norm());
  Eigen::VectorXd out(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (strict && std::abs(ev(i).imag()) > tol)
      throw Error(ErrorCode::NonRealSpectrum, std::string(what) + " has a complex eigenvalue");
    max_imag = std::max(max_imag, std::abs(ev(i).imag()));
    out(i) = ev(i).real();
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

// -1 when no entry is zero to tolerance
Eigen::Index zero_entry(const Eigen::VectorXd& v) {
  Eigen::Index idx = 0;
  const double m = v.cwiseAbs().minCoeff(&idx);
  return m <= 1e-6 * (1.0 + v.cwiseAbs().maxCoeff()) ? idx : -1;
}

Eigen::VectorXd sorted_real_parts(const Eigen::VectorXcd& v) {
  Eigen::VectorXd out = v.real();
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

}  // namespace

double EtaMu::mu_excluding_structural() const {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    if (i != structural) best = std::max(best, mu(i));
  return best;
}

EtaMu eta_mu(const LambertSolution& sol, const SystemMatrices& sys, Delay tau, bool strict) {
  (void)tau;
  const auto n = sol.S.rows() / 2;
  const Eigen::MatrixXd S21 = sol.S.bottomLeftCorner(n, n);
  const Eigen::MatrixXd S22 = sol.S.bottomRightCorner(n, n);
  EtaMu out;
  out.eta = real_sorted_eigenvalues(S22, "W22/tau - gD", strict, out.max_imag);
  out.mu = real_sorted_eigenvalues(S21, "-W_bar/tau - D", strict, out.max_imag);

  // a generic combination has simple eigenvalues whenever the two commute
  constexpr double mix = 0.6180339887498949;
  Eigen::EigenSolver<Eigen::MatrixXd> es(S22 + mix * S21, true);
  const Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(V);
  out.eta_paired = lu.solve(S22.cast<cplx>() * V).diagonal().real();
  out.mu_paired = lu.solve(S21.cast<cplx>() * V).diagonal().real();

  if (sys.is_consensus()) out.structural = zero_entry(out.mu);
  return out;
}

Eigen::VectorXcd reconstruct_roots(const Eigen::VectorXd& eta, const Eigen::VectorXd& mu) {
  if (eta.size() != mu.size()) throw Error(ErrorCode::InvalidArgument, "eta and mu differ in length");
  Eigen::VectorXcd s(2 * eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const cplx root = std::sqrt(cplx(eta(i) * eta(i) + 4.0 * mu(i), 0.0));
    s(2 * i) = 0.5 * (eta(i) + root);
    s(2 * i + 1) = 0.5 * (eta(i) - root);
  }
  return s;
}

double multiset_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  struct Pair {
    double d;
    Eigen::Index i, j;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(a.size() * b.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) pairs.push_back({std::abs(a(i) - b(j)), i, j});
  std::ranges::sort(pairs, {}, &Pair::d);
  std::vector<bool> ua(static_cast<std::size_t>(a.size())), ub(static_cast<std::size_t>(b.size()));
  double worst = 0.0;
  for (const auto& p : pairs) {
    if (ua[static_cast<std::size_t>(p.i)] || ub[static_cast<std::size_t>(p.j)]) continue;
    ua[static_cast<std::size_t>(p.i)] = ub[static_cast<std::size_t>(p.j)] = true;
    worst = std::max(worst, p.d);
  }
  return worst;
}

Eigen::VectorXcd reconstruct_checked(const EtaMu& em, const Eigen::MatrixXd& S, double tol) {
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(S, false).eigenvalues();
  Eigen::VectorXcd best = reconstruct_roots(em.eta_paired, em.mu_paired);
  double best_d = multiset_distance(best, ev);
  if (best_d <= tol) return best;

  const auto n = em.eta.size();
  if (n <= 8) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Eigen::VectorXd mu(n);
    do {
      for (Eigen::Index i = 0; i < n; ++i) mu(i) = em.mu(perm[static_cast<std::size_t>(i)]);
      const Eigen::VectorXcd r = reconstruct_roots(em.eta, mu);
      const double d = multiset_distance(r, ev);
      if (d < best_d) best_d = d, best = r;
    } while (best_d > tol && std::next_permutation(perm.begin(), perm.end()));
    if (best_d <= tol) return best;
  }
  throw Error(ErrorCode::PairingMismatch,
              "no eta/mu pairing reproduces eig(S); closest distance " + std::to_string(best_d));
}

// Weyl lower bounds with degrees d sorted descending:
//   eta_1 >= w_i / tau - g d_i            (w descending)
//   mu_1  >= -w~_i / tau - d_{n+1-i}      (w~ descending)
// mu_1 is the agreement zero, so the second part is non-strict.
bool necessary_condition(const LambertSolution& sol, const SystemMatrices& sys, Delay tau) {
  if (!sys.is_consensus()) throw Error(ErrorCode::InvalidArgument, "necessary condition needs a consensus system");
  const double t = tau.value();
  const Eigen::VectorXd w = sorted_real_parts(sol.w);
  const Eigen::VectorXd wt = sorted_real_parts(sol.w_tilde);
  Eigen::VectorXd d = sys.degree;
  std::sort(d.begin(), d.end(), std::greater<>());
  const auto n = d.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w(i) / t < sys.gamma * d(i))) return false;
    const double dj = d(n - 1 - i);
    if (!(-wt(i) / t <= dj + 1e-7 * (1.0 + dj))) return false;
  }
  return true;
}

bool necessary_condition(const LambertSolution& sol, const Graph& g, double gamma, Delay tau) {
  return necessary_condition(sol, assemble(g, gamma), tau);
}

StabilityVerdict verdict(const LambertSolution& sol, const SystemMatrices& sys, Delay tau, bool strict) {
  const EtaMu em = eta_mu(sol, sys, tau, strict);
  StabilityVerdict v;
  v.eta = em.eta;
  v.mu = em.mu;
  v.eta1 = em.eta(0);
  v.mu1 = em.mu_excluding_structural();
  v.ambiguous = sol.ambiguous;
  v.stable = v.eta1 < 0.0 && v.mu1 < 0.0;
  if (v.ambiguous) v.stable = rightmost_abscissa(sys, tau) < 0.0;
  try {
    v.s_roots = reconstruct_checked(em, sol.S);
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(sol.S, false).eigenvalues();
    v.reconstruction_error = multiset_distance(v.s_roots, ev);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PairingMismatch) throw;
    v.s_roots = reconstruct_roots(em.eta_paired, em.mu_paired);
    v.reconstruction_error = std::numeric_limits<double>::infinity();
  }
  v.max_imag = em.max_imag;
  v.necessary = sys.is_consensus() ? necessary_condition(sol, sys, tau) : true;
  return v;
}

std::size_t dominant_candidate(const std::vector<LambertSolution>& candidates, const SystemMatrices& sys,
                               Delay tau) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate solutions");
  std::size_t best = 0;
  double best_eta = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i > 0 && !candidates[i].invariants.fixed_point_ok()) continue;
    const double e = eta_mu(candidates[i], sys, tau, false).eta(0);
    if (e > best_eta) best_eta = e, best = i;
  }
  return best;
}

DelayMarginResult sweep_delay(const SystemMatrices& sys, double tau_start, double delta_tau, double tau_max,
                              const SweepOptions& options) {
  if (!(delta_tau > 0.0) || !std::isfinite(delta_tau))
    throw Error(ErrorCode::InvalidArgument, "delta_tau must be positive");
  if (!(tau_max >= tau_start)) throw Error(ErrorCode::InvalidArgument, "tau_max must not be below tau_start");
  (void)Delay(tau_start);
  const auto policy = worker_count() > 1 ? std::launch::async : std::launch::deferred;

  DelayMarginResult out;
  out.delta_tau = delta_tau;
  out.method = MarginMethod::lambert_sweep;
  std::optional<SolveResult> prev;

  for (long k = 0;; ++k) {
    const double t = tau_start + static_cast<double>(k) * delta_tau;
    if (t > tau_max * (1.0 + 1e-12)) {
      out.reached_tau_max = true;
      break;
    }
    const Delay tau(t);
    auto abscissa_future = std::async(policy, [&sys, tau] { return rightmost_abscissa(sys, tau); });

    SweepPoint pt;
    pt.tau = t;
    std::optional<SolveResult> res;
    std::optional<LambertSolution> sol;
    std::optional<StabilityVerdict> v;
    std::optional<double> abscissa;
    if (prev) {
      try {
        SolveResult r = solve(sys, tau, prev->Q, prev->policy);
        LambertSolution s = build_solution(sys, tau, r.Q, r.policy);
        abscissa = abscissa_future.get();
        if (tracks_rightmost(spectral_check(sys, tau, s.S), *abscissa)) {
          v = verdict(s, sys, tau);
          res = std::move(r);
          sol = std::move(s);
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) throw;
      }
    }
    if (!abscissa) abscissa = abscissa_future.get();
    pt.abscissa = *abscissa;
    pt.oracle_stable = pt.abscissa < 0.0;
    if (k == 0 && !pt.oracle_stable)
      throw Error(ErrorCode::UnstableAtStart, "rightmost root " + std::to_string(pt.abscissa) + " at tau_start");

    if (!v) {
      pt.rebootstrapped = true;
      try {
        const ComplexSpectrum spectrum = leading_roots(sys, tau, static_cast<std::size_t>(sys.dim()));
        res = bootstrap_solve(sys, tau, spectrum, options.seed).result;
      } catch (const Error& e) {
        throw Error(e.code(), e.message() + " at tau = " + std::to_string(t));
      }
      sol = build_solution(sys, tau, res->Q, res->policy);
      v = verdict(*sol, sys, tau, false);
    }

    pt.eta1 = v->eta1;
    pt.mu1 = v->mu1;
    pt.stable = v->stable;
    pt.ambiguous = v->ambiguous;
    pt.necessary = v->necessary;
    pt.max_imag = v->max_imag;
    pt.invariants = sol->invariants;
    pt.reconstruction_error = v->reconstruction_error;
    pt.membership_ratio = spectral_check(sys, tau, sol->S).max_residual_ratio;
    out.verdict_trace.push_back(pt);
    prev = std::move(res);

    if (!pt.stable) {
      if (k == 0) throw Error(ErrorCode::UnstableAtStart, "eigenvalue test fails at tau_start");
      break;
    }
    out.tau_star = t;
  }
  return out;
}

}  // namespace delaytk
