// SPDX-License-Identifier: Apache-2.0
#include "delaytk/lambert_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <Eigen/Dense>

#include "delaytk/error.hpp"
#include "delaytk/expm.hpp"

namespace delaytk {

namespace {

constexpr int kMinBranch = -3;
constexpr int kMaxBranch = 3;

Eigen::Index half_dim(const SystemMatrices& sys) {
  const auto dim = sys.dim();
  if (dim % 2 != 0 || dim < 2)
    throw Error(ErrorCode::InvalidArgument, "solver needs the 2n block form [[0, I], [-D, -gD]]");
  const auto n = dim / 2;
  if (!sys.Td.topRows(n).isZero(0.0))
    throw Error(ErrorCode::InvalidArgument, "solver needs Td with zero upper block rows");
  return n;
}

double fro(const Eigen::MatrixXd& m) { return m.norm(); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

struct Evaluation {
  bool valid = false;
  Eigen::MatrixXd F;  // lower n rows of W e^{W + tau T} - tau Td
  Eigen::VectorXcd w;
};

// Lower block rows of W(M) for M = [[0, 0], [M21, M22]].
struct LowerW {
  Eigen::MatrixXd W21, W22;
  Eigen::VectorXcd m, w;
  std::vector<int> branches;
};

LowerW lower_w(const Eigen::MatrixXd& M21, const Eigen::MatrixXd& M22, const BranchPolicy& policy) {
  const auto n = M22.rows();
  const EigenDecomposition eig = diagonalize(M22.cast<cplx>());
  LowerW out;
  out.m = eig.values;
  out.branches = policy.choose(eig.values);
  out.w.resize(n);
  Eigen::VectorXcd g(n);
  const double zero_tol = 1e-14 * (1.0 + M22.norm());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = out.branches[static_cast<std::size_t>(i)];
    const cplx m = eig.values(i);
    if (std::abs(m) <= zero_tol) {
      if (k != 0) throw Error(ErrorCode::SingularM22, "zero eigenvalue of M22 on a non-principal branch");
      out.w(i) = 0.0;
      g(i) = 1.0;
    } else {
      out.w(i) = lambert_w(k, m);
      g(i) = out.w(i) / m;
    }
  }
  auto apply = [&](const Eigen::VectorXcd& d) -> Eigen::MatrixXcd {
    const Eigen::MatrixXcd vd = eig.vectors * d.asDiagonal();
    return Eigen::PartialPivLU<Eigen::MatrixXcd>(eig.vectors.transpose()).solve(vd.transpose()).transpose();
  };
  const Eigen::MatrixXcd w22 = apply(out.w);
  const Eigen::MatrixXcd w21 = apply(g) * M21.cast<cplx>();
  const double scale = 1.0 + w22.cwiseAbs().maxCoeff() + w21.cwiseAbs().maxCoeff();
  if (w22.imag().cwiseAbs().maxCoeff() > 1e-8 * scale || w21.imag().cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw Error(ErrorCode::NonRealSpectrum, "branch choice gives a complex W(M)");
  out.W22 = w22.real();
  out.W21 = w21.real();
  return out;
}

Evaluation evaluate(const SystemMatrices& sys, double tau, Eigen::Index n, const Eigen::MatrixXd& X,
                    const BranchPolicy& policy) {
  Evaluation ev;
  LowerW lw;
  try {
    lw = lower_w(tau * X.leftCols(n), tau * X.rightCols(n), policy);
  } catch (const Error&) {
    return ev;
  }
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  W.bottomLeftCorner(n, n) = lw.W21;
  W.bottomRightCorner(n, n) = lw.W22;
  const Eigen::MatrixXd E = expm(Eigen::MatrixXd(W + tau * sys.T));
  ev.F = (W * E - tau * sys.Td).bottomRows(n);
  ev.w = lw.w;
  ev.valid = ev.F.allFinite();
  return ev;
}

Eigen::MatrixXd q_from_x(const SystemMatrices& sys, Eigen::Index n, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd B = sys.Td.bottomRows(n);
  return Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(B).solve(X);
}

Eigen::MatrixXd haar_orthogonal(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

struct RootUnit {
  cplx s;
  bool pair = false;
  Eigen::MatrixXcd vectors;  // null vectors of N(s), one column per multiplicity
};

double min_rel_singular(const Eigen::MatrixXcd& v) {
  if (v.cols() == 0) return 1.0;
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(v).singularValues();
  return sv(sv.size() - 1) / sv(0);
}

struct Selection {
  std::vector<cplx> values;
  Eigen::MatrixXcd vectors;
};

// Depth-first choice of root copies, rightmost first, keeping the null
// vectors independent until 2n columns are collected.
bool select_roots(const std::vector<RootUnit>& units, std::size_t idx, Eigen::Index need, Selection& sel,
                  long& budget) {
  if (sel.vectors.cols() == need) return true;
  if (idx == units.size() || --budget < 0) return false;
  const RootUnit& u = units[idx];
  const auto per_copy = u.pair ? 2 : 1;
  for (auto j = u.vectors.cols(); j >= 0; --j) {
    if (sel.vectors.cols() + j * per_copy > need) continue;
    Selection next = sel;
    const auto base = next.vectors.cols();
    next.vectors.conservativeResize(u.vectors.rows(), base + j * per_copy);
    for (Eigen::Index c = 0; c < j; ++c) {
      next.vectors.col(base + c * per_copy) = u.vectors.col(c);
      next.values.push_back(u.s);
      if (u.pair) {
        next.vectors.col(base + c * per_copy + 1) = u.vectors.col(c).conjugate();
        next.values.push_back(std::conj(u.s));
      }
    }
    if (j > 0 && min_rel_singular(next.vectors) < 1e-8) continue;
    if (select_roots(units, idx + 1, need, next, budget)) {
      sel = std::move(next);
      return true;
    }
  }
  return false;
}

Eigen::MatrixXd s0_mixing(Eigen::Index n, const std::vector<cplx>& roots, std::uint64_t seed) {
  std::vector<std::pair<cplx, cplx>> quads;
  std::vector<double> reals;
  for (const cplx& s : roots) {
    if (s.imag() > 0.0) quads.emplace_back(s, std::conj(s));
    else if (s.imag() == 0.0) reals.push_back(s.real());
  }
  std::ranges::sort(reals, std::greater<>());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) quads.emplace_back(reals[i], reals[i + 1]);
  if (static_cast<Eigen::Index>(quads.size()) != n)
    throw Error(ErrorCode::InsufficientRoots, "selected roots do not split into real quadratics");

  Eigen::VectorXd eta(n), mu(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [a, b] = quads[static_cast<std::size_t>(i)];
    eta(i) = (a + b).real();
    mu(i) = -(a * b).real();
  }
  const Eigen::MatrixXd U = haar_orthogonal(n, seed);
  Eigen::MatrixXd S0 = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  S0.topRightCorner(n, n).setIdentity();
  S0.bottomLeftCorner(n, n) = U * mu.asDiagonal() * U.transpose();
  S0.bottomRightCorner(n, n) = U * eta.asDiagonal() * U.transpose();
  return S0;
}

Eigen::MatrixXd s0_exact(const Selection& sel) {
  const auto dim = sel.vectors.rows();
  Eigen::VectorXcd lam(dim);
  for (Eigen::Index i = 0; i < dim; ++i) lam(i) = sel.values[static_cast<std::size_t>(i)];
  const Eigen::MatrixXcd vl = sel.vectors * lam.asDiagonal();
  const Eigen::MatrixXcd s =
      Eigen::PartialPivLU<Eigen::MatrixXcd>(sel.vectors.transpose()).solve(vl.transpose()).transpose();
  return s.real();
}

// Regular graphs decouple along the eigenspaces of A: for eigenvalue l the
// factor is det [[s, -1], [d - l e^{-s tau}, s + g d - g l e^{-s tau}]].
// Each eigenspace receives the two rightmost roots of its factor.
// agreement_pair: the all-ones eigenspace (eigenvalue d of A) takes its
// rightmost complex pair instead of the zero root and its real partner
Eigen::MatrixXd s0_modal(const SystemMatrices& sys, Delay tau, bool agreement_pair) {
  const auto n = static_cast<Eigen::Index>(sys.agents);
  const double d = sys.degree(0), g = sys.gamma;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.A);
  const Eigen::VectorXd& lam = es.eigenvalues();
  Eigen::MatrixXd S0 = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  S0.topRightCorner(n, n).setIdentity();
  for (Eigen::Index i = n - 1; i >= 0;) {
    Eigen::Index j = i;
    while (j > 0 && std::abs(lam(j - 1) - lam(i)) < 1e-9 * (1.0 + std::abs(lam(i)))) --j;
    Eigen::Matrix2d T2{{0.0, 1.0}, {-d, -g * d}}, Td2{{0.0, 0.0}, {lam(i), g * lam(i)}};
    const SystemMatrices mode = SystemMatrices::generic(T2, Td2);
    // real rightmost root pairs with the next real root; with none left the
    // factor contributes its rightmost complex pair instead
    std::optional<std::pair<cplx, cplx>> quad;
    for (std::size_t count = 2; !quad && count <= 8; count *= 2) {
      std::vector<cplx> roots;
      try {
        for (const auto& r : leading_roots(mode, tau, count).roots)
          for (int c = 0; c < r.multiplicity; ++c) roots.push_back(r.s);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientRoots) throw;
        break;
      }
      if (agreement_pair && std::abs(lam(i) - d) < 1e-9 * (1.0 + d)) {
        const auto pair_it = std::find_if(roots.begin(), roots.end(), [](cplx s) { return s.imag() != 0.0; });
        if (pair_it != roots.end()) quad.emplace(*pair_it, std::conj(*pair_it));
        continue;
      }
      const auto real_it = std::find_if(roots.begin() + 1, roots.end(), [](cplx s) { return s.imag() == 0.0; });
      if (roots.at(0).imag() != 0.0) quad.emplace(roots[0], std::conj(roots[0]));
      else if (real_it != roots.end()) quad.emplace(roots[0], *real_it);
      else if (count == 8) {
        const auto pair_it = std::find_if(roots.begin(), roots.end(), [](cplx s) { return s.imag() != 0.0; });
        if (pair_it != roots.end()) quad.emplace(*pair_it, std::conj(*pair_it));
      }
    }
    if (!quad) throw Error(ErrorCode::InsufficientRoots, "mode factor has too few roots");
    const auto [a, b] = *quad;
    const Eigen::MatrixXd basis = es.eigenvectors().middleCols(j, i - j + 1);
    const Eigen::MatrixXd P = basis * basis.transpose();
    S0.bottomLeftCorner(n, n) += -(a * b).real() * P;
    S0.bottomRightCorner(n, n) += (a + b).real() * P;
    i = j - 1;
  }
  return S0;
}

}  // namespace

bool is_regular(const SystemMatrices& sys) {
  return sys.is_consensus() && sys.degree.maxCoeff() == sys.degree.minCoeff();
}

std::vector<int> BranchPolicy::choose(const Eigen::VectorXcd& m) const {
  const auto n = static_cast<std::size_t>(m.size());
  std::vector<int> ks(n, 0);
  if (!tracking_ || static_cast<std::size_t>(reference_.size()) != n) return ks;

  struct Cand {
    double dist;
    std::size_t i, j;
    int k;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx mi = m(static_cast<Eigen::Index>(i));
    for (int k = kMinBranch; k <= kMaxBranch; ++k) {
      cplx w;
      if (mi == 0.0) {
        if (k != 0) continue;
        w = 0.0;
      } else {
        try {
          w = lambert_w(k, mi);
        } catch (const Error&) {
          continue;
        }
      }
      for (std::size_t j = 0; j < n; ++j)
        cands.push_back({std::abs(w - reference_(static_cast<Eigen::Index>(j))), i, j, k});
    }
  }
  std::ranges::sort(cands, {}, &Cand::dist);
  std::vector<bool> used_i(n, false), used_j(n, false);
  for (const auto& c : cands) {
    if (used_i[c.i] || used_j[c.j]) continue;
    used_i[c.i] = used_j[c.j] = true;
    ks[c.i] = c.k;
  }
  return ks;
}

InitialGuess initial_guess(const SystemMatrices& sys, Delay tau, const ComplexSpectrum& spectrum, GuessKind kind,
                           std::uint64_t seed) {
  const auto n = half_dim(sys);
  const auto dim = 2 * n;
  if (spectrum.total_count() < static_cast<std::size_t>(dim))
    throw Error(ErrorCode::InsufficientRoots, "need " + std::to_string(dim) + " roots, have " +
                                                  std::to_string(spectrum.total_count()));

  std::vector<RootUnit> units;
  for (const auto& r : spectrum.roots) {
    RootUnit u;
    u.s = r.s.imag() > 0.0 ? r.s : cplx(r.s.real(), 0.0);
    u.pair = r.s.imag() > 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(char_matrix(u.s, sys, tau), Eigen::ComputeFullV);
    const auto mult = std::clamp<Eigen::Index>(r.multiplicity, 1, dim);
    u.vectors = svd.matrixV().rightCols(mult);
    if (!u.pair) {
      // real root: rotate each null vector to be real
      for (Eigen::Index c = 0; c < mult; ++c) {
        Eigen::Index big;
        u.vectors.col(c).cwiseAbs().maxCoeff(&big);
        const cplx ph = u.vectors(big, c) / std::abs(u.vectors(big, c));
        u.vectors.col(c) /= ph;
        u.vectors.col(c) = u.vectors.col(c).real().cast<cplx>().eval();
      }
    }
    units.push_back(std::move(u));
  }
  std::ranges::stable_sort(units, [](const RootUnit& a, const RootUnit& b) { return a.s.real() > b.s.real(); });

  Selection sel;
  sel.vectors.resize(dim, 0);
  long budget = 20000;
  if (!select_roots(units, 0, dim, sel, budget))
    throw Error(ErrorCode::InsufficientRoots, "no set of " + std::to_string(dim) +
                                                  " roots with independent characteristic vectors");

  InitialGuess out;
  out.kind = kind;
  out.roots.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) out.roots(i) = sel.values[static_cast<std::size_t>(i)];
  switch (kind) {
    case GuessKind::spectral_mixing: out.S0 = s0_mixing(n, sel.values, seed); break;
    case GuessKind::eigenvector_exact: out.S0 = s0_exact(sel); break;
    case GuessKind::modal:
    case GuessKind::modal_agreement_pair:
      if (!is_regular(sys)) throw Error(ErrorCode::InvalidArgument, "modal guess needs a regular consensus graph");
      out.S0 = s0_modal(sys, tau, kind == GuessKind::modal_agreement_pair);
      break;
  }

  const double t = tau.value();
  const Eigen::MatrixXd W0 = t * (out.S0 - sys.T);
  const Eigen::MatrixXd M0 = W0 * expm(W0);
  out.reference = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(W0.bottomRightCorner(n, n).cast<cplx>(), false)
                      .eigenvalues();
  out.Q = q_from_x(sys, n, M0.bottomRows(n) / t);
  return out;
}

Eigen::MatrixXd initial_guess_Q(const SystemMatrices& sys, Delay tau, const ComplexSpectrum& spectrum,
                                std::uint64_t seed) {
  return initial_guess(sys, tau, spectrum, GuessKind::spectral_mixing, seed).Q;
}

SolveResult solve(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& Q0, BranchPolicy policy,
                  const SolveOptions& options) {
  const auto n = half_dim(sys);
  const double t = tau.value();
  if (Q0.rows() != 2 * n || Q0.cols() != 2 * n) throw Error(ErrorCode::InvalidArgument, "Q0 must be 2n x 2n");
  const double target = 1e-10 * (1.0 + fro(sys.Td));
  const Eigen::MatrixXd B = sys.Td.bottomRows(n);

  Eigen::MatrixXd X = B * Q0;
  const auto nx = X.size();
  Evaluation cur = evaluate(sys, t, n, X, policy);
  if (!cur.valid) {
    // surface the underlying failure
    (void)lower_w(t * X.leftCols(n), t * X.rightCols(n), policy);
    throw Error(ErrorCode::NonConvergence, "F is not finite at the initial guess");
  }
  if (policy.is_tracking()) policy = BranchPolicy::tracking(cur.w);

  SolveResult res;
  for (int it = 0;; ++it) {
    const double norm = cur.F.norm();
    if (norm < target) {
      res.Q = it == 0 ? Q0 : q_from_x(sys, n, X);
      res.policy = policy;
      res.iterations = it;
      res.residual = norm;
      return res;
    }
    if (it == options.max_iterations)
      throw Error(ErrorCode::NonConvergence,
                  "Newton stalled after " + std::to_string(it) + " iterations, |F| = " + sci(norm));

    Eigen::MatrixXd J(nx, nx);
    const Eigen::Map<const Eigen::VectorXd> f0(cur.F.data(), nx);
    for (Eigen::Index j = 0; j < nx; ++j) {
      const double h = options.fd_step * std::max(1.0, std::abs(X(j)));
      Eigen::MatrixXd Xp = X;
      Xp(j) += h;
      Evaluation ep = evaluate(sys, t, n, Xp, policy);
      double step = h;
      if (!ep.valid) {
        Xp(j) = X(j) - h;
        ep = evaluate(sys, t, n, Xp, policy);
        step = -h;
      }
      if (!ep.valid) throw Error(ErrorCode::NonConvergence, "F undefined near the current iterate");
      J.col(j) = (Eigen::Map<const Eigen::VectorXd>(ep.F.data(), nx) - f0) / step;
    }
    const Eigen::VectorXd dx = -Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(J).solve(f0);
    if (!dx.allFinite()) throw Error(ErrorCode::NonConvergence, "singular Newton system");

    bool accepted = false;
    for (double alpha = 1.0; alpha >= 1e-4; alpha *= 0.5) {
      Eigen::MatrixXd Xn = X;
      Eigen::Map<Eigen::VectorXd>(Xn.data(), nx) += alpha * dx;
      Evaluation en = evaluate(sys, t, n, Xn, policy);
      if (!en.valid) continue;
      if (en.F.squaredNorm() <= (1.0 - 1e-4 * alpha) * norm * norm) {
        X = std::move(Xn);
        cur = std::move(en);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (norm < 1e-7 * (1.0 + fro(sys.Td))) {
        res.Q = q_from_x(sys, n, X);
        res.policy = policy;
        res.iterations = it;
        res.residual = norm;
        res.noise_floor = true;
        return res;
      }
      throw Error(ErrorCode::NonConvergence, "line search failed, |F| = " + sci(norm));
    }
    if (policy.is_tracking()) policy = BranchPolicy::tracking(cur.w);
  }
}

Eigen::MatrixXd solve_Q(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& Q0) {
  return solve(sys, tau, Q0, BranchPolicy::principal()).Q;
}

double fixed_point_residual(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd r = S - sys.T - sys.Td * expm(Eigen::MatrixXd(-tau.value() * S));
  return r.norm() / (1.0 + sys.T.norm() + sys.Td.norm());
}

bool InvariantReport::lemma_structure_ok() const {
  return upper_block < 1e-9 && symmetry_w21 < 1e-7 && symmetry_w22 < 1e-7 && commutator < 1e-7 &&
         commutator_shifted < 1e-7;
}

LambertSolution build_solution(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& Q,
                               const BranchPolicy& policy) {
  const auto n = half_dim(sys);
  const auto dim = 2 * n;
  const double t = tau.value();
  LambertSolution sol;
  sol.Q = Q;
  sol.M = t * sys.Td * Q;

  const Eigen::MatrixXd M22 = sol.M.bottomRightCorner(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd22(M22);
  const Eigen::VectorXd sv22 = svd22.singularValues();
  if (!(sv22(n - 1) >= 1e-12 * sv22(0)))
    throw Error(ErrorCode::SingularM22, "M22 is singular to working precision");

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(sol.M.cast<cplx>(), true);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NotDiagonalizable, "eigensolver failed on M");
  sol.eigvals_M = es.eigenvalues();
  const double zero_tol = 1e-9 * (1.0 + sol.M.norm());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  std::ranges::sort(order, [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(sol.eigvals_M(a)) < std::abs(sol.eigvals_M(b));
  });
  for (Eigen::Index i = 0; i < dim; ++i)
    if (std::abs(sol.eigvals_M(i)) <= zero_tol) ++sol.invariants.zero_eigenvalues_m;

  // nonzero eigenpairs: the n of largest modulus
  Eigen::VectorXcd m(n);
  Eigen::MatrixXcd vecs(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i) = sol.eigvals_M(order[static_cast<std::size_t>(n + i)]);
  // clustered eigenvalues share one null space of M - mI, which stays well
  // conditioned where individual eigenvectors do not
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (done[static_cast<std::size_t>(i)]) continue;
    std::vector<Eigen::Index> cluster;
    cplx centre = 0.0;
    for (Eigen::Index j = i; j < n; ++j)
      if (!done[static_cast<std::size_t>(j)] && std::abs(m(j) - m(i)) <= 1e-6 * (1.0 + std::abs(m(i)))) {
        cluster.push_back(j);
        centre += m(j);
        done[static_cast<std::size_t>(j)] = true;
      }
    if (cluster.size() == 1) {
      vecs.col(i) = es.eigenvectors().col(order[static_cast<std::size_t>(n + i)]).normalized();
      continue;
    }
    centre /= static_cast<double>(cluster.size());
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sol.M.cast<cplx>() - centre * Eigen::MatrixXcd::Identity(dim, dim),
                                           Eigen::ComputeFullV);
    const auto c = static_cast<Eigen::Index>(cluster.size());
    for (Eigen::Index k = 0; k < c; ++k) vecs.col(cluster[static_cast<std::size_t>(k)]) = svd.matrixV().col(dim - c + k);
  }
  const std::vector<int> ks = policy.choose(m);
  Eigen::VectorXcd wm(n);
  for (Eigen::Index i = 0; i < n; ++i) wm(i) = lambert_w(ks[static_cast<std::size_t>(i)], m(i));

  std::vector<Eigen::Index> col(static_cast<std::size_t>(n));
  std::iota(col.begin(), col.end(), 0);
  std::ranges::sort(col, [&](Eigen::Index a, Eigen::Index b) {
    if (wm(a).real() != wm(b).real()) return wm(a).real() > wm(b).real();
    return wm(a).imag() > wm(b).imag();
  });
  sol.m.resize(n);
  sol.branches.resize(static_cast<std::size_t>(n));
  Eigen::VectorXcd w_sorted(n);
  Eigen::MatrixXcd Zn(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = col[static_cast<std::size_t>(i)];
    sol.m(i) = m(c);
    sol.branches[static_cast<std::size_t>(i)] = ks[static_cast<std::size_t>(c)];
    w_sorted(i) = wm(c);
    Zn.col(i) = vecs.col(c);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svdm(sol.M, Eigen::ComputeFullV);
  const Eigen::MatrixXd kernel = svdm.matrixV().rightCols(n);

  Eigen::MatrixXcd Z(dim, dim);
  Z.leftCols(n) = kernel.cast<cplx>();
  Z.rightCols(n) = Zn;
  const Eigen::VectorXd zsv = Eigen::JacobiSVD<Eigen::MatrixXcd>(Z).singularValues();
  if (!(zsv(dim - 1) > 1e-10 * zsv(0)))
    throw Error(ErrorCode::NotDiagonalizable, "eigenvector matrix of M is singular");
  sol.Z1 = Z.topLeftCorner(n, n);
  sol.Z2 = Z.bottomLeftCorner(n, n);
  sol.Z3 = Z.topRightCorner(n, n);
  sol.Z4 = Z.bottomRightCorner(n, n);

  Eigen::VectorXcd wd = Eigen::VectorXcd::Zero(dim);
  wd.tail(n) = w_sorted;
  const Eigen::MatrixXcd zw = Z * wd.asDiagonal();
  const Eigen::MatrixXcd WM = Eigen::PartialPivLU<Eigen::MatrixXcd>(Z.transpose()).solve(zw.transpose()).transpose();
  if (WM.imag().cwiseAbs().maxCoeff() > 1e-8 * (1.0 + WM.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::NonRealSpectrum, "W(M) is not real for this branch choice");
  sol.W_of_M = WM.real();
  sol.W22 = sol.W_of_M.bottomRightCorner(n, n);
  sol.W21 = sol.W_of_M.bottomLeftCorner(n, n);
  sol.W_bar = -sol.W21;
  sol.S = sol.W_of_M / t + sys.T;
  sol.residual_fixed_point = fixed_point_residual(sys, tau, sol.S);

  auto ordering_residual = [&](const Eigen::MatrixXcd& num, const Eigen::MatrixXcd& den) {
    const Eigen::MatrixXcd r = Eigen::PartialPivLU<Eigen::MatrixXcd>(den.transpose()).solve(num.transpose()).transpose();
    const Eigen::MatrixXcd w21 = -sol.W22.cast<cplx>() * r;
    if (!w21.allFinite()) return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd S = sys.T;
    S.bottomLeftCorner(n, n) += w21.real() / t;
    S.bottomRightCorner(n, n) += sol.W22 / t;
    return fixed_point_residual(sys, tau, S);
  };
  sol.residual_z2_z1inv = ordering_residual(sol.Z2, sol.Z1);
  sol.residual_z1_z2inv = Eigen::JacobiSVD<Eigen::MatrixXcd>(sol.Z2).singularValues()(n - 1) > 0.0
                              ? ordering_residual(sol.Z1, sol.Z2)
                              : std::numeric_limits<double>::infinity();
  sol.ordering = sol.residual_z2_z1inv <= sol.residual_z1_z2inv ? ZOrdering::z2_z1inv : ZOrdering::z1_z2inv;
  const double lo = std::min(sol.residual_z2_z1inv, sol.residual_z1_z2inv);
  const double hi = std::max(sol.residual_z2_z1inv, sol.residual_z1_z2inv);
  sol.ambiguous = hi <= 10.0 * std::max(lo, std::numeric_limits<double>::min());

  sol.w = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(sol.W22.cast<cplx>(), false).eigenvalues();
  sol.w_tilde = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(sol.W_bar.cast<cplx>(), false).eigenvalues();

  InvariantReport& inv = sol.invariants;
  inv.upper_block = sol.W_of_M.topRows(n).cwiseAbs().maxCoeff();
  auto asym = [](const Eigen::MatrixXd& x) { return (x - x.transpose()).norm() / (1.0 + x.norm()); };
  auto comm = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a * b - b * a).norm() / (1.0 + a.norm() * b.norm());
  };
  inv.symmetry_w21 = asym(sol.W21);
  inv.symmetry_w22 = asym(sol.W22);
  inv.commutator = comm(sol.W21, sol.W22);
  if (sys.is_consensus()) {
    const Eigen::MatrixXd D = sys.degree.asDiagonal();
    inv.commutator_shifted = comm(sol.W21 - t * D, sol.W22 - t * sys.gamma * D);
  }
  inv.z3 = sol.Z3.norm();
  const Eigen::VectorXd wsv = Eigen::JacobiSVD<Eigen::MatrixXd>(sol.W_of_M).singularValues();
  for (Eigen::Index i = 0; i < dim; ++i)
    if (wsv(i) <= 1e-9 * (1.0 + wsv(0))) ++inv.null_dim_w;
  inv.fixed_point = sol.residual_fixed_point;
  return sol;
}

SpectralCheck spectral_check(const SystemMatrices& sys, Delay tau, const Eigen::MatrixXd& S) {
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(S, false).eigenvalues();
  SpectralCheck out;
  out.rightmost = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double tol = 1e-8 * residual_scale(ev(i), sys);
    out.max_residual_ratio = std::max(out.max_residual_ratio, std::abs(char_residual(ev(i), sys, tau)) / tol);
    if (!is_structural_zero(ev(i))) out.rightmost = std::max(out.rightmost, ev(i).real());
  }
  return out;
}

bool tracks_rightmost(const SpectralCheck& check, double oracle_abscissa) {
  if (!check.members_ok()) return false;
  if (!std::isfinite(oracle_abscissa)) return true;
  return std::abs(check.rightmost - oracle_abscissa) <= 1e-6 * (1.0 + std::abs(oracle_abscissa));
}

Bootstrap bootstrap_solve(const SystemMatrices& sys, Delay tau, const ComplexSpectrum& spectrum,
                          std::uint64_t seed) {
  double abscissa = -std::numeric_limits<double>::infinity();
  for (const auto& r : spectrum.roots)
    if (!is_structural_zero(r.s)) {
      abscissa = r.s.real();
      break;
    }

  std::vector<GuessKind> kinds;
  if (is_regular(sys)) kinds.insert(kinds.end(), {GuessKind::modal, GuessKind::modal_agreement_pair});
  kinds.push_back(GuessKind::spectral_mixing);
  kinds.push_back(GuessKind::eigenvector_exact);

  Bootstrap out;
  std::string last = "no guess attempted";
  for (const GuessKind kind : kinds) {
    ++out.attempts;
    try {
      const InitialGuess guess = initial_guess(sys, tau, spectrum, kind, seed);
      SolveResult res = solve(sys, tau, guess.Q, BranchPolicy::tracking(guess.reference));
      const LambertSolution sol = build_solution(sys, tau, res.Q, res.policy);
      if (!tracks_rightmost(spectral_check(sys, tau, sol.S), abscissa)) {
        last = "solvent misses the rightmost root";
        continue;
      }
      out.result = std::move(res);
      out.kind = kind;
      return out;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidArgument) throw;
      last = e.message();
    }
  }
  throw Error(ErrorCode::NonConvergence, "bootstrap failed: " + last);
}

std::vector<LambertSolution> branch_sweep(const SystemMatrices& sys, Delay tau, const ComplexSpectrum& spectrum,
                                          std::uint64_t seed) {
  return branch_sweep(sys, tau, bootstrap_solve(sys, tau, spectrum, seed).result);
}

std::vector<LambertSolution> branch_sweep(const SystemMatrices& sys, Delay tau, const SolveResult& base) {
  std::vector<LambertSolution> out;
  out.push_back(build_solution(sys, tau, base.Q, base.policy));

  const LambertSolution& first = out.front();
  Eigen::VectorXcd toggled = base.policy.reference();
  bool any = false;
  for (Eigen::Index i = 0; i < first.m.size(); ++i) {
    const cplx mi = first.m(i);
    const int k = first.branches[static_cast<std::size_t>(i)];
    if (std::abs(mi.imag()) > 1e-12 * (1.0 + std::abs(mi)) || mi.real() >= 0.0 || mi.real() < -std::exp(-1.0))
      continue;
    if (k != 0 && k != -1) continue;
    const cplx w_old = lambert_w(k, cplx(mi.real(), 0.0));
    const cplx w_new = lambert_w(k == 0 ? -1 : 0, cplx(mi.real(), 0.0));
    for (Eigen::Index j = 0; j < toggled.size(); ++j)
      if (std::abs(toggled(j) - w_old) < 1e-6 * (1.0 + std::abs(w_old))) {
        toggled(j) = w_new;
        any = true;
        break;
      }
  }
  if (!any) return out;
  // re-solve on the toggled branch; failing that, report the toggled branch
  // evaluated at the same M, which carries its own fixed-point residual
  const BranchPolicy alt_policy = BranchPolicy::tracking(toggled);
  try {
    const SolveResult alt = solve(sys, tau, base.Q, alt_policy);
    out.push_back(build_solution(sys, tau, alt.Q, alt.policy));
    return out;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonConvergence && e.code() != ErrorCode::NonRealSpectrum &&
        e.code() != ErrorCode::SingularM22)
      throw;
  }
  out.push_back(build_solution(sys, tau, base.Q, alt_policy));
  return out;
}

}  // namespace delaytk
