// SPDX-License-Identifier: Apache-2.0
#include "delaytk/spectrum_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "delaytk/char_det.hpp"
#include "delaytk/error.hpp"
#include "delaytk/parallel.hpp"

namespace delaytk {

namespace {

constexpr double kRootTol = 1e-8;

kernels::CharDetProblem make_problem(const SystemMatrices& sys) {
  kernels::CharDetProblem p;
  p.dim = static_cast<int>(sys.dim());
  const auto n = sys.dim();
  p.T.resize(static_cast<std::size_t>(n * n));
  p.Td.resize(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      p.T[static_cast<std::size_t>(i * n + j)] = sys.T(i, j);
      p.Td[static_cast<std::size_t>(i * n + j)] = sys.Td(i, j);
    }
  return p;
}

struct NewtonResult {
  cplx s;
  bool converged = false;
};

// Newton on det N(s) with det'/det = tr(N^{-1} N'). Steps are scaled by the
// multiplicity once the contraction ratio betrays a multiple root.
// With `deflate`, iterates on det N(s) / s so a structural zero root does not
// shadow nearby roots.
NewtonResult newton(const SystemMatrices& sys, Delay tau, cplx s, bool deflate) {
  double prev_step = INFINITY;
  double size = INFINITY;
  int slow = 0;
  double mult = 1.0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::MatrixXcd N = char_matrix(s, sys, tau);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(N);
    const Eigen::MatrixXcd& packed = lu.matrixLU();
    double min_pivot = INFINITY;
    for (Eigen::Index k = 0; k < packed.rows(); ++k) min_pivot = std::min(min_pivot, std::abs(packed(k, k)));
    if (min_pivot == 0.0) return {s, true};
    cplx trace = lu.solve(char_matrix_derivative(s, sys, tau)).trace();
    if (deflate) trace -= 1.0 / s;
    if (trace == 0.0 || !std::isfinite(trace.real()) || !std::isfinite(trace.imag())) return {s, false};
    const double plain = std::abs(1.0 / trace);
    const double ratio = plain / prev_step;
    if (mult > 1.0 && ratio > 0.9) {
      // a cluster of close simple roots, not a multiple one
      mult = 1.0;
      slow = 0;
    } else if (mult == 1.0 && ratio > 0.35 && ratio < 0.8) {
      if (++slow >= 3) mult = std::max(2.0, std::round(1.0 / (1.0 - ratio)));
    } else {
      slow = 0;
    }
    prev_step = plain;
    const cplx step = mult / trace;
    size = std::abs(step);
    s -= step;
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return {s, false};
    if (size <= 1e-14 * (1.0 + std::abs(s))) return {s, true};
  }
  // stalled at rounding level counts; the residual test decides
  return {s, size <= 1e-8 * (1.0 + std::abs(s))};
}

int multiplicity_at(const SystemMatrices& sys, Delay tau, cplx s) {
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(char_matrix(s, sys, tau)).singularValues();
  int m = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) <= 1e-6 * sv(0)) ++m;
  return std::max(m, 1);
}

double op_norm(const Eigen::MatrixXd& m) { return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0); }

struct Candidate {
  cplx seed;
  double cell;  // grid step of the originating cell
};

// Zero-level crossings of Re det on the cell boundary; where Im det changes
// sign between two such crossings the curves intersect inside the cell.
void cell_candidates(const std::array<cplx, 4>& corner_s, const std::array<cplx, 4>& corner_f, double h,
                     std::vector<Candidate>& out) {
  std::array<cplx, 4> pt{};
  std::array<double, 4> im{};
  int count = 0;
  for (int e = 0; e < 4; ++e) {
    const int a = e, b = (e + 1) % 4;
    const double ra = corner_f[a].real(), rb = corner_f[b].real();
    if ((ra >= 0.0) == (rb >= 0.0)) continue;
    const double t = ra / (ra - rb);
    pt[count] = corner_s[a] + t * (corner_s[b] - corner_s[a]);
    im[count] = corner_f[a].imag() + t * (corner_f[b].imag() - corner_f[a].imag());
    ++count;
  }
  for (int k = 0; k + 1 < count; k += 2) {
    if ((im[k] >= 0.0) == (im[k + 1] >= 0.0)) continue;
    const double t = im[k] / (im[k] - im[k + 1]);
    out.push_back({pt[k] + t * (pt[k + 1] - pt[k]), h});
  }
}

}  // namespace

void SearchRegion::validate(Delay tau) const {
  if (!(std::isfinite(re_min) && std::isfinite(re_max) && std::isfinite(im_max) && std::isfinite(grid_step)))
    throw Error(ErrorCode::InvalidArgument, "search region has non-finite bounds");
  if (!(re_min < re_max)) throw Error(ErrorCode::InvalidArgument, "search region needs re_min < re_max");
  if (!(im_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "search region needs im_max > 0");
  if (!(grid_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid step must be positive");
  if (grid_step > max_grid_step(tau) * (1.0 + 1e-12))
    throw Error(ErrorCode::InvalidArgument,
                "grid step " + std::to_string(grid_step) + " exceeds " + std::to_string(max_grid_step(tau)));
}

double max_grid_step(Delay tau) { return std::min(0.1, std::numbers::pi / (10.0 * tau.value())); }

std::size_t ComplexSpectrum::total_count() const {
  std::size_t n = 0;
  for (const auto& r : roots) n += static_cast<std::size_t>(r.multiplicity) * (r.s.imag() > 0.0 ? 2 : 1);
  return n;
}

bool is_structural_zero(cplx s) { return std::abs(s) < 1e-7; }

ComplexSpectrum find_roots(const SystemMatrices& sys, Delay tau, const SearchRegion& region) {
  region.validate(tau);
  const double h = region.grid_step;
  const double t = tau.value();
  const auto nx = static_cast<std::size_t>(std::ceil((region.re_max - region.re_min) / h)) + 1;
  // rows straddle the real axis at half a step so real roots register as Im sign changes
  const auto ny = static_cast<std::size_t>(std::ceil((region.im_max + 0.5 * h) / h)) + 1;

  std::vector<double> xs(nx), ys(ny), decay(nx), cosv(ny), sinv(ny);
  for (std::size_t i = 0; i < nx; ++i) {
    xs[i] = region.re_min + static_cast<double>(i) * h;
    decay[i] = std::exp(-t * xs[i]);
  }
  for (std::size_t j = 0; j < ny; ++j) {
    ys[j] = -0.5 * h + static_cast<double>(j) * h;
    cosv[j] = std::cos(t * ys[j]);
    sinv[j] = -std::sin(t * ys[j]);
  }

  // the consensus root at 0 is divided out and added back explicitly
  const cplx det0 = char_residual(0.0, sys, tau);
  const double scale0 = std::pow(1.0 + sys.T.norm() + sys.Td.norm(), static_cast<double>(sys.dim()));
  const bool deflate = sys.is_consensus() || std::abs(det0) <= 1e-13 * scale0;

  const kernels::CharDetProblem problem = make_problem(sys);
  std::vector<double> fre(nx * ny), fim(nx * ny);
  parallel_for(ny, [&](std::size_t j0, std::size_t j1) {
    std::vector<double> si(nx), cr(nx), ci(nx);
    for (std::size_t j = j0; j < j1; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        si[i] = ys[j];
        cr[i] = decay[i] * cosv[j];
        ci[i] = decay[i] * sinv[j];
      }
      kernels::char_det(problem, {xs, si, cr, ci, std::span(fre).subspan(j * nx, nx), std::span(fim).subspan(j * nx, nx)});
      if (deflate) {
        for (std::size_t i = 0; i < nx; ++i) {
          const cplx f = cplx(fre[j * nx + i], fim[j * nx + i]) / cplx(xs[i], ys[j]);
          fre[j * nx + i] = f.real();
          fim[j * nx + i] = f.imag();
        }
      }
    }
  });

  std::vector<Candidate> candidates;
  for (std::size_t j = 0; j + 1 < ny; ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const std::size_t a = j * nx + i, b = a + 1, c = a + nx + 1, d = a + nx;
      const std::array<cplx, 4> cs = {cplx(xs[i], ys[j]), cplx(xs[i + 1], ys[j]), cplx(xs[i + 1], ys[j + 1]),
                                      cplx(xs[i], ys[j + 1])};
      const std::array<cplx, 4> cf = {cplx(fre[a], fim[a]), cplx(fre[b], fim[b]), cplx(fre[c], fim[c]),
                                      cplx(fre[d], fim[d])};
      bool finite = true;
      for (const auto& f : cf) finite = finite && std::isfinite(f.real()) && std::isfinite(f.imag());
      if (finite) cell_candidates(cs, cf, h, candidates);
    }
  }

  std::vector<NewtonResult> refined(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k) refined[k] = newton(sys, tau, candidates[k].seed, deflate);
  });

  ComplexSpectrum out;
  out.region = region;
  std::size_t unresolved = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    cplx s = refined[k].s;
    const double reach = 2.0 * std::numbers::sqrt2 * candidates[k].cell;
    if (!refined[k].converged || std::abs(s - candidates[k].seed) > reach) {
      ++unresolved;
      continue;
    }
    if (std::abs(s.imag()) <= 1e-9 * (1.0 + std::abs(s))) s = {s.real(), 0.0};
    if (s.imag() < 0.0) s = std::conj(s);
    if (s.real() < region.re_min || s.real() > region.re_max || s.imag() > region.im_max) continue;
    if (deflate && is_structural_zero(s)) continue;
    const double residual = std::abs(char_residual(s, sys, tau));
    if (!(residual < kRootTol * residual_scale(s, sys))) {
      ++unresolved;
      continue;
    }
    const bool seen = std::any_of(out.roots.begin(), out.roots.end(), [&](const Root& r) {
      return std::abs(r.s - s) <= 1e-6 * (1.0 + std::abs(s));
    });
    if (!seen) out.roots.push_back({s, residual, 1});
  }
  if (unresolved > 0)
    throw Error(ErrorCode::GridTooCoarse,
                std::to_string(unresolved) + " grid cell(s) did not refine to a nearby root at step " + std::to_string(h));

  for (auto& r : out.roots) r.multiplicity = multiplicity_at(sys, tau, r.s);
  if (deflate && region.re_min <= 0.0 && region.re_max >= 0.0) out.roots.push_back({0.0, std::abs(det0), 1});
  std::sort(out.roots.begin(), out.roots.end(), [](const Root& a, const Root& b) {
    if (a.s.real() != b.s.real()) return a.s.real() > b.s.real();
    return a.s.imag() > b.s.imag();
  });
  return out;
}

SearchRegion bounding_region(const SystemMatrices& sys, Delay tau, double re_min) {
  const double nt = op_norm(sys.T), nd = op_norm(sys.Td);
  const double h = max_grid_step(tau);
  SearchRegion r;
  r.grid_step = h;
  r.re_max = std::max(1.0, nt + nd) + h;
  r.re_min = std::min(re_min, r.re_max - 1.0);
  const double bound = nt + nd * std::exp(-tau.value() * std::min(r.re_min, 0.0));
  r.im_max = std::min(bound, 40.0 / tau.value() + 10.0) + h;
  return r;
}

ComplexSpectrum leading_roots(const SystemMatrices& sys, Delay tau, std::size_t count) {
  const double floor = -64.0 / tau.value();
  for (double re_min = -1.0;; re_min *= 2.0) {
    SearchRegion region = bounding_region(sys, tau, std::max(re_min, floor));
    for (int refine = 0;; ++refine) {
      try {
        ComplexSpectrum spec = find_roots(sys, tau, region);
        if (spec.total_count() >= count) return spec;
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::GridTooCoarse || refine == 2) throw;
        region.grid_step *= 0.5;
      }
    }
    if (re_min <= floor)
      throw Error(ErrorCode::InsufficientRoots, "fewer than " + std::to_string(count) + " roots found");
  }
}

double rightmost_abscissa(const SystemMatrices& sys, Delay tau) {
  const double floor = -64.0 / tau.value();
  for (double re_min = -1.0;; re_min *= 2.0) {
    SearchRegion region = bounding_region(sys, tau, std::max(re_min, floor));
    for (int refine = 0;; ++refine) {
      try {
        const ComplexSpectrum spec = find_roots(sys, tau, region);
        for (const auto& r : spec.roots)
          if (!is_structural_zero(r.s)) return r.s.real();
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::GridTooCoarse || refine == 2) throw;
        region.grid_step *= 0.5;
      }
    }
    if (re_min <= floor) return -INFINITY;
  }
}

double critical_delay_bisection(const SystemMatrices& sys, Delay tau_lo, Delay tau_hi, double tol) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "bisection tolerance must be positive");
  double lo = tau_lo.value(), hi = tau_hi.value();
  if (!(lo < hi)) throw Error(ErrorCode::BracketInvalid, "need tau_lo < tau_hi");
  if (!(rightmost_abscissa(sys, tau_lo) < 0.0))
    throw Error(ErrorCode::BracketInvalid, "system not stable at tau_lo = " + std::to_string(lo));
  if (!(rightmost_abscissa(sys, tau_hi) >= 0.0))
    throw Error(ErrorCode::BracketInvalid, "system not unstable at tau_hi = " + std::to_string(hi));
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (rightmost_abscissa(sys, Delay(mid)) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double first_critical_delay(const SystemMatrices& sys, Delay tau_lo, Delay tau_hi, double scan_step, double tol) {
  if (!(scan_step > 0.0) || !std::isfinite(scan_step))
    throw Error(ErrorCode::InvalidArgument, "scan step must be positive");
  const double lo = tau_lo.value(), hi = tau_hi.value();
  if (!(lo < hi)) throw Error(ErrorCode::BracketInvalid, "need tau_lo < tau_hi");
  if (!(rightmost_abscissa(sys, tau_lo) < 0.0))
    throw Error(ErrorCode::BracketInvalid, "system not stable at tau_lo = " + std::to_string(lo));
  double prev = lo;
  for (int k = 1;; ++k) {
    const double t = std::min(hi, lo + k * scan_step);
    if (rightmost_abscissa(sys, Delay(t)) >= 0.0) return critical_delay_bisection(sys, Delay(prev), Delay(t), tol);
    if (t >= hi) break;
    prev = t;
  }
  throw Error(ErrorCode::BracketInvalid, "no loss of stability up to tau = " + std::to_string(hi));
}

}  // namespace delaytk
