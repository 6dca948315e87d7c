// SPDX-License-Identifier: Apache-2.0
#include "delaytk/lambert_w.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "delaytk/error.hpp"

namespace delaytk {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kE = std::numbers::e;
// 1/e split into a double and its rounding remainder
constexpr double kInvEHi = 0.36787944117144233;
constexpr double kInvELo = -1.2428753672788363e-17;

// W = -1 + p - p^2/3 + 11/72 p^3 - ... with p = +-sqrt(2 (e z + 1))
constexpr std::array<double, 10> kBranchSeries = {
    -1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0, 769.0 / 17280.0, -221.0 / 8505.0,
    680863.0 / 43545600.0, -1963.0 / 204120.0, 226287557.0 / 37623398400.0};

cplx offset_from_branch_point(cplx z) { return {(z.real() + kInvEHi) + kInvELo, z.imag()}; }

// Only W_0, and W_{-1} / W_1 from the side facing the branch point, touch -1/e.
bool touches_branch_point(int k, cplx z) {
  return k == 0 || (k == -1 && z.imag() >= 0.0) || (k == 1 && z.imag() < 0.0);
}

cplx branch_point_series(int k, cplx dz, int terms) {
  cplx p = std::sqrt(2.0 * kE * dz);
  if (k != 0) p = -p;
  cplx w = 0.0;
  for (int j = terms - 1; j >= 0; --j) w = w * p + kBranchSeries[static_cast<std::size_t>(j)];
  return w;
}

cplx asymptotic_seed(int k, cplx z) {
  const cplx l1 = std::log(z) + cplx(0.0, 2.0 * kPi * k);
  const cplx l2 = std::log(l1);
  return l1 - l2 + l2 / l1 + l2 * (l2 - 2.0) / (2.0 * l1 * l1);
}

struct Halley {
  cplx w;
  bool converged;
};

Halley halley(cplx z, cplx w) {
  double prev = INFINITY;
  for (int it = 0; it < 100; ++it) {
    const cplx ew = std::exp(w);
    const cplx f = w * ew - z;
    const cplx wp1 = w + 1.0;
    const cplx denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    if (denom == 0.0 || !std::isfinite(denom.real()) || !std::isfinite(denom.imag())) return {w, false};
    const cplx step = f / denom;
    w -= step;
    if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) return {w, false};
    const double size = std::abs(step);
    if (size <= 0x1.0p-51 * std::abs(w) || step == 0.0) return {w, true};
    // near the branch point f' is tiny and the step bottoms out at rounding noise
    if (it > 3 && size >= prev && size < 1e-10 * (1.0 + std::abs(w))) return {w, true};
    prev = size;
  }
  return {w, false};
}

int branch_given(cplx w, cplx z) {
  if (w.imag() == 0.0) return w.real() < -1.0 ? -1 : 0;
  const cplx u = std::log(w) + w - std::log(z);
  return static_cast<int>(std::lround(u.imag() / (2.0 * kPi)));
}

// z is passed in, not recomputed: on a cut the rounding of w e^w may land
// on the wrong side
bool acceptable(int k, cplx z, cplx w) {
  if (std::abs(w * std::exp(w) - z) > 1e-13 * (1.0 + std::abs(z))) return false;
  return branch_given(w, z) == k;
}

}  // namespace

int lambert_branch_of(cplx w) {
  cplx z = w * std::exp(w);
  if (z.imag() == 0.0) z = {z.real(), 0.0};
  return branch_given(w, z);
}

cplx lambert_w(int k, cplx z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw Error(ErrorCode::InvalidArgument, "Lambert W of non-finite argument");
  if (z.imag() == 0.0) z = {z.real(), 0.0};  // a cut is approached from above
  if (z == 0.0) {
    if (k == 0) return 0.0;
    throw Error(ErrorCode::UndefinedAtZero, "W_" + std::to_string(k) + "(0) is undefined");
  }

  const cplx dz = offset_from_branch_point(z);
  const bool near_bp = touches_branch_point(k, z);
  if (near_bp && std::abs(dz) < 1e-6) return branch_point_series(k, dz, 10);

  // Seeds in order of preference; the first that lands on branch k wins.
  std::array<cplx, 5> seeds{};
  std::size_t count = 0;
  if (near_bp && std::abs(dz) < 0.3) seeds[count++] = branch_point_series(k, dz, 4);
  if (k == 0) {
    if (std::abs(z) < 0.3) seeds[count++] = z * (1.0 - z * (1.0 - 1.5 * z));
    if (std::abs(std::log(z)) < 1.5) seeds[count++] = std::log(1.0 + z);
  }
  seeds[count++] = asymptotic_seed(k, z);
  if (k == 0) seeds[count++] = cplx(-0.5, z.imag() < 0.0 ? -1.0 : 1.0);
  if (near_bp && std::abs(dz) >= 0.3) seeds[count++] = branch_point_series(k, dz, 4);

  for (std::size_t i = 0; i < count; ++i) {
    const Halley h = halley(z, seeds[i]);
    if (h.converged && acceptable(k, z, h.w)) return h.w;
  }
  throw Error(ErrorCode::NonConvergence,
              "Lambert W_" + std::to_string(k) + " failed at z = (" + std::to_string(z.real()) + ", " +
                  std::to_string(z.imag()) + ")");
}

int BranchAssignment::at(std::size_t position, cplx eigenvalue, double zero_tol) const {
  const int k = position < ks_.size() ? ks_[position] : fallback_;
  if (std::abs(eigenvalue) <= zero_tol) {
    if (zero_to_principal_) return 0;
    if (k != 0)
      throw Error(ErrorCode::UndefinedAtZero,
                  "zero eigenvalue at position " + std::to_string(position + 1) + " assigned branch " + std::to_string(k));
  }
  return k;
}

EigenDecomposition diagonalize(const Eigen::MatrixXcd& h, double cond_ceiling) {
  if (h.rows() != h.cols()) throw Error(ErrorCode::InvalidArgument, "matrix Lambert W of non-square matrix");
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h, true);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NotDiagonalizable, "eigensolver failed");
  EigenDecomposition out{es.eigenvalues(), es.eigenvectors(), 1.0};
  if (h.rows() > 0) {
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(out.vectors).singularValues();
    out.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  }
  if (!(out.condition <= cond_ceiling))
    throw Error(ErrorCode::NotDiagonalizable,
                "eigenvector condition number " + std::to_string(out.condition) + " exceeds ceiling");
  return out;
}

Eigen::MatrixXcd lambert_w_matrix(const EigenDecomposition& eig, std::span<const int> branches) {
  const auto n = eig.values.size();
  if (static_cast<std::size_t>(n) != branches.size())
    throw Error(ErrorCode::InvalidArgument, "one branch per eigenvalue required");
  Eigen::VectorXcd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = lambert_w(branches[static_cast<std::size_t>(i)], eig.values(i));
  const Eigen::MatrixXcd vw = eig.vectors * w.asDiagonal();
  // vw * V^{-1} = (V^{-T} vw^T)^T
  return Eigen::PartialPivLU<Eigen::MatrixXcd>(eig.vectors.transpose()).solve(vw.transpose()).transpose();
}

Eigen::MatrixXcd lambert_w_matrix(const Eigen::MatrixXcd& h, const BranchAssignment& branches, double cond_ceiling) {
  if (h.rows() != h.cols()) throw Error(ErrorCode::InvalidArgument, "matrix Lambert W of non-square matrix");
  const auto n = h.rows();
  const double zero_tol = 1e-12 * (1.0 + h.cwiseAbs().rowwise().sum().maxCoeff());

  Eigen::MatrixXcd off = h;
  off.diagonal().setZero();
  if (off.isZero(0.0)) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      out(i, i) = lambert_w(branches.at(static_cast<std::size_t>(i), h(i, i), zero_tol), h(i, i));
    return out;
  }

  const EigenDecomposition eig = diagonalize(h, cond_ceiling);
  std::vector<int> ks(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    ks[static_cast<std::size_t>(i)] = branches.at(static_cast<std::size_t>(i), eig.values(i), zero_tol);
  return lambert_w_matrix(eig, ks);
}

}  // namespace delaytk
