// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace delaytk {

using cplx = std::complex<double>;

// Branch k of the Lambert W function, w e^w = z, with the usual
// counter-clockwise-continuous cut conventions (W_0 real on [-1/e, inf),
// W_{-1} real on [-1/e, 0)).
cplx lambert_w(int k, cplx z);

// Branch index whose image region contains w, identified from
// log(w) + w = log(w e^w) + 2 pi i k. Ambiguous exactly on branch cuts.
int lambert_branch_of(cplx w);

// Per-eigenvalue branch choice for the matrix function. Eigenvalues with
// |h| <= zero_tol are structural zeros; only k = 0 is defined there.
class BranchAssignment {
 public:
  static BranchAssignment uniform(int k) { return BranchAssignment(std::vector<int>{}, k); }
  // Branch 0 on zero eigenvalues, k elsewhere.
  static BranchAssignment hybrid(int k) {
    BranchAssignment b(std::vector<int>{}, k);
    b.zero_to_principal_ = true;
    return b;
  }
  // Explicit branch per eigenvalue position (eigensolver order).
  static BranchAssignment per_position(std::vector<int> ks) { return BranchAssignment(std::move(ks), 0); }

  int at(std::size_t position, cplx eigenvalue, double zero_tol) const;

 private:
  BranchAssignment(std::vector<int> ks, int fallback) : ks_(std::move(ks)), fallback_(fallback) {}
  std::vector<int> ks_;
  int fallback_;
  bool zero_to_principal_ = false;
};

struct EigenDecomposition {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
  double condition = 1.0;  // 2-norm condition number of `vectors`
};

// Throws NotDiagonalizable when the eigenvector matrix condition number
// exceeds cond_ceiling.
EigenDecomposition diagonalize(const Eigen::MatrixXcd& h, double cond_ceiling = 1e8);

// Z diag(W_{k_i}(h_i)) Z^{-1}
Eigen::MatrixXcd lambert_w_matrix(const Eigen::MatrixXcd& h, const BranchAssignment& branches,
                                  double cond_ceiling = 1e8);
Eigen::MatrixXcd lambert_w_matrix(const EigenDecomposition& eig, std::span<const int> branches);

}  // namespace delaytk
