// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>

#include <Eigen/Core>

#include "delaytk/graph.hpp"

namespace delaytk {

using cplx = std::complex<double>;

// Strictly positive, finite delay in seconds.
class Delay {
 public:
  explicit Delay(double tau);
  double value() const noexcept { return tau_; }

 private:
  double tau_;
};

// Retarded linear system  d/dt G = T G(t) + Td G(t - tau).
// For the consensus model T = [[0, I], [-D, -g D]] and Td = [[0, 0], [A, g A]].
struct SystemMatrices {
  Eigen::MatrixXd T;
  Eigen::MatrixXd Td;
  // Consensus-model data; empty for a generic system.
  int agents = 0;
  double gamma = 0.0;
  Eigen::MatrixXd A;
  Eigen::VectorXd degree;

  Eigen::Index dim() const noexcept { return T.rows(); }
  bool is_consensus() const noexcept { return agents > 0; }

  static SystemMatrices generic(Eigen::MatrixXd T, Eigen::MatrixXd Td);
};

SystemMatrices assemble(const Graph& g, double gamma);

// N(s) = sI - T - Td e^{-s tau}
Eigen::MatrixXcd char_matrix(cplx s, const SystemMatrices& sys, Delay tau);
// d/ds N(s) = I + tau Td e^{-s tau}
Eigen::MatrixXcd char_matrix_derivative(cplx s, const SystemMatrices& sys, Delay tau);
// det N(s) by LU with partial pivoting
cplx char_residual(cplx s, const SystemMatrices& sys, Delay tau);
// (1 + |s|)^dim, the scale residuals are compared against
double residual_scale(cplx s, const SystemMatrices& sys);

}  // namespace delaytk
