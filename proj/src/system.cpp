// SPDX-License-Identifier: Apache-2.0
#include "delaytk/system.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>

#include "delaytk/error.hpp"

namespace delaytk {

Delay::Delay(double tau) : tau_(tau) {
  if (!(std::isfinite(tau) && tau > 0.0))
    throw Error(ErrorCode::InvalidArgument, "delay must be positive and finite, got " + std::to_string(tau));
}

SystemMatrices SystemMatrices::generic(Eigen::MatrixXd T, Eigen::MatrixXd Td) {
  if (T.rows() != T.cols() || Td.rows() != Td.cols() || T.rows() != Td.rows() || T.rows() == 0)
    throw Error(ErrorCode::InvalidArgument, "T and Td must be square and of equal size");
  SystemMatrices sys;
  sys.T = std::move(T);
  sys.Td = std::move(Td);
  return sys;
}

SystemMatrices assemble(const Graph& g, double gamma) {
  if (gamma == 0.0) throw Error(ErrorCode::ZeroGamma, "velocity coupling gamma must be nonzero");
  if (!std::isfinite(gamma)) throw Error(ErrorCode::InvalidArgument, "gamma must be finite");
  const int n = g.size();
  const Eigen::MatrixXd A = g.adjacency().cast<double>();
  const Eigen::VectorXd d = g.degrees().cast<double>();
  const Eigen::MatrixXd D = d.asDiagonal();

  SystemMatrices sys;
  sys.agents = n;
  sys.gamma = gamma;
  sys.A = A;
  sys.degree = d;
  sys.T = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  sys.T.topRightCorner(n, n).setIdentity();
  sys.T.bottomLeftCorner(n, n) = -D;
  sys.T.bottomRightCorner(n, n) = -gamma * D;
  sys.Td = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  sys.Td.bottomLeftCorner(n, n) = A;
  sys.Td.bottomRightCorner(n, n) = gamma * A;
  return sys;
}

Eigen::MatrixXcd char_matrix(cplx s, const SystemMatrices& sys, Delay tau) {
  const cplx e = std::exp(-s * tau.value());
  Eigen::MatrixXcd N = -sys.T.cast<cplx>() - e * sys.Td.cast<cplx>();
  N.diagonal().array() += s;
  return N;
}

Eigen::MatrixXcd char_matrix_derivative(cplx s, const SystemMatrices& sys, Delay tau) {
  const cplx e = std::exp(-s * tau.value());
  Eigen::MatrixXcd dN = (tau.value() * e) * sys.Td.cast<cplx>();
  dN.diagonal().array() += 1.0;
  return dN;
}

cplx char_residual(cplx s, const SystemMatrices& sys, Delay tau) {
  return Eigen::PartialPivLU<Eigen::MatrixXcd>(char_matrix(s, sys, tau)).determinant();
}

double residual_scale(cplx s, const SystemMatrices& sys) {
  return std::pow(1.0 + std::abs(s), static_cast<double>(sys.dim()));
}

}  // namespace delaytk
