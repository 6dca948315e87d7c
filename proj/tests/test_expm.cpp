#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "delaytk/expm.hpp"

using namespace delaytk;

TEST_CASE("trivial exponentials") {
  CHECK(expm(Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 3))).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  Eigen::MatrixXd n(3, 3);
  n << 0, 1, 2, 0, 0, 3, 0, 0, 0;
  Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(3, 3) + n + 0.5 * n * n;
  CHECK((expm(n) - expected).norm() < 1e-14);
  Eigen::MatrixXd rot(2, 2);
  rot << 0, -1, 1, 0;
  Eigen::MatrixXd r = expm(rot);
  CHECK(std::abs(r(0, 0) - std::cos(1.0)) < 1e-15);
  CHECK(std::abs(r(1, 0) - std::sin(1.0)) < 1e-15);
}

TEST_CASE("matches Eigen's matrix exponential over a range of norms") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (double scale : {1e-4, 1e-2, 0.2, 1.0, 3.0, 10.0, 40.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 2 + trial % 10;
      Eigen::MatrixXd a(n, n);
      for (int i = 0; i < n * n; ++i) a(i / n, i % n) = scale * g(rng) / std::sqrt(n);
      const Eigen::MatrixXd ours = expm(a);
      const Eigen::MatrixXd ref = a.exp();
      INFO("scale " << scale << " n " << n);
      CHECK((ours - ref).norm() <= 1e-12 * ref.norm() * (1.0 + scale));

      const Eigen::MatrixXcd ac = a.cast<std::complex<double>>() * std::complex<double>(0.3, 0.7);
      const Eigen::MatrixXcd refc = ac.exp();
      CHECK((expm(ac) - refc).norm() <= 1e-12 * refc.norm() * (1.0 + scale));
    }
  }
}

TEST_CASE("symmetric matrices agree with the spectral formula") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a(6, 6);
    for (int i = 0; i < 36; ++i) a(i / 6, i % 6) = g(rng);
    a = (a + a.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const Eigen::MatrixXd ref =
        es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() * es.eigenvectors().transpose();
    CHECK((expm(a) - ref).norm() <= 1e-12 * ref.norm());
    const Eigen::MatrixXd e1 = expm(a), e2 = expm(Eigen::MatrixXd(-a));
    CHECK((e1 * e2 - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-13 * e1.norm() * e2.norm());
  }
}
