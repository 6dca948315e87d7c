#include <doctest.h>

#include <random>

#include "delaytk/char_det.hpp"
#include "delaytk/system.hpp"

using namespace delaytk;

namespace {

kernels::CharDetProblem random_problem(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  kernels::CharDetProblem p;
  p.dim = dim;
  for (int i = 0; i < dim * dim; ++i) {
    p.T.push_back(g(rng));
    p.Td.push_back(i % 3 == 0 ? 0.0 : g(rng));
  }
  return p;
}

struct Points {
  std::vector<double> sr, si, cr, ci;
};

Points random_points(std::size_t count, double tau, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> re(-5.0, 3.0), im(-20.0, 20.0);
  Points pts;
  for (std::size_t i = 0; i < count; ++i) {
    const cplx s(re(rng), im(rng));
    const cplx c = std::exp(-s * tau);
    pts.sr.push_back(s.real());
    pts.si.push_back(s.imag());
    pts.cr.push_back(c.real());
    pts.ci.push_back(c.imag());
  }
  return pts;
}

}  // namespace

TEST_CASE("scalar kernel matches LU determinant") {
  std::mt19937_64 rng(21);
  for (int dim : {1, 2, 4, 7, 12}) {
    const auto p = random_problem(dim, rng);
    const auto pts = random_points(37, 0.7, rng);
    std::vector<double> dr(37), di(37);
    kernels::char_det_scalar(p, {pts.sr, pts.si, pts.cr, pts.ci, dr, di});
    SystemMatrices sys = SystemMatrices::generic(
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(p.T.data(), dim, dim),
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(p.Td.data(), dim, dim));
    for (std::size_t i = 0; i < 37; ++i) {
      const cplx ref = char_residual({pts.sr[i], pts.si[i]}, sys, Delay(0.7));
      CHECK(std::abs(cplx(dr[i], di[i]) - ref) <= 1e-11 * std::abs(ref));
    }
  }
}

TEST_CASE("vector kernel is bitwise identical to the scalar reference") {
  if (!kernels::isa_available(kernels::Isa::avx2)) {
    MESSAGE("AVX2 not available on this CPU; skipping");
    return;
  }
  std::mt19937_64 rng(22);
  for (int dim : {1, 2, 3, 4, 6, 8, 10, 12}) {
    for (std::size_t count : {1u, 3u, 4u, 5u, 64u, 103u}) {
      const auto p = random_problem(dim, rng);
      const auto pts = random_points(count, 1.3, rng);
      std::vector<double> ar(count), ai(count), br(count), bi(count);
      kernels::char_det(p, {pts.sr, pts.si, pts.cr, pts.ci, ar, ai}, kernels::Isa::scalar);
      kernels::char_det(p, {pts.sr, pts.si, pts.cr, pts.ci, br, bi}, kernels::Isa::avx2);
      for (std::size_t i = 0; i < count; ++i) {
        REQUIRE(ar[i] == br[i]);
        REQUIRE(ai[i] == bi[i]);
      }
    }
  }
}

TEST_CASE("singular matrices give an exact zero in both variants") {
  kernels::CharDetProblem p;
  p.dim = 3;
  p.T = {0, 0, 0, 0, 0, 0, 0, 0, 0};
  p.Td = {0, 0, 0, 0, 0, 0, 0, 0, 0};
  std::vector<double> sr(5, 0.0), si(5, 0.0), cr(5, 1.0), ci(5, 0.0), dr(5), di(5);
  for (auto isa : {kernels::Isa::scalar, kernels::Isa::avx2}) {
    if (!kernels::isa_available(isa)) continue;
    kernels::char_det(p, {sr, si, cr, ci, dr, di}, isa);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(dr[i] == 0.0);
      CHECK(di[i] == 0.0);
    }
  }
}

TEST_CASE("dispatch reports a usable variant") {
  CHECK(kernels::isa_available(kernels::active_isa()));
  CHECK_FALSE(kernels::isa_name(kernels::active_isa()).empty());
}
