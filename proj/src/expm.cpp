// SPDX-License-Identifier: Apache-2.0
#include "delaytk/expm.hpp"

#include <array>
#include <cmath>

#include <Eigen/LU>

#include "delaytk/error.hpp"

namespace delaytk {

namespace {

// theta_m: largest 1-norm for which the [m/m] approximant meets unit roundoff.
constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                                          2.097847961257068e0, 5.371920351148152e0};

constexpr std::array<double, 4> kB3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kB5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kB7 = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
constexpr std::array<double, 10> kB9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                        2162160.0,     110880.0,     3960.0,       90.0,        1.0};
constexpr std::array<double, 14> kB13 = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                         1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                         670442572800.0,      33522128640.0,       1323241920.0,
                                         40840800.0,          960960.0,            16380.0,
                                         182.0,               1.0};

template <typename Mat, std::size_t N>
void pade_low(const Mat& a, const std::array<double, N>& b, Mat& u, Mat& v) {
  const auto n = a.rows();
  const Mat a2 = a * a;
  Mat odd = b[1] * Mat::Identity(n, n);
  Mat even = b[0] * Mat::Identity(n, n);
  Mat p = Mat::Identity(n, n);
  for (std::size_t k = 2; k < N; k += 2) {
    p = p * a2;
    even += b[k] * p;
    if (k + 1 < N) odd += b[k + 1] * p;
  }
  u = a * odd;
  v = even;
}

template <typename Mat>
void pade13(const Mat& a, Mat& u, Mat& v) {
  const auto n = a.rows();
  const auto& b = kB13;
  const Mat id = Mat::Identity(n, n);
  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const Mat tu = b[13] * a6 + b[11] * a4 + b[9] * a2;
  u = a * (a6 * tu + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const Mat tv = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v = a6 * tv + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
}

template <typename Mat>
Mat expm_impl(const Mat& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::InvalidArgument, "expm of non-square matrix");
  if (a.size() == 0) return a;
  if (!a.allFinite()) throw Error(ErrorCode::InvalidArgument, "expm of non-finite matrix");
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  Mat u, v;
  int squarings = 0;
  if (norm1 <= kTheta[0]) {
    pade_low(a, kB3, u, v);
  } else if (norm1 <= kTheta[1]) {
    pade_low(a, kB5, u, v);
  } else if (norm1 <= kTheta[2]) {
    pade_low(a, kB7, u, v);
  } else if (norm1 <= kTheta[3]) {
    pade_low(a, kB9, u, v);
  } else {
    if (norm1 > kTheta[4]) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta[4]))));
    const Mat scaled = a * std::ldexp(1.0, -squarings);
    pade13(scaled, u, v);
  }
  Mat r = Eigen::PartialPivLU<Mat>(v - u).solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) { return expm_impl(a); }
Eigen::MatrixXcd expm(const Eigen::MatrixXcd& a) { return expm_impl(a); }

}  // namespace delaytk
