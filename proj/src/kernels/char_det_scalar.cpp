// SPDX-License-Identifier: Apache-2.0
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "delaytk/char_det.hpp"

namespace delaytk::kernels {

// Reference kernel. Gaussian elimination with partial pivoting on |.|^2,
// complex arithmetic spelled out so the vector variant can mirror it
// operation by operation.
void char_det_scalar(const CharDetProblem& p, const CharDetBatch& b) {
  const std::size_t n = static_cast<std::size_t>(p.dim);
  const std::size_t count = b.s_re.size();
  std::vector<double> re(n * n), im(n * n);

  for (std::size_t l = 0; l < count; ++l) {
    const double sr = b.s_re[l], si = b.s_im[l];
    const double cr = b.c_re[l], ci = b.c_im[l];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t ij = i * n + j;
        const double t = p.T[ij], td = p.Td[ij];
        double r = -t - cr * td;
        double m = -(ci * td);
        if (i == j) {
          r = r + sr;
          m = m + si;
        }
        re[ij] = r;
        im[ij] = m;
      }
    }

    double dr = 1.0, di = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = re[k * n + k] * re[k * n + k] + im[k * n + k] * im[k * n + k];
      for (std::size_t i = k + 1; i < n; ++i) {
        const double mag = re[i * n + k] * re[i * n + k] + im[i * n + k] * im[i * n + k];
        if (mag > best) {
          best = mag;
          piv = i;
        }
      }
      if (piv != k) {
        for (std::size_t j = k; j < n; ++j) {
          std::swap(re[k * n + j], re[piv * n + j]);
          std::swap(im[k * n + j], im[piv * n + j]);
        }
        dr = -dr;
        di = -di;
      }
      const double pr = re[k * n + k], pi = im[k * n + k];
      const double nr = dr * pr - di * pi;
      const double ni = dr * pi + di * pr;
      dr = nr;
      di = ni;
      if (best == 0.0) continue;  // column already zero below, det is 0
      const double inv = 1.0 / best;
      // 1 / pivot = conj(pivot) / |pivot|^2
      const double qr = pr * inv, qi = -pi * inv;
      for (std::size_t i = k + 1; i < n; ++i) {
        const double ar = re[i * n + k], ai = im[i * n + k];
        const double fr = ar * qr - ai * qi;
        const double fi = ar * qi + ai * qr;
        for (std::size_t j = k + 1; j < n; ++j) {
          const double br = re[k * n + j], bi = im[k * n + j];
          re[i * n + j] = re[i * n + j] - (fr * br - fi * bi);
          im[i * n + j] = im[i * n + j] - (fr * bi + fi * br);
        }
      }
    }
    b.det_re[l] = dr;
    b.det_im[l] = di;
  }
}

}  // namespace delaytk::kernels
