// SPDX-License-Identifier: Apache-2.0
// Four evaluation points per register; each lane runs the reference
// elimination with its own pivot sequence, selected through blends.
#include <immintrin.h>

#include <cstddef>
#include <vector>

#include "delaytk/char_det.hpp"

namespace delaytk::kernels {

namespace {

struct Lanes {
  __m256d re, im;
};

inline __m256d load_padded(std::span<const double> v, std::size_t at) {
  alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < 4 && at + k < v.size(); ++k) buf[k] = v[at + k];
  return _mm256_load_pd(buf);
}

inline void store_partial(std::span<double> v, std::size_t at, __m256d x) {
  alignas(32) double buf[4];
  _mm256_store_pd(buf, x);
  for (std::size_t k = 0; k < 4 && at + k < v.size(); ++k) v[at + k] = buf[k];
}

}  // namespace

void char_det_avx2(const CharDetProblem& p, const CharDetBatch& b) {
  const std::size_t n = static_cast<std::size_t>(p.dim);
  const std::size_t count = b.s_re.size();
  std::vector<Lanes> a(n * n);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign = _mm256_set1_pd(-0.0);

  for (std::size_t l = 0; l < count; l += 4) {
    const __m256d sr = load_padded(b.s_re, l), si = load_padded(b.s_im, l);
    const __m256d cr = load_padded(b.c_re, l), ci = load_padded(b.c_im, l);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t ij = i * n + j;
        const __m256d t = _mm256_set1_pd(p.T[ij]), td = _mm256_set1_pd(p.Td[ij]);
        __m256d r = _mm256_sub_pd(_mm256_xor_pd(t, sign), _mm256_mul_pd(cr, td));
        __m256d m = _mm256_xor_pd(_mm256_mul_pd(ci, td), sign);
        if (i == j) {
          r = _mm256_add_pd(r, sr);
          m = _mm256_add_pd(m, si);
        }
        a[ij] = {r, m};
      }
    }

    __m256d dr = one, di = zero;
    for (std::size_t k = 0; k < n; ++k) {
      const Lanes& d = a[k * n + k];
      __m256d best = _mm256_add_pd(_mm256_mul_pd(d.re, d.re), _mm256_mul_pd(d.im, d.im));
      __m256d piv = _mm256_set1_pd(static_cast<double>(k));
      for (std::size_t i = k + 1; i < n; ++i) {
        const Lanes& e = a[i * n + k];
        const __m256d mag = _mm256_add_pd(_mm256_mul_pd(e.re, e.re), _mm256_mul_pd(e.im, e.im));
        const __m256d gt = _mm256_cmp_pd(mag, best, _CMP_GT_OQ);
        best = _mm256_blendv_pd(best, mag, gt);
        piv = _mm256_blendv_pd(piv, _mm256_set1_pd(static_cast<double>(i)), gt);
      }
      __m256d swapped = _mm256_cmp_pd(piv, _mm256_set1_pd(static_cast<double>(k)), _CMP_NEQ_OQ);
      for (std::size_t i = k + 1; i < n; ++i) {
        const __m256d here = _mm256_cmp_pd(piv, _mm256_set1_pd(static_cast<double>(i)), _CMP_EQ_OQ);
        if (_mm256_movemask_pd(here) == 0) continue;
        for (std::size_t j = k; j < n; ++j) {
          Lanes& top = a[k * n + j];
          Lanes& row = a[i * n + j];
          const Lanes tmp = top;
          top.re = _mm256_blendv_pd(top.re, row.re, here);
          top.im = _mm256_blendv_pd(top.im, row.im, here);
          row.re = _mm256_blendv_pd(row.re, tmp.re, here);
          row.im = _mm256_blendv_pd(row.im, tmp.im, here);
        }
      }
      dr = _mm256_blendv_pd(dr, _mm256_xor_pd(dr, sign), swapped);
      di = _mm256_blendv_pd(di, _mm256_xor_pd(di, sign), swapped);

      const __m256d pr = a[k * n + k].re, pi = a[k * n + k].im;
      const __m256d nr = _mm256_sub_pd(_mm256_mul_pd(dr, pr), _mm256_mul_pd(di, pi));
      const __m256d ni = _mm256_add_pd(_mm256_mul_pd(dr, pi), _mm256_mul_pd(di, pr));
      dr = nr;
      di = ni;

      // zero pivot: leave the remaining rows untouched, as the reference does
      const __m256d nonzero = _mm256_cmp_pd(best, zero, _CMP_NEQ_OQ);
      const __m256d inv = _mm256_and_pd(_mm256_div_pd(one, best), nonzero);
      const __m256d qr = _mm256_mul_pd(pr, inv);
      const __m256d qi = _mm256_xor_pd(_mm256_mul_pd(pi, inv), sign);
      for (std::size_t i = k + 1; i < n; ++i) {
        const __m256d ar = a[i * n + k].re, ai = a[i * n + k].im;
        const __m256d fr = _mm256_sub_pd(_mm256_mul_pd(ar, qr), _mm256_mul_pd(ai, qi));
        const __m256d fi = _mm256_add_pd(_mm256_mul_pd(ar, qi), _mm256_mul_pd(ai, qr));
        for (std::size_t j = k + 1; j < n; ++j) {
          const __m256d br = a[k * n + j].re, bi = a[k * n + j].im;
          Lanes& c = a[i * n + j];
          c.re = _mm256_sub_pd(c.re, _mm256_sub_pd(_mm256_mul_pd(fr, br), _mm256_mul_pd(fi, bi)));
          c.im = _mm256_sub_pd(c.im, _mm256_add_pd(_mm256_mul_pd(fr, bi), _mm256_mul_pd(fi, br)));
        }
      }
    }
    store_partial(b.det_re, l, dr);
    store_partial(b.det_im, l, di);
  }
}

}  // namespace delaytk::kernels
