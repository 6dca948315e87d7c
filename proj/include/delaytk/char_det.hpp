// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace delaytk::kernels {

// Batched evaluation of det(s I - T - c Td) for many points s with
// precomputed factors c = e^{-s tau}. Matrices are dense, row-major, dim x dim.
struct CharDetProblem {
  int dim = 0;
  std::vector<double> T;
  std::vector<double> Td;
};

// Structure-of-arrays batch. All spans have the same length.
struct CharDetBatch {
  std::span<const double> s_re, s_im;
  std::span<const double> c_re, c_im;
  std::span<double> det_re, det_im;
};

enum class Isa { scalar, avx2 };

void char_det_scalar(const CharDetProblem& p, const CharDetBatch& b);
#if defined(DELAYTK_HAVE_AVX2)
void char_det_avx2(const CharDetProblem& p, const CharDetBatch& b);
#endif

// Best variant supported by the running CPU, unless DELAYTK_ISA=scalar.
Isa active_isa();
bool isa_available(Isa isa);
std::string_view isa_name(Isa isa);
void char_det(const CharDetProblem& p, const CharDetBatch& b, Isa isa);
inline void char_det(const CharDetProblem& p, const CharDetBatch& b) { char_det(p, b, active_isa()); }

}  // namespace delaytk::kernels
