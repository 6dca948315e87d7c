// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <string_view>

#include "delaytk/char_det.hpp"

namespace delaytk::kernels {

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(DELAYTK_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() {
  static const Isa chosen = [] {
    if (const char* env = std::getenv("DELAYTK_ISA"); env && std::string_view(env) == "scalar") return Isa::scalar;
    return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
  }();
  return chosen;
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void char_det(const CharDetProblem& p, const CharDetBatch& b, Isa isa) {
#if defined(DELAYTK_HAVE_AVX2)
  if (isa == Isa::avx2 && isa_available(Isa::avx2)) {
    char_det_avx2(p, b);
    return;
  }
#endif
  (void)isa;
  char_det_scalar(p, b);
}

}  // namespace delaytk::kernels
