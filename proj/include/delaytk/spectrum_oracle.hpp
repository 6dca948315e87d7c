// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "delaytk/system.hpp"

namespace delaytk {

// Rectangle [re_min, re_max] x [0, im_max] of the upper half plane.
struct SearchRegion {
  double re_min = -1.0;
  double re_max = 1.0;
  double im_max = 10.0;
  double grid_step = 0.05;

  void validate(Delay tau) const;
};

// Largest grid step allowed at a delay: min(0.1, pi / (10 tau)).
double max_grid_step(Delay tau);

struct Root {
  cplx s;
  double residual = 0.0;  // |det N(s)|
  int multiplicity = 1;
};

// Roots with Im >= 0, sorted by descending real part (ties: descending Im).
struct ComplexSpectrum {
  std::vector<Root> roots;
  SearchRegion region;

  // Number of roots counted with multiplicity, conjugates included.
  std::size_t total_count() const;
};

ComplexSpectrum find_roots(const SystemMatrices& sys, Delay tau, const SearchRegion& region);

// Region with re_max above every root in the closed right half plane and
// im_max covering all roots with Re s >= re_min (capped at 40/tau + 10).
SearchRegion bounding_region(const SystemMatrices& sys, Delay tau, double re_min);

// Expanding search until at least `count` roots (with multiplicity and
// conjugates) are found. Throws InsufficientRoots past re_min = -64/tau.
ComplexSpectrum leading_roots(const SystemMatrices& sys, Delay tau, std::size_t count);

// Max Re s over roots with |s| >= 1e-7; grid halved up to twice on GridTooCoarse.
double rightmost_abscissa(const SystemMatrices& sys, Delay tau);

double critical_delay_bisection(const SystemMatrices& sys, Delay tau_lo, Delay tau_hi, double tol);
// First stable-to-unstable crossing in [tau_lo, tau_hi]: scan at scan_step,
// then bisect the first bracket. BracketInvalid when there is none.
double first_critical_delay(const SystemMatrices& sys, Delay tau_lo, Delay tau_hi, double scan_step, double tol);

bool is_structural_zero(cplx s);

}  // namespace delaytk
