#pragma once

#include <limits>
#include <optional>

#include "bregalt/types.hpp"

namespace bregalt {

// One segment of an alternating projection sequence: entering point b (or a
// for the lr orientation), the right projection a_plus, and the follow-up
// left projection b_plus. The three recorded divergences form the decrease
// chain D(b_plus, a_plus) <= D(b, a_plus) <= D(b, a).
struct Block {
  std::optional<Vector> a;  // absent on the first block of an rl run
  Vector b;
  Vector a_plus;
  Vector b_plus;

  double D_b_a = std::numeric_limits<double>::quiet_NaN();
  double D_b_aplus = std::numeric_limits<double>::quiet_NaN();
  double D_bplus_aplus = std::numeric_limits<double>::quiet_NaN();

  // Solver parameters of the projected points, when the sets are parametric;
  // carried so the next block can warm start its local solvers.
  std::optional<Vector> a_plus_param;
  std::optional<Vector> b_plus_param;
};

}  // namespace bregalt
