#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bregalt/alternator.hpp"
#include "bregalt/block.hpp"
#include "bregalt/generator.hpp"
#include "bregalt/types.hpp"

namespace bregalt {

enum class RateKind { finite_step, linear, sublinear };

struct RateEstimate {
  RateKind kind = RateKind::linear;
  double q = 0.0;        // contraction factor when kind = linear
  double rho = 0.0;      // power-law exponent when kind = sublinear
  std::pair<int, int> fit_window{0, 0};  // [first, last] original indices used
  double residual = 0.0;  // RMS residual of the selected fit in log space
};

struct AngleConditionProbe {
  std::string sigma_family;  // "phi_prime_sq_inv_times_s_inv" (zero gap) or "phi_prime_sq_inv"
  std::vector<double> theta_grid;
  std::vector<double> gammas;  // per-theta minimum of the probe term over tail blocks
  double theta_best = 0.0;
  double gamma_lower = 0.0;
  int violations = 0;  // blocks skipped for degenerate angles or nonpositive excess
};

enum class ThreePointSide { rl, lr };
enum class Transversality { transversal, tangential, undetermined };

std::string to_string(RateKind k);
std::string to_string(Transversality t);

// Angle at a_plus between b - a_plus and b_plus - a_plus; empty when either
// vector is shorter than 1e-14.
std::optional<double> angle_rl(const Block& block);

// Dual-space angle at b between grad f(a) - grad f(b) and
// grad f(a+) - grad f(b); equals angle_rl of the dual-transformed block.
// Empty when the block has no a or a vector degenerates.
std::optional<double> angle_lr(const Generator& g, const Block& block);

// Largest ell with D(b,a+) >= D(b+,a+) + ell * D(b,b+) (rl side) or
// D(b,a) >= D(b,a+) + ell * D(a+,a) (lr side). +infinity on a vanishing
// denominator; empty when required block fields are missing.
std::optional<double> three_point_ell(const Generator& g, const Block& block,
                                      ThreePointSide side);

// Distances of each block's b_plus to the final one; the natural input for
// fit_rate on a converged trace.
std::vector<double> iterate_errors(const Trace& trace);

// Least-squares model selection on the tail of an error sequence: geometric
// (log-linear in k) versus power law (log-log), with a 5% residual
// preference for the geometric model. Errors below 1e-13 are discarded and
// the last tenth is dropped to avoid the self-referencing endpoint. Raises
// TooShort below 20 entries; an exactly-zero tail is reported as finite_step.
RateEstimate fit_rate(const std::vector<double>& errors);

// For each theta, the minimal value over tail blocks of
// s^{-2 theta} * D(b+,a+) * (1 - cos angle_rl), where s = D(b+,a+) - r*^2/2.
// theta_best is the smallest theta whose term shows no vanishing trend in s.
AngleConditionProbe angle_condition_probe(const Trace& trace, double r_star,
                                          const std::vector<double>& theta_grid = {
                                              0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85,
                                              0.9, 0.95});

// Tangential when the block angles decay with a clear power trend, else
// transversal when the tail angles stay above 1e-3 rad, else undetermined.
Transversality classify_transversality(const Trace& trace);

}  // namespace bregalt
