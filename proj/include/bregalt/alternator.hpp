#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bregalt/block.hpp"
#include "bregalt/generator.hpp"
#include "bregalt/sets.hpp"
#include "bregalt/types.hpp"

namespace bregalt {

// rl: the start lies on B and each block runs right-then-left projections.
// lr: the start lies on A and each block enters through a left projection.
enum class Orientation { rl, lr };

enum class StopReason {
  divergence_stagnation,
  step_stagnation,
  max_iterations,
  domain_violation,
};

std::string to_string(Orientation o);
std::string to_string(StopReason r);

struct StopRules {
  int max_iterations = 100000;
  // |D_k - D_{k-1}| below this (scaled by 1 + D_0) counts as stagnation,
  // but only while D_k itself stays above the floor (scaled the same way):
  // feasible runs drive D to zero and should terminate on step size instead.
  double divergence_stagnation = 1e-14;
  double divergence_floor = 1e-12;
  double step_stagnation = 1e-12;
  // Any iterate closer than this to the domain boundary halts the run with
  // stop_reason = domain_violation rather than being clamped.
  double interiority_margin = 1e-12;
};

struct RunConfig {
  Orientation orientation = Orientation::rl;
  StopRules stop;
  SolverOptions solver;
  // Parameter of the start point when it lies on a parametric set (B for rl
  // runs, A for lr runs); used to warm start the first local projection.
  std::optional<Vector> start_param;
};

struct Trace {
  Orientation orientation = Orientation::rl;
  std::vector<Block> blocks;
  // Aligned with blocks: |b_k - b_{k-1}| and |a_k - a_{k-1}| (NaN when the
  // previous point does not exist).
  std::vector<double> step_b;
  std::vector<double> step_a;
  StopReason stop_reason = StopReason::max_iterations;
  std::string violation_message;
  int size() const { return static_cast<int>(blocks.size()); }
};

struct GapEstimate {
  double r_star = 0.0;
  double tail_mean = 0.0;  // tail average of D(b_k, a_k); r_star^2 / 2
  double uncertainty = 0.0;  // standard deviation of the tail divergences
  bool feasible = false;
  std::optional<std::pair<Vector, Vector>> limit_pair;  // (b*, a*) when steps stagnated
};

// One building block from b: a_plus = right projection onto A (warm-started
// when a parameter is supplied), b_plus = left projection onto B.
Block step_rl(const Generator& g, const SetSpec& A, const SetSpec& B, const Vector& b,
              const std::optional<Vector>& warm_a = std::nullopt,
              const std::optional<Vector>& warm_b = std::nullopt,
              const SolverOptions& opt = {});

// Drives alternating projections from the start until a stop rule fires.
// Every local solver is warm-started from the previous block, which keeps
// the per-block decrease chain D(b+,a+) <= D(b,a+) <= D(b,a) intact.
Trace run(const Generator& g, const SetSpec& A, const SetSpec& B, const Vector& start,
          const RunConfig& config = {});

// Maps a trace through the gradient of the generator. The image is an
// alternating trace under the conjugate generator between the gradient
// images of the sets with their roles swapped, so rl blocks become lr blocks
// (and vice versa); divergences are preserved crosswise. The image trace has
// one block fewer, since its final block borrows the next primal projection.
Trace dual_transform(const Generator& g, const Trace& trace);

// Tail-average gap of the run: r* with D(b_k, a_k) -> r*^2 / 2. Requires at
// least 10 blocks (TooShort otherwise). feasible means r* is below feas_tol;
// limit_pair is reported only when the final steps are below 1e-8.
GapEstimate detect_gap(const Trace& trace, double feas_tol = 1e-6);

}  // namespace bregalt
