#include "bregalt/alternator.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace bregalt {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(Orientation o) { return o == Orientation::rl ? "rl" : "lr"; }

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::divergence_stagnation:
      return "divergence-stagnation";
    case StopReason::step_stagnation:
      return "step-stagnation";
    case StopReason::max_iterations:
      return "max-iterations";
    case StopReason::domain_violation:
      return "domain-violation";
  }
  return "unknown";
}

Block step_rl(const Generator& g, const SetSpec& A, const SetSpec& B, const Vector& b,
              const std::optional<Vector>& warm_a, const std::optional<Vector>& warm_b,
              const SolverOptions& opt) {
  Block blk;
  blk.b = b;
  ProjectionResult ra = right_project(g, A, b, warm_a, opt);
  blk.a_plus = ra.point;
  blk.a_plus_param = ra.param;
  blk.D_b_aplus = ra.value;
  ProjectionResult rb = left_project(g, B, ra.point, warm_b, opt);
  blk.b_plus = rb.point;
  blk.b_plus_param = rb.param;
  blk.D_bplus_aplus = rb.value;
  return blk;
}

namespace {

bool interior_ok(const Generator& g, const Vector& x, double margin) {
  return g.domain.classify(x, margin) == Membership::interior;
}

struct StopCheck {
  bool fired = false;
  StopReason reason = StopReason::max_iterations;
};

StopCheck check_stop(const StopRules& rules, double d0, double d_prev, double d_cur,
                     double step_b, double step_a, bool have_prev_d) {
  StopCheck s;
  double scale = 1.0 + std::abs(d0);
  if (have_prev_d && std::abs(d_cur - d_prev) < rules.divergence_stagnation * scale &&
      d_cur > rules.divergence_floor * scale) {
    s.fired = true;
    s.reason = StopReason::divergence_stagnation;
    return s;
  }
  double total_step = step_b + (std::isnan(step_a) ? 0.0 : step_a);
  if (total_step < rules.step_stagnation) {
    s.fired = true;
    s.reason = StopReason::step_stagnation;
  }
  return s;
}

}  // namespace

Trace run(const Generator& g, const SetSpec& A, const SetSpec& B, const Vector& start,
          const RunConfig& config) {
  Trace tr;
  tr.orientation = config.orientation;
  const StopRules& rules = config.stop;

  if (!interior_ok(g, start, rules.interiority_margin)) {
    tr.stop_reason = StopReason::domain_violation;
    tr.violation_message = "start point is not interior to the domain";
    return tr;
  }

  double d0 = kNaN;
  auto note_d0 = [&](double d) {
    if (std::isnan(d0)) d0 = d;
  };

  if (config.orientation == Orientation::rl) {
    Vector b_cur = start;
    std::optional<Vector> a_prev;
    std::optional<Vector> warm_a;
    std::optional<Vector> warm_b = config.start_param;
    double d_prev = kNaN;
    for (int k = 0; k < rules.max_iterations; ++k) {
      Block blk;
      blk.b = b_cur;
      blk.a = a_prev;
      blk.D_b_a = tr.blocks.empty() ? kNaN : tr.blocks.back().D_bplus_aplus;

      ProjectionResult ra = right_project(g, A, b_cur, warm_a, config.solver);
      if (!interior_ok(g, ra.point, rules.interiority_margin)) {
        tr.stop_reason = StopReason::domain_violation;
        tr.violation_message = "right projection left the domain interior";
        return tr;
      }
      blk.a_plus = ra.point;
      blk.a_plus_param = ra.param;
      blk.D_b_aplus = ra.value;
      note_d0(ra.value);

      ProjectionResult rb = left_project(g, B, ra.point, warm_b, config.solver);
      if (!interior_ok(g, rb.point, rules.interiority_margin)) {
        tr.stop_reason = StopReason::domain_violation;
        tr.violation_message = "left projection left the domain interior";
        return tr;
      }
      blk.b_plus = rb.point;
      blk.b_plus_param = rb.param;
      blk.D_bplus_aplus = rb.value;

      double sb = (rb.point - b_cur).norm();
      double sa = a_prev ? (ra.point - *a_prev).norm() : kNaN;
      tr.blocks.push_back(blk);
      tr.step_b.push_back(sb);
      tr.step_a.push_back(sa);

      StopCheck s = check_stop(rules, d0, d_prev, blk.D_bplus_aplus, sb, sa,
                               !std::isnan(d_prev));
      if (s.fired) {
        tr.stop_reason = s.reason;
        return tr;
      }
      d_prev = blk.D_bplus_aplus;
      a_prev = ra.point;
      warm_a = ra.param;
      warm_b = rb.param;
      b_cur = rb.point;
    }
    tr.stop_reason = StopReason::max_iterations;
    return tr;
  }

  // lr orientation: blocks overlap by one left projection, so the chain is
  // computed once and each block borrows the next b. The start lies on A, so
  // start_param warm starts the first right projection.
  Vector a_prev = start;
  std::optional<Vector> warm_a = config.start_param;
  ProjectionResult b_cur = left_project(g, B, a_prev, std::nullopt, config.solver);
  if (!interior_ok(g, b_cur.point, rules.interiority_margin)) {
    tr.stop_reason = StopReason::domain_violation;
    tr.violation_message = "left projection left the domain interior";
    return tr;
  }
  double d_prev = kNaN;
  for (int k = 0; k < rules.max_iterations; ++k) {
    Block blk;
    blk.a = a_prev;
    blk.b = b_cur.point;
    blk.D_b_a = b_cur.value;
    note_d0(b_cur.value);

    ProjectionResult ra = right_project(g, A, b_cur.point, warm_a, config.solver);
    if (!interior_ok(g, ra.point, rules.interiority_margin)) {
      tr.stop_reason = StopReason::domain_violation;
      tr.violation_message = "right projection left the domain interior";
      return tr;
    }
    blk.a_plus = ra.point;
    blk.a_plus_param = ra.param;
    blk.D_b_aplus = ra.value;

    ProjectionResult rb = left_project(g, B, ra.point, b_cur.param, config.solver);
    if (!interior_ok(g, rb.point, rules.interiority_margin)) {
      tr.stop_reason = StopReason::domain_violation;
      tr.violation_message = "left projection left the domain interior";
      return tr;
    }
    blk.b_plus = rb.point;
    blk.b_plus_param = rb.param;
    blk.D_bplus_aplus = rb.value;

    double sb = (rb.point - b_cur.point).norm();
    double sa = (ra.point - a_prev).norm();
    tr.blocks.push_back(blk);
    tr.step_b.push_back(sb);
    tr.step_a.push_back(sa);

    StopCheck s = check_stop(rules, d0, d_prev, blk.D_bplus_aplus, sb, sa,
                             !std::isnan(d_prev));
    if (s.fired) {
      tr.stop_reason = s.reason;
      return tr;
    }
    d_prev = blk.D_bplus_aplus;
    a_prev = ra.point;
    warm_a = ra.param;
    b_cur = rb;
  }
  tr.stop_reason = StopReason::max_iterations;
  return tr;
}

Trace dual_transform(const Generator& g, const Trace& trace) {
  Trace out;
  out.orientation = trace.orientation == Orientation::rl ? Orientation::lr : Orientation::rl;
  out.stop_reason = trace.stop_reason;
  if (trace.blocks.size() < 2) return out;

  Generator conj = g.conjugate();
  auto to_dual = [&](const Vector& x) {
    if (g.domain.classify(x, 0.0) != Membership::interior) {
      throw DomainError("dual transform needs interior trace points");
    }
    return g.grad(x);
  };

  for (std::size_t k = 0; k + 1 < trace.blocks.size(); ++k) {
    const Block& cur = trace.blocks[k];
    const Block& nxt = trace.blocks[k + 1];
    Block d;
    d.a = to_dual(cur.b);
    d.b = to_dual(cur.a_plus);
    d.a_plus = to_dual(cur.b_plus);
    d.b_plus = to_dual(nxt.a_plus);
    d.D_b_a = divergence(conj, d.b, *d.a);
    d.D_b_aplus = divergence(conj, d.b, d.a_plus);
    d.D_bplus_aplus = divergence(conj, d.b_plus, d.a_plus);
    out.blocks.push_back(std::move(d));
  }
  for (std::size_t k = 0; k < out.blocks.size(); ++k) {
    const Block& b = out.blocks[k];
    out.step_b.push_back(k == 0 ? kNaN : (b.b - out.blocks[k - 1].b).norm());
    out.step_a.push_back(k == 0 ? kNaN : (b.a_plus - out.blocks[k - 1].a_plus).norm());
  }
  return out;
}

GapEstimate detect_gap(const Trace& trace, double feas_tol) {
  const auto n = trace.blocks.size();
  if (n < 10) throw TooShort("gap detection needs at least 10 blocks");
  std::size_t m = std::max<std::size_t>(5, n / 4);
  double mean = 0.0;
  for (std::size_t k = n - m; k < n; ++k) mean += trace.blocks[k].D_bplus_aplus;
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (std::size_t k = n - m; k < n; ++k) {
    double d = trace.blocks[k].D_bplus_aplus - mean;
    var += d * d;
  }
  var /= static_cast<double>(m);

  GapEstimate gap;
  gap.tail_mean = mean;
  gap.uncertainty = std::sqrt(var);
  gap.r_star = std::sqrt(2.0 * std::max(0.0, mean));
  gap.feasible = gap.r_star <= feas_tol;
  double last_step = trace.step_b.back() +
                     (std::isnan(trace.step_a.back()) ? 0.0 : trace.step_a.back());
  if (last_step <= 1e-8) {
    gap.limit_pair = std::make_pair(trace.blocks.back().b_plus, trace.blocks.back().a_plus);
  }
  return gap;
}

}  // namespace bregalt
