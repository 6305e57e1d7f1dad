#include "bregalt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bregalt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<double> vector_angle(const Vector& u, const Vector& v) {
  double nu = u.norm(), nv = v.norm();
  if (nu < 1e-14 || nv < 1e-14) return std::nullopt;
  double c = u.dot(v) / (nu * nv);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

// Ordinary least squares for y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  double denom = n * sxx - sx * sx;
  f.slope = denom != 0 ? (n * sxy - sx * sy) / denom : 0.0;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

}  // namespace

std::string to_string(RateKind k) {
  switch (k) {
    case RateKind::finite_step:
      return "finite-step";
    case RateKind::linear:
      return "R-linear";
    case RateKind::sublinear:
      return "sublinear";
  }
  return "unknown";
}

std::string to_string(Transversality t) {
  switch (t) {
    case Transversality::transversal:
      return "transversal";
    case Transversality::tangential:
      return "tangential";
    case Transversality::undetermined:
      return "undetermined";
  }
  return "unknown";
}

std::optional<double> angle_rl(const Block& block) {
  return vector_angle(block.b - block.a_plus, block.b_plus - block.a_plus);
}

std::optional<double> angle_lr(const Generator& g, const Block& block) {
  if (!block.a) return std::nullopt;
  for (const Vector* p : {&*block.a, &block.b, &block.a_plus}) {
    if (g.domain.classify(*p, 0.0) != Membership::interior) return std::nullopt;
  }
  Vector gb = g.grad(block.b);
  return vector_angle(g.grad(*block.a) - gb, g.grad(block.a_plus) - gb);
}

std::optional<double> three_point_ell(const Generator& g, const Block& block,
                                      ThreePointSide side) {
  // Both numerators are formed through the identity
  //   D(x,y) - D(x',y) = D(x,x') + <grad f(x') - grad f(y), x - x'>,
  // which avoids the catastrophic cancellation of subtracting two nearly
  // equal divergences once the iterates are close.
  try {
    if (side == ThreePointSide::rl) {
      if (std::isnan(block.D_b_aplus) || std::isnan(block.D_bplus_aplus)) return std::nullopt;
      double denom = divergence(g, block.b, block.b_plus);
      if (denom <= 1e-16 * (1.0 + std::abs(block.D_b_aplus))) return kInf;
      double numer =
          denom + (g.grad(block.b_plus) - g.grad(block.a_plus)).dot(block.b - block.b_plus);
      return numer / denom;
    }
    if (!block.a || std::isnan(block.D_b_a) || std::isnan(block.D_b_aplus)) return std::nullopt;
    double denom = divergence(g, block.a_plus, *block.a);
    if (denom <= 1e-16 * (1.0 + std::abs(block.D_b_a))) return kInf;
    double numer =
        denom + (g.grad(block.a_plus) - g.grad(*block.a)).dot(block.b - block.a_plus);
    return numer / denom;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

std::vector<double> iterate_errors(const Trace& trace) {
  std::vector<double> errs;
  if (trace.blocks.empty()) return errs;
  const Vector& last = trace.blocks.back().b_plus;
  errs.reserve(trace.blocks.size());
  for (const Block& b : trace.blocks) errs.push_back((b.b_plus - last).norm());
  return errs;
}

RateEstimate fit_rate(const std::vector<double>& errors) {
  if (errors.size() < 20) throw TooShort("rate fitting needs at least 20 errors");

  // Exactly-zero tail: the sequence terminated in finitely many steps. A
  // single zero in the final slot is exempt, since distance-to-last-iterate
  // sequences always end with a self-referencing zero that says nothing
  // about termination; the endpoint drop below removes it from the fit.
  std::size_t z = errors.size();
  while (z > 0 && errors[z - 1] == 0.0) --z;
  if (errors.size() - z >= 2) {
    RateEstimate r;
    r.kind = RateKind::finite_step;
    r.fit_window = {static_cast<int>(z), static_cast<int>(errors.size()) - 1};
    return r;
  }

  std::vector<int> kept;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i] >= 1e-13) kept.push_back(static_cast<int>(i));
  }
  if (kept.size() < 10) throw TooShort("too few errors above the floating point floor");
  std::size_t drop = std::max<std::size_t>(1, kept.size() / 10);
  kept.resize(kept.size() - drop);
  std::size_t w = std::min(kept.size(), std::max<std::size_t>(20, kept.size() / 2));
  std::vector<int> window(kept.end() - static_cast<std::ptrdiff_t>(w), kept.end());

  std::vector<double> klin, klog, y;
  for (int idx : window) {
    klin.push_back(static_cast<double>(idx + 1));
    klog.push_back(std::log(static_cast<double>(idx + 1)));
    y.push_back(std::log(errors[static_cast<std::size_t>(idx)]));
  }
  LineFit lin = fit_line(klin, y);
  LineFit pow = fit_line(klog, y);

  RateEstimate r;
  r.fit_window = {window.front(), window.back()};
  double q = std::exp(lin.slope);
  double rho = -pow.slope;
  bool lin_valid = q > 0.0 && q < 1.0;
  bool pow_valid = rho > 0.0;
  if (lin_valid && (!pow_valid || lin.rms <= 1.05 * pow.rms)) {
    r.kind = RateKind::linear;
    r.q = q;
    r.residual = lin.rms;
  } else if (pow_valid) {
    r.kind = RateKind::sublinear;
    r.rho = rho;
    r.residual = pow.rms;
  } else {
    r.kind = RateKind::linear;  // degenerate input; reported as fitted
    r.q = q;
    r.residual = lin.rms;
  }
  return r;
}

AngleConditionProbe angle_condition_probe(const Trace& trace, double r_star,
                                          const std::vector<double>& theta_grid) {
  if (trace.blocks.size() < 10) throw TooShort("angle probe needs at least 10 blocks");
  AngleConditionProbe probe;
  probe.theta_grid = theta_grid;
  bool zero_gap = r_star <= 1e-6;
  probe.sigma_family = zero_gap ? "phi_prime_sq_inv_times_s_inv" : "phi_prime_sq_inv";
  double half_gap = 0.5 * r_star * r_star;

  struct Row {
    double s, dist, one_minus_cos;
  };
  std::vector<Row> rows;
  std::size_t tail_start = trace.blocks.size() / 2;
  for (std::size_t k = tail_start; k < trace.blocks.size(); ++k) {
    const Block& blk = trace.blocks[k];
    auto alpha = angle_rl(blk);
    double s = blk.D_bplus_aplus - half_gap;
    if (!alpha || s <= 1e-300) {
      ++probe.violations;
      continue;
    }
    rows.push_back({s, blk.D_bplus_aplus, 1.0 - std::cos(*alpha)});
  }
  if (rows.size() < 3) throw TooShort("angle probe: too few usable tail blocks");

  probe.gammas.resize(theta_grid.size());
  std::vector<double> slopes(theta_grid.size());
  for (std::size_t t = 0; t < theta_grid.size(); ++t) {
    double theta = theta_grid[t];
    double gamma = kInf;
    std::vector<double> lx, ly;
    for (const Row& row : rows) {
      double term = std::pow(row.s, -2.0 * theta) * row.dist * row.one_minus_cos;
      gamma = std::min(gamma, term);
      if (term > 0) {
        lx.push_back(std::log(row.s));
        ly.push_back(std::log(term));
      }
    }
    probe.gammas[t] = gamma;
    // Vanishing trend: term -> 0 as s -> 0 means positive slope of
    // log term against log s. Constant s across rows gives slope 0.
    double s_spread = 0;
    if (lx.size() >= 2) {
      auto [lo, hi] = std::minmax_element(lx.begin(), lx.end());
      s_spread = *hi - *lo;
    }
    slopes[t] = (s_spread > 1e-6 && lx.size() >= 3) ? fit_line(lx, ly).slope : 0.0;
  }
  std::size_t best = theta_grid.size() - 1;
  for (std::size_t t = 0; t < theta_grid.size(); ++t) {
    if (slopes[t] <= 0.05) {
      best = t;
      break;
    }
  }
  probe.theta_best = theta_grid[best];
  probe.gamma_lower = probe.gammas[best];
  return probe;
}

Transversality classify_transversality(const Trace& trace) {
  std::vector<double> lk, la, angles;
  for (std::size_t k = 0; k < trace.blocks.size(); ++k) {
    auto alpha = angle_rl(trace.blocks[k]);
    if (!alpha || *alpha <= 0) continue;
    angles.push_back(*alpha);
    lk.push_back(std::log(static_cast<double>(k + 1)));
    la.push_back(std::log(*alpha));
  }
  if (angles.size() < 6) return Transversality::undetermined;

  // Decaying angles dominate the classification: a tangential approach can
  // stop while the angles are still above any fixed threshold.
  LineFit decay = fit_line(lk, la);
  if (decay.slope <= -0.2 && angles.back() <= 0.2 * angles.front()) {
    return Transversality::tangential;
  }
  std::size_t m = std::max<std::size_t>(5, angles.size() / 4);
  double min_tail = kInf;
  for (std::size_t i = angles.size() - m; i < angles.size(); ++i) {
    min_tail = std::min(min_tail, angles[i]);
  }
  if (min_tail >= 1e-3) return Transversality::transversal;
  return Transversality::undetermined;
}

}  // namespace bregalt
