#include "bregalt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bregalt/rng.hpp"

namespace bregalt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

bool BregmanBall::contains(const Generator& g, const Vector& x, double tol) const {
  try {
    double d = side == BallSide::left ? divergence(g, x, center) : divergence(g, center, x);
    return d <= level() + tol;
  } catch (const DomainError&) {
    return false;
  }
}

Vector left_geodesic(const Generator& g, const Vector& b_plus, const Vector& a_plus,
                     double lambda) {
  if (lambda < 0) throw DomainError("left geodesic: parameter must be nonnegative");
  Vector z = (1.0 - lambda) * g.grad(b_plus) + lambda * g.grad(a_plus);
  if (g.dual_domain.classify(z, 0.0) != Membership::interior) {
    throw DomainError("left geodesic: dual point leaves the dual domain");
  }
  return g.conj_grad(z);
}

Vector right_geodesic(const Vector& b, const Vector& a_plus, double lambda) {
  return lambda * b + (1.0 - lambda) * a_plus;
}

std::pair<Vector, Vector> proximal_normals(const Generator& g, const Block& block) {
  if (g.domain.classify(block.a_plus, 0.0) != Membership::interior ||
      g.domain.classify(block.b_plus, 0.0) != Membership::interior) {
    throw DomainError("proximal normals need interior block points");
  }
  Vector n_B = g.grad(block.a_plus) - g.grad(block.b_plus);
  Vector n_A = g.hessian(block.a_plus) * (block.b - block.a_plus);
  return {n_B, n_A};
}

namespace {

// Boundary point of a left ball along the ray center + t * dir: the smallest
// t with D(center + t dir, center) at the ball level. Raises DomainError when
// the ray exits the generator domain before reaching the level (the ball is
// then not contained in the domain).
Vector ball_boundary_point(const Generator& g, const BregmanBall& ball, const Vector& dir) {
  auto depth = [&](double t) -> double {
    try {
      return divergence(g, ball.center + t * dir, ball.center) - ball.level();
    } catch (const DomainError&) {
      return kInf;  // outside dom f: past every boundary of interest
    }
  };
  double hi = 1.0;
  int grow = 0;
  for (; grow < 200 && depth(hi) < 0; ++grow) hi *= 2.0;
  if (grow >= 200) throw DomainError("ball boundary not found along sampled ray");
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (depth(mid) < 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  Vector x = ball.center + 0.5 * (lo + hi) * dir;
  double d = depth(0.5 * (lo + hi));
  if (!std::isfinite(d) || std::abs(d) > 1e-6 * (1.0 + ball.level()) ||
      g.domain.classify(x, 0.0) != Membership::interior) {
    throw DomainError("ball is not contained in the domain interior");
  }
  return x;
}

}  // namespace

CurvatureBounds curvature_bounds(const Generator& g, const BregmanBall& ball,
                                 int boundary_samples, unsigned seed,
                                 int directions_per_point, par::Exec exec) {
  if (ball.side != BallSide::left) {
    throw DomainError("curvature bounds are defined for left balls");
  }
  if (!(ball.radius > 0)) throw DegenerateBall("curvature bounds need a positive radius");
  if (boundary_samples < 1) throw DomainError("need at least one boundary sample");
  if (g.domain.classify(ball.center, 0.0) != Membership::interior) {
    throw DomainError("ball center must be interior to the domain");
  }
  const int d = g.dim;
  // All randomness is drawn up front in a fixed order so the parallel
  // reduction below is deterministic.
  std::mt19937_64 rng(seed);
  auto unit_gaussian = [&]() {
    Vector v(d);
    double n = 0;
    do {
      for (int i = 0; i < d; ++i) v[i] = gaussian(rng);
      n = v.norm();
    } while (n < 1e-12);
    return Vector(v / n);
  };
  std::vector<Vector> rays(static_cast<std::size_t>(boundary_samples));
  std::vector<std::vector<Vector>> tangents(static_cast<std::size_t>(boundary_samples));
  for (int s = 0; s < boundary_samples; ++s) {
    rays[static_cast<std::size_t>(s)] = unit_gaussian();
    tangents[static_cast<std::size_t>(s)].reserve(static_cast<std::size_t>(directions_per_point));
    for (int j = 0; j < directions_per_point; ++j) {
      tangents[static_cast<std::size_t>(s)].push_back(unit_gaussian());
    }
  }

  auto minmax = par::reduce_minmax(boundary_samples, exec, [&](std::ptrdiff_t s) {
    Vector x = ball_boundary_point(g, ball, rays[static_cast<std::size_t>(s)]);
    Vector n = g.grad(x) - g.grad(ball.center);
    double nn = n.norm();
    Matrix H = g.hessian(x);
    par::MinMax local;
    for (const Vector& t : tangents[static_cast<std::size_t>(s)]) {
      Vector v = t - t.dot(n) / (nn * nn) * n;
      double vn = v.norm();
      if (vn < 1e-10) continue;
      v /= vn;
      double kappa = v.dot(H * v) / nn;
      local.min = std::min(local.min, kappa);
      local.max = std::max(local.max, kappa);
    }
    return local;
  });
  if (!(minmax.min <= minmax.max)) {
    throw DomainError("no tangential direction survived projection at the boundary samples");
  }

  CurvatureBounds out;
  out.kappa_lo = minmax.min;
  out.kappa_hi = minmax.max;
  out.inner_radius = 1.0 / out.kappa_hi;
  out.outer_radius = 1.0 / out.kappa_lo;
  return out;
}

namespace {

// Deterministic lattice over the parameter box of a parametric set, matching
// the density used by the global projection scan.
std::vector<Vector> sample_set_points(const SetSpec& B, int grid) {
  if (const auto* fs = std::get_if<FiniteSet>(&B.body)) return fs->points;
  const auto* ps = std::get_if<ParametricSet>(&B.body);
  if (!ps) throw DomainError("reach estimation needs a parametric or finite set");
  const ParametricMap& map = ps->map;
  int k = map.param_dim;
  long per_dim = std::max<long>(2, static_cast<long>(std::floor(std::pow(double(grid), 1.0 / k))));
  long total = 1;
  for (int i = 0; i < k; ++i) {
    if (total > 4L * grid) break;
    total *= per_dim + 1;
  }
  total = std::min<long>(total, 4L * grid);
  std::vector<Vector> pts;
  pts.reserve(static_cast<std::size_t>(total));
  for (long flat = 0; flat < total; ++flat) {
    Vector u(k);
    long rest = flat;
    for (int i = 0; i < k; ++i) {
      long idx = rest % (per_dim + 1);
      rest /= (per_dim + 1);
      u[i] = map.lo[i] + (map.hi[i] - map.lo[i]) * double(idx) / double(per_dim);
    }
    pts.push_back(map.map(u));
  }
  return pts;
}

}  // namespace

ReachEstimate estimate_reach(const Generator& g, const SetSpec& B, const Vector& b_plus,
                             const Vector& a_plus, int grid, par::Exec exec) {
  ProjectionResult lp = left_project(g, B, a_plus);
  double d0 = divergence(g, b_plus, a_plus);
  if (!B.contains(b_plus, &g) || d0 > lp.value + 1e-6 * (1.0 + std::abs(lp.value))) {
    throw NotProjectedOn("base point is not a left projection of the center onto the set");
  }
  if (d0 < 1e-18) {
    throw DegenerateBall("base point coincides with the ball center");
  }

  ReachEstimate est;
  Vector n = g.grad(a_plus) - g.grad(b_plus);
  est.direction = n / n.norm();

  std::vector<Vector> pts = sample_set_points(B, grid);
  long samples = 0;

  // Open-ball emptiness at geodesic parameter lambda; also reports the ball
  // radius there. Infeasible when the geodesic leaves the dual domain.
  auto probe = [&](double lambda, double& radius_out) -> bool {
    Vector center;
    try {
      center = left_geodesic(g, b_plus, a_plus, lambda);
    } catch (const DomainError&) {
      radius_out = kInf;
      est.probes.push_back({lambda, kInf, false});
      return false;
    }
    double level = divergence(g, b_plus, center);
    radius_out = std::sqrt(2.0 * level);
    double strict = level * (1.0 - 1e-9) - 1e-12;
    auto n_pts = static_cast<std::ptrdiff_t>(pts.size());
    double dmin = par::reduce_min(n_pts, exec, [&](std::ptrdiff_t i) {
      try {
        return divergence(g, pts[static_cast<std::size_t>(i)], center);
      } catch (const DomainError&) {
        return kInf;
      }
    });
    samples += n_pts;
    bool empty = dmin >= strict;
    est.probes.push_back({lambda, radius_out, empty});
    return empty;
  };

  constexpr double kLambdaCap = 1e6;
  double r_ok = std::sqrt(2.0 * d0);
  est.probes.push_back({1.0, r_ok, true});  // the verified projection ball
  double lam_ok = 1.0;
  double lam_bad = 0.0;
  double r_bad = kInf;
  for (double lam = 2.0; lam <= kLambdaCap; lam *= 2.0) {
    double r = 0;
    if (probe(lam, r)) {
      lam_ok = lam;
      r_ok = r;
    } else {
      lam_bad = lam;
      r_bad = r;
      break;
    }
  }
  if (lam_bad == 0.0) {
    est.value = kInf;
    est.capped = true;
    est.lambda = kLambdaCap;
    est.samples_used = samples;
    return est;
  }
  while ((std::isfinite(r_bad) ? r_bad - r_ok > 1e-6 : true) &&
         lam_bad - lam_ok > 1e-12 * lam_bad) {
    double mid = 0.5 * (lam_ok + lam_bad);
    double r = 0;
    if (probe(mid, r)) {
      lam_ok = mid;
      r_ok = r;
    } else {
      lam_bad = mid;
      r_bad = r;
    }
  }
  est.value = r_ok;
  est.lambda = lam_ok;
  est.samples_used = samples;
  return est;
}

}  // namespace bregalt
