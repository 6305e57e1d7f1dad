#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bregalt/block.hpp"
#include "bregalt/generator.hpp"
#include "bregalt/parallel.hpp"
#include "bregalt/sets.hpp"
#include "bregalt/types.hpp"

namespace bregalt {

enum class BallSide { left, right };

// Divergence ball of radius r: membership at divergence level r^2 / 2. The
// left ball collects x with D(x, center) below the level (center is the
// divergence's second argument); the right ball uses D(center, x).
struct BregmanBall {
  BallSide side = BallSide::left;
  Vector center;
  double radius = 0.0;

  double level() const { return 0.5 * radius * radius; }
  bool contains(const Generator& g, const Vector& x, double tol = 1e-12) const;
};

// Extremes of the normal curvature over sampled boundary points of a left
// ball, with the induced rolling radii (inner = 1/kappa_hi, outer =
// 1/kappa_lo): a euclidean ball of inner_radius rolls freely inside.
struct CurvatureBounds {
  double kappa_lo = 0.0;
  double kappa_hi = 0.0;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
};

struct ReachProbe {
  double lambda = 0.0;
  double radius = 0.0;
  bool empty_interior = false;
};

struct ReachEstimate {
  double value = 0.0;  // largest empty-interior ball radius found; +inf if uncapped
  Vector direction;    // unit normal at the base point (dual-space difference)
  std::string method = "bisection-on-geodesic";
  long samples_used = 0;
  bool capped = false;  // true when the expansion hit the parameter cap (value = +inf)
  double lambda = 1.0;  // geodesic parameter at the reported radius
  std::vector<ReachProbe> probes;  // every (lambda, radius, emptiness) test, in order
};

// Dual-space interpolation from b_plus (lambda = 0) to a_plus (lambda = 1),
// extended beyond a_plus for lambda > 1: conj_grad((1-lambda) grad f(b+) +
// lambda grad f(a+)). Raises DomainError when the interpolated dual point
// leaves the dual domain (possible for generators that are not 1-coercive).
Vector left_geodesic(const Generator& g, const Vector& b_plus, const Vector& a_plus,
                     double lambda);

// Straight-line interpolation from a_plus (lambda = 0) to b (lambda = 1);
// right projections onto A are invariant along it.
Vector right_geodesic(const Vector& b, const Vector& a_plus, double lambda);

// Proximal normals generated by one block: n_B = grad f(a+) - grad f(b+) is
// normal to B at b_plus; n_A = hess f(a+) (b - a+) is normal to A at a_plus.
std::pair<Vector, Vector> proximal_normals(const Generator& g, const Block& block);

// Samples `boundary_samples` boundary points of a left ball (random rays from
// the center, seeded) and, at each, tangential directions; returns the
// min/max of <v, hess f(x) v> / |grad f(x) - grad f(center)| over all
// samples. Raises DegenerateBall for radius 0 and DomainError when a sampled
// boundary point leaves the domain interior.
CurvatureBounds curvature_bounds(const Generator& g, const BregmanBall& ball,
                                 int boundary_samples, unsigned seed = 0,
                                 int directions_per_point = 32,
                                 par::Exec exec = par::Exec::openmp);

// Grows a left ball through b_plus along the left geodesic from b_plus
// through a_plus (parameter doubling then bisection, radius tolerance 1e-6)
// and reports the largest radius whose open ball stays clear of B on a
// parameter grid of the given density. Verifies first that b_plus is a left
// projection of a_plus onto B (NotProjectedOn otherwise). The result is a
// sampled estimate, not a certificate.
ReachEstimate estimate_reach(const Generator& g, const SetSpec& B, const Vector& b_plus,
                             const Vector& a_plus, int grid = 1000,
                             par::Exec exec = par::Exec::openmp);

}  // namespace bregalt
