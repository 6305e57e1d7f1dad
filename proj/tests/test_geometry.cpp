#include <doctest/doctest.h>

#include <cmath>

#include "bregalt/geometry.hpp"
#include "bregalt/generator.hpp"
#include "bregalt/sets.hpp"
#include "oracles.hpp"

using namespace bregalt;

namespace {

// Boundary point of a left divergence ball along direction d from the center:
// bisection on D(center + t d, center) = radius^2 / 2.
Vector ball_boundary_point(const Generator& g, const BregmanBall& ball, const Vector& d) {
  double level = ball.level();
  double lo = 0.0, hi = 1e-3;
  while (divergence(g, ball.center + hi * d, ball.center) < level) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (divergence(g, ball.center + mid * d, ball.center) < level ? lo : hi) = mid;
  }
  return ball.center + 0.5 * (lo + hi) * d;
}

}  // namespace

TEST_CASE("left geodesic interpolates dual coordinates exactly") {
  Generator gen = make_generator("negentropy", 2);
  Vector b{{0.5, 1.5}}, a{{2.0, 0.7}};
  for (double lam : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    Vector x = left_geodesic(gen, b, a, lam);
    Vector want = gen.conj_grad((1 - lam) * gen.grad(b) + lam * gen.grad(a));
    REQUIRE((x - want).norm() <= 1e-12);
  }
  CHECK((left_geodesic(gen, b, a, 0.0) - b).norm() <= 1e-12);
  CHECK((left_geodesic(gen, b, a, 1.0) - a).norm() <= 1e-12);
}

TEST_CASE("left geodesic raises when the dual path exits the dual domain") {
  Generator gen = make_generator("poisson", 2);
  // grad = exp: the dual segment from (2,2) toward (1,1) hits zero at
  // lambda = 2 and leaves the positive orthant beyond it.
  Vector b = gen.conj_grad(Vector{{2.0, 2.0}});
  Vector a = gen.conj_grad(Vector{{1.0, 1.0}});
  CHECK_NOTHROW(left_geodesic(gen, b, a, 1.5));
  CHECK_THROWS_AS(left_geodesic(gen, b, a, 2.5), DomainError);
}

TEST_CASE("projections onto a convex set are constant along the left geodesic") {
  Generator gen = make_generator("negentropy", 2);
  SetSpec seg = make_parametric(
      make_parametric_map("segment", {{"from", {0.2, 0.3}}, {"to", {2.5, 1.2}}}), 2048);
  seg.declared_convex = true;
  auto g = oracle::rng(51);
  for (int t = 0; t < 12; ++t) {
    Vector a_plus = oracle::uniform_vec(g, 2, 0.4, 2.2);
    ProjectionResult pb = left_project(gen, seg, a_plus);
    Vector b_plus = pb.point;
    if ((b_plus - a_plus).norm() < 1e-6) continue;
    for (double lam : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
      Vector mid = left_geodesic(gen, b_plus, a_plus, lam);
      ProjectionResult again = left_project(gen, seg, mid, pb.param);
      REQUIRE((again.point - b_plus).norm() <= 1e-8);
    }
  }
}

TEST_CASE("right projections are constant along the segment back to the source") {
  Generator gen = make_generator("euclidean", 2);
  SetSpec circ = make_parametric(
      make_parametric_map("circle", {{"center", {0.0, 0.0}}, {"radius", 1.0}}), 2048);
  auto g = oracle::rng(52);
  for (int t = 0; t < 12; ++t) {
    Vector b = oracle::uniform_vec(g, 2, -3, 3);
    if (b.norm() < 1.3) continue;  // keep the global projection unambiguous
    ProjectionResult pa = right_project(gen, circ, b);
    Vector a_plus = pa.point;
    for (double lam : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      Vector mid = right_geodesic(b, a_plus, lam);
      ProjectionResult again = right_project(gen, circ, mid, pa.param);
      REQUIRE((again.point - a_plus).norm() <= 1e-8);
    }
  }
}

TEST_CASE("divergence ball membership uses the half-squared-radius level") {
  Generator gen = make_generator("euclidean", 2);
  BregmanBall ball{BallSide::left, Vector{{1.0, -1.0}}, 2.0};
  CHECK(ball.contains(gen, Vector{{1.0, -1.0}}));
  CHECK(ball.contains(gen, Vector{{3.0, -1.0}}));          // boundary
  CHECK_FALSE(ball.contains(gen, Vector{{3.1, -1.0}}));
  CHECK(ball.level() == doctest::Approx(2.0));
}

TEST_CASE("curvature of a quadratic-generator ball is the inverse radius") {
  Generator gen = make_generator("euclidean", 2);
  for (double r : {0.5, 1.0, 2.5}) {
    BregmanBall ball{BallSide::left, Vector{{0.3, 0.8}}, r};
    CurvatureBounds cb = curvature_bounds(gen, ball, 32, 1, 16);
    CHECK(cb.kappa_lo == doctest::Approx(1.0 / r).epsilon(1e-6));
    CHECK(cb.kappa_hi == doctest::Approx(1.0 / r).epsilon(1e-6));
    CHECK(cb.inner_radius == doctest::Approx(r).epsilon(1e-6));
    CHECK(cb.outer_radius == doctest::Approx(r).epsilon(1e-6));
  }
}

TEST_CASE("a ball of the reported inner radius rolls freely inside an entropy ball") {
  Generator gen = make_generator("negentropy", 2);
  BregmanBall ball{BallSide::left, Vector{{1.0, 1.0}}, 0.8};
  CurvatureBounds cb = curvature_bounds(gen, ball, 48, 1, 24);
  REQUIRE(cb.inner_radius > 0.0);

  auto g = oracle::rng(53);
  int checked = 0;
  while (checked < 1000) {
    double phi = oracle::uniform(g, -M_PI, M_PI);
    Vector dir{{std::cos(phi), std::sin(phi)}};
    Vector x0 = ball_boundary_point(gen, ball, dir);
    // Inward unit normal of the sublevel boundary at x0.
    Vector n = gen.grad(x0) - gen.grad(ball.center);
    n /= n.norm();
    Vector tangent_center = x0 - cb.inner_radius * n;
    // Sample the tangent euclidean ball, shrunk by a hair against rounding.
    for (int s = 0; s < 25 && checked < 1000; ++s, ++checked) {
      double rho = cb.inner_radius * (1.0 - 1e-9) * std::sqrt(oracle::uniform(g, 0, 1));
      double psi = oracle::uniform(g, -M_PI, M_PI);
      Vector p = tangent_center + rho * Vector{{std::cos(psi), std::sin(psi)}};
      REQUIRE(ball.contains(gen, p, 1e-9));
    }
  }
}

TEST_CASE("proximal normals point back to their projections") {
  Generator gen = make_generator("negentropy", 2);
  SetSpec fin = make_finite({Vector{{0.5, 0.5}}, Vector{{2.0, 1.0}}, Vector{{1.0, 2.5}}});
  auto g = oracle::rng(54);
  for (int t = 0; t < 30; ++t) {
    Vector a = oracle::uniform_vec(g, 2, 0.3, 2.5);
    ProjectionResult pb = left_project(gen, fin, a);
    Vector b_plus = pb.point;
    if ((b_plus - a).norm() < 1e-9) continue;
    Block blk;
    blk.b = a;
    blk.a_plus = a;
    blk.b_plus = b_plus;
    auto [n_B, n_A] = proximal_normals(gen, blk);
    REQUIRE((n_B - (gen.grad(a) - gen.grad(b_plus))).norm() <= 1e-12);
    // Points slightly along the normal (in dual coordinates) keep b_plus as
    // their projection.
    for (double s : {0.1, 0.5, 0.9}) {
      Vector y = left_geodesic(gen, b_plus, a, s);
      ProjectionResult again = left_project(gen, fin, y);
      REQUIRE((again.point - b_plus).norm() == 0.0);
    }
  }
}

TEST_CASE("reach of a circle from inside recovers its radius") {
  Generator gen = make_generator("euclidean", 2);
  const double R = 1.0;
  SetSpec circ = make_parametric(
      make_parametric_map("circle", {{"center", {0.0, 0.0}}, {"radius", R}}), 4096);
  Vector a_plus{{0.9, 0.0}};  // interior point on the inward ray
  Vector b_plus{{R, 0.0}};    // its metric projection onto the circle
  ReachEstimate re = estimate_reach(gen, circ, b_plus, a_plus, 2000);
  REQUIRE_FALSE(re.capped);
  CHECK(re.value == doctest::Approx(R).epsilon(0.02));
  REQUIRE(!re.probes.empty());
  for (const ReachProbe& p : re.probes) REQUIRE(p.radius >= 0.0);
}

TEST_CASE("reach estimation refuses foot points that are not projections") {
  Generator gen = make_generator("euclidean", 2);
  SetSpec circ = make_parametric(
      make_parametric_map("circle", {{"center", {0.0, 0.0}}, {"radius", 1.0}}), 2048);
  Vector not_projection{{std::cos(0.5), std::sin(0.5)}};
  Vector a_plus{{0.9, 0.0}};
  CHECK_THROWS_AS(estimate_reach(gen, circ, not_projection, a_plus, 500), NotProjectedOn);
}

TEST_CASE("reach of a flat segment is uncapped") {
  Generator gen = make_generator("euclidean", 2);
  SetSpec seg = make_parametric(
      make_parametric_map("segment", {{"from", {-3.0, 0.0}}, {"to", {3.0, 0.0}}}), 2048);
  Vector a_plus{{0.4, 1.0}};
  Vector b_plus{{0.4, 0.0}};
  ReachEstimate re = estimate_reach(gen, seg, b_plus, a_plus, 800);
  CHECK(re.capped);
  CHECK(std::isinf(re.value));
}
