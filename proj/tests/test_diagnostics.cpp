#include <doctest/doctest.h>

#include <cmath>

#include "bregalt/alternator.hpp"
#include "bregalt/diagnostics.hpp"
#include "bregalt/generator.hpp"
#include "bregalt/sets.hpp"
#include "oracles.hpp"

using namespace bregalt;

namespace {

SetSpec x_axis() {
  Matrix basis(2, 1);
  basis << 1, 0;
  SetSpec s = make_affine(Vector{{0.0, 0.0}}, basis);
  s.declared_convex = true;
  return s;
}

SetSpec line_60() {
  Matrix basis(2, 1);
  basis << 0.5, std::sqrt(3.0) / 2.0;
  SetSpec s = make_affine(Vector{{0.0, 0.0}}, basis);
  s.declared_convex = true;
  return s;
}

Trace run_two_lines(int blocks) {
  Generator gen = make_generator("euclidean", 2);
  RunConfig cfg;
  cfg.stop.max_iterations = blocks;
  cfg.stop.divergence_stagnation = 0.0;
  cfg.stop.step_stagnation = 0.0;
  return run(gen, x_axis(), line_60(), 16.0 * Vector{{0.5, std::sqrt(3.0) / 2.0}}, cfg);
}

Trace run_entropy_segments(int blocks) {
  Generator gen = make_generator("negentropy", 2);
  SetSpec segA = make_parametric(
      make_parametric_map("segment", {{"from", {0.4, 0.3}}, {"to", {2.0, 1.8}}}), 1024);
  SetSpec segB = make_parametric(
      make_parametric_map("segment", {{"from", {0.2, 1.0}}, {"to", {2.5, 0.6}}}), 1024);
  const ParametricMap& pm = std::get<ParametricSet>(segB.body).map;
  RunConfig cfg;
  cfg.stop.max_iterations = blocks;
  cfg.stop.divergence_stagnation = 0.0;
  cfg.stop.step_stagnation = 0.0;
  cfg.start_param = Vector::Constant(1, 0.8);
  return run(gen, segA, segB, pm.map(Vector::Constant(1, 0.8)), cfg);
}

Trace run_tangent_parabola(int blocks) {
  Generator gen = make_generator("euclidean", 2);
  SetSpec par = make_parametric(
      make_parametric_map("parabola", {{"coeff", 1.0}, {"lo", -1.5}, {"hi", 1.5}}), 1024);
  const ParametricMap& pm = std::get<ParametricSet>(par.body).map;
  RunConfig cfg;
  cfg.stop.max_iterations = blocks;
  cfg.stop.divergence_stagnation = 0.0;
  cfg.stop.step_stagnation = 0.0;
  cfg.start_param = Vector::Constant(1, 1.2);
  return run(gen, x_axis(), par, pm.map(Vector::Constant(1, 1.2)), cfg);
}

}  // namespace

TEST_CASE("block angle between crossing lines equals the crossing angle") {
  Trace tr = run_two_lines(20);
  for (int k = 0; k < tr.size(); ++k) {
    auto alpha = angle_rl(tr.blocks[k]);
    REQUIRE(alpha.has_value());
    REQUIRE(std::abs(*alpha - M_PI / 3.0) <= 1e-10);
  }

  Block degenerate = tr.blocks[0];
  degenerate.b = degenerate.a_plus;
  CHECK_FALSE(angle_rl(degenerate).has_value());
  CHECK_FALSE(angle_lr(make_generator("euclidean", 2), tr.blocks[0]).has_value());
}

TEST_CASE("dual-space angle equals the primal angle of the transformed trace") {
  Generator euclid = make_generator("euclidean", 2);
  Trace tr = run_two_lines(12);
  Trace dual = dual_transform(euclid, tr);
  for (int k = 0; k < dual.size(); ++k) {
    auto prim = angle_lr(euclid, tr.blocks[k + 1]);
    auto dl = angle_rl(dual.blocks[k]);
    REQUIRE(prim.has_value());
    REQUIRE(dl.has_value());
    REQUIRE(std::abs(*prim - *dl) <= 1e-10);
  }

  Generator entropy = make_generator("negentropy", 2);
  Trace trs = run_entropy_segments(12);
  Trace duals = dual_transform(entropy, trs);
  int compared = 0;
  for (int k = 0; k < duals.size(); ++k) {
    auto prim = angle_lr(entropy, trs.blocks[k + 1]);
    auto dl = angle_rl(duals.blocks[k]);
    if (!prim || !dl) continue;  // fully converged blocks degenerate
    REQUIRE(std::abs(*prim - *dl) <= 1e-10);
    ++compared;
  }
  CHECK(compared >= 5);
}

TEST_CASE("three-point constant is 1 for orthogonal splittings and >= 1 on convex sets") {
  Trace tr = run_two_lines(12);
  for (int k = 0; k < tr.size(); ++k) {
    auto ell = three_point_ell(make_generator("euclidean", 2), tr.blocks[k], ThreePointSide::rl);
    REQUIRE(ell.has_value());
    if (std::isinf(*ell)) continue;
    REQUIRE(*ell >= 1.0 - 1e-9);
    REQUIRE(*ell == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Left projections onto a convex set keep ell >= 1 under any generator.
  Generator entropy = make_generator("negentropy", 2);
  Trace trs = run_entropy_segments(12);
  for (int k = 0; k < trs.size(); ++k) {
    auto ell = three_point_ell(entropy, trs.blocks[k], ThreePointSide::rl);
    REQUIRE(ell.has_value());
    REQUIRE(*ell >= 1.0 - 1e-9);
  }
}

TEST_CASE("lr three-point constant mirrors the rl constant of the dual trace") {
  Generator entropy = make_generator("negentropy", 2);
  Generator conj = entropy.conjugate();
  Trace tr = run_entropy_segments(12);
  Trace dual = dual_transform(entropy, tr);
  int compared = 0;
  for (int k = 0; k < dual.size(); ++k) {
    auto prim = three_point_ell(entropy, tr.blocks[k + 1], ThreePointSide::lr);
    auto dl = three_point_ell(conj, dual.blocks[k], ThreePointSide::rl);
    REQUIRE(prim.has_value());
    REQUIRE(dl.has_value());
    if (std::isinf(*prim) || std::isinf(*dl)) {
      CHECK(std::isinf(*prim) == std::isinf(*dl));
      continue;
    }
    REQUIRE(std::abs(*prim - *dl) <= 1e-9 * (1.0 + std::abs(*prim)));
    ++compared;
  }
  CHECK(compared >= 5);
}

TEST_CASE("three-point constant is infinite on a stationary block") {
  Generator gen = make_generator("euclidean", 2);
  Matrix basis(2, 1);
  basis << 1, 0;
  SetSpec A = make_affine(Vector{{0.0, 0.0}}, basis);
  SetSpec B = make_affine(Vector{{0.0, 1.0}}, basis);
  RunConfig cfg;
  cfg.stop.max_iterations = 4;
  cfg.stop.divergence_stagnation = 0.0;
  cfg.stop.step_stagnation = 0.0;
  Trace tr = run(gen, A, B, Vector{{2.0, 1.0}}, cfg);
  auto ell = three_point_ell(gen, tr.blocks[2], ThreePointSide::rl);
  REQUIRE(ell.has_value());
  CHECK(std::isinf(*ell));
}

TEST_CASE("iterate errors measure the distance to the final left-projected point") {
  Trace tr = run_two_lines(40);
  std::vector<double> errs = iterate_errors(tr);
  REQUIRE(errs.size() == static_cast<std::size_t>(tr.size()));
  CHECK(errs.back() == 0.0);
  const Vector last = tr.blocks.back().b_plus;
  for (int k = 0; k < tr.size(); ++k) {
    REQUIRE(std::abs(errs[k] - (tr.blocks[k].b_plus - last).norm()) <= 1e-14);
  }
  RateEstimate rate = fit_rate(errs);
  CHECK(rate.kind == RateKind::linear);
  CHECK(rate.q == doctest::Approx(0.25).epsilon(0.01));
  CHECK(rate.residual <= 1e-6);
}

TEST_CASE("rate fitting recovers planted decay laws") {
  SUBCASE("clean geometric sequence") {
    RateEstimate r = fit_rate(oracle::geometric_errors(3.0, 0.4, 60));
    CHECK(r.kind == RateKind::linear);
    CHECK(r.q == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(r.residual <= 1e-9);
    CHECK(r.fit_window.first >= 0);
    CHECK(r.fit_window.second < 60);
    CHECK(r.fit_window.first < r.fit_window.second);
  }

  SUBCASE("clean power law") {
    RateEstimate r = fit_rate(oracle::power_errors(5.0, 1.5, 200));
    CHECK(r.kind == RateKind::sublinear);
    CHECK(r.rho == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(r.residual <= 1e-9);
  }

  SUBCASE("exactly-zero tail is a finite-step hit") {
    std::vector<double> errs;
    for (int k = 0; k < 10; ++k) errs.push_back(std::pow(0.5, k));
    errs.resize(30, 0.0);
    CHECK(fit_rate(errs).kind == RateKind::finite_step);
  }

  SUBCASE("too few entries are rejected") {
    CHECK_THROWS_AS(fit_rate(std::vector<double>(19, 0.5)), TooShort);
  }

  SUBCASE("noisy synthetic families stay classified and calibrated") {
    std::mt19937_64 rng = oracle::rng(915);
    for (int trial = 0; trial < 50; ++trial) {
      double q = oracle::uniform(rng, 0.05, 0.85);
      double scale = oracle::uniform(rng, 0.1, 10.0);
      int n = 40 + trial * 3;
      std::vector<double> errs = oracle::geometric_errors(scale, q, n);
      for (double& e : errs) e *= std::exp(oracle::uniform(rng, -0.005, 0.005));
      RateEstimate r = fit_rate(errs);
      CAPTURE(trial);
      CAPTURE(q);
      REQUIRE(r.kind == RateKind::linear);
      REQUIRE(std::abs(r.q - q) <= 0.02 * q + 1e-4);
    }
    for (int trial = 0; trial < 50; ++trial) {
      double rho = oracle::uniform(rng, 0.7, 2.5);
      double scale = oracle::uniform(rng, 0.5, 5.0);
      int n = 120 + trial * 2;
      std::vector<double> errs = oracle::power_errors(scale, rho, n);
      for (double& e : errs) e *= std::exp(oracle::uniform(rng, -0.005, 0.005));
      RateEstimate r = fit_rate(errs);
      CAPTURE(trial);
      CAPTURE(rho);
      REQUIRE(r.kind == RateKind::sublinear);
      REQUIRE(std::abs(r.rho - rho) <= 0.05 * rho);
    }
  }
}

TEST_CASE("transversality classification separates crossing from tangency") {
  CHECK(classify_transversality(run_two_lines(24)) == Transversality::transversal);
  CHECK(classify_transversality(run_tangent_parabola(400)) == Transversality::tangential);
  CHECK(classify_transversality(run_two_lines(3)) == Transversality::undetermined);
}

TEST_CASE("angle condition probe reports a flat exponent on transversal runs") {
  Trace tr = run_two_lines(20);
  AngleConditionProbe probe = angle_condition_probe(tr, 0.0);
  CHECK(probe.violations == 0);
  CHECK(probe.theta_best == doctest::Approx(0.5));
  CHECK(probe.gamma_lower == doctest::Approx(0.5).epsilon(1e-9));
  REQUIRE(probe.theta_grid.size() == probe.gammas.size());
  // theta = 1/2 cancels the excess exactly, so every gamma entry is the
  // constant 1 - cos(pi/3) scaled by a power of the excess.
  CHECK(probe.gammas.front() == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("angle condition probe counts degenerate tail blocks") {
  auto planted = [](int n) {
    Trace tr;
    for (int k = 0; k < n; ++k) {
      Block b;
      b.b = Vector{{1.0, 0.0}};
      b.a_plus = Vector{{0.0, 0.0}};
      b.b_plus = Vector{{0.0, 1.0}};
      int tail_pos = k - n / 2;
      if (k >= n / 2 && k < n - 3) {
        b.D_bplus_aplus = std::pow(0.5, tail_pos);
      } else if (k >= n - 3) {
        b.D_bplus_aplus = 0.0;  // zero excess rows must be skipped and counted
      } else {
        b.D_bplus_aplus = 2.0;
      }
      tr.blocks.push_back(b);
      tr.step_b.push_back(1e-9);
      tr.step_a.push_back(1e-9);
    }
    return tr;
  };

  AngleConditionProbe probe = angle_condition_probe(planted(16), 0.0);
  CHECK(probe.violations == 3);
  CHECK(probe.theta_best == doctest::Approx(0.5));
  CHECK(probe.gamma_lower == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(angle_condition_probe(planted(9), 0.0), TooShort);
}
