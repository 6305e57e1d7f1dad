#include <doctest/doctest.h>

#include <cmath>

#include "bregalt/em.hpp"
#include "bregalt/generator.hpp"
#include "bregalt/sets.hpp"
#include "oracles.hpp"

using namespace bregalt;

namespace {

DiscreteEmProblem mixture_problem() {
  nlohmann::json params;
  params["p0"] = {0.1, 0.15, 0.2, 0.25, 0.15, 0.15};
  params["p1"] = {0.25, 0.2, 0.1, 0.05, 0.25, 0.15};
  params["lo"] = 0.02;
  params["hi"] = 0.98;
  SetSpec model = make_parametric(make_parametric_map("mixture_line", params), 1024, "mixture");
  model.declared_convex = true;
  return make_discrete_em_problem({0, 0, 1, 1, 2, 2}, Vector{{0.5, 0.3, 0.2}}, model);
}

SetSpec natural_segment(const std::vector<double>& from, const std::vector<double>& to) {
  nlohmann::json params;
  params["from"] = from;
  params["to"] = to;
  SetSpec s = make_parametric(make_parametric_map("segment", params), 1024, "model");
  s.declared_convex = true;
  return s;
}

}  // namespace

TEST_CASE("conditional-expectation step matches the scaling oracle and the generic projector") {
  DiscreteEmProblem prob = mixture_problem();
  REQUIRE(prob.I() == 6);
  REQUIRE(prob.J() == 3);

  std::mt19937_64 gen = oracle::rng(77);
  Generator entropy = make_generator("negentropy", 6);
  SetSpec data = make_data_set_kl(prob.T, prob.p_hat, true, "data");

  for (int trial = 0; trial < 40; ++trial) {
    Vector q(6);
    for (int i = 0; i < 6; ++i) q[i] = oracle::uniform(gen, 0.02, 1.0);
    q /= q.sum();

    Vector p = e_step_discrete(q, prob);
    Vector ref = oracle::e_step_reference(q, prob.T, prob.p_hat);
    REQUIRE((p - ref).lpNorm<Eigen::Infinity>() <= 1e-14);

    // Group marginals restored exactly.
    Vector sums = Vector::Zero(3);
    for (int i = 0; i < 6; ++i) sums[prob.T[static_cast<std::size_t>(i)]] += p[i];
    REQUIRE((sums - prob.p_hat).lpNorm<Eigen::Infinity>() <= 1e-12);

    // The closed form is the left projection onto the marginal-matching set.
    ProjectionResult lp = left_project(entropy, data, q);
    REQUIRE((lp.point - p).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("model fitting step certifies decrease from its warm start") {
  DiscreteEmProblem prob = mixture_problem();
  const ParametricMap& pm = std::get<ParametricSet>(prob.model.body).map;
  Vector q = pm.map(Vector::Constant(1, 0.7));
  Vector p = e_step_discrete(q, prob);

  Vector warm = Vector::Constant(1, 0.7);
  ProjectionResult fit = m_step_discrete(p, prob, warm);
  Generator entropy = make_generator("negentropy", 6);
  REQUIRE(fit.value <= divergence(entropy, p, pm.map(warm)) + 1e-12);
  REQUIRE((fit.point - pm.map(fit.param)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("discrete alternation decreases its objective and reaches a fixed point") {
  DiscreteEmProblem prob = mixture_problem();
  RunConfig cfg;
  cfg.stop.max_iterations = 200;
  // The objective stalls at a positive level (the model line misses the
  // data marginals), so let the step rule drive the run to its fixed point.
  cfg.stop.divergence_stagnation = 0.0;
  EmTrace em = run_em_discrete(prob, Vector::Constant(1, 0.5), cfg);
  REQUIRE(em.trace.size() >= 3);
  CHECK(em.trace.orientation == Orientation::lr);
  CHECK(em.left_role == "e-step");
  CHECK(em.right_role == "m-step");

  for (int k = 0; k < em.trace.size(); ++k) {
    const Block& blk = em.trace.blocks[k];
    REQUIRE(blk.D_bplus_aplus <= blk.D_b_aplus + 1e-10);
    REQUIRE(blk.D_b_aplus <= blk.D_b_a + 1e-10);
    if (k > 0) {
      REQUIRE(em.trace.blocks[k].D_b_aplus <= em.trace.blocks[k - 1].D_b_aplus + 1e-12);
    }
  }
  CHECK(em.fixed_point_residual <= 1e-8);
  CHECK((em.trace.blocks.back().b - em.trace.blocks.back().b_plus).norm() ==
        doctest::Approx(em.fixed_point_residual));
}

TEST_CASE("log-normalizer divergence equals the distributional divergence") {
  std::mt19937_64 gen = oracle::rng(4242);

  SUBCASE("independent-rates family") {
    ExpFamilySpec spec = make_exp_family_spec(make_generator("poisson", 3), {0},
                                              Vector::Constant(1, 1.5),
                                              natural_segment({0.0, 0.0, 0.0}, {1.0, 0.5, 0.3}));
    for (int trial = 0; trial < 1000; ++trial) {
      Vector tp(3), t(3);
      for (int i = 0; i < 3; ++i) {
        tp[i] = oracle::uniform(gen, -2.0, 2.0);
        t[i] = oracle::uniform(gen, -2.0, 2.0);
      }
      double got = kl_expfam(spec, tp, t);
      double want = oracle::poisson_kl(tp.array().exp().matrix(), t.array().exp().matrix());
      REQUIRE(std::abs(got - want) <= 1e-10 * (1.0 + std::abs(want)));
    }
  }

  SUBCASE("fixed-variance location family") {
    double sigma2 = 0.7;
    ExpFamilySpec spec = make_exp_family_spec(
        make_generator("gaussian", 2, {{"sigma2", sigma2}}), {0}, Vector::Constant(1, 0.7),
        natural_segment({-1.0, -1.0}, {2.0, 1.5}));
    for (int trial = 0; trial < 1000; ++trial) {
      Vector tp(2), t(2);
      for (int i = 0; i < 2; ++i) {
        tp[i] = oracle::uniform(gen, -5.0, 5.0);
        t[i] = oracle::uniform(gen, -5.0, 5.0);
      }
      // The distribution behind natural parameter theta has mean theta / s2
      // and variance 1 / s2, so the divergence is the squared mean gap over
      // twice that variance.
      double var = 1.0 / sigma2;
      double got = kl_expfam(spec, tp, t);
      double want = oracle::gaussian_kl(var * tp, var * t, var);
      REQUIRE(std::abs(got - want) <= 1e-10 * (1.0 + std::abs(want)));
    }
  }
}

TEST_CASE("location-family alternation retraces classical alternating projections") {
  ExpFamilySpec spec = make_exp_family_spec(make_generator("gaussian", 2, {{"sigma2", 1.0}}),
                                            {0}, Vector::Constant(1, 0.7),
                                            natural_segment({-1.0, -1.0}, {2.0, 1.5}));
  RunConfig cfg;
  cfg.stop.max_iterations = 25;
  cfg.stop.divergence_stagnation = 0.0;
  cfg.stop.step_stagnation = 0.0;
  cfg.solver.tol = 1e-12;
  cfg.solver.max_iterations = 40000;
  Vector start{{0.7, 1.2}};
  EmTrace em = run_em_expfam(spec, start, cfg);
  REQUIRE(em.trace.size() == 25);
  CHECK(em.left_role == "m-step");
  CHECK(em.right_role == "e-step");

  const Vector p0{{-1.0, -1.0}};
  const Vector d{{3.0, 2.5}};
  auto proj_segment = [&](const Vector& x) {
    double t = std::clamp((x - p0).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return Vector(p0 + t * d);
  };
  auto proj_line = [](const Vector& x) { return Vector{{0.7, x[1]}}; };

  Vector a = start;
  for (int k = 0; k < em.trace.size(); ++k) {
    const Block& blk = em.trace.blocks[k];
    Vector b = proj_segment(a);
    Vector a_next = proj_line(b);
    REQUIRE((blk.b - b).lpNorm<Eigen::Infinity>() <= 1e-8);
    REQUIRE((blk.a_plus - a_next).lpNorm<Eigen::Infinity>() <= 1e-8);
    a = a_next;
  }
}

TEST_CASE("rate-family alternation pins the observed mean after every e-step") {
  ExpFamilySpec spec = make_exp_family_spec(make_generator("poisson", 2), {0},
                                            Vector::Constant(1, 1.5),
                                            natural_segment({0.0, 0.0}, {1.0, 0.5}));
  RunConfig cfg;
  cfg.stop.max_iterations = 40;
  EmTrace em = run_em_expfam(spec, Vector{{std::log(1.5), 0.25}}, cfg);
  REQUIRE(em.trace.size() >= 3);
  for (int k = 0; k < em.trace.size(); ++k) {
    REQUIRE(std::exp(em.trace.blocks[k].a_plus[0]) == doctest::Approx(1.5).epsilon(1e-10));
  }
  CHECK(em.fixed_point_residual <= 1e-6);
}

TEST_CASE("emission problem synthesis validates inputs and reproduces its recursion") {
  SUBCASE("desk-scale caps") {
    Vector params = Vector::Ones(50);
    Vector c = Vector::Ones(10 * 2 * 6);
    CHECK_THROWS_AS(build_dspect_problem(10, 2, 6, params, c), ConfigError);
    CHECK_THROWS_AS(build_dspect_problem(2, 5, 6, Vector::Ones(10), Vector::Ones(60)),
                    ConfigError);
    CHECK_THROWS_AS(build_dspect_problem(2, 2, 9, Vector::Ones(10), Vector::Ones(36)),
                    ConfigError);
    CHECK_THROWS_AS(build_dspect_problem(1, 1, 3, Vector::Ones(4), Vector::Ones(3)), ConfigError);
  }

  SUBCASE("nonpositive activities are rejected") {
    Vector params(5);
    params << 0.0, 0.0, 0.0, 1.0, 1.0;  // third frame collapses to zero
    CHECK_THROWS_AS(build_dspect_problem(1, 1, 3, params, Vector::Ones(3)), InvalidModel);
  }

  SUBCASE("recursion, totals, and kept indices") {
    int n = 2, m = 1, K = 4;
    Vector params(10);
    params << 0.3, 0.5, 0.4, 1.0, 1.2, 0.2, 0.4, 0.6, 0.8, 1.1;
    Vector c(8);
    c << 0.5, 0.9, 1.3, 1.7, 0.7, 1.1, 1.5, 1.9;
    DspectProblem prob = build_dspect_problem(n, m, K, params, c);

    // Two-step recursion replayed by hand.
    Matrix x(2, 4);
    x(0, 0) = 1.0;
    x(0, 1) = 1.2;
    x(1, 0) = 0.8;
    x(1, 1) = 1.1;
    for (int i = 0; i < 2; ++i) {
      double alpha = params[5 * i], beta = params[5 * i + 1], gamma = params[5 * i + 2];
      for (int k = 2; k < 4; ++k) x(i, k) = alpha * x(i, k - 2) + beta * x(i, k - 1) + gamma;
    }
    REQUIRE((prob.truth_activity - x).lpNorm<Eigen::Infinity>() <= 1e-12);
    REQUIRE((prob.activities(params) - x).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK_THROWS_AS(prob.activities(Vector::Ones(7)), DomainError);

    // Every rate coordinate is kept when c and the totals are positive.
    REQUIRE(prob.keep.size() == 8);
    REQUIRE(prob.gen.dim == 8);
    REQUIRE(prob.y.size() == m * K);

    // Totals match the grouped sums of c * activity.
    const auto& data = std::get<DataSetKL>(prob.data.body);
    Vector sums = Vector::Zero(prob.y.size());
    for (std::size_t pos = 0; pos < prob.keep.size(); ++pos) {
      int flat = prob.keep[pos];
      int i = flat / (m * K);
      int rem = flat % (m * K);
      int k = rem % K;
      sums[data.group[pos]] += c[flat] * x(i, k);
    }
    REQUIRE((sums - prob.y).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK_FALSE(data.probability);
  }
}

TEST_CASE("emission alternation from a perturbed start re-fits the synthesized totals") {
  int n = 2, m = 1, K = 4;
  Vector params(10);
  params << 0.3, 0.5, 0.4, 1.0, 1.2, 0.2, 0.4, 0.6, 0.8, 1.1;
  Vector c(8);
  c << 0.5, 0.9, 1.3, 1.7, 0.7, 1.1, 1.5, 1.9;
  DspectProblem prob = build_dspect_problem(n, m, K, params, c);

  Vector start = params;
  for (int t = 0; t < start.size(); ++t) start[t] *= (t % 2 == 0) ? 1.0005 : 0.9995;
  RunConfig cfg;
  cfg.stop.max_iterations = 200;
  cfg.solver.tol = 1e-11;
  cfg.solver.max_iterations = 60000;
  EmTrace em = run_em_dspect(prob, start, cfg);
  REQUIRE(em.trace.size() >= 5);
  for (int k = 0; k < em.trace.size(); ++k) {
    const Block& blk = em.trace.blocks[k];
    REQUIRE(blk.D_bplus_aplus <= blk.D_b_aplus + 1e-10);
    REQUIRE(blk.D_b_aplus <= blk.D_b_a + 1e-10);
  }
  CHECK(em.trace.blocks.back().D_bplus_aplus <= 1e-10);
  CHECK(em.fixed_point_residual <= 1e-6);
}
