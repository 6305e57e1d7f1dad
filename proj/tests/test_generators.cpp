#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest/doctest.h>

#include <cmath>

#include "bregalt/generator.hpp"
#include "oracles.hpp"

using namespace bregalt;

namespace {

struct SampledGenerator {
  Generator gen;
  double lo, hi;  // componentwise sampling window inside int(dom f)
};

std::vector<SampledGenerator> sampled_generators(int dim) {
  return {
      {make_generator("euclidean", dim), -5.0, 5.0},
      {make_generator("negentropy", dim), 0.1, 5.0},
      {make_generator("poisson", dim), -2.0, 2.0},
      {make_generator("gaussian", dim, {{"sigma2", 0.7}}), -5.0, 5.0},
  };
}

}  // namespace

TEST_CASE("divergence is nonnegative and vanishes exactly on the diagonal") {
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(11);
    for (int t = 0; t < 1000; ++t) {
      Vector x = oracle::uniform_vec(g, gen.dim, lo, hi);
      Vector y = oracle::uniform_vec(g, gen.dim, lo, hi);
      double d = divergence(gen, x, y);
      REQUIRE(d >= 0.0);
      if ((x - y).norm() > 1e-6) REQUIRE(d > 0.0);
      REQUIRE(divergence(gen, x, x) <= 1e-12);
    }
  }
}

TEST_CASE("conjugate gradient inverts the gradient") {
  for (const auto& [gen, lo, hi] : sampled_generators(4)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(12);
    for (int t = 0; t < 1000; ++t) {
      Vector x = oracle::uniform_vec(g, gen.dim, lo, hi);
      REQUIRE((gen.conj_grad(gen.grad(x)) - x).norm() <= 1e-10);
    }
  }
}

TEST_CASE("divergence equals the conjugate divergence of swapped gradients") {
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(13);
    for (int t = 0; t < 1000; ++t) {
      Vector x = oracle::uniform_vec(g, gen.dim, lo, hi);
      Vector y = oracle::uniform_vec(g, gen.dim, lo, hi);
      double primal = divergence(gen, x, y);
      double dual = dual_divergence(gen, gen.grad(y), gen.grad(x));
      REQUIRE(std::abs(primal - dual) <= 1e-10);
    }
  }
}

TEST_CASE("gradient and hessian match finite differences of the closed forms") {
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(14);
    for (int t = 0; t < 25; ++t) {
      Vector x = oracle::uniform_vec(g, gen.dim, lo + 0.05, hi);
      Vector fd = oracle::fd_grad(gen.value, x);
      Vector an = gen.grad(x);
      REQUIRE((fd - an).norm() <= 1e-6 * (1.0 + an.norm()));
      Matrix hd = oracle::fd_jacobian(gen.grad, x);
      Matrix ha = gen.hessian(x);
      REQUIRE((hd - ha).norm() <= 1e-5 * (1.0 + ha.norm()));
    }
  }
}

TEST_CASE("hessian is symmetric positive definite on interior samples") {
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(15);
    for (int t = 0; t < 50; ++t) {
      Vector x = oracle::uniform_vec(g, gen.dim, lo, hi);
      Matrix h = gen.hessian(x);
      REQUIRE((h - h.transpose()).norm() <= 1e-12 * (1.0 + h.norm()));
      Eigen::SelfAdjointEigenSolver<Matrix> es(h);
      REQUIRE(es.eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("value is convex along segments: midpoint never above the chord") {
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(16);
    for (int t = 0; t < 200; ++t) {
      Vector x = oracle::uniform_vec(g, gen.dim, lo, hi);
      Vector y = oracle::uniform_vec(g, gen.dim, lo, hi);
      double mid = gen.value(0.5 * (x + y));
      double chord = 0.5 * (gen.value(x) + gen.value(y));
      REQUIRE(mid <= chord + 1e-12 * (1.0 + std::abs(chord)));
    }
  }
}

TEST_CASE("three-term expansion of the divergence holds for random triples") {
  // D(b, a) = D(b, c) + D(c, a) - <grad f(a) - grad f(c), b - c>.
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(17);
    for (int t = 0; t < 500; ++t) {
      Vector a = oracle::uniform_vec(g, gen.dim, lo, hi);
      Vector b = oracle::uniform_vec(g, gen.dim, lo, hi);
      Vector c = oracle::uniform_vec(g, gen.dim, lo, hi);
      double lhs = divergence(gen, b, a);
      double rhs = divergence(gen, b, c) + divergence(gen, c, a) -
                   (gen.grad(a) - gen.grad(c)).dot(b - c);
      REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
    }
  }
}

TEST_CASE("entropy divergence accepts zero coordinates on the left only") {
  Generator gen = make_generator("negentropy", 2);
  Vector x{{1.0, 0.0}};
  Vector y{{1.0, 1.0}};
  CHECK(divergence(gen, x, y) == doctest::Approx(1.0).epsilon(1e-12));
  Vector bad{{1.0, 0.0}};
  CHECK_THROWS_AS(divergence(gen, y, bad), DomainError);
}

TEST_CASE("entropy chord gap: z log z - z + 2 stays above 1 away from z = 1") {
  // The scalar divergence to the point 1 is positive except at z = 1, so the
  // shifted expression exceeds 1 strictly on both sides.
  auto g = oracle::rng(18);
  for (int t = 0; t < 1000; ++t) {
    double z = oracle::uniform(g, 0.1, 3.0);
    if (std::abs(z - 1.0) < 1e-3) continue;
    double v = z * std::log(z) - z + 2.0;
    REQUIRE(v > 1.0);
  }
}

TEST_CASE("conjugate generator swaps domains and divergences") {
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    Generator conj = gen.conjugate();
    auto g = oracle::rng(19);
    for (int t = 0; t < 200; ++t) {
      Vector x = oracle::uniform_vec(g, gen.dim, lo, hi);
      Vector y = oracle::uniform_vec(g, gen.dim, lo, hi);
      // Conjugate divergence of the images reproduces the primal divergence.
      double primal = divergence(gen, x, y);
      double via_conj = divergence(conj, gen.grad(y), gen.grad(x));
      REQUIRE(std::abs(primal - via_conj) <= 1e-9 * (1.0 + primal));
    }
  }
}

TEST_CASE("mobile norm is the hessian quadratic form") {
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(20);
    for (int t = 0; t < 100; ++t) {
      Vector base = oracle::uniform_vec(g, gen.dim, lo, hi);
      Vector v = oracle::uniform_vec(g, gen.dim, -1.0, 1.0);
      double n = mobile_norm(gen, base, v);
      double want = std::sqrt(v.dot(gen.hessian(base) * v));
      REQUIRE(n == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("norm bounds sandwich the divergence on the sampled compact") {
  for (const auto& [gen, lo, hi] : sampled_generators(3)) {
    CAPTURE(gen.name);
    auto g = oracle::rng(21);
    std::vector<Vector> samples;
    for (int t = 0; t < 60; ++t) samples.push_back(oracle::uniform_vec(g, gen.dim, lo, hi));
    NormBounds nb = estimate_norm_bounds(gen, samples);
    REQUIRE(nb.m <= nb.M);
    REQUIRE(nb.l <= nb.L);
    REQUIRE(nb.lambda_min > 0.0);
    REQUIRE(nb.lambda_min <= nb.lambda_max);
    for (std::size_t i = 0; i + 1 < samples.size(); i += 2) {
      const Vector& x = samples[i];
      const Vector& y = samples[i + 1];
      double d = divergence(gen, x, y);
      double s = (x - y).squaredNorm();
      REQUIRE(nb.m * nb.m * s <= d + 1e-9 * (1.0 + d));
      REQUIRE(d <= nb.M * nb.M * s + 1e-9 * (1.0 + d));
    }
  }
}

TEST_CASE("generator registry lists the shipped families") {
  auto names = generator_names();
  for (const char* want : {"euclidean", "negentropy", "poisson", "gaussian"}) {
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
  }
  CHECK_THROWS_AS(make_generator("no_such_generator", 2), ConfigError);
}
