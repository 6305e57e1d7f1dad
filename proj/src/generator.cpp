#include "bregalt/generator.hpp"

#include <cmath>
#include <limits>

namespace bregalt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

DomainSpec DomainSpec::all(int dim) {
  DomainSpec d;
  d.kind = Kind::all_space;
  d.lo = Vector::Constant(dim, -kInf);
  d.hi = Vector::Constant(dim, kInf);
  return d;
}

DomainSpec DomainSpec::positive_orthant(int dim) {
  DomainSpec d;
  d.kind = Kind::positive_orthant;
  d.lo = Vector::Zero(dim);
  d.hi = Vector::Constant(dim, kInf);
  return d;
}

DomainSpec DomainSpec::box(Vector lo, Vector hi) {
  DomainSpec d;
  d.kind = Kind::box;
  d.lo = std::move(lo);
  d.hi = std::move(hi);
  return d;
}

Membership DomainSpec::classify(const Vector& x, double margin) const {
  if (kind == Kind::open_convex) {
    if (!membership) throw DomainError("open_convex domain without membership function");
    return membership(x, margin);
  }
  if (x.size() != lo.size()) throw DomainError("dimension mismatch in domain check");
  bool on_boundary = false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double dl = x[i] - lo[i];
    double dh = hi[i] - x[i];
    if (dl < -margin || dh < -margin) return Membership::outside;
    if (dl <= margin || dh <= margin) on_boundary = true;
  }
  return on_boundary ? Membership::boundary : Membership::interior;
}

Generator Generator::conjugate() const {
  if (conjugate_factory) return conjugate_factory();
  Generator c;
  c.name = name + "_conjugate";
  c.family = GeneratorFamily::custom;
  c.dim = dim;
  c.separable = separable;
  // dom f = R^d makes f* 1-coercive; nothing stronger can be read off here.
  c.one_coercive = (domain.kind == DomainSpec::Kind::all_space);
  c.domain = dual_domain;
  c.dual_domain = domain;
  Generator self = *this;
  c.value = [self](const Vector& y) {
    Vector x = self.conj_grad(y);
    return y.dot(x) - self.value(x);
  };
  c.grad = conj_grad;
  c.conj_grad = grad;
  c.hessian = [self](const Vector& y) {
    Matrix h = self.hessian(self.conj_grad(y));
    return Matrix(h.llt().solve(Matrix::Identity(h.rows(), h.cols())));
  };
  return c;
}

namespace {

Generator make_euclidean(int dim);
Generator make_negentropy(int dim);
Generator make_poisson(int dim);
Generator make_gaussian(int dim, double sigma2);

Generator make_euclidean(int dim) {
  Generator g;
  g.name = "euclidean";
  g.family = GeneratorFamily::euclidean;
  g.dim = dim;
  g.separable = true;
  g.one_coercive = true;
  g.lipschitz_hessian = true;
  g.domain = DomainSpec::all(dim);
  g.dual_domain = DomainSpec::all(dim);
  g.value = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  g.grad = [](const Vector& x) { return x; };
  g.hessian = [dim](const Vector&) { return Matrix::Identity(dim, dim); };
  g.conj_grad = [](const Vector& y) { return y; };
  g.conjugate_factory = [dim] { return make_euclidean(dim); };
  return g;
}

// Value is finite on the closed orthant with 0 log 0 = 0; entries within
// kMembershipMargin below zero are treated as exact zeros so boundary points
// produced by upstream arithmetic stay evaluable.
Generator make_negentropy(int dim) {
  Generator g;
  g.name = "negentropy";
  g.family = GeneratorFamily::negentropy;
  g.dim = dim;
  g.separable = true;
  g.one_coercive = true;
  g.domain = DomainSpec::positive_orthant(dim);
  g.dual_domain = DomainSpec::all(dim);
  g.value = [](const Vector& x) {
    double s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x[i] > 0) s += x[i] * std::log(x[i]) - x[i];
    }
    return s;
  };
  g.grad = [](const Vector& x) { return Vector(x.array().log()); };
  g.hessian = [](const Vector& x) { return Matrix(x.array().inverse().matrix().asDiagonal()); };
  g.conj_grad = [](const Vector& y) { return Vector(y.array().exp()); };
  g.conjugate_factory = [dim] { return make_poisson(dim); };
  return g;
}

Generator make_poisson(int dim) {
  Generator g;
  g.name = "poisson";
  g.family = GeneratorFamily::poisson;
  g.dim = dim;
  g.separable = true;
  g.one_coercive = true;  // declared; see the generator registry notes
  g.domain = DomainSpec::all(dim);
  g.dual_domain = DomainSpec::positive_orthant(dim);
  g.value = [](const Vector& t) { return t.array().exp().sum(); };
  g.grad = [](const Vector& t) { return Vector(t.array().exp()); };
  g.hessian = [](const Vector& t) { return Matrix(t.array().exp().matrix().asDiagonal()); };
  g.conj_grad = [](const Vector& y) { return Vector(y.array().log()); };
  g.conjugate_factory = [dim] { return make_negentropy(dim); };
  return g;
}

Generator make_gaussian(int dim, double sigma2) {
  if (!(sigma2 > 0)) throw ConfigError("gaussian generator needs sigma2 > 0");
  Generator g;
  g.name = "gaussian";
  g.family = GeneratorFamily::gaussian;
  g.dim = dim;
  g.separable = true;
  g.one_coercive = true;
  g.lipschitz_hessian = true;
  g.domain = DomainSpec::all(dim);
  g.dual_domain = DomainSpec::all(dim);
  g.value = [sigma2](const Vector& t) { return 0.5 * t.squaredNorm() / sigma2; };
  g.grad = [sigma2](const Vector& t) { return Vector(t / sigma2); };
  g.hessian = [dim, sigma2](const Vector&) { return Matrix(Matrix::Identity(dim, dim) / sigma2); };
  g.conj_grad = [sigma2](const Vector& y) { return Vector(sigma2 * y); };
  g.conjugate_factory = [dim, sigma2] { return make_gaussian(dim, 1.0 / sigma2); };
  g.params = {{"sigma2", sigma2}};
  return g;
}

}  // namespace

Generator make_generator(const std::string& name, int dim, const nlohmann::json& params) {
  if (dim <= 0) throw ConfigError("generator dimension must be positive");
  if (name == "euclidean") return make_euclidean(dim);
  if (name == "negentropy") return make_negentropy(dim);
  if (name == "poisson") return make_poisson(dim);
  if (name == "gaussian") {
    double sigma2 = params.value("sigma2", 1.0);
    auto g = make_gaussian(dim, sigma2);
    return g;
  }
  throw ConfigError("unknown generator: " + name);
}

std::vector<std::string> generator_names() {
  return {"euclidean", "negentropy", "poisson", "gaussian"};
}

double divergence(const Generator& g, const Vector& x, const Vector& y) {
  if (g.domain.classify(y, 0.0) != Membership::interior) {
    throw DomainError("divergence: second argument must be interior to the domain");
  }
  if (g.domain.classify(x, kMembershipMargin) == Membership::outside) {
    throw DomainError("divergence: first argument outside the closed domain");
  }
  return g.value(x) - g.value(y) - g.grad(y).dot(x - y);
}

double dual_divergence(const Generator& g, const Vector& u, const Vector& v) {
  return divergence(g.conjugate(), u, v);
}

double mobile_norm(const Generator& g, const Vector& base, const Vector& v) {
  if (g.domain.classify(base, 0.0) != Membership::interior) {
    throw DomainError("mobile_norm: base point must be interior to the domain");
  }
  return std::sqrt(v.dot(g.hessian(base) * v));
}

NormBounds estimate_norm_bounds(const Generator& g, const std::vector<Vector>& samples,
                                par::Exec exec) {
  if (samples.empty()) throw EmptySample("estimate_norm_bounds: empty sample");
  for (const auto& x : samples) {
    if (g.domain.classify(x, 0.0) != Membership::interior) {
      throw DomainError("estimate_norm_bounds: sample outside the domain interior");
    }
  }
  auto n = static_cast<std::ptrdiff_t>(samples.size());
  auto lo = par::reduce_min(n, exec, [&](std::ptrdiff_t i) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.hessian(samples[i]), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  });
  auto mm = par::reduce_minmax(n, exec, [&](std::ptrdiff_t i) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.hessian(samples[i]), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  });
  NormBounds b;
  b.lambda_min = lo;
  b.lambda_max = mm.max;
  if (!(b.lambda_min > 0)) throw DomainError("estimate_norm_bounds: Hessian not positive definite");
  b.m = std::sqrt(b.lambda_min / 2);
  b.M = std::sqrt(b.lambda_max / 2);
  b.l = b.lambda_min;
  b.L = b.lambda_max;
  b.samples = static_cast<int>(samples.size());
  return b;
}

}  // namespace bregalt
