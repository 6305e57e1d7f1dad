#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "parallel.hpp"
#include "types.hpp"

namespace bregalt {

enum class Membership { interior, boundary, outside };

// Default half-width of the boundary band used by membership checks on sets
// and by the alternation interiority guard.
inline constexpr double kMembershipMargin = 1e-12;

// Domain of a generator (closed) or of its gradient image. Box bounds with
// +/-inf entries cover every built-in case; open_convex carries a caller
// membership function for domains that are not boxes.
struct DomainSpec {
  enum class Kind { all_space, positive_orthant, box, open_convex };

  Kind kind = Kind::all_space;
  Vector lo, hi;  // closed bounds for the box-like kinds
  std::function<Membership(const Vector&, double)> membership;  // open_convex

  static DomainSpec all(int dim);
  static DomainSpec positive_orthant(int dim);
  static DomainSpec box(Vector lo, Vector hi);

  int dim() const { return static_cast<int>(lo.size()); }

  // interior: strictly inside by more than margin in every coordinate.
  // boundary: within margin of the closed-domain boundary but not outside it
  // by more than margin. margin = 0 gives the exact open/closed test.
  Membership classify(const Vector& x, double margin = kMembershipMargin) const;
  bool interior(const Vector& x, double margin = kMembershipMargin) const {
    return classify(x, margin) == Membership::interior;
  }
};

enum class GeneratorFamily { euclidean, negentropy, poisson, gaussian, custom };

// Convex generator of Legendre type, supplied analytically: value on the
// closed domain, gradient / Hessian / inverse gradient on the interior G.
// hessian must be symmetric positive definite on G. conj_grad must invert
// grad to within 1e-10 on G*. No autodiff: the projection and geometry code
// relies on these closures being exact closed forms.
struct Generator {
  std::string name;
  GeneratorFamily family = GeneratorFamily::custom;
  int dim = 0;
  // Construction parameters (e.g. {"sigma2": ...}); echoed into configs and
  // used by family-specific identities.
  nlohmann::json params = nlohmann::json::object();

  // Diagonal Hessian everywhere. Enables the coordinatewise closed forms
  // for pinned-dual-coordinate projections.
  bool separable = false;
  // Declared flags, never inferred from the closures.
  bool one_coercive = false;
  bool lipschitz_hessian = false;

  DomainSpec domain;       // dom f, closed; its interior is G
  DomainSpec dual_domain;  // G* = grad(G)

  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> grad;
  std::function<Matrix(const Vector&)> hessian;
  std::function<Vector(const Vector&)> conj_grad;

  // Exact twin for the built-ins (the conjugate of a built-in is another
  // built-in); the generic fallback builds the conjugate from the closures
  // via the Fenchel identity f*(y) = <y, conj_grad(y)> - f(conj_grad(y)),
  // which is valid on G* only.
  std::function<Generator()> conjugate_factory;

  Generator conjugate() const;
};

// Built-ins:
//   euclidean            f(x) = ||x||^2 / 2
//   negentropy           f(x) = sum x_i log x_i - x_i, with 0 log 0 = 0
//   poisson              f(t) = sum exp(t_i)   (product-Poisson log-normalizer)
//   gaussian             f(t) = ||t||^2 / (2 sigma2)  (known-variance family)
Generator make_generator(const std::string& name, int dim,
                         const nlohmann::json& params = nlohmann::json::object());
std::vector<std::string> generator_names();

// f(x) - f(y) - <grad f(y), x - y>. Requires y strictly interior to the
// domain and x inside the closed domain (with kMembershipMargin slack for
// accumulated rounding on the closed test only).
double divergence(const Generator& g, const Vector& x, const Vector& y);

// Divergence of the conjugate generator, for arguments in G*.
double dual_divergence(const Generator& g, const Vector& u, const Vector& v);

// sqrt(v' H(base) v): norm of v in the local metric at base.
double mobile_norm(const Generator& g, const Vector& base, const Vector& v);

// Constants on the sampled compact: m^2 |x-y|^2 <= D(x,y) <= M^2 |x-y|^2 and
// l |x-y| <= |grad f(x) - grad f(y)| <= L |x-y| hold with m = sqrt(lambda_min/2),
// M = sqrt(lambda_max/2), l = lambda_min, L = lambda_max, where lambda ranges
// over Hessian eigenvalues across the samples.
struct NormBounds {
  double m = 0, M = 0, l = 0, L = 0;
  double lambda_min = 0, lambda_max = 0;
  int samples = 0;
};

NormBounds estimate_norm_bounds(const Generator& g, const std::vector<Vector>& samples,
                                par::Exec exec = par::Exec::openmp);

}  // namespace bregalt
