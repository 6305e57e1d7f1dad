#include "bregalt/sets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bregalt/rng.hpp"

namespace bregalt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

Vector json_vec(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("expected a numeric array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

// t log t - t, continuously extended by 0 at t = 0.
double xlogx_minus_x(double t) { return t > 0 ? t * std::log(t) - t : 0.0; }

// Smallest root w in [0, 1] of w log w - w = s for s in (-1, 0]. Monotone
// bisection; the function decreases from 0 to -1 on [0, 1].
double squeeze_height(double s) {
  if (s >= 0) return 0.0;
  if (s <= -1) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (xlogx_minus_x(mid) > s) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ParametricMap make_parametric_map(const std::string& name, const nlohmann::json& params) {
  ParametricMap m;
  m.name = name;
  m.params = params;
  if (name == "segment") {
    Vector from = json_vec(params.at("from"));
    Vector to = json_vec(params.at("to"));
    if (from.size() != to.size()) throw ConfigError("segment: endpoint dimensions differ");
    m.param_dim = 1;
    m.ambient_dim = static_cast<int>(from.size());
    m.lo = Vector::Constant(1, 0.0);
    m.hi = Vector::Constant(1, 1.0);
    Vector dir = to - from;
    m.map = [from, dir](const Vector& u) { return Vector(from + u[0] * dir); };
    m.jacobian = [dir](const Vector&) { return Matrix(dir); };
    return m;
  }
  if (name == "circle") {
    Vector c = json_vec(params.at("center"));
    double r = params.at("radius").get<double>();
    double plo = params.value("phi_lo", -kPi);
    double phi = params.value("phi_hi", kPi);
    if (c.size() != 2 || !(r > 0)) throw ConfigError("circle: need 2-d center and radius > 0");
    m.param_dim = 1;
    m.ambient_dim = 2;
    m.lo = Vector::Constant(1, plo);
    m.hi = Vector::Constant(1, phi);
    m.map = [c, r](const Vector& u) {
      return Vector(c + r * Vector{{std::cos(u[0]), std::sin(u[0])}});
    };
    m.jacobian = [r](const Vector& u) {
      return Matrix(r * Vector{{-std::sin(u[0]), std::cos(u[0])}});
    };
    return m;
  }
  if (name == "disk") {
    Vector c = json_vec(params.at("center"));
    double r = params.at("radius").get<double>();
    if (c.size() != 2 || !(r > 0)) throw ConfigError("disk: need 2-d center and radius > 0");
    m.param_dim = 2;
    m.ambient_dim = 2;
    m.lo = Vector{{0.0, -kPi}};
    m.hi = Vector{{r, kPi}};
    m.map = [c](const Vector& u) {
      return Vector(c + u[0] * Vector{{std::cos(u[1]), std::sin(u[1])}});
    };
    m.jacobian = [](const Vector& u) {
      Matrix j(2, 2);
      j << std::cos(u[1]), -u[0] * std::sin(u[1]), std::sin(u[1]), u[0] * std::cos(u[1]);
      return j;
    };
    return m;
  }
  if (name == "parabola") {
    double a = params.value("coeff", 1.0);
    double lo = params.at("lo").get<double>();
    double hi = params.at("hi").get<double>();
    m.param_dim = 1;
    m.ambient_dim = 2;
    m.lo = Vector::Constant(1, lo);
    m.hi = Vector::Constant(1, hi);
    m.map = [a](const Vector& u) { return Vector{{u[0], a * u[0] * u[0]}}; };
    m.jacobian = [a](const Vector& u) { return Matrix(Vector{{1.0, 2.0 * a * u[0]}}); };
    return m;
  }
  if (name == "power_graph") {
    double p = params.value("exponent", 1.5);
    double lo = params.at("lo").get<double>();
    double hi = params.at("hi").get<double>();
    if (!(p > 1)) throw ConfigError("power_graph: exponent must exceed 1");
    m.param_dim = 1;
    m.ambient_dim = 2;
    m.lo = Vector::Constant(1, lo);
    m.hi = Vector::Constant(1, hi);
    m.map = [p](const Vector& u) { return Vector{{u[0], std::pow(std::abs(u[0]), p)}}; };
    m.jacobian = [p](const Vector& u) {
      double s = u[0] == 0 ? 0.0 : (u[0] > 0 ? 1.0 : -1.0);
      return Matrix(Vector{{1.0, p * s * std::pow(std::abs(u[0]), p - 1)}});
    };
    return m;
  }
  if (name == "double_well") {
    double lo = params.value("lo", -1.6);
    double hi = params.value("hi", 1.6);
    m.param_dim = 1;
    m.ambient_dim = 2;
    m.lo = Vector::Constant(1, lo);
    m.hi = Vector::Constant(1, hi);
    m.map = [](const Vector& u) {
      double q = u[0] * u[0] - 1.0;
      return Vector{{u[0], q * q}};
    };
    m.jacobian = [](const Vector& u) {
      return Matrix(Vector{{1.0, 4.0 * u[0] * (u[0] * u[0] - 1.0)}});
    };
    return m;
  }
  if (name == "squeezed_curve") {
    // Graph (z, w(z)) with w log w - w = -(1 + z log z - z) / 2, the curve
    // pinched between the second-axis hyperplane and the divergence ball of
    // radius sqrt(2) around (1, 1); it meets both exactly at (1, 0).
    double lo = params.value("lo", 0.7);
    double hi = params.value("hi", 1.3);
    m.param_dim = 1;
    m.ambient_dim = 2;
    m.lo = Vector::Constant(1, lo);
    m.hi = Vector::Constant(1, hi);
    m.map = [](const Vector& u) {
      double s = -0.5 * (1.0 + xlogx_minus_x(u[0]));
      return Vector{{u[0], squeeze_height(s)}};
    };
    m.jacobian = [](const Vector& u) {
      double s = -0.5 * (1.0 + xlogx_minus_x(u[0]));
      double w = squeeze_height(s);
      // Implicit differentiation: log(w) dw = -log(z)/2 dz; the limit at
      // z = 1 (where w = 0) is 0.
      double dw = w > 0 ? -0.5 * std::log(u[0]) / std::log(w) : 0.0;
      return Matrix(Vector{{1.0, dw}});
    };
    return m;
  }
  if (name == "mixture_line") {
    Vector p0 = json_vec(params.at("p0"));
    Vector p1 = json_vec(params.at("p1"));
    if (p0.size() != p1.size()) throw ConfigError("mixture_line: endpoint dimensions differ");
    double lo = params.value("lo", 0.0);
    double hi = params.value("hi", 1.0);
    m.param_dim = 1;
    m.ambient_dim = static_cast<int>(p0.size());
    m.lo = Vector::Constant(1, lo);
    m.hi = Vector::Constant(1, hi);
    Vector dir = p1 - p0;
    m.map = [p0, dir](const Vector& u) { return Vector(p0 + u[0] * dir); };
    m.jacobian = [dir](const Vector&) { return Matrix(dir); };
    return m;
  }
  if (name == "prony_activity") {
    // Emission-rate model: per-voxel activity follows the linear recursion
    // x_k = alpha x_{k-2} + beta x_{k-1} + gamma from initial frames
    // (x_0, x_1); the observed rate at (voxel i, bin j, frame k) is
    // c_ijk x_ik. Parameters per voxel: (alpha, beta, gamma, x_0, x_1).
    int n = params.at("n").get<int>();
    int mm = params.at("m").get<int>();
    int K = params.at("K").get<int>();
    Vector c = json_vec(params.at("c"));
    if (c.size() != static_cast<Eigen::Index>(n) * mm * K) {
      throw ConfigError("prony_activity: c tensor size mismatch");
    }
    std::vector<int> keep;
    if (params.contains("keep")) {
      for (const auto& e : params.at("keep")) keep.push_back(e.get<int>());
    } else {
      keep.resize(static_cast<std::size_t>(n) * mm * K);
      for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = static_cast<int>(i);
    }
    m.param_dim = 5 * n;
    m.ambient_dim = static_cast<int>(keep.size());
    m.lo = json_vec(params.at("box_lo"));
    m.hi = json_vec(params.at("box_hi"));
    if (m.lo.size() != 5 * n || m.hi.size() != 5 * n) {
      throw ConfigError("prony_activity: box size must be 5n");
    }
    auto activities = [n, K](const Vector& u) {
      Matrix x(n, K);
      for (int i = 0; i < n; ++i) {
        double alpha = u[5 * i], beta = u[5 * i + 1], gamma = u[5 * i + 2];
        x(i, 0) = u[5 * i + 3];
        if (K > 1) x(i, 1) = u[5 * i + 4];
        for (int k = 2; k < K; ++k) {
          x(i, k) = alpha * x(i, k - 2) + beta * x(i, k - 1) + gamma;
        }
      }
      return x;
    };
    m.map = [n, mm, K, c, keep, activities](const Vector& u) {
      Matrix x = activities(u);
      Vector v(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t t = 0; t < keep.size(); ++t) {
        int flat = keep[t];
        int i = flat / (mm * K);
        int k = flat % K;
        v[static_cast<Eigen::Index>(t)] = c[flat] * x(i, k);
      }
      return v;
    };
    m.jacobian = [n, mm, K, c, keep, activities](const Vector& u) {
      Matrix x = activities(u);
      // dx(i,k) with respect to the 5 parameters of voxel i, by the same
      // recursion applied to the gradient.
      std::vector<Matrix> dx(static_cast<std::size_t>(n), Matrix::Zero(5, K));
      for (int i = 0; i < n; ++i) {
        double alpha = u[5 * i], beta = u[5 * i + 1];
        Matrix& d = dx[static_cast<std::size_t>(i)];
        d(3, 0) = 1.0;
        if (K > 1) d(4, 1) = 1.0;
        for (int k = 2; k < K; ++k) {
          for (int p = 0; p < 5; ++p) {
            d(p, k) = alpha * d(p, k - 2) + beta * d(p, k - 1);
          }
          d(0, k) += x(i, k - 2);
          d(1, k) += x(i, k - 1);
          d(2, k) += 1.0;
        }
      }
      Matrix j = Matrix::Zero(static_cast<Eigen::Index>(keep.size()), 5 * n);
      for (std::size_t t = 0; t < keep.size(); ++t) {
        int flat = keep[t];
        int i = flat / (mm * K);
        int k = flat % K;
        for (int p = 0; p < 5; ++p) {
          j(static_cast<Eigen::Index>(t), 5 * i + p) = c[flat] * dx[static_cast<std::size_t>(i)](p, k);
        }
      }
      return j;
    };
    return m;
  }
  throw ConfigError("unknown parametric map: " + name);
}

std::vector<std::string> parametric_map_names() {
  return {"segment",     "circle",        "disk",         "parabola", "power_graph",
          "double_well", "squeezed_curve", "mixture_line", "prony_activity"};
}

SetSpec make_affine(Vector point, Matrix basis, std::string label) {
  SetSpec s;
  s.body = AffineSet{std::move(point), std::move(basis)};
  s.declared_convex = true;
  s.label = std::move(label);
  return s;
}

SetSpec make_polyhedron(Matrix normals, Vector offsets, std::string label) {
  SetSpec s;
  s.body = PolyhedronSet{std::move(normals), std::move(offsets)};
  s.declared_convex = true;
  s.label = std::move(label);
  return s;
}

SetSpec make_finite(std::vector<Vector> points, std::string label) {
  if (points.empty()) throw ConfigError("finite set needs at least one point");
  SetSpec s;
  s.declared_convex = points.size() <= 1;
  s.body = FiniteSet{std::move(points)};
  s.label = std::move(label);
  return s;
}

SetSpec make_parametric(ParametricMap map, int grid, std::string label) {
  SetSpec s;
  s.body = ParametricSet{std::move(map), grid};
  s.label = std::move(label);
  return s;
}

SetSpec make_data_set_kl(std::vector<int> group, Vector target, bool probability,
                         std::string label) {
  int J = static_cast<int>(target.size());
  if (J == 0 || group.empty()) throw ConfigError("data set needs groups and targets");
  std::vector<bool> hit(static_cast<std::size_t>(J), false);
  for (int gi : group) {
    if (gi < 0 || gi >= J) throw ConfigError("data set group index out of range");
    hit[static_cast<std::size_t>(gi)] = true;
  }
  if (!std::all_of(hit.begin(), hit.end(), [](bool b) { return b; })) {
    throw ConfigError("data set group map must be surjective");
  }
  if ((target.array() <= 0).any()) throw ConfigError("data set targets must be positive");
  if (probability && std::abs(target.sum() - 1.0) > 1e-9) {
    throw ConfigError("probability targets must sum to 1");
  }
  SetSpec s;
  s.body = DataSetKL{std::move(group), std::move(target), probability};
  s.declared_convex = true;
  s.label = std::move(label);
  return s;
}

SetSpec make_dual_affine(std::vector<int> index, Vector value, std::string label) {
  if (index.size() != static_cast<std::size_t>(value.size()) || index.empty()) {
    throw ConfigError("pinned dual coordinates: index/value size mismatch");
  }
  SetSpec s;
  s.body = DualAffineSet{std::move(index), std::move(value)};
  s.declared_convex = true;
  s.label = std::move(label);
  return s;
}

int SetSpec::ambient_dim() const {
  return std::visit(
      [](const auto& b) -> int {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, AffineSet>) return static_cast<int>(b.point.size());
        if constexpr (std::is_same_v<T, PolyhedronSet>) return static_cast<int>(b.normals.cols());
        if constexpr (std::is_same_v<T, FiniteSet>) return static_cast<int>(b.points[0].size());
        if constexpr (std::is_same_v<T, ParametricSet>) return b.map.ambient_dim;
        if constexpr (std::is_same_v<T, DataSetKL>) return static_cast<int>(b.group.size());
        if constexpr (std::is_same_v<T, DualAffineSet>) return -1;  // generator-dependent
        return -1;
      },
      body);
}

namespace {

// ---------------------------------------------------------------------------
// Projected gradient with Armijo backtracking on a closed box.

struct PgOutcome {
  Vector u;
  double value = kInf;
  int iterations = 0;
  double pg_norm = 0;
  bool boundary = false;
};

Vector clip_box(const Vector& u, const Vector& lo, const Vector& hi) {
  return u.cwiseMax(lo).cwiseMin(hi);
}

// Second-order finish for iterates the first-order loop leaves short of the
// tolerance: on the coordinates away from the box faces, build a
// finite-difference Hessian of the gradient and take damped Newton steps.
// First-order certification stalls once value differences fall below machine
// resolution; Newton steps keep contracting the gradient itself, which stays
// computable far below that floor. Any non-finite evaluation aborts the
// polish and keeps the incumbent.
template <class F, class G>
void newton_polish(F&& h, G&& grad, const Vector& lo, const Vector& hi, PgOutcome& out,
                   const SolverOptions& opt) {
  const Eigen::Index d = out.u.size();
  for (int round = 0; round < 50; ++round) {
    Vector gr = grad(out.u);
    if (!gr.allFinite()) return;
    out.pg_norm = (out.u - clip_box(out.u - gr, lo, hi)).norm();
    if (out.pg_norm <= opt.tol) return;

    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (out.u[i] - lo[i] > 1e-12 && hi[i] - out.u[i] > 1e-12) free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    if (nf == 0) return;

    Matrix H(nf, nf);
    for (Eigen::Index c = 0; c < nf; ++c) {
      Eigen::Index j = free[static_cast<std::size_t>(c)];
      double delta = 1e-7 * (1.0 + std::abs(out.u[j]));
      // Probe away from the nearer bound so the stencil stays in the box.
      if (hi[j] - out.u[j] < delta) delta = -delta;
      Vector up = out.u;
      up[j] += delta;
      Vector gp = grad(up);
      if (!gp.allFinite()) return;
      for (Eigen::Index r = 0; r < nf; ++r) {
        H(r, c) = (gp[free[static_cast<std::size_t>(r)]] - gr[free[static_cast<std::size_t>(r)]]) / delta;
      }
    }
    H = 0.5 * (H + H.transpose()).eval();
    Vector gf(nf);
    for (Eigen::Index r = 0; r < nf; ++r) gf[r] = gr[free[static_cast<std::size_t>(r)]];

    double hscale = std::max(1.0, H.cwiseAbs().maxCoeff());
    bool moved = false;
    for (double damp = 1e-10 * hscale; damp <= 1e2 * hscale; damp *= 10.0) {
      Eigen::LDLT<Matrix> ldlt(Matrix(H + damp * Matrix::Identity(nf, nf)));
      if (ldlt.info() != Eigen::Success) continue;
      Vector df = ldlt.solve(gf);
      if (!df.allFinite() || gf.dot(df) <= 0) continue;
      for (double step : {1.0, 0.5, 0.25, 0.0625}) {
        Vector cand = out.u;
        for (Eigen::Index r = 0; r < nf; ++r) {
          cand[free[static_cast<std::size_t>(r)]] -= step * df[r];
        }
        cand = clip_box(cand, lo, hi);
        if ((cand - out.u).norm() == 0.0) continue;
        double fc = h(cand);
        // The objective is flat to rounding noise in the regime this polish
        // exists for, so a strict value comparison would let noise veto steps
        // that contract the gradient; allow a band of a few hundred ulps.
        double band =
            1e3 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(out.value));
        if (!std::isfinite(fc) || fc > out.value + band) continue;
        Vector gc = grad(cand);
        if (!gc.allFinite()) continue;
        double pgc = (cand - clip_box(cand - gc, lo, hi)).norm();
        if (fc < out.value || pgc < 0.99 * out.pg_norm) {
          out.u = std::move(cand);
          out.value = fc;
          out.pg_norm = pgc;
          ++out.iterations;
          moved = true;
          break;
        }
      }
      if (moved) break;
    }
    if (!moved) return;
  }
}

template <class F, class G>
PgOutcome pg_minimize(F&& h, G&& grad, const Vector& lo, const Vector& hi, const Vector& start,
                      const SolverOptions& opt) {
  PgOutcome out;
  out.u = clip_box(start, lo, hi);
  out.value = h(out.u);
  if (!std::isfinite(out.value)) {
    throw DomainError("projection solver: infeasible start point");
  }
  Vector gr = grad(out.u);
  if (!gr.allFinite()) {
    throw SolverFailure("projection solver: gradient undefined; shrink the parameter box");
  }
  double t = 1.0;
  bool hit_budget = true;
  for (int it = 0; it < opt.max_iterations; ++it) {
    out.pg_norm = (out.u - clip_box(out.u - gr, lo, hi)).norm();
    out.iterations = it;
    if (out.pg_norm <= opt.tol) {
      hit_budget = false;
      break;
    }
    bool accepted = false;
    double tt = t;
    while (tt > 1e-18) {
      Vector cand = clip_box(out.u - tt * gr, lo, hi);
      if ((cand - out.u).norm() == 0.0) break;  // below floating-point resolution
      double fc = h(cand);
      if (std::isfinite(fc)) {
        double decrease = gr.dot(out.u - cand);
        // A sufficient decrease must be strict: once the objective is flat to
        // machine precision, value comparisons can no longer certify progress
        // and the projected-gradient norm takes over as the merit function.
        bool armijo_ok = fc < out.value && fc <= out.value - opt.armijo * decrease;
        if (armijo_ok || fc <= out.value) {
          Vector gc = grad(cand);
          // Candidates where the gradient stops being defined (the map can
          // touch the domain boundary) are stepped over, not onto.
          if (gc.allFinite()) {
            double pgc = (cand - clip_box(cand - gc, lo, hi)).norm();
            if (armijo_ok || pgc <= 0.9 * out.pg_norm) {
              // Spectral (Barzilai-Borwein) trial step for the next
              // iteration: near-Newton behaviour on ill-conditioned
              // objectives where a fixed or doubled step crawls.
              Vector s = cand - out.u;
              Vector y = gc - gr;
              double sy = s.dot(y);
              t = sy > 0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e8)
                         : std::min(tt * 2.0, 1e6);
              out.u = std::move(cand);
              out.value = fc;
              gr = std::move(gc);
              accepted = true;
              break;
            }
          }
        }
      }
      tt *= opt.backtrack;
    }
    if (!accepted) {
      // Line search exhausted at floating-point resolution. Treat as
      // stationary when the projected gradient sits at or below the level a
      // first-order method can still certify, which grows with the objective
      // scale; anything clearly above that level is a genuine failure (for
      // example an open-domain wall the box does not express).
      double certifiable =
          std::max(1e-4, 1e3 * std::sqrt(std::numeric_limits<double>::epsilon() *
                                         (1.0 + std::abs(out.value))));
      if (out.pg_norm > certifiable) {
        throw SolverFailure("projection solver: no descent direction at pg norm " +
                            std::to_string(out.pg_norm));
      }
      hit_budget = false;
      break;
    }
  }
  if (out.pg_norm > opt.tol) {
    newton_polish(h, grad, lo, hi, out, opt);
  }
  if (hit_budget && out.pg_norm > opt.tol) {
    throw SolverFailure("projection solver: iteration budget exhausted");
  }
  for (Eigen::Index i = 0; i < out.u.size(); ++i) {
    if (out.u[i] - lo[i] <= 1e-12 || hi[i] - out.u[i] <= 1e-12) out.boundary = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objectives for parametric sets. DomainError maps to +inf so the solver and
// the grid scan treat infeasible patches as walls.

enum class Slot { first, second };

double safe_objective(const Generator& g, Slot slot, const Vector& fixed, const Vector& x) {
  try {
    return slot == Slot::first ? divergence(g, x, fixed) : divergence(g, fixed, x);
  } catch (const DomainError&) {
    return kInf;
  }
}

// d/dx D(x, fixed) = grad f(x) - grad f(fixed);  d/dx D(fixed, x) = H(x)(x - fixed).
Vector objective_gradient(const Generator& g, Slot slot, const Vector& fixed, const Vector& x) {
  if (slot == Slot::first) return g.grad(x) - g.grad(fixed);
  return g.hessian(x) * (x - fixed);
}

struct GridScan {
  Vector best_u;
  double best_value = kInf;
  long evaluations = 0;
};

// Deterministic lattice scan over the parameter box; falls back to a seeded
// uniform sample when the lattice would explode combinatorially (high
// parameter dimension). Reduction is a lowest-index argmin, so the result is
// independent of evaluation order.
template <class F>
GridScan grid_scan(const ParametricMap& map, int budget, const F& h, const SolverOptions& opt) {
  GridScan out;
  int k = map.param_dim;
  long per_dim = std::max<long>(2, static_cast<long>(std::floor(std::pow(double(budget), 1.0 / k))));
  double lattice_size = std::pow(double(per_dim + 1), k);
  if (lattice_size <= 4.0 * budget) {
    long total = static_cast<long>(lattice_size);
    auto node = [&](std::ptrdiff_t flat) {
      Vector u(k);
      long rest = flat;
      for (int d_i = 0; d_i < k; ++d_i) {
        long idx = rest % (per_dim + 1);
        rest /= (per_dim + 1);
        u[d_i] = map.lo[d_i] + (map.hi[d_i] - map.lo[d_i]) * double(idx) / double(per_dim);
      }
      return u;
    };
    auto best = par::argmin(total, opt.exec, [&](std::ptrdiff_t i) { return h(node(i)); });
    out.evaluations = total;
    if (best.index >= 0 && std::isfinite(best.value)) {
      out.best_u = node(best.index);
      out.best_value = best.value;
    }
    return out;
  }
  std::mt19937_64 rng(opt.seed);
  std::vector<Vector> pts(static_cast<std::size_t>(budget));
  for (auto& u : pts) {
    u.resize(k);
    for (int d_i = 0; d_i < k; ++d_i) u[d_i] = uniform(rng, map.lo[d_i], map.hi[d_i]);
  }
  auto best = par::argmin(budget, opt.exec, [&](std::ptrdiff_t i) {
    return h(pts[static_cast<std::size_t>(i)]);
  });
  out.evaluations = budget;
  if (best.index >= 0 && std::isfinite(best.value)) {
    out.best_u = pts[static_cast<std::size_t>(best.index)];
    out.best_value = best.value;
  }
  return out;
}

ProjectionResult project_parametric(const Generator& g, const ParametricSet& ps, Slot slot,
                                    const Vector& fixed, const std::optional<Vector>& warm,
                                    const SolverOptions& opt) {
  const ParametricMap& map = ps.map;
  auto h = [&](const Vector& u) { return safe_objective(g, slot, fixed, map.map(u)); };
  auto grad = [&](const Vector& u) {
    Vector x = map.map(u);
    return Vector(map.jacobian(u).transpose() * objective_gradient(g, slot, fixed, x));
  };

  std::vector<Vector> starts;
  ProjectionMode mode;
  if (warm) {
    if (warm->size() != map.param_dim) {
      throw DomainError("warm start dimension does not match the parameter space");
    }
    starts.push_back(*warm);
    mode = ProjectionMode::local_solver;
  } else {
    GridScan scan = grid_scan(map, ps.grid, h, opt);
    if (!std::isfinite(scan.best_value)) {
      throw DomainError("parametric set has no feasible point on the scan grid");
    }
    starts.push_back(scan.best_u);
    if (opt.multistart > 0) {
      std::mt19937_64 rng(opt.seed + 1);
      for (int s = 0; s < opt.multistart; ++s) {
        Vector u(map.param_dim);
        for (int d_i = 0; d_i < map.param_dim; ++d_i) u[d_i] = uniform(rng, map.lo[d_i], map.hi[d_i]);
        starts.push_back(u);
      }
    }
    mode = ProjectionMode::global_enumeration;
  }

  std::optional<PgOutcome> best;
  for (const auto& s : starts) {
    PgOutcome o;
    try {
      o = pg_minimize(h, grad, map.lo, map.hi, s, opt);
    } catch (const DomainError&) {
      continue;  // infeasible extra start
    }
    if (!best || o.value < best->value) best = o;
  }
  if (!best) throw DomainError("all projection starts were infeasible");

  ProjectionResult r;
  r.param = best->u;
  r.point = map.map(best->u);
  r.value = slot == Slot::first ? divergence(g, r.point, fixed) : divergence(g, fixed, r.point);
  r.mode = mode;
  r.report.iterations = best->iterations;
  r.report.grad_norm = best->pg_norm;
  r.report.initial_value = warm ? h(*warm) : best->value;
  r.report.final_value = best->value;
  r.report.boundary_touched = best->boundary;
  r.report.starts = static_cast<int>(starts.size());
  return r;
}

ProjectionResult project_finite(const Generator& g, const FiniteSet& fs, Slot slot,
                                const Vector& fixed, const SolverOptions& opt) {
  auto n = static_cast<std::ptrdiff_t>(fs.points.size());
  auto best = par::argmin(n, opt.exec, [&](std::ptrdiff_t i) {
    return safe_objective(g, slot, fixed, fs.points[static_cast<std::size_t>(i)]);
  });
  if (best.index < 0 || !std::isfinite(best.value)) {
    throw DomainError("no finite-set point lies in the generator domain");
  }
  ProjectionResult r;
  r.index = static_cast<int>(best.index);
  r.point = fs.points[static_cast<std::size_t>(best.index)];
  r.value = best.value;
  r.mode = ProjectionMode::global_enumeration;
  r.report.final_value = best.value;
  r.report.boundary_touched =
      g.domain.classify(r.point, kMembershipMargin) == Membership::boundary;
  return r;
}

// Damped Newton over the affine coordinates. The objective is convex, so the
// optimum is global; for the euclidean generator the first step is exact.
ProjectionResult project_affine_left(const Generator& g, const AffineSet& af, const Vector& a,
                                     [[maybe_unused]] const SolverOptions& opt) {
  const Matrix& U = af.basis;
  auto x_of = [&](const Vector& w) { return Vector(af.point + U * w); };
  auto h = [&](const Vector& w) { return safe_objective(g, Slot::first, a, x_of(w)); };

  Vector w = U.colPivHouseholderQr().solve(a - af.point);
  if (!std::isfinite(h(w))) w = Vector::Zero(U.cols());
  double fw = h(w);
  if (!std::isfinite(fw)) {
    throw DomainError("affine set does not meet the domain interior near its basepoint");
  }
  Vector grad_fixed = g.grad(a);
  int it = 0;
  double gn = kInf;
  for (; it < 100; ++it) {
    Vector x = x_of(w);
    Vector gw = U.transpose() * (g.grad(x) - grad_fixed);
    gn = gw.norm();
    if (gn <= 1e-11 * (1.0 + grad_fixed.norm())) break;
    Matrix Hw = U.transpose() * g.hessian(x) * U;
    Vector dw = Hw.llt().solve(gw);
    double t = 1.0;
    bool ok = false;
    while (t > 1e-18) {
      double fc = h(w - t * dw);
      if (std::isfinite(fc) && fc <= fw - 1e-4 * t * gw.dot(dw)) {
        w -= t * dw;
        fw = fc;
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) break;
  }
  if (it >= 100 && gn > 1e-8) {
    throw SolverFailure("affine projection: Newton did not reach stationarity");
  }
  ProjectionResult r;
  r.point = x_of(w);
  r.value = divergence(g, r.point, a);
  r.mode = ProjectionMode::global_closed_form;
  r.report.iterations = it;
  r.report.grad_norm = gn;
  r.report.final_value = r.value;
  return r;
}

// Cyclic dual ascent on the halfspace multipliers (Hildreth-style, valid for
// any strictly convex generator): stationarity grad f(x) = grad f(a) - N' mu
// with mu >= 0, complementary slackness enforced one constraint at a time by
// a monotone 1-d root find in the multiplier.
ProjectionResult project_polyhedron_left(const Generator& g, const PolyhedronSet& ph,
                                         const Vector& a, const SolverOptions& opt) {
  const Eigen::Index mcon = ph.normals.rows();
  Vector mu = Vector::Zero(mcon);
  Vector y = g.grad(a);

  auto value_of = [&](const Vector& yy, const Vector& n) -> double {
    if (g.dual_domain.classify(yy, 0.0) != Membership::interior) return -kInf;
    return n.dot(g.conj_grad(yy));
  };

  double cscale = 1.0 + ph.offsets.cwiseAbs().maxCoeff();
  int sweeps = 0;
  for (; sweeps < opt.max_iterations; ++sweeps) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < mcon; ++i) {
      Vector n = ph.normals.row(i).transpose();
      double c = ph.offsets[i];
      // Remove constraint i entirely; if it is then satisfied, its
      // multiplier is zero by complementarity.
      Vector y_free = y + mu[i] * n;
      double v_free = value_of(y_free, n);
      if (v_free <= c) {
        y = y_free;
        mu[i] = 0.0;
        continue;
      }
      // Root of <n, conj_grad(y_free - s n)> = c over s > 0; the map is
      // strictly decreasing in s.
      double s_lo = 0.0, s_hi = std::max(1.0, mu[i]);
      for (int grow = 0; grow < 200 && value_of(y_free - s_hi * n, n) > c; ++grow) s_hi *= 2.0;
      for (int bis = 0; bis < 200; ++bis) {
        double mid = 0.5 * (s_lo + s_hi);
        double v = value_of(y_free - mid * n, n);
        if (v > c) {
          s_lo = mid;
        } else {
          s_hi = mid;
        }
      }
      double s = 0.5 * (s_lo + s_hi);
      mu[i] = s;
      y = y_free - s * n;
    }
    Vector x = g.conj_grad(y);
    for (Eigen::Index i = 0; i < mcon; ++i) {
      worst = std::max(worst, ph.normals.row(i).dot(x) - ph.offsets[i]);
    }
    if (worst <= 1e-12 * cscale) break;
  }
  if (sweeps >= opt.max_iterations) {
    throw SolverFailure("polyhedron projection: dual ascent did not converge");
  }
  ProjectionResult r;
  r.point = g.conj_grad(y);
  r.value = divergence(g, r.point, a);
  r.mode = ProjectionMode::global_closed_form;
  r.report.iterations = sweeps + 1;
  r.report.final_value = r.value;
  for (Eigen::Index i = 0; i < mcon; ++i) {
    if (ph.normals.row(i).dot(r.point) >= ph.offsets[i] - 1e-9) r.report.boundary_touched = true;
  }
  return r;
}

// Conditional-expectation scaling: within each observation group the
// minimizer keeps the reference proportions and rescales to the target mass.
ProjectionResult project_data_set_left(const Generator& g, const DataSetKL& ds, const Vector& a,
                                       const SolverOptions&) {
  if (g.family != GeneratorFamily::negentropy) {
    throw DomainError("group-target sets are defined for the negentropy geometry");
  }
  if (a.size() != static_cast<Eigen::Index>(ds.group.size())) {
    throw DomainError("dimension mismatch between point and data set");
  }
  if (g.domain.classify(a, 0.0) != Membership::interior) {
    throw DomainError("data-set projection needs a strictly positive reference point");
  }
  Vector sums = Vector::Zero(ds.target.size());
  for (std::size_t i = 0; i < ds.group.size(); ++i) {
    sums[ds.group[i]] += a[static_cast<Eigen::Index>(i)];
  }
  Vector p(a.size());
  for (std::size_t i = 0; i < ds.group.size(); ++i) {
    int j = ds.group[i];
    p[static_cast<Eigen::Index>(i)] = ds.target[j] * a[static_cast<Eigen::Index>(i)] / sums[j];
  }
  ProjectionResult r;
  r.point = p;
  r.value = divergence(g, p, a);
  r.mode = ProjectionMode::global_closed_form;
  r.report.final_value = r.value;
  return r;
}

// Both projections onto a pinned-dual-coordinate set reduce, for separable
// generators, to overwriting the pinned coordinates of the dual image and
// mapping back: the free dual coordinates already minimize coordinatewise.
ProjectionResult project_dual_affine(const Generator& g, const DualAffineSet& da,
                                     const Vector& input) {
  if (!g.separable) {
    throw DomainError("pinned dual coordinates need a separable generator");
  }
  Vector z = g.grad(input);
  for (std::size_t t = 0; t < da.index.size(); ++t) {
    int i = da.index[t];
    if (i < 0 || i >= z.size()) throw DomainError("pinned dual index out of range");
    z[i] = da.value[static_cast<Eigen::Index>(t)];
  }
  if (g.dual_domain.classify(z, 0.0) != Membership::interior) {
    throw DomainError("pinned dual values leave the dual domain");
  }
  ProjectionResult r;
  r.point = g.conj_grad(z);
  r.mode = ProjectionMode::global_closed_form;
  return r;
}

}  // namespace

bool SetSpec::contains(const Vector& x, const Generator* g) const {
  double tol = membership_tol;
  return std::visit(
      [&](const auto& b) -> bool {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, AffineSet>) {
          Vector w = b.basis.colPivHouseholderQr().solve(x - b.point);
          return ((x - b.point) - b.basis * w).cwiseAbs().maxCoeff() <= tol;
        }
        if constexpr (std::is_same_v<T, PolyhedronSet>) {
          return ((b.normals * x - b.offsets).array() <= tol).all();
        }
        if constexpr (std::is_same_v<T, FiniteSet>) {
          for (const auto& p : b.points) {
            if ((p - x).cwiseAbs().maxCoeff() <= tol) return true;
          }
          return false;
        }
        if constexpr (std::is_same_v<T, ParametricSet>) {
          // Grid scan plus descent on the squared distance. Approximate:
          // adequate for the verification tolerances used here.
          auto h = [&](const Vector& u) { return 0.5 * (b.map.map(u) - x).squaredNorm(); };
          auto grad = [&](const Vector& u) {
            return Vector(b.map.jacobian(u).transpose() * (b.map.map(u) - x));
          };
          SolverOptions opt;
          GridScan scan = grid_scan(b.map, b.grid, h, opt);
          if (!std::isfinite(scan.best_value)) return false;
          PgOutcome o = pg_minimize(h, grad, b.map.lo, b.map.hi, scan.best_u, opt);
          return std::sqrt(2.0 * o.value) <= std::max(tol, 1e-8);
        }
        if constexpr (std::is_same_v<T, DataSetKL>) {
          if (x.size() != static_cast<Eigen::Index>(b.group.size())) return false;
          if ((x.array() < -tol).any()) return false;
          Vector sums = Vector::Zero(b.target.size());
          for (std::size_t i = 0; i < b.group.size(); ++i) {
            sums[b.group[i]] += x[static_cast<Eigen::Index>(i)];
          }
          return (sums - b.target).cwiseAbs().maxCoeff() <= tol;
        }
        if constexpr (std::is_same_v<T, DualAffineSet>) {
          if (!g) throw DomainError("dual-coordinate membership needs the generator");
          Vector z = g->grad(x);
          for (std::size_t t = 0; t < b.index.size(); ++t) {
            if (std::abs(z[b.index[t]] - b.value[static_cast<Eigen::Index>(t)]) > tol) return false;
          }
          return true;
        }
        return false;
      },
      body);
}

ProjectionResult left_project(const Generator& g, const SetSpec& B, const Vector& a,
                              const std::optional<Vector>& warm, const SolverOptions& opt) {
  if (g.domain.classify(a, 0.0) != Membership::interior) {
    throw DomainError("left projection: reference point must be interior to the domain");
  }
  return std::visit(
      [&](const auto& b) -> ProjectionResult {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, AffineSet>) {
          return project_affine_left(g, b, a, opt);
        } else if constexpr (std::is_same_v<T, PolyhedronSet>) {
          return project_polyhedron_left(g, b, a, opt);
        } else if constexpr (std::is_same_v<T, FiniteSet>) {
          return project_finite(g, b, Slot::first, a, opt);
        } else if constexpr (std::is_same_v<T, ParametricSet>) {
          return project_parametric(g, b, Slot::first, a, warm, opt);
        } else if constexpr (std::is_same_v<T, DataSetKL>) {
          return project_data_set_left(g, b, a, opt);
        } else {
          ProjectionResult r = project_dual_affine(g, b, a);
          r.value = divergence(g, r.point, a);
          r.report.final_value = r.value;
          return r;
        }
      },
      B.body);
}

ProjectionResult right_project(const Generator& g, const SetSpec& A, const Vector& b,
                               const std::optional<Vector>& warm, const SolverOptions& opt) {
  if (g.domain.classify(b, kMembershipMargin) == Membership::outside) {
    throw DomainError("right projection: point must lie in the closed domain");
  }
  return std::visit(
      [&](const auto& bb) -> ProjectionResult {
        using T = std::decay_t<decltype(bb)>;
        if constexpr (std::is_same_v<T, AffineSet> || std::is_same_v<T, PolyhedronSet>) {
          // Divergence is symmetric for the euclidean generator, so the left
          // machinery already solves the right problem. Other generators
          // would need a compact set here; declare one as parametric.
          if (g.family != GeneratorFamily::euclidean) {
            throw DomainError(
                "right projection onto affine/polyhedron sets is euclidean-only; "
                "use a parametric box instead");
          }
          return left_project(g, A, b, warm, opt);
        } else if constexpr (std::is_same_v<T, FiniteSet>) {
          return project_finite(g, bb, Slot::second, b, opt);
        } else if constexpr (std::is_same_v<T, ParametricSet>) {
          return project_parametric(g, bb, Slot::second, b, warm, opt);
        } else if constexpr (std::is_same_v<T, DataSetKL>) {
          throw DomainError("group-target sets support left projection only");
        } else {
          if (g.domain.classify(b, 0.0) != Membership::interior) {
            throw DomainError("dual-route projection needs an interior point");
          }
          ProjectionResult r = project_dual_affine(g, bb, b);
          r.value = divergence(g, b, r.point);
          r.report.final_value = r.value;
          return r;
        }
      },
      A.body);
}

ProjectionResult local_right_project(const Generator& g, const SetSpec& A, const Vector& b,
                                     const Vector& warm, const SolverOptions& opt) {
  const auto* ps = std::get_if<ParametricSet>(&A.body);
  if (!ps) throw DomainError("local right projection is defined for parametric sets");
  ProjectionResult r = project_parametric(g, *ps, Slot::second, b, warm, opt);
  r.mode = ProjectionMode::local_solver;
  return r;
}

}  // namespace bregalt
