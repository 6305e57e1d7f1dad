#include "bregalt/em.hpp"

#include <algorithm>
#include <cmath>

namespace bregalt {

DiscreteEmProblem make_discrete_em_problem(std::vector<int> T, Vector p_hat, SetSpec model) {
  const int J = static_cast<int>(p_hat.size());
  if (T.empty() || J == 0) throw ConfigError("em problem needs nonempty index sets");
  std::vector<bool> hit(static_cast<std::size_t>(J), false);
  for (int j : T) {
    if (j < 0 || j >= J) throw ConfigError("group map value out of range");
    hit[static_cast<std::size_t>(j)] = true;
  }
  if (!std::all_of(hit.begin(), hit.end(), [](bool b) { return b; })) {
    throw ConfigError("group map must be surjective");
  }
  if ((p_hat.array() <= 0).any() || std::abs(p_hat.sum() - 1.0) > 1e-9) {
    throw ConfigError("observed marginals must be positive and sum to 1");
  }
  const auto* ps = std::get_if<ParametricSet>(&model.body);
  if (!ps || ps->map.ambient_dim != static_cast<int>(T.size())) {
    throw ConfigError("model must be parametric over the full index set");
  }
  DiscreteEmProblem p;
  p.T = std::move(T);
  p.p_hat = std::move(p_hat);
  p.model = std::move(model);
  return p;
}

Vector e_step_discrete(const Vector& q, const DiscreteEmProblem& problem) {
  if (q.size() != problem.I()) throw DomainError("vector is not indexed by I");
  if ((q.array() <= 0).any()) throw DomainError("conditioning point must be strictly positive");
  Vector sums = Vector::Zero(problem.J());
  for (int i = 0; i < problem.I(); ++i) sums[problem.T[static_cast<std::size_t>(i)]] += q[i];
  if ((sums.array() <= 0).any()) throw DomainError("a group has zero total mass");
  Vector p(q.size());
  for (int i = 0; i < problem.I(); ++i) {
    int j = problem.T[static_cast<std::size_t>(i)];
    p[i] = problem.p_hat[j] * q[i] / sums[j];
  }
  return p;
}

ProjectionResult m_step_discrete(const Vector& p, const DiscreteEmProblem& problem,
                                 const Vector& warm_param, const SolverOptions& opt) {
  if ((p.array() <= 0).any()) throw DomainError("m-step needs a strictly positive point");
  Generator g = make_generator("negentropy", problem.I());
  return local_right_project(g, problem.model, p, warm_param, opt);
}

namespace {

EmTrace finish_em(Trace trace, std::string left_role, std::string right_role,
                  bool data_on_b_side) {
  EmTrace em;
  em.left_role = std::move(left_role);
  em.right_role = std::move(right_role);
  if (!trace.blocks.empty()) {
    const Block& last = trace.blocks.back();
    em.fixed_point_residual = data_on_b_side ? (last.b - last.b_plus).norm()
                                             : trace.step_a.back();
  }
  em.trace = std::move(trace);
  return em;
}

}  // namespace

EmTrace run_em_discrete(const DiscreteEmProblem& problem, const Vector& start_param,
                        const RunConfig& config) {
  Generator g = make_generator("negentropy", problem.I());
  SetSpec data = make_data_set_kl(problem.T, problem.p_hat, true, "data-marginals");

  const auto& ps = std::get<ParametricSet>(problem.model.body);
  Vector start = ps.map.map(start_param);

  RunConfig cfg = config;
  cfg.orientation = Orientation::lr;  // model point enters through the e-step
  cfg.start_param = start_param;
  Trace tr = run(g, problem.model, data, start, cfg);
  return finish_em(std::move(tr), "e-step", "m-step", /*data_on_b_side=*/true);
}

ExpFamilySpec make_exp_family_spec(Generator generator, std::vector<int> observed,
                                   Vector y_hat, SetSpec model) {
  if (observed.empty() || observed.size() != static_cast<std::size_t>(y_hat.size())) {
    throw ConfigError("observed indices and y_hat must align and be nonempty");
  }
  for (int i : observed) {
    if (i < 0 || i >= generator.dim) throw ConfigError("observed index out of range");
  }
  ExpFamilySpec spec;
  spec.generator = std::move(generator);
  spec.observed = std::move(observed);
  spec.y_hat = std::move(y_hat);
  spec.model = std::move(model);
  return spec;
}

double kl_expfam(const ExpFamilySpec& spec, const Vector& theta_prime, const Vector& theta) {
  double d = divergence(spec.generator, theta, theta_prime);
  const Generator& g = spec.generator;
  if (g.family == GeneratorFamily::poisson) {
    // KL(Poisson(lambda') || Poisson(lambda)) componentwise.
    double kl = 0;
    for (int i = 0; i < g.dim; ++i) {
      double lam = std::exp(theta[i]), lamp = std::exp(theta_prime[i]);
      kl += lamp * std::log(lamp / lam) - lamp + lam;
    }
    if (std::abs(kl - d) > 1e-9 * (1.0 + std::abs(d))) {
      throw Error("divergence disagrees with the distributional Poisson KL");
    }
  } else if (g.family == GeneratorFamily::gaussian) {
    // Natural parameter theta maps to mean sigma^2 * theta with
    // sigma^2 = 1 / sigma2_generator; KL = |mu - mu'|^2 / (2 sigma^2).
    double v = g.params.value("sigma2", 1.0);
    double var = 1.0 / v;
    double kl = (var * theta - var * theta_prime).squaredNorm() / (2.0 * var);
    if (std::abs(kl - d) > 1e-9 * (1.0 + std::abs(d))) {
      throw Error("divergence disagrees with the distributional Gaussian KL");
    }
  }
  return d;
}

EmTrace run_em_expfam(const ExpFamilySpec& spec, const Vector& start_theta_prime,
                      const RunConfig& config) {
  SetSpec data = make_dual_affine(spec.observed, spec.y_hat, "observed-means");

  RunConfig cfg = config;
  cfg.orientation = Orientation::lr;  // data point enters through the m-step
  cfg.start_param = std::nullopt;
  Trace tr = run(spec.generator, data, spec.model, start_theta_prime, cfg);
  return finish_em(std::move(tr), "m-step", "e-step", /*data_on_b_side=*/false);
}

Matrix DspectProblem::activities(const Vector& params) const {
  if (params.size() != 5 * n) throw DomainError("expected 5 parameters per voxel");
  Matrix x(n, K);
  for (int i = 0; i < n; ++i) {
    double alpha = params[5 * i], beta = params[5 * i + 1], gamma = params[5 * i + 2];
    x(i, 0) = params[5 * i + 3];
    if (K > 1) x(i, 1) = params[5 * i + 4];
    for (int k = 2; k < K; ++k) x(i, k) = alpha * x(i, k - 2) + beta * x(i, k - 1) + gamma;
  }
  return x;
}

DspectProblem build_dspect_problem(int n, int m, int K, const Vector& prony_params,
                                   const Vector& c) {
  if (n < 1 || n > 9 || m < 1 || m > 4 || K < 1 || K > 8) {
    throw ConfigError("desk-scale caps: n <= 9, m <= 4, K <= 8");
  }
  if (prony_params.size() != 5 * n) throw ConfigError("expected 5 parameters per voxel");
  if (c.size() != static_cast<Eigen::Index>(n) * m * K) throw ConfigError("c tensor size mismatch");
  if ((c.array() < 0).any()) throw ConfigError("c tensor must be nonnegative");

  DspectProblem prob;
  prob.n = n;
  prob.m = m;
  prob.K = K;
  prob.truth_param = prony_params;
  prob.truth_activity = prob.activities(prony_params);
  if ((prob.truth_activity.array() <= 0).any()) {
    throw InvalidModel("recursion produced a nonpositive activity");
  }

  // Bin/frame totals of the rates; zero-total groups (and identically zero
  // rate coordinates) are eliminated so iterates stay interior.
  Matrix y = Matrix::Zero(m, K);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < K; ++k) {
        y(j, k) += c[(i * m + j) * K + k] * prob.truth_activity(i, k);
      }
    }
  }
  std::vector<int> bin_index(static_cast<std::size_t>(m) * K, -1);
  std::vector<double> targets;
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < K; ++k) {
      if (y(j, k) > 0) {
        bin_index[static_cast<std::size_t>(j * K + k)] = static_cast<int>(targets.size());
        targets.push_back(y(j, k));
      }
    }
  }
  if (targets.empty()) throw InvalidModel("all synthesized totals are zero");

  std::vector<int> group;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < K; ++k) {
        int flat = (i * m + j) * K + k;
        if (c[flat] > 0 && bin_index[static_cast<std::size_t>(j * K + k)] >= 0) {
          prob.keep.push_back(flat);
          group.push_back(bin_index[static_cast<std::size_t>(j * K + k)]);
        }
      }
    }
  }
  prob.y = Eigen::Map<const Vector>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  prob.gen = make_generator("negentropy", static_cast<int>(prob.keep.size()));
  prob.data = make_data_set_kl(group, prob.y, /*probability=*/false, "bin-frame-totals");

  nlohmann::json map_params;
  map_params["n"] = n;
  map_params["m"] = m;
  map_params["K"] = K;
  map_params["c"] = std::vector<double>(c.data(), c.data() + c.size());
  map_params["keep"] = prob.keep;
  std::vector<double> lo(static_cast<std::size_t>(5 * n)), hi(lo.size());
  for (int t = 0; t < 5 * n; ++t) {
    double width = std::max(1.0, 0.5 * std::abs(prony_params[t]));
    lo[static_cast<std::size_t>(t)] = prony_params[t] - width;
    hi[static_cast<std::size_t>(t)] = prony_params[t] + width;
    if (t % 5 >= 3) {  // initial frames must stay positive
      lo[static_cast<std::size_t>(t)] = std::max(1e-6, lo[static_cast<std::size_t>(t)]);
    }
  }
  map_params["box_lo"] = lo;
  map_params["box_hi"] = hi;
  prob.model = make_parametric(make_parametric_map("prony_activity", map_params), 1024,
                               "recursion-rates");
  return prob;
}

EmTrace run_em_dspect(const DspectProblem& problem, const Vector& start_param,
                      const RunConfig& config) {
  const auto& ps = std::get<ParametricSet>(problem.model.body);
  Vector start = ps.map.map(start_param);
  RunConfig cfg = config;
  cfg.orientation = Orientation::lr;
  cfg.start_param = start_param;
  Trace tr = run(problem.gen, problem.model, problem.data, start, cfg);
  return finish_em(std::move(tr), "e-step", "m-step", /*data_on_b_side=*/true);
}

}  // namespace bregalt
