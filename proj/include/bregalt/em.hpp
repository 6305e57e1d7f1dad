#pragma once

#include <string>
#include <vector>

#include "bregalt/alternator.hpp"
#include "bregalt/generator.hpp"
#include "bregalt/sets.hpp"
#include "bregalt/types.hpp"

namespace bregalt {

// Finite mixture setting: distributions on I, observations grouped by T into
// J, observed marginals p_hat on J, and a parametric model inside the open
// simplex. The alternation minimizes KL(p || q) with p constrained to the
// data marginals and q to the model.
struct DiscreteEmProblem {
  std::vector<int> T;  // I -> J group map
  Vector p_hat;        // positive probability vector on J
  SetSpec model;       // parametric, image in the open simplex interior
  int I() const { return static_cast<int>(T.size()); }
  int J() const { return static_cast<int>(p_hat.size()); }
};

DiscreteEmProblem make_discrete_em_problem(std::vector<int> T, Vector p_hat, SetSpec model);

// Conditional-expectation update: p_i = p_hat[T(i)] * q_i / sum of q over
// T(i)'s group. Closed form for the left KL projection onto the data set.
Vector e_step_discrete(const Vector& q, const DiscreteEmProblem& problem);

// Right KL projection of p onto the model, warm-started at the given model
// parameter (local solver; the warm start certifies objective decrease).
ProjectionResult m_step_discrete(const Vector& p, const DiscreteEmProblem& problem,
                                 const Vector& warm_param, const SolverOptions& opt = {});

struct EmTrace {
  Trace trace;
  std::string left_role;   // role played by left projections in this run
  std::string right_role;  // role played by right projections
  // Distance between consecutive data-side iterates at the stop; near zero
  // on converged runs (the conditional-expectation fixed-point relation).
  double fixed_point_residual = 0.0;
};

EmTrace run_em_discrete(const DiscreteEmProblem& problem, const Vector& start_param,
                        const RunConfig& config = {});

// Steep exponential family in natural parameters: the generator is the
// log-normalizer, the observed block of the sufficient statistic has its
// expectation pinned to y_hat (an affine set in dual coordinates), and the
// model is a parametric set of natural parameters inside a bounded box.
struct ExpFamilySpec {
  Generator generator;
  std::vector<int> observed;  // indices of the observed statistic block
  Vector y_hat;               // observed means, expectation coordinates
  SetSpec model;
};

ExpFamilySpec make_exp_family_spec(Generator generator, std::vector<int> observed,
                                   Vector y_hat, SetSpec model);

// Divergence of the log-normalizer: equals KL(p_theta_prime || p_theta).
// For the shipped poisson and gaussian families the distributional KL is
// evaluated independently and a mismatch beyond 1e-9 raises Error.
double kl_expfam(const ExpFamilySpec& spec, const Vector& theta_prime, const Vector& theta);

// Alternation theta' -> right-project-onto-data of left-project-onto-model,
// with the data projection done by pinning the observed dual coordinates.
EmTrace run_em_expfam(const ExpFamilySpec& spec, const Vector& start_theta_prime,
                      const RunConfig& config = {});

// Dynamic emission toy problem: per-voxel activities follow a two-step
// linear recursion; observed bin/frame totals constrain grouped sums of the
// rates c_ijk * x_ik. Solved as a KL alternation between the total-matching
// data set and the recursion-parameterized model.
struct DspectProblem {
  int n = 0, m = 0, K = 0;
  Generator gen;          // negentropy over the kept rate coordinates
  SetSpec data;           // grouped totals (positive bins only)
  SetSpec model;          // recursion-parameterized rates
  std::vector<int> keep;  // kept flat (voxel-major, then bin, then frame) indices
  Vector y;               // positive bin/frame totals, group order
  Vector truth_param;     // the synthesizing parameters (5 per voxel)
  Matrix truth_activity;  // n x K frame activities of the truth

  // Frame activities induced by a parameter vector (5 per voxel).
  Matrix activities(const Vector& params) const;
};

// Synthesizes noiseless totals from the given recursion parameters
// (alpha, beta, gamma, x0, x1 per voxel; c flat voxel-major). Raises
// InvalidModel when the recursion produces a nonpositive activity and
// ConfigError beyond the desk-scale caps (n <= 9, m <= 4, K <= 8).
DspectProblem build_dspect_problem(int n, int m, int K, const Vector& prony_params,
                                   const Vector& c);

EmTrace run_em_dspect(const DspectProblem& problem, const Vector& start_param,
                      const RunConfig& config = {});

}  // namespace bregalt
