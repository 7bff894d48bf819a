#pragma once

#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "rmdp/model.hpp"
#include "rmdp/rng.hpp"

namespace rmdp::oracle {

/// Deterministic stackless strategy: action per (component, vertex). Only
/// vertices with transition rows need an assignment.
using Strategy = std::unordered_map<GlobalVertex, int, GlobalVertexHash>;
using ValueMap = std::unordered_map<GlobalVertex, double, GlobalVertexHash>;

struct ValueSolution {
  ValueMap values;
  Strategy strategy;
  double residual = 0.0;
  int iterations = 0;
};

/// Expected total reward of a stackless strategy on a 1-exit model, via the
/// exact linear system x = A_sigma x + b_sigma (call ports compose as
/// x(q) = x(en) + x(b,ex')). Throws SingularSystem when sigma is improper.
ValueMap eval_stackless(const Rmdp& m, const Strategy& sigma);

/// Optimal values and a stackless optimal strategy for a proper 1-exit model:
/// policy iteration with exact linear solves, warm-started by sparse value
/// iteration on the fixed-point operator F.
ValueSolution solve_1exit(const Rmdp& m);

/// One application of F; used for residual checks.
ValueMap apply_f(const Rmdp& m, const ValueMap& x);

/// The Appendix-style LP (minimize sum t_q subject to t_q >= each rhs) in LP
/// text format. Gated behind a successful solve_1exit run.
std::string lp_export_1exit(const Rmdp& m);

/// Optimal values of the finite MDP over configurations with stack height
/// <= stack_bound; calls that would exceed the bound are valued 0. Returns
/// y(<empty stack>, q) per vertex. Internally memoizes component instances by
/// their concrete exit payoffs (quantized with an influence-scaled grain), so
/// the cost tracks the reachable contexts rather than the stack contents.
std::vector<std::vector<double>> solve_truncated(const Rmdp& m, int stack_bound, double tol);

/// Exhaustive memoized search over deterministic models: optimal total reward
/// from (empty stack, entry) for every entry of every component. Throws
/// NondeterministicModel / CapUnstable.
std::map<std::pair<int, int>, double> solve_deterministic(const Rmdp& m, int depth_cap);

struct PacParams {
  double c_o = 1.0;
  double mu = 1.0;
  double b = 0.0;
  double K = 1.0;  // bound on expected steps to termination
};

struct PacResult {
  Rmdp learned;
  ValueSolution solution;
  long samples_per_row = 0;
  double eps = 0.0;
  double delta = 0.0;
  double row_l1_target = 0.0;  // eps / (2 K^2 r_max)
};

/// Draws a destination vertex for (component, vertex, action).
using RowSampler = std::function<int(int comp, int vid, int action)>;

/// Learns transition probabilities of a 1-exit skeleton from samples and
/// solves the learned model. Guarantee: |value(M') - value(M)| <= eps with
/// probability >= 1 - delta, via the row-wise L1 concentration bound.
PacResult pac_learn_1exit(const RowSampler& sample, const Rmdp& skeleton, double eps, double delta,
                          double K, double r_max);

}  // namespace rmdp::oracle
