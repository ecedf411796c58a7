#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "evdep/estimate.hpp"
#include "evdep/lattice.hpp"

namespace evdep {

/// One linear inequality "constant + sum coeff_i * a_i >= 0": the requirement
/// that the decomposition component for L stays nonnegative when the variables
/// are Pickands values. Coefficients are stored sparsely as
/// (variable position, signed margin sum).
struct ConstraintRow {
  SubsetIndex L;
  double constant;
  std::vector<std::pair<int, double>> terms;
};

/// The feasibility polytope of the joint estimation problem at one evaluation
/// point: one decision variable a_B per subset with |B| >= 2, the 2^m - 1
/// nonnegativity rows (singleton subsets enter as fixed 1/y_i contributions),
/// and per-variable boxes [max w_B, 1].
struct ConstraintSystem {
  int m;
  std::vector<double> y;
  std::vector<double> u;  // 1/y_i

  std::vector<SubsetIndex> vars;   // |B| >= 2, increasing bitmask order
  std::vector<double> margin_sum;  // s_B = sum_{i in B} 1/y_i per variable
  std::vector<double> lower;       // max w_B per variable
  std::vector<double> upper;       // 1 per variable
  std::vector<ConstraintRow> rows;

  double row_value(std::size_t r, std::span<const double> a) const;
  /// Position of B in vars, -1 for singletons.
  int var_position(std::uint32_t bits) const;
};

ConstraintSystem build_constraints(std::span<const double> y);

struct SolverOptions {
  double barrier_start = 1.0;
  double barrier_decay = 0.2;
  double newton_tol = 1e-11;       // stage stop on squared Newton decrement / 2
  int max_iterations = 5000;       // total Newton steps across all stages
  double feasibility_slack = 1e-10;  // acceptance slack for the clipped start
  double gap_tol = 1e-9;           // duality gap (mu times constraint count)
};

struct ConstrainedEstimate {
  std::vector<SubsetIndex> vars;
  std::vector<double> a;  // constrained Pickands values, aligned with vars
  double kkt_residual;
  std::vector<SubsetIndex> active;  // rows with (near-)zero slack
  bool changed;  // true iff the result differs from the clipped raw estimates
};

using HtWeightsMap = std::map<std::uint32_t, HtWeights>;

/// Joint objective: sum over the map of loglik_A(a_B, W_B), separable and
/// strictly concave. `a` is aligned with the map's ascending key order.
double pseudo_loglik(std::span<const double> a, const HtWeightsMap& weights);

/// Maximizes pseudo_loglik over the polytope of build_constraints(y).
///
/// If the clipped unconstrained estimates already satisfy every row (within
/// the feasibility slack) they are returned bit-for-bit with changed = false.
/// Otherwise a log-barrier interior-point method with damped Newton steps runs
/// until the duality gap drops below gap_tol. Non-convergence throws, with the
/// residual in the message. The weights map must hold an entry for every
/// subset with |B| >= 2.
ConstrainedEstimate solve_constrained(const HtWeightsMap& weights,
                                      std::span<const double> y,
                                      const SolverOptions& options = {});

/// Same solve driven by sufficient statistics: per-variable sums of 1/W_B^j
/// aligned with build_constraints(y).vars, plus the common observation count.
/// The weights-map overload and the experiment loop both land here.
ConstrainedEstimate solve_constrained(std::span<const double> y, int n_obs,
                                      std::span<const double> inv_sums,
                                      const SolverOptions& options = {});

/// Variant for callers that solve many problems at the same evaluation point
/// and keep the constraint system around.
ConstrainedEstimate solve_constrained(const ConstraintSystem& cs, int n_obs,
                                      std::span<const double> inv_sums,
                                      const SolverOptions& options = {});

/// Assembles the complete evaluation set implied by a solution (singletons
/// exact, V_B = s_B * a_B); by construction it passes check_consistency up to
/// the solver's feasibility slack.
ExponentEvaluationSet to_evaluation_set(const ConstrainedEstimate& estimate,
                                        std::span<const double> y);

}  // namespace evdep
