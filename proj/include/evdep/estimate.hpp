#pragma once

#include <span>
#include <vector>

#include "evdep/lattice.hpp"
#include "evdep/models.hpp"

namespace evdep {

/// Marginal correction factors c_i = (1/n) sum_j 1/Y_i^j. They depend only on
/// the sample, so callers evaluating many subsets or grid points compute them
/// once and pass them to ht_weights().
std::vector<double> marginal_corrections(const BlockMaximaSample& sample);

/// The per-observation statistics W_B^j = max_{i in B} { w_i * Y_i^j * c_i }
/// entering the corrected Pickands likelihood. The correction guarantees
/// max(w_B) <= A_hat and A_hat(e_i) = 1.
class HtWeights {
 public:
  HtWeights(SubsetIndex B, std::vector<double> simplex,
            std::vector<double> values);

  const SubsetIndex& subset() const { return subset_; }
  const std::vector<double>& simplex() const { return simplex_; }
  const std::vector<double>& values() const { return values_; }
  int count() const { return static_cast<int>(values_.size()); }
  double sum_inverse() const { return sum_inverse_; }
  double sum_log() const { return sum_log_; }

 private:
  SubsetIndex subset_;
  std::vector<double> simplex_;
  std::vector<double> values_;
  double sum_inverse_;
  double sum_log_;
};

HtWeights ht_weights(const BlockMaximaSample& sample, const SubsetIndex& B,
                     std::span<const double> w_B);
HtWeights ht_weights(const BlockMaximaSample& sample,
                     std::span<const double> corrections, const SubsetIndex& B,
                     std::span<const double> w_B);

/// Log likelihood of a candidate Pickands value given the weights:
///   n log a - 2 sum_j log W^j - a sum_j 1/W^j.
/// Strictly concave in a with maximizer n / sum_j (1/W^j).
double loglik_A(double a, const HtWeights& weights);

struct PickandsEstimate {
  SubsetIndex B;
  std::vector<double> w;  // simplex point the estimate refers to
  double a_hat;           // raw likelihood maximizer
  double a_tilde;         // clipped to [max w, 1]
};

/// Closed-form maximizer of loglik_A plus the clip at 1.
PickandsEstimate ht_estimate(const HtWeights& weights);

/// Exponent measure from a Pickands value: (sum_i 1/y_i) * a. The estimate
/// overload checks that y_B projects to the simplex point the estimate was
/// computed at (componentwise, 1e-10).
double V_from_A(double a, std::span<const double> y_B);
double V_from_A(const PickandsEstimate& estimate, std::span<const double> y_B);

/// Unconstrained estimates at one evaluation point: singletons are exactly
/// 1/y_i, every |B| >= 2 runs the corrected-likelihood pipeline. The result
/// may fail check_consistency; enforcing the inequalities is the job of the
/// constrained solver.
ExponentEvaluationSet estimate_all(const BlockMaximaSample& sample,
                                   std::span<const double> y);

}  // namespace evdep
