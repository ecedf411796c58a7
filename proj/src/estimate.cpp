#include "evdep/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evdep {

namespace {

void require_simplex(std::span<const double> w) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("simplex point has a negative component");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("simplex point does not sum to 1");
  }
}

double max_component(std::span<const double> w) {
  return *std::max_element(w.begin(), w.end());
}

}  // namespace

std::vector<double> marginal_corrections(const BlockMaximaSample& sample) {
  const int n = sample.size();
  std::vector<double> c(sample.dim(), 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < sample.dim(); ++i) c[i] += 1.0 / sample.value(j, i);
  }
  for (double& v : c) v /= n;
  return c;
}

HtWeights::HtWeights(SubsetIndex B, std::vector<double> simplex,
                     std::vector<double> values)
    : subset_(B), simplex_(std::move(simplex)), values_(std::move(values)) {
  if (static_cast<int>(simplex_.size()) != subset_.size()) {
    throw std::invalid_argument("simplex point size must equal |B|");
  }
  require_simplex(simplex_);
  if (values_.size() < 2) {
    throw std::invalid_argument("need at least two observations");
  }
  sum_inverse_ = 0.0;
  sum_log_ = 0.0;
  for (double v : values_) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("weights must be strictly positive");
    }
    sum_inverse_ += 1.0 / v;
    sum_log_ += std::log(v);
  }
}

HtWeights ht_weights(const BlockMaximaSample& sample, const SubsetIndex& B,
                     std::span<const double> w_B) {
  return ht_weights(sample, marginal_corrections(sample), B, w_B);
}

HtWeights ht_weights(const BlockMaximaSample& sample,
                     std::span<const double> corrections, const SubsetIndex& B,
                     std::span<const double> w_B) {
  if (B.dimension() != sample.dim()) {
    throw std::invalid_argument("subset dimension mismatch");
  }
  if (static_cast<int>(corrections.size()) != sample.dim()) {
    throw std::invalid_argument("one correction factor per margin required");
  }
  if (static_cast<int>(w_B.size()) != B.size()) {
    throw std::invalid_argument("simplex point size must equal |B|");
  }
  if (sample.size() < 2) {
    throw std::invalid_argument("need at least two observations");
  }
  require_simplex(w_B);
  const std::vector<int> elems = B.elements();
  const int n = sample.size();
  std::vector<double> values(n);
  for (int j = 0; j < n; ++j) {
    double mx = 0.0;
    for (std::size_t k = 0; k < elems.size(); ++k) {
      const int col = elems[k] - 1;
      mx = std::max(mx, w_B[k] * sample.value(j, col) * corrections[col]);
    }
    values[j] = mx;
  }
  return HtWeights(B, std::vector<double>(w_B.begin(), w_B.end()),
                   std::move(values));
}

double loglik_A(double a, const HtWeights& weights) {
  if (!(a > 0.0)) {
    throw std::invalid_argument("Pickands candidate must be positive");
  }
  return weights.count() * std::log(a) - 2.0 * weights.sum_log() -
         a * weights.sum_inverse();
}

PickandsEstimate ht_estimate(const HtWeights& weights) {
  const double a_hat =
      static_cast<double>(weights.count()) / weights.sum_inverse();
  return PickandsEstimate{weights.subset(), weights.simplex(), a_hat,
                          std::min(a_hat, 1.0)};
}

double V_from_A(double a, std::span<const double> y_B) {
  const std::vector<double> w = simplex_point(y_B);
  const double lo = max_component(w);
  if (a < lo - 1e-9 || a > 1.0 + 1e-9) {
    throw std::invalid_argument("Pickands value outside [max w, 1]");
  }
  double s = 0.0;
  for (double v : y_B) s += 1.0 / v;
  return s * a;
}

double V_from_A(const PickandsEstimate& estimate,
                std::span<const double> y_B) {
  const std::vector<double> w = simplex_point(y_B);
  if (w.size() != estimate.w.size()) {
    throw std::invalid_argument("evaluation point does not match the estimate");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (std::abs(w[i] - estimate.w[i]) > 1e-10) {
      throw std::invalid_argument(
          "evaluation point projects to a different simplex point");
    }
  }
  double s = 0.0;
  for (double v : y_B) s += 1.0 / v;
  return s * estimate.a_tilde;
}

ExponentEvaluationSet estimate_all(const BlockMaximaSample& sample,
                                   std::span<const double> y) {
  if (static_cast<int>(y.size()) != sample.dim()) {
    throw std::invalid_argument("evaluation point dimension mismatch");
  }
  if (sample.size() < 2) {
    throw std::invalid_argument("need at least two observations");
  }
  ExponentEvaluationSet out(std::vector<double>(y.begin(), y.end()));
  const std::vector<double> corrections = marginal_corrections(sample);
  std::vector<double> proj;
  for (const SubsetIndex& B : enumerate_subsets(sample.dim())) {
    if (B.size() == 1) {
      out.set(B, 1.0 / y[B.elements().front() - 1]);
      continue;
    }
    proj.clear();
    for (int e : B.elements()) proj.push_back(y[e - 1]);
    const std::vector<double> w = simplex_point(proj);
    const HtWeights weights = ht_weights(sample, corrections, B, w);
    out.set(B, V_from_A(ht_estimate(weights), proj));
  }
  return out;
}

}  // namespace evdep
