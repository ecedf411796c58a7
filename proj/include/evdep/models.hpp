#pragma once

#include <span>
#include <string>
#include <vector>

#include "evdep/lattice.hpp"
#include "evdep/rng.hpp"

namespace evdep {

/// Symmetric logistic max-stable family: V_B(y_B) = (sum_i y_i^(-1/alpha))^alpha.
/// alpha = 1 is independence; alpha -> 0 is complete dependence.
struct LogisticModel {
  double alpha;
  int m;

  LogisticModel(double alpha, int m);
};

/// Exponent measure of the logistic model on the coordinates of B.
/// Homogeneous of order -1 in y_B; singletons evaluate to exactly 1/y.
double logistic_V(const LogisticModel& model, const SubsetIndex& B,
                  std::span<const double> y_B);

/// Complete evaluation set at one point, every B in C_m.
ExponentEvaluationSet logistic_evaluation_set(const LogisticModel& model,
                                              std::span<const double> y);

/// p-th quantile of the unit Frechet law exp(-1/y): -1/log(p).
double frechet_quantile(double p);

/// Normalized reciprocal coordinates w_i = (1/y_i) / sum_j (1/y_j); the point
/// on the simplex where a Pickands function is read off an exponent measure.
std::vector<double> simplex_point(std::span<const double> y_B);

/// Pickands value A_B(w) = V_B(y_B) / sum_i (1/y_i) at w = simplex_point(y_B).
double pickands_from_V(double v_B, std::span<const double> y_B);

/// n observations of an m-vector with unit Frechet margins, one block maximum
/// per row.
class BlockMaximaSample {
 public:
  BlockMaximaSample(int m, std::vector<double> row_major_data);

  int dim() const { return m_; }
  int size() const { return n_; }
  double value(int row, int col) const { return data_[row * m_ + col]; }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * m_,
            static_cast<std::size_t>(m_)};
  }

  /// CSV round trip: header "j,y1,...,ym", one row per block maximum,
  /// 17 significant digits.
  void write_csv(const std::string& path) const;
  static BlockMaximaSample read_csv(const std::string& path);

 private:
  int m_;
  int n_;
  std::vector<double> data_;
};

/// One draw of a positive alpha-stable variable T with Laplace transform
/// E[exp(-tT)] = exp(-t^alpha), by the Chambers-Mallows-Stuck construction
/// (uniform angle + unit exponential). Requires alpha in [1e-3, 1); the
/// degenerate alpha = 1 case (T = 1) is the caller's.
double sample_positive_stable(double alpha, RngStream& rng);

/// n independent draws of the logistic max-stable vector: T positive stable,
/// E_i unit exponentials, Y_i = (T/E_i)^alpha, computed in log space.
/// alpha = 1 falls back to independent unit Frechet draws.
BlockMaximaSample sample_logistic(const LogisticModel& model, int n,
                                  RngStream& rng);

/// Componentwise maxima of consecutive blocks of `block_size` rows, divided by
/// the block size; a sample from the same law when the input is max-stable.
BlockMaximaSample block_maxima(const BlockMaximaSample& sample, int block_size);

}  // namespace evdep
