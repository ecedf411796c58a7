#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace evdep {

/// Largest supported ground-set dimension. Per-subset tables are dense arrays
/// indexed by bitmask, so the cap keeps them at 2^16 entries worst case.
inline constexpr int kMaxDimension = 16;

/// A nonempty subset B of the ground set {1,...,m}, stored as a bitmask
/// (bit i-1 set <=> element i in B). Indexes every per-subset quantity.
class SubsetIndex {
 public:
  SubsetIndex(std::uint32_t bits, int m);

  std::uint32_t bits() const { return bits_; }
  int dimension() const { return m_; }
  int size() const;
  bool contains(int element) const;  // elements are 1-based
  bool superset_of(const SubsetIndex& other) const;
  bool intersects(const SubsetIndex& other) const;
  bool is_full() const;
  std::uint32_t complement_bits() const;  // bits of {1..m} \ B, may be 0
  std::vector<int> elements() const;      // ascending, 1-based

  /// Sorted elements joined by '+', e.g. "1+2+3". Locale-free, used in all
  /// CSV/JSON serializations.
  std::string label() const;
  static SubsetIndex parse_label(const std::string& text, int m);

  friend bool operator==(const SubsetIndex& a, const SubsetIndex& b) {
    return a.bits_ == b.bits_ && a.m_ == b.m_;
  }
  friend bool operator<(const SubsetIndex& a, const SubsetIndex& b) {
    return a.bits_ < b.bits_;
  }

 private:
  std::uint32_t bits_;
  int m_;
};

/// All 2^m - 1 nonempty subsets of {1..m} in increasing bitmask order.
std::vector<SubsetIndex> enumerate_subsets(int m);

/// A complete family of exponent-measure values {V_B(y_B) : B in C_m}
/// evaluated at a single point y with unit Frechet margins, so V_{i} = 1/y_i.
/// Values for |B| >= 2 may come from estimators and are allowed to violate
/// consistency; check_consistency() is the arbiter.
class ExponentEvaluationSet {
 public:
  explicit ExponentEvaluationSet(std::vector<double> y);

  int dimension() const { return m_; }
  const std::vector<double>& point() const { return y_; }

  void set(const SubsetIndex& B, double value);
  double at(const SubsetIndex& B) const;  // throws if the entry was never set
  bool complete() const;

  /// Sum of reciprocal coordinates over B, the scale that turns Pickands
  /// values into exponent-measure values.
  double margin_sum(const SubsetIndex& B) const;

 private:
  int m_;
  std::vector<double> y_;
  std::vector<double> values_;  // indexed by bitmask, NaN = unset
};

/// The 2^m - 1 signed inclusion-exclusion components d_L(y) of a complete
/// evaluation set. Nonnegativity of every component characterizes consistency.
struct MoebiusDecomposition {
  int m;
  std::vector<double> y;
  std::vector<double> d;  // indexed by bitmask, slot 0 unused

  double at(const SubsetIndex& L) const;
};

/// Signed coefficients of the inversion formula for one target subset L:
/// the value of d_L is  sum over B >= complement(L) of sign(B,L) * V_B  with
/// sign(B,L) = (-1)^(|B inter L| + 1). Returned as (B, sign) pairs in
/// increasing bitmask order; the keys are exactly the supersets of {1..m}\L.
std::vector<std::pair<SubsetIndex, int>> moebius_coefficients(
    const SubsetIndex& L);

/// Full decomposition of a complete evaluation set.
MoebiusDecomposition decompose(const ExponentEvaluationSet& values);

/// Inverse direction: V_B = sum of d_L over all L meeting B.
double reconstruct(const MoebiusDecomposition& d, const SubsetIndex& B);

struct ConsistencyReport {
  bool consistent;
  double min_d;
  /// Every L with d_L < -tol, most negative first.
  std::vector<std::pair<SubsetIndex, double>> violations;
};

/// A complete set is realizable by a single max-stable law iff no component
/// of its decomposition is negative. Exact model evaluations pass at the
/// default tolerance; estimated sets typically need a wider one.
ConsistencyReport check_consistency(const ExponentEvaluationSet& values,
                                    double tol = 1e-9);

/// Extremal coefficients theta_B = V_B(1,...,1), the effective number of
/// independent variables among those indexed by B.
struct ExtremalCoefficientSet {
  int m;
  std::vector<double> theta;  // indexed by bitmask

  double at(const SubsetIndex& B) const;
};

/// Reads the coefficients off an evaluation set at the all-ones point and
/// verifies 1 <= theta_B <= |B|.
ExtremalCoefficientSet extremal_coefficients_from_V(
    const ExponentEvaluationSet& values);

struct ThetaBounds {
  double lo;
  double hi;
};

/// Range of third-order coefficients compatible with the three pairwise ones:
///   max{t12, t13, t23, t12+t13+t23-3} <= theta_123 <= min over pairs of
///   (t_ij + t_ik - 1). Inputs must lie in [1,2].
ThetaBounds triple_theta_bounds(double t12, double t13, double t23);

}  // namespace evdep
