#pragma once

#include <cmath>
#include <vector>

#include "evdep/lattice.hpp"
#include "evdep/rng.hpp"

namespace testutil {

// Independent construction of a consistent evaluation set: draw nonnegative
// components d_L, sum them with a brute-force loop (V_B = sum of d_L over all
// L meeting B), and choose y so that the singletons are exactly unit-Frechet
// margins. This is the inverse direction of the decomposition and stays
// independent of the implementation under test.
struct RandomConsistentSet {
  std::vector<double> y;
  std::vector<double> v;  // indexed by bitmask
  std::vector<double> d;  // indexed by bitmask
};

inline RandomConsistentSet random_consistent_set(int m, evdep::RngStream& rng,
                                                 double sparsity = 0.3) {
  const std::uint32_t full = (1u << m) - 1u;
  RandomConsistentSet out;
  out.d.assign(full + 1, 0.0);
  for (std::uint32_t l = 1; l <= full; ++l) {
    const double u = rng.uniform01();
    out.d[l] = u < sparsity ? 0.0 : rng.uniform01();
  }
  // every margin must end up positive
  for (int i = 0; i < m; ++i) {
    double margin = 0.0;
    for (std::uint32_t l = 1; l <= full; ++l) {
      if ((l >> i) & 1u) margin += out.d[l];
    }
    if (margin <= 0.0) out.d[1u << i] += 0.5 + rng.uniform01();
  }
  out.v.assign(full + 1, 0.0);
  for (std::uint32_t b = 1; b <= full; ++b) {
    double sum = 0.0;
    for (std::uint32_t l = 1; l <= full; ++l) {
      if (l & b) sum += out.d[l];
    }
    out.v[b] = sum;
  }
  out.y.resize(m);
  for (int i = 0; i < m; ++i) out.y[i] = 1.0 / out.v[1u << i];
  return out;
}

inline evdep::ExponentEvaluationSet to_evaluation_set(
    const RandomConsistentSet& s) {
  evdep::ExponentEvaluationSet set{std::vector<double>(s.y)};
  const int m = static_cast<int>(s.y.size());
  for (const evdep::SubsetIndex& B : evdep::enumerate_subsets(m)) {
    set.set(B, s.v[B.bits()]);
  }
  return set;
}

}  // namespace testutil
