#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "evdep/constrain.hpp"
#include "evdep/estimate.hpp"
#include "evdep/models.hpp"
#include "evdep/rng.hpp"

using namespace evdep;

namespace {

// Weights whose likelihood maximizer is exactly `target`: constant vectors
// make n / sum(1/W) collapse to the common value.
HtWeights constant_weights(const SubsetIndex& B, std::span<const double> y,
                           double target, int n) {
  std::vector<double> proj;
  for (int e : B.elements()) proj.push_back(y[e - 1]);
  return HtWeights(B, simplex_point(proj), std::vector<double>(n, target));
}

HtWeightsMap prescribed_map(std::span<const double> y,
                            const std::vector<double>& targets, int n) {
  HtWeightsMap map;
  std::size_t i = 0;
  for (const SubsetIndex& B : enumerate_subsets(static_cast<int>(y.size()))) {
    if (B.size() < 2) continue;
    map.emplace(B.bits(), constant_weights(B, y, targets[i++], n));
  }
  return map;
}

HtWeightsMap sample_weights_map(const BlockMaximaSample& sample,
                                std::span<const double> y) {
  const std::vector<double> c = marginal_corrections(sample);
  HtWeightsMap map;
  std::vector<double> proj;
  for (const SubsetIndex& B : enumerate_subsets(sample.dim())) {
    if (B.size() < 2) continue;
    proj.clear();
    for (int e : B.elements()) proj.push_back(y[e - 1]);
    map.emplace(B.bits(), ht_weights(sample, c, B, simplex_point(proj)));
  }
  return map;
}

std::vector<double> clipped_estimates(const HtWeightsMap& map) {
  std::vector<double> a;
  for (const auto& [bits, w] : map) {
    (void)bits;
    a.push_back(ht_estimate(w).a_tilde);
  }
  return a;
}

bool feasible_point(const ConstraintSystem& cs, std::span<const double> a,
                    double slack) {
  for (std::size_t r = 0; r < cs.rows.size(); ++r) {
    if (cs.row_value(r, a) < -slack) return false;
  }
  for (std::size_t i = 0; i < cs.vars.size(); ++i) {
    if (a[i] < cs.lower[i] - slack || a[i] > cs.upper[i] + slack) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("constraint system at m=2, y=(1,1)") {
  const std::vector<double> y{1.0, 1.0};
  const ConstraintSystem cs = build_constraints(y);
  REQUIRE(cs.vars.size() == 1);
  CHECK(cs.vars[0].label() == "1+2");
  CHECK(cs.margin_sum[0] == doctest::Approx(2.0));
  CHECK(cs.lower[0] == doctest::Approx(0.5));
  CHECK(cs.upper[0] == 1.0);
  REQUIRE(cs.rows.size() == 3);

  // rows evaluated at a: L={1} and L={2} give 2a - 1, L={1,2} gives 2 - 2a
  const std::vector<double> a{0.75};
  CHECK(cs.row_value(0, a) == doctest::Approx(0.5));
  CHECK(cs.row_value(1, a) == doctest::Approx(0.5));
  CHECK(cs.row_value(2, a) == doctest::Approx(0.5));
  const std::vector<double> lo{0.5};
  CHECK(cs.row_value(0, lo) == doctest::Approx(0.0));
  const std::vector<double> hi{1.0};
  CHECK(cs.row_value(2, hi) == doctest::Approx(0.0));
}

TEST_CASE("constraint system at m=3 couples pairs and the triple") {
  const std::vector<double> y{1.0, 1.0, 1.0};
  const ConstraintSystem cs = build_constraints(y);
  REQUIRE(cs.vars.size() == 4);
  CHECK(cs.margin_sum[0] == doctest::Approx(2.0));
  CHECK(cs.margin_sum[3] == doctest::Approx(3.0));
  REQUIRE(cs.rows.size() == 7);
  // At the values (a_12, a_13, a_23, a_123): the L={1,2} row must read
  // -u_3 + V_13 + V_23 - V_123.
  const std::vector<double> a{0.9, 0.8, 0.7, 0.75};
  const int row_12 = 0b011 - 1;  // rows are in subset bitmask order
  CHECK(cs.row_value(row_12, a) ==
        doctest::Approx(-1.0 + 2 * 0.8 + 2 * 0.7 - 3 * 0.75));
  // ... and the full row is sum(u) - sum of pair V + triple V.
  const int row_full = 0b111 - 1;
  CHECK(cs.row_value(row_full, a) ==
        doctest::Approx(3.0 - 2 * (0.9 + 0.8 + 0.7) + 3 * 0.75));
}

TEST_CASE("rows at exact logistic values equal the lattice decomposition") {
  RngStream rng(401, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const int m = 2 + static_cast<int>(rng.next_u64() % 3);
    std::vector<double> y(m);
    for (auto& v : y) v = 0.3 + 19.0 * rng.uniform01();
    const LogisticModel model(0.1 + 0.85 * rng.uniform01(), m);
    const auto set = logistic_evaluation_set(model, y);
    const ConstraintSystem cs = build_constraints(y);
    std::vector<double> a(cs.vars.size());
    for (std::size_t i = 0; i < cs.vars.size(); ++i) {
      a[i] = set.at(cs.vars[i]) / cs.margin_sum[i];
    }
    const auto dec = decompose(set);
    for (std::size_t r = 0; r < cs.rows.size(); ++r) {
      CHECK(cs.row_value(r, a) ==
            doctest::Approx(dec.at(cs.rows[r].L)).epsilon(1e-12));
    }
  }
}

TEST_CASE("pseudo log likelihood is the sum of the per-subset ones") {
  const std::vector<double> y{1.0, 2.0, 0.5};
  const LogisticModel model(0.5, 3);
  RngStream rng(402, 0);
  const auto sample = sample_logistic(model, 30, rng);
  const auto map = sample_weights_map(sample, y);
  const std::vector<double> a{0.8, 0.9, 0.7, 0.65};
  double expected = 0.0;
  std::size_t i = 0;
  for (const auto& [bits, w] : map) {
    (void)bits;
    expected += loglik_A(a[i++], w);
  }
  CHECK(pseudo_loglik(a, map) == doctest::Approx(expected).epsilon(1e-12));

  // gradient components vanish at the raw maximizers
  std::vector<double> a_hat;
  for (const auto& [bits, w] : map) {
    (void)bits;
    a_hat.push_back(ht_estimate(w).a_hat);
  }
  i = 0;
  for (const auto& [bits, w] : map) {
    (void)bits;
    const double g = w.count() / a_hat[i++] - w.sum_inverse();
    CHECK(g == doctest::Approx(0.0).epsilon(1e-10));
  }
  CHECK_THROWS_AS(pseudo_loglik(std::vector<double>{0.5}, map),
                  std::invalid_argument);
}

TEST_CASE("feasible raw estimates short-circuit bit for bit") {
  const std::vector<double> y{1.0, 1.0, 1.0};
  // exact logistic values are strictly interior
  const double pair_a = std::pow(2.0, 0.6) / 2.0;
  const double triple_a = std::pow(3.0, 0.6) / 3.0;
  const auto map =
      prescribed_map(y, {pair_a, pair_a, pair_a, triple_a}, 20);
  const auto sol = solve_constrained(map, y);
  CHECK_FALSE(sol.changed);
  const auto clipped = clipped_estimates(map);
  REQUIRE(sol.a.size() == clipped.size());
  for (std::size_t i = 0; i < clipped.size(); ++i) {
    CHECK(std::memcmp(&sol.a[i], &clipped[i], sizeof(double)) == 0);
  }
  CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("one-variable clamp onto the box bound") {
  // Raw maximizer 0.4 sits below the feasible interval [0.5, 1].
  const std::vector<double> y{1.0, 1.0};
  const auto map = prescribed_map(y, {0.4}, 2);
  const auto sol = solve_constrained(map, y);
  REQUIRE(sol.a.size() == 1);
  CHECK(sol.changed);
  CHECK(sol.a[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(sol.kkt_residual <= 1e-8);
  REQUIRE(!sol.active.empty());  // the binding rows L={1}, L={2}
}

TEST_CASE("infeasible raw estimates are projected and stay consistent") {
  // pairs near complete dependence but an independent triple estimate:
  // the inclusion-exclusion rows cut the triple value down
  const std::vector<double> y{1.0, 1.0, 1.0};
  const auto map = prescribed_map(y, {0.55, 0.55, 0.55, 1.0}, 50);
  const auto sol = solve_constrained(map, y);
  CHECK(sol.changed);
  CHECK(sol.kkt_residual <= 1e-8);
  const auto cset = to_evaluation_set(sol, y);
  CHECK(check_consistency(cset, 1e-7).consistent);
  // the triple value must respect the pairwise upper bound rows
  const double v12 = cset.at(SubsetIndex(0b011, 3));
  const double v13 = cset.at(SubsetIndex(0b101, 3));
  const double v23 = cset.at(SubsetIndex(0b110, 3));
  const double v123 = cset.at(SubsetIndex(0b111, 3));
  CHECK(v123 <= std::min({v12 + v13, v12 + v23, v13 + v23}) - 1.0 + 1e-7);
  CHECK(v123 >= std::max({v12, v13, v23}) - 1e-7);
}

TEST_CASE("randomized problems satisfy the optimality conditions") {
  RngStream rng(403, 0);
  int changed_seen = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const double alpha = 0.15 + 0.8 * rng.uniform01();
    const LogisticModel model(alpha, 3);
    RngStream sampler(404, rep);
    const auto sample = sample_logistic(model, 50, sampler);
    std::vector<double> y(3);
    for (auto& v : y) {
      v = frechet_quantile(0.05 + 0.9 * rng.uniform01());
    }
    const auto map = sample_weights_map(sample, y);
    const auto sol = solve_constrained(map, y);
    CHECK(sol.kkt_residual <= 1e-8);
    const ConstraintSystem cs = build_constraints(y);
    CHECK(feasible_point(cs, sol.a, 1e-8));
    CHECK(check_consistency(to_evaluation_set(sol, y), 1e-7).consistent);

    const auto clipped = clipped_estimates(map);
    if (!sol.changed) {
      for (std::size_t i = 0; i < clipped.size(); ++i) {
        CHECK(std::memcmp(&sol.a[i], &clipped[i], sizeof(double)) == 0);
      }
    } else {
      ++changed_seen;
      // no feasible small perturbation improves the objective
      const double at_solution = pseudo_loglik(sol.a, map);
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> delta(sol.a.size());
        double norm = 0.0;
        for (auto& d : delta) {
          d = rng.uniform01() - 0.5;
          norm += d * d;
        }
        norm = std::sqrt(norm);
        std::vector<double> probe = sol.a;
        for (std::size_t i = 0; i < probe.size(); ++i) {
          probe[i] += delta[i] / norm * 1e-4;
        }
        if (!feasible_point(cs, probe, 0.0)) continue;
        CHECK(pseudo_loglik(probe, map) <=
              at_solution + 2e-9 * (1.0 + std::abs(at_solution)));
      }
    }
  }
  CHECK(changed_seen > 0);
}

TEST_CASE("changed solutions keep the triple inside the pairwise bounds") {
  const std::vector<double> ones{1.0, 1.0, 1.0};
  int checked = 0;
  for (int rep = 0; rep < 200 && checked < 25; ++rep) {
    const LogisticModel model(0.8, 3);
    RngStream sampler(405, rep);
    const auto sample = sample_logistic(model, 50, sampler);
    const auto map = sample_weights_map(sample, ones);
    const auto sol = solve_constrained(map, ones);
    if (!sol.changed) continue;
    ++checked;
    const auto cset = to_evaluation_set(sol, ones);
    // at the all-ones point the constrained pair values are extremal
    // coefficients, so the third-order bounds apply directly
    const auto b = triple_theta_bounds(cset.at(SubsetIndex(0b011, 3)),
                                       cset.at(SubsetIndex(0b101, 3)),
                                       cset.at(SubsetIndex(0b110, 3)));
    const double v123 = cset.at(SubsetIndex(0b111, 3));
    CHECK(v123 >= b.lo - 1e-7);
    CHECK(v123 <= b.hi + 1e-7);
  }
  CHECK(checked >= 10);
}

TEST_CASE("solver reports non-convergence instead of failing silently") {
  const std::vector<double> y{1.0, 1.0, 1.0};
  const auto map = prescribed_map(y, {0.55, 0.55, 0.55, 1.0}, 50);
  SolverOptions opts;
  opts.max_iterations = 1;
  try {
    solve_constrained(map, y, opts);
    FAIL("expected a convergence failure");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("converge") != std::string::npos);
    CHECK(msg.find("residual") != std::string::npos);
  }
}

TEST_CASE("solver input validation") {
  const std::vector<double> y{1.0, 1.0, 1.0};
  HtWeightsMap incomplete;
  incomplete.emplace(0b011,
                     constant_weights(SubsetIndex(0b011, 3), y, 0.8, 10));
  CHECK_THROWS_AS(solve_constrained(incomplete, y), std::invalid_argument);

  SolverOptions bad;
  bad.barrier_decay = 1.5;
  const auto map = prescribed_map(y, {0.8, 0.8, 0.8, 0.7}, 10);
  CHECK_THROWS_AS(solve_constrained(map, y, bad), std::invalid_argument);
}
