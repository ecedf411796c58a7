#include <cmath>
#include <map>
#include <stdexcept>

#include "doctest.h"
#include "evdep/lattice.hpp"
#include "evdep/models.hpp"
#include "test_util.hpp"

using namespace evdep;

namespace {

ExponentEvaluationSet pair_set(double y1, double y2, double v12) {
  ExponentEvaluationSet set{{y1, y2}};
  set.set(SubsetIndex(0b01, 2), 1.0 / y1);
  set.set(SubsetIndex(0b10, 2), 1.0 / y2);
  set.set(SubsetIndex(0b11, 2), v12);
  return set;
}

}  // namespace

TEST_CASE("subset enumeration order and size") {
  CHECK(enumerate_subsets(1).size() == 1);
  CHECK(enumerate_subsets(1)[0].bits() == 0b1);

  const auto two = enumerate_subsets(2);
  REQUIRE(two.size() == 3);
  CHECK(two[0].label() == "1");
  CHECK(two[1].label() == "2");
  CHECK(two[2].label() == "1+2");

  CHECK(enumerate_subsets(3).size() == 7);
  CHECK_THROWS_AS(enumerate_subsets(0), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_subsets(17), std::invalid_argument);
}

TEST_CASE("subset labels round trip") {
  const SubsetIndex b(0b101, 3);
  CHECK(b.label() == "1+3");
  CHECK(SubsetIndex::parse_label("1+3", 3) == b);
  CHECK_THROWS_AS(SubsetIndex::parse_label("0", 3), std::invalid_argument);
  CHECK_THROWS_AS(SubsetIndex::parse_label("4", 3), std::invalid_argument);
  CHECK_THROWS_AS(SubsetIndex::parse_label("", 3), std::invalid_argument);
  CHECK_THROWS_AS(SubsetIndex(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(SubsetIndex(0b1000, 3), std::invalid_argument);
}

TEST_CASE("inversion coefficients at m=2") {
  const auto c1 = moebius_coefficients(SubsetIndex(0b01, 2));
  REQUIRE(c1.size() == 2);
  CHECK(c1[0].first.label() == "2");
  CHECK(c1[0].second == -1);
  CHECK(c1[1].first.label() == "1+2");
  CHECK(c1[1].second == +1);

  const auto c12 = moebius_coefficients(SubsetIndex(0b11, 2));
  REQUIRE(c12.size() == 3);
  CHECK(c12[0].second == +1);  // {1}
  CHECK(c12[1].second == +1);  // {2}
  CHECK(c12[2].second == -1);  // {1,2}
}

TEST_CASE("inversion coefficients for the full set follow (-1)^(|B|+1)") {
  const auto cs = moebius_coefficients(SubsetIndex(0b111, 3));
  REQUIRE(cs.size() == 7);
  for (const auto& [B, sign] : cs) {
    CHECK(sign == ((B.size() % 2 == 1) ? +1 : -1));
  }
}

TEST_CASE("coefficient keys are exactly the supersets of the complement") {
  RngStream rng(99, 0);
  for (int m = 2; m <= 5; ++m) {
    for (const SubsetIndex& L : enumerate_subsets(m)) {
      const auto coeffs = moebius_coefficients(L);
      const std::uint32_t comp = L.complement_bits();
      std::size_t expected = 0;
      for (std::uint32_t b = 1; b < (1u << m); ++b) {
        if ((b & comp) == comp) ++expected;
      }
      CHECK(coeffs.size() == expected);
      for (const auto& [B, sign] : coeffs) {
        CHECK((B.bits() & comp) == comp);
        (void)sign;
      }
    }
  }
}

TEST_CASE("decomposition of the three canonical pair sets") {
  const SubsetIndex s1(0b01, 2), s2(0b10, 2), s12(0b11, 2);

  // complete dependence at y = (1,1): V = 1 everywhere
  auto d = decompose(pair_set(1.0, 1.0, 1.0));
  CHECK(d.at(s1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(d.at(s2) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(d.at(s12) == doctest::Approx(1.0));

  // independence: V_12 = 2
  d = decompose(pair_set(1.0, 1.0, 2.0));
  CHECK(d.at(s1) == doctest::Approx(1.0));
  CHECK(d.at(s2) == doctest::Approx(1.0));
  CHECK(d.at(s12) == doctest::Approx(0.0).epsilon(1e-14));

  // logistic alpha = 0.5: V_12 = sqrt(2)
  d = decompose(pair_set(1.0, 1.0, std::sqrt(2.0)));
  CHECK(d.at(s1) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
  CHECK(d.at(s2) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
  CHECK(d.at(s12) == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("decompose rejects incomplete sets") {
  ExponentEvaluationSet set{{1.0, 1.0}};
  set.set(SubsetIndex(0b01, 2), 1.0);
  CHECK_FALSE(set.complete());
  CHECK_THROWS_AS(decompose(set), std::invalid_argument);
  CHECK_THROWS_AS(check_consistency(set), std::invalid_argument);
}

TEST_CASE("consistency verdicts for hand-built pair sets") {
  // exceeds the sum of margins: d_12 = 1 + 1 - 2.5
  auto report = check_consistency(pair_set(1.0, 1.0, 2.5), 1e-9);
  CHECK_FALSE(report.consistent);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].first.label() == "1+2");
  CHECK(report.violations[0].second == doctest::Approx(-0.5));

  report = check_consistency(pair_set(1.0, 1.0, 1.3), 1e-9);
  CHECK(report.consistent);
  CHECK(report.violations.empty());
  CHECK(report.min_d == doctest::Approx(0.3));
}

TEST_CASE("violations are reported most negative first") {
  ExponentEvaluationSet set{{1.0, 1.0, 1.0}};
  for (const SubsetIndex& B : enumerate_subsets(3)) {
    set.set(B, B.size() == 1 ? 1.0 : (B.size() == 2 ? 2.0 : 2.2));
  }
  // d for L={i} is V_123 - V_jk = 0.2 >= 0; the full row is 3 - 6 + 2.2 < 0
  const auto report = check_consistency(set, 1e-9);
  CHECK_FALSE(report.consistent);
  REQUIRE(!report.violations.empty());
  for (std::size_t i = 1; i < report.violations.size(); ++i) {
    CHECK(report.violations[i - 1].second <= report.violations[i].second);
  }
}

TEST_CASE("exact logistic sets are consistent across alpha and y") {
  const double ys[] = {0.33, 0.7, 1.0, 1.44, 4.5, 19.5};
  for (int m = 2; m <= 4; ++m) {
    for (int ai = 1; ai <= 10; ++ai) {
      const LogisticModel model(ai / 10.0, m);
      RngStream rng(7, m * 100 + ai);
      for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> y(m);
        for (int i = 0; i < m; ++i) {
          y[i] = ys[rng.next_u64() % 6];
        }
        const auto set = logistic_evaluation_set(model, y);
        const auto report = check_consistency(set, 1e-9);
        CHECK(report.consistent);
      }
    }
  }
}

TEST_CASE("reconstruction inverts the decomposition") {
  // hand examples
  MoebiusDecomposition d{2, {1.0, 1.0}, {0.0, 1.0, 1.0, 0.0}};
  CHECK(reconstruct(d, SubsetIndex(0b11, 2)) == doctest::Approx(2.0));
  d.d = {0.0, 0.0, 0.0, 1.0};
  CHECK(reconstruct(d, SubsetIndex(0b01, 2)) == doctest::Approx(1.0));

  // logistic round trip against direct evaluation
  for (int m = 2; m <= 4; ++m) {
    RngStream rng(21, m);
    for (int rep = 0; rep < 25; ++rep) {
      std::vector<double> y(m);
      for (int i = 0; i < m; ++i) y[i] = 0.3 + 20.0 * rng.uniform01();
      const LogisticModel model(0.1 + 0.9 * rng.uniform01(), m);
      const auto set = logistic_evaluation_set(model, y);
      const auto dec = decompose(set);
      for (const SubsetIndex& B : enumerate_subsets(m)) {
        const double direct = set.at(B);
        const double round = reconstruct(dec, B);
        CHECK(std::abs(round - direct) <= 1e-10 * std::max(1.0, direct));
      }
    }
  }
}

TEST_CASE("round trip and quadrant bound on randomized consistent sets") {
  for (int m = 2; m <= 4; ++m) {
    RngStream rng(5150, m);
    for (int rep = 0; rep < 100; ++rep) {
      const auto random = testutil::random_consistent_set(m, rng);
      const auto set = testutil::to_evaluation_set(random);
      const auto report = check_consistency(set, 1e-9);
      CHECK(report.consistent);
      const auto dec = decompose(set);
      for (const SubsetIndex& L : enumerate_subsets(m)) {
        CHECK(dec.at(L) ==
              doctest::Approx(random.d[L.bits()]).epsilon(1e-10));
      }
      for (const SubsetIndex& B : enumerate_subsets(m)) {
        const double round = reconstruct(dec, B);
        const double direct = set.at(B);
        CHECK(std::abs(round - direct) <= 1e-10 * std::max(1.0, direct));
        // quadrant dependence: V_B never exceeds the sum of its margins
        CHECK(direct <= set.margin_sum(B) * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("extremal coefficients of the reference models") {
  // logistic: theta_B = |B|^alpha
  const LogisticModel model(0.5, 3);
  const std::vector<double> ones{1.0, 1.0, 1.0};
  const auto theta = extremal_coefficients_from_V(
      logistic_evaluation_set(model, ones));
  for (const SubsetIndex& B : enumerate_subsets(3)) {
    CHECK(theta.at(B) ==
          doctest::Approx(std::pow(B.size(), 0.5)).epsilon(1e-12));
  }
  CHECK(theta.at(SubsetIndex(0b11, 3)) == doctest::Approx(std::sqrt(2.0)));

  // complete dependence -> 1, independence -> |B|
  ExponentEvaluationSet cd{ones};
  ExponentEvaluationSet ind{ones};
  for (const SubsetIndex& B : enumerate_subsets(3)) {
    cd.set(B, 1.0);
    ind.set(B, static_cast<double>(B.size()));
  }
  for (const SubsetIndex& B : enumerate_subsets(3)) {
    CHECK(extremal_coefficients_from_V(cd).at(B) == doctest::Approx(1.0));
    CHECK(extremal_coefficients_from_V(ind).at(B) ==
          doctest::Approx(static_cast<double>(B.size())));
  }

  // defined only at the all-ones point
  const std::vector<double> off{1.0, 2.0, 1.0};
  CHECK_THROWS_AS(
      extremal_coefficients_from_V(logistic_evaluation_set(model, off)),
      std::invalid_argument);
}

TEST_CASE("third-order coefficient bounds") {
  auto b = triple_theta_bounds(2.0, 2.0, 2.0);
  CHECK(b.lo == doctest::Approx(3.0));
  CHECK(b.hi == doctest::Approx(3.0));

  b = triple_theta_bounds(1.0, 1.0, 1.0);
  CHECK(b.lo == doctest::Approx(1.0));
  CHECK(b.hi == doctest::Approx(1.0));

  const double r2 = std::sqrt(2.0);
  b = triple_theta_bounds(r2, r2, r2);
  CHECK(b.lo == doctest::Approx(r2));
  CHECK(b.hi == doctest::Approx(2.0 * r2 - 1.0));

  CHECK_THROWS_AS(triple_theta_bounds(0.9, 1.5, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(triple_theta_bounds(1.5, 2.2, 1.5), std::invalid_argument);
}

TEST_CASE("logistic third-order coefficient lies inside the pairwise bounds") {
  for (int i = 1; i <= 50; ++i) {
    const double alpha = i / 50.0;
    const double pair = std::pow(2.0, alpha);
    const double triple = std::pow(3.0, alpha);
    const auto b = triple_theta_bounds(pair, pair, pair);
    CHECK(triple >= b.lo - 1e-12);
    CHECK(triple <= b.hi + 1e-12);
  }
}
