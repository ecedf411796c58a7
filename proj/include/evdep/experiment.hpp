#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evdep/constrain.hpp"
#include "evdep/models.hpp"
#include "evdep/rng.hpp"

namespace evdep {

/// Frechet-quantile grid specification: probabilities p_start + p_step * i.
struct GridSpec {
  double p_start = 0.05;
  double p_step = 0.15;
  int count = 7;
};

struct Grid {
  std::vector<double> prob;
  std::vector<double> x;      // quantiles, ascending
  std::vector<double> width;  // midpoint-rule cell widths, clipped to the hull
  double lo;                  // hull endpoints: smallest / largest quantile
  double hi;
};

Grid build_grid(const GridSpec& spec);

struct ExperimentConfig {
  std::vector<double> alphas{0.2, 0.5, 0.8};
  int n = 50;
  int replications = 500;
  GridSpec grid{};
  std::uint64_t seed = 12345;
  int threads = 0;  // 0 = hardware concurrency
  SolverOptions solver{};
};

/// Raw per-replication estimates on the grid. The three pair subsets are
/// ordered {1,2}, {1,3}, {2,3}; triple points are indexed (i*count + j)*count
/// + k for y = (x_i, x_j, x_k). Unconstrained pair values live on the pair's
/// own count^2 grid (they depend only on the projection); constrained pair
/// values are stored per triple point, since the joint solve ties them to the
/// full evaluation point.
struct ReplicationResult {
  std::array<std::vector<double>, 3> pair_u;  // count^2 each
  std::array<std::vector<double>, 3> pair_c;  // count^3 each
  std::vector<double> triple_u;               // count^3
  std::vector<double> triple_c;               // count^3
  std::vector<std::uint8_t> point_changed;    // count^3
  bool any_changed = false;
};

/// One sample of size n, unconstrained estimates for every subset at every
/// grid point (each pair projection computed once), and the joint constrained
/// solve at every triple point. Every constrained output is audited against
/// check_consistency; a failure or a non-converged solve throws with the
/// stream id in the message.
ReplicationResult run_replication(double alpha, int n, const Grid& grid,
                                  RngStream rng,
                                  const SolverOptions& solver = {});

/// Root mean squared error of replicated estimates of a scalar truth.
double rmse(std::span<const double> estimates, double truth);

/// Midpoint-rule approximation of the integral of (estimate - truth)^2 over
/// the hull hypercube: each grid point owns the cell between the midpoints to
/// its neighbours (outer cells clipped to the hull), in every coordinate.
/// `values` and `truth` are flattened over dims nested grid indices.
double integrated_square_deviation(std::span<const double> values,
                                   std::span<const double> truth,
                                   const Grid& grid, int dims);

struct PointStats {
  double rmse_u;
  double rmse_c;
  double ratio;
};

struct AlphaResult {
  double alpha;
  std::array<std::vector<PointStats>, 3> pair_points;  // count^2 each
  std::vector<PointStats> triple_points;               // count^3
  std::array<double, 4> t_unconstrained;  // B order: {1,2},{1,3},{2,3},{1,2,3}
  std::array<double, 4> t_constrained;
  double pct_changed_replication;
  double pct_changed_point;
};

struct ExperimentResult {
  ExperimentConfig config;
  Grid grid;
  std::vector<AlphaResult> alphas;
};

/// Full factorial over the configured alphas. Replication r always runs on
/// RNG stream r and results are folded in replication order, so the output is
/// identical for any thread count.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// CSV/JSON emitters; one flat row per measured quantity, floating-point
/// fields at 17 significant digits. Pair rows leave the unused y column empty.
void write_rmse_csv(const ExperimentResult& result, const std::string& path);
void write_tdev_csv(const ExperimentResult& result, const std::string& path);
void write_changed_csv(const ExperimentResult& result, const std::string& path);
void write_meta_json(const ExperimentResult& result, const std::string& path);

}  // namespace evdep
