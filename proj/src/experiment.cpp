#include "evdep/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "evdep/estimate.hpp"
#include "evdep/version.hpp"
#include "json.hpp"

namespace evdep {

namespace {

constexpr std::array<std::uint32_t, 3> kPairBits{0b011, 0b101, 0b110};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file << text;
  if (!file) throw std::runtime_error("failed writing '" + path + "'");
}

// Everything about the grid that is shared across replications and alphas:
// pair/triple evaluation points, their simplex points and margin sums, and
// the prebuilt constraint system per triple point.
struct GridContext {
  Grid grid;
  int count;
  int n_pair_points;    // count^2
  int n_triple_points;  // count^3

  std::vector<std::array<double, 2>> y2;  // per pair point
  std::vector<std::array<double, 2>> w2;
  std::vector<double> s2;

  std::vector<std::array<double, 3>> y3;  // per triple point
  std::vector<double> s3;

  std::vector<ConstraintSystem> systems;  // per triple point

  explicit GridContext(const Grid& g) : grid(g) {
    count = static_cast<int>(g.x.size());
    n_pair_points = count * count;
    n_triple_points = n_pair_points * count;
    y2.resize(n_pair_points);
    w2.resize(n_pair_points);
    s2.resize(n_pair_points);
    for (int a = 0; a < count; ++a) {
      for (int b = 0; b < count; ++b) {
        const int pt = a * count + b;
        y2[pt] = {g.x[a], g.x[b]};
        const double ua = 1.0 / g.x[a];
        const double ub = 1.0 / g.x[b];
        s2[pt] = ua + ub;
        w2[pt] = {ua / s2[pt], ub / s2[pt]};
      }
    }
    y3.resize(n_triple_points);
    s3.resize(n_triple_points);
    systems.reserve(n_triple_points);
    for (int a = 0; a < count; ++a) {
      for (int b = 0; b < count; ++b) {
        for (int c = 0; c < count; ++c) {
          const int pt = (a * count + b) * count + c;
          y3[pt] = {g.x[a], g.x[b], g.x[c]};
          s3[pt] = 1.0 / g.x[a] + 1.0 / g.x[b] + 1.0 / g.x[c];
          systems.push_back(build_constraints(y3[pt]));
          const ConstraintSystem& cs = systems.back();
          for (int p = 0; p < 3; ++p) {
            if (cs.vars[p].bits() != kPairBits[p]) {
              throw std::logic_error("unexpected variable order");
            }
          }
        }
      }
    }
  }

  // Pair-grid indices of the three projections of triple point (a,b,c).
  std::array<int, 3> projections(int triple_point) const {
    const int c = triple_point % count;
    const int b = (triple_point / count) % count;
    const int a = triple_point / (count * count);
    return {a * count + b, a * count + c, b * count + c};
  }
};

ReplicationResult run_replication_impl(double alpha, int n,
                                       const GridContext& ctx, RngStream rng,
                                       const SolverOptions& solver) {
  const LogisticModel model(alpha, 3);
  const BlockMaximaSample sample = sample_logistic(model, n, rng);
  const std::vector<double> corrections = marginal_corrections(sample);

  ReplicationResult out;
  // Sufficient statistics per (subset, grid point); pair projections are
  // computed once here and reused by all triple points sharing them.
  std::array<std::vector<double>, 3> pair_inv;
  for (int p = 0; p < 3; ++p) {
    const SubsetIndex B(kPairBits[p], 3);
    pair_inv[p].resize(ctx.n_pair_points);
    out.pair_u[p].resize(ctx.n_pair_points);
    for (int pt = 0; pt < ctx.n_pair_points; ++pt) {
      const HtWeights w = ht_weights(sample, corrections, B, ctx.w2[pt]);
      pair_inv[p][pt] = w.sum_inverse();
      out.pair_u[p][pt] = ctx.s2[pt] * ht_estimate(w).a_tilde;
    }
    out.pair_c[p].resize(ctx.n_triple_points);
  }
  const SubsetIndex triple(0b111, 3);
  std::vector<double> triple_inv(ctx.n_triple_points);
  out.triple_u.resize(ctx.n_triple_points);
  out.triple_c.resize(ctx.n_triple_points);
  out.point_changed.assign(ctx.n_triple_points, 0);
  for (int pt = 0; pt < ctx.n_triple_points; ++pt) {
    const std::vector<double> w3 = simplex_point(ctx.y3[pt]);
    const HtWeights w = ht_weights(sample, corrections, triple, w3);
    triple_inv[pt] = w.sum_inverse();
    out.triple_u[pt] = ctx.s3[pt] * ht_estimate(w).a_tilde;
  }

  std::array<double, 4> inv_sums{};
  for (int pt = 0; pt < ctx.n_triple_points; ++pt) {
    const std::array<int, 3> proj = ctx.projections(pt);
    for (int p = 0; p < 3; ++p) inv_sums[p] = pair_inv[p][proj[p]];
    inv_sums[3] = triple_inv[pt];
    ConstrainedEstimate est;
    try {
      est = solve_constrained(ctx.systems[pt], n, inv_sums, solver);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "replication on stream " << rng.stream() << " (seed "
          << rng.seed() << "), grid point " << pt << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
    const ConsistencyReport audit =
        check_consistency(to_evaluation_set(est, ctx.y3[pt]), 1e-7);
    if (!audit.consistent) {
      std::ostringstream msg;
      msg << "replication on stream " << rng.stream() << " (seed "
          << rng.seed() << "), grid point " << pt
          << ": constrained output failed the consistency audit (min d = "
          << audit.min_d << ")";
      throw std::runtime_error(msg.str());
    }
    for (int p = 0; p < 3; ++p) {
      out.pair_c[p][pt] = ctx.s2[proj[p]] * est.a[p];
    }
    out.triple_c[pt] = ctx.s3[pt] * est.a[3];
    if (est.changed) {
      out.point_changed[pt] = 1;
      out.any_changed = true;
    }
  }
  return out;
}

// Midpoint-rule sum of an already-squared deviation field.
double quadrature_sum(std::span<const double> squared, const Grid& grid,
                      int dims) {
  const int count = static_cast<int>(grid.x.size());
  std::size_t expected = 1;
  for (int d = 0; d < dims; ++d) expected *= count;
  if (squared.size() != expected) {
    throw std::invalid_argument("value array does not cover the grid");
  }
  double total = 0.0;
  for (std::size_t flat = 0; flat < squared.size(); ++flat) {
    double volume = 1.0;
    std::size_t rest = flat;
    for (int d = 0; d < dims; ++d) {
      volume *= grid.width[rest % count];
      rest /= count;
    }
    total += squared[flat] * volume;
  }
  return total;
}

}  // namespace

Grid build_grid(const GridSpec& spec) {
  if (spec.count < 2) {
    throw std::invalid_argument("grid needs at least two points");
  }
  if (!(spec.p_step > 0.0)) {
    throw std::invalid_argument("grid step must be positive");
  }
  Grid grid;
  for (int i = 0; i < spec.count; ++i) {
    const double p = spec.p_start + spec.p_step * i;
    if (!(p > 0.0) || !(p < 1.0)) {
      throw std::invalid_argument("grid probabilities must lie inside (0,1)");
    }
    grid.prob.push_back(p);
    grid.x.push_back(frechet_quantile(p));
  }
  grid.lo = grid.x.front();
  grid.hi = grid.x.back();
  grid.width.resize(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    const double left = i == 0 ? grid.lo : 0.5 * (grid.x[i - 1] + grid.x[i]);
    const double right =
        i == spec.count - 1 ? grid.hi : 0.5 * (grid.x[i] + grid.x[i + 1]);
    grid.width[i] = right - left;
  }
  return grid;
}

ReplicationResult run_replication(double alpha, int n, const Grid& grid,
                                  RngStream rng, const SolverOptions& solver) {
  return run_replication_impl(alpha, n, GridContext(grid), rng, solver);
}

double rmse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) {
    throw std::invalid_argument("rmse of an empty accumulator");
  }
  double s = 0.0;
  for (double v : estimates) {
    const double d = v - truth;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(estimates.size()));
}

double integrated_square_deviation(std::span<const double> values,
                                   std::span<const double> truth,
                                   const Grid& grid, int dims) {
  if (dims < 1 || dims > 6) throw std::invalid_argument("dims out of range");
  if (values.size() != truth.size()) {
    throw std::invalid_argument("values and truth must have equal length");
  }
  std::vector<double> squared(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - truth[i];
    squared[i] = d * d;
  }
  return quadrature_sum(squared, grid, dims);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.replications < 1) {
    throw std::invalid_argument("need at least one replication");
  }
  if (config.n < 2) throw std::invalid_argument("need at least two block maxima");
  if (config.alphas.empty()) {
    throw std::invalid_argument("no dependence parameters configured");
  }
  ExperimentResult result;
  result.config = config;
  result.grid = build_grid(config.grid);
  const GridContext ctx(result.grid);
  const int R = config.replications;

  int n_threads = config.threads > 0
                      ? config.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, R));

  for (double alpha : config.alphas) {
    // Replication r runs on stream r regardless of scheduling; the fold below
    // is in replication order, so results do not depend on the thread count.
    std::vector<ReplicationResult> reps(R);
    {
      std::atomic<int> next{0};
      std::atomic<bool> failed{false};
      std::exception_ptr error;
      std::mutex error_mutex;
      auto worker = [&]() {
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= R || failed.load()) return;
          try {
            reps[r] = run_replication_impl(
                alpha, config.n, ctx, RngStream(config.seed, r), config.solver);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            failed.store(true);
            return;
          }
        }
      };
      std::vector<std::thread> pool;
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
      if (error) std::rethrow_exception(error);
    }

    const LogisticModel model(alpha, 3);
    std::vector<double> truth2(ctx.n_pair_points);
    const SubsetIndex pair12(0b011, 3);
    for (int pt = 0; pt < ctx.n_pair_points; ++pt) {
      truth2[pt] = logistic_V(model, pair12, ctx.y2[pt]);
    }
    std::vector<double> truth3(ctx.n_triple_points);
    const SubsetIndex triple(0b111, 3);
    for (int pt = 0; pt < ctx.n_triple_points; ++pt) {
      truth3[pt] = logistic_V(model, triple, ctx.y3[pt]);
    }

    AlphaResult ar;
    ar.alpha = alpha;
    std::array<std::vector<double>, 3> sum_sq_u2, sum_sq_c2;
    for (int p = 0; p < 3; ++p) {
      sum_sq_u2[p].assign(ctx.n_pair_points, 0.0);
      sum_sq_c2[p].assign(ctx.n_pair_points, 0.0);
    }
    std::vector<double> sum_sq_u3(ctx.n_triple_points, 0.0);
    std::vector<double> sum_sq_c3(ctx.n_triple_points, 0.0);
    ar.t_unconstrained.fill(0.0);
    ar.t_constrained.fill(0.0);
    long changed_reps = 0;
    long changed_points = 0;

    std::array<std::vector<double>, 3> ext_mean;
    for (int p = 0; p < 3; ++p) ext_mean[p].resize(ctx.n_pair_points);
    std::vector<double> sq3(ctx.n_triple_points);

    for (int r = 0; r < R; ++r) {
      const ReplicationResult& rep = reps[r];
      for (int p = 0; p < 3; ++p) {
        std::fill(ext_mean[p].begin(), ext_mean[p].end(), 0.0);
      }
      for (int pt = 0; pt < ctx.n_triple_points; ++pt) {
        const std::array<int, 3> proj = ctx.projections(pt);
        for (int p = 0; p < 3; ++p) {
          const double d = rep.pair_c[p][pt] - truth2[proj[p]];
          ext_mean[p][proj[p]] += d * d;
        }
        const double du = rep.triple_u[pt] - truth3[pt];
        sum_sq_u3[pt] += du * du;
        const double dc = rep.triple_c[pt] - truth3[pt];
        sum_sq_c3[pt] += dc * dc;
        sq3[pt] = dc * dc;
        changed_points += rep.point_changed[pt];
      }
      for (int p = 0; p < 3; ++p) {
        for (int pt = 0; pt < ctx.n_pair_points; ++pt) {
          ext_mean[p][pt] /= ctx.count;
          sum_sq_c2[p][pt] += ext_mean[p][pt];
          const double d = rep.pair_u[p][pt] - truth2[pt];
          sum_sq_u2[p][pt] += d * d;
        }
        ar.t_unconstrained[p] +=
            integrated_square_deviation(rep.pair_u[p], truth2, result.grid, 2);
        ar.t_constrained[p] += quadrature_sum(ext_mean[p], result.grid, 2);
      }
      ar.t_unconstrained[3] +=
          integrated_square_deviation(rep.triple_u, truth3, result.grid, 3);
      ar.t_constrained[3] += quadrature_sum(sq3, result.grid, 3);
      if (rep.any_changed) ++changed_reps;
    }

    for (int b = 0; b < 4; ++b) {
      ar.t_unconstrained[b] /= R;
      ar.t_constrained[b] /= R;
    }
    ar.pct_changed_replication = static_cast<double>(changed_reps) / R;
    ar.pct_changed_point = static_cast<double>(changed_points) /
                           (static_cast<double>(R) * ctx.n_triple_points);
    for (int p = 0; p < 3; ++p) {
      ar.pair_points[p].resize(ctx.n_pair_points);
      for (int pt = 0; pt < ctx.n_pair_points; ++pt) {
        const double ru = std::sqrt(sum_sq_u2[p][pt] / R);
        const double rc = std::sqrt(sum_sq_c2[p][pt] / R);
        ar.pair_points[p][pt] = PointStats{ru, rc, rc / ru};
      }
    }
    ar.triple_points.resize(ctx.n_triple_points);
    for (int pt = 0; pt < ctx.n_triple_points; ++pt) {
      const double ru = std::sqrt(sum_sq_u3[pt] / R);
      const double rc = std::sqrt(sum_sq_c3[pt] / R);
      ar.triple_points[pt] = PointStats{ru, rc, rc / ru};
    }
    result.alphas.push_back(std::move(ar));
  }
  return result;
}

void write_rmse_csv(const ExperimentResult& result, const std::string& path) {
  const int count = static_cast<int>(result.grid.x.size());
  std::string out = "alpha,B,y1,y2,y3,rmse_u,rmse_c,ratio\n";
  for (const AlphaResult& ar : result.alphas) {
    const std::string alpha = format_double(ar.alpha);
    for (int p = 0; p < 3; ++p) {
      const SubsetIndex B(kPairBits[p], 3);
      const std::vector<int> elems = B.elements();
      for (int a = 0; a < count; ++a) {
        for (int b = 0; b < count; ++b) {
          const PointStats& st = ar.pair_points[p][a * count + b];
          std::array<std::string, 3> ycol;
          ycol[elems[0] - 1] = format_double(result.grid.x[a]);
          ycol[elems[1] - 1] = format_double(result.grid.x[b]);
          out += alpha + "," + B.label() + "," + ycol[0] + "," + ycol[1] +
                 "," + ycol[2] + "," + format_double(st.rmse_u) + "," +
                 format_double(st.rmse_c) + "," + format_double(st.ratio) +
                 "\n";
        }
      }
    }
    for (int pt = 0; pt < count * count * count; ++pt) {
      const PointStats& st = ar.triple_points[pt];
      const int c = pt % count;
      const int b = (pt / count) % count;
      const int a = pt / (count * count);
      out += alpha + ",1+2+3," + format_double(result.grid.x[a]) + "," +
             format_double(result.grid.x[b]) + "," +
             format_double(result.grid.x[c]) + "," +
             format_double(st.rmse_u) + "," + format_double(st.rmse_c) + "," +
             format_double(st.ratio) + "\n";
    }
  }
  write_text(path, out);
}

void write_tdev_csv(const ExperimentResult& result, const std::string& path) {
  std::string out = "alpha,B,t_u,t_c\n";
  const std::array<std::string, 4> labels{"1+2", "1+3", "2+3", "1+2+3"};
  for (const AlphaResult& ar : result.alphas) {
    for (int b = 0; b < 4; ++b) {
      out += format_double(ar.alpha) + "," + labels[b] + "," +
             format_double(ar.t_unconstrained[b]) + "," +
             format_double(ar.t_constrained[b]) + "\n";
    }
  }
  write_text(path, out);
}

void write_changed_csv(const ExperimentResult& result,
                       const std::string& path) {
  std::string out = "alpha,pct_changed_rep,pct_changed_point\n";
  for (const AlphaResult& ar : result.alphas) {
    out += format_double(ar.alpha) + "," +
           format_double(ar.pct_changed_replication) + "," +
           format_double(ar.pct_changed_point) + "\n";
  }
  write_text(path, out);
}

void write_meta_json(const ExperimentResult& result, const std::string& path) {
  nlohmann::ordered_json meta;
  meta["tool"] = kToolName;
  meta["version"] = kVersion;
  meta["config"] = {
      {"alphas", result.config.alphas},
      {"n", result.config.n},
      {"replications", result.config.replications},
      {"seed", result.config.seed},
      {"grid",
       {{"p_start", result.config.grid.p_start},
        {"p_step", result.config.grid.p_step},
        {"count", result.config.grid.count}}},
  };
  meta["grid"] = {
      {"probabilities", result.grid.prob},
      {"quantiles", result.grid.x},
      {"cell_widths", result.grid.width},
  };
  meta["conventions"] = {
      {"quadrature",
       "midpoint rule: each grid point owns the cell between the midpoints to "
       "its neighbours, outer cells clipped to the hull of the grid; a "
       "constant integrand integrates exactly to the hull volume"},
      {"pair_constrained_rmse",
       "constrained pair estimates come from the joint solve at each triple "
       "point; pair-point RMSE and per-replication integrated deviations pool "
       "the squared deviations over the third-coordinate extensions"},
      {"changed",
       "pct_changed_rep: fraction of replications where the constrained "
       "solution differs from the clipped raw estimates at any triple grid "
       "point; pct_changed_point: same fraction over replication x point"},
  };
  meta["files"] = {"rmse.csv", "tdev.csv", "changed.csv"};
  write_text(path, meta.dump(2) + "\n");
}

}  // namespace evdep
