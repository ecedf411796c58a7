#include "evdep/constrain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace evdep {

namespace {

constexpr double kActiveSlack = 1e-6;  // reporting threshold for active rows
constexpr double kChangedTol = 1e-9;
constexpr double kPolishSlack = 1e-7;  // active-set detection for the polish

void validate_options(const SolverOptions& o) {
  if (!(o.barrier_start > 0.0) || !(o.newton_tol > 0.0) ||
      !(o.feasibility_slack > 0.0) || !(o.gap_tol > 0.0) ||
      o.max_iterations < 1) {
    throw std::invalid_argument("solver options must be positive");
  }
  if (!(o.barrier_decay > 0.0) || !(o.barrier_decay < 1.0)) {
    throw std::invalid_argument("barrier decay must lie in (0,1)");
  }
}

// Cholesky solve of the SPD system A x = b; A is row-major k x k and is
// overwritten by its factor. Returns false on a nonpositive pivot.
bool spd_solve(std::vector<double>& A, const std::vector<double>& b,
               std::vector<double>& x, int k) {
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A[i * k + j];
      for (int p = 0; p < j; ++p) s -= A[i * k + p] * A[j * k + p];
      if (i == j) {
        if (!(s > 0.0)) return false;
        A[i * k + i] = std::sqrt(s);
      } else {
        A[i * k + j] = s / A[j * k + j];
      }
    }
  }
  x = b;
  for (int i = 0; i < k; ++i) {
    for (int p = 0; p < i; ++p) x[i] -= A[i * k + p] * x[p];
    x[i] /= A[i * k + i];
  }
  for (int i = k - 1; i >= 0; --i) {
    for (int p = i + 1; p < k; ++p) x[i] -= A[p * k + i] * x[p];
    x[i] /= A[i * k + i];
  }
  return true;
}

// Gaussian elimination with partial pivoting for the small KKT saddle
// systems of the polish step. Returns false when numerically singular.
bool gauss_solve(std::vector<double> A, std::vector<double> b,
                 std::vector<double>& x, int n) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(A[r * n + col]) > std::abs(A[pivot * n + col])) pivot = r;
    }
    if (std::abs(A[pivot * n + col]) < 1e-14) return false;
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(A[col * n + c], A[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = A[r * n + col] / A[col * n + col];
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) A[r * n + c] -= f * A[col * n + c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= A[r * n + c] * x[c];
    x[r] = s / A[r * n + r];
  }
  return true;
}

// Uniform mixture of independence and, for every L with |L| >= 2, the
// partition model with block L completely dependent and all remaining
// coordinates independent. Each mixture component is a valid max-stable law,
// so the point is feasible; the component for L carries strictly positive
// decomposition mass on L, and independence keeps every variable strictly
// below 1, so the point is strictly interior for any y. (The natural-looking
// alternatives are not: at y = (1,...,1) the box midpoint sits exactly on the
// d_L = 0 boundary for every 2 <= |L| < m.)
std::vector<double> interior_mixture(const ConstraintSystem& cs) {
  const int k = static_cast<int>(cs.vars.size());
  std::vector<double> a(k, 1.0);  // independence component
  int components = 1;
  for (std::uint32_t lbits = 1; lbits < (1u << cs.m); ++lbits) {
    if (std::popcount(lbits) < 2) continue;
    ++components;
    for (int i = 0; i < k; ++i) {
      const std::uint32_t bbits = cs.vars[i].bits();
      double v = 0.0;
      double block_max = 0.0;
      for (int e = 0; e < cs.m; ++e) {
        if (!((bbits >> e) & 1u)) continue;
        if ((lbits >> e) & 1u) {
          block_max = std::max(block_max, cs.u[e]);
        } else {
          v += cs.u[e];
        }
      }
      a[i] += (v + block_max) / cs.margin_sum[i];
    }
  }
  for (double& v : a) v /= components;
  return a;
}

struct BarrierProblem {
  const ConstraintSystem& cs;
  double n;
  std::span<const double> inv_sums;
  int k;
  int n_rows;
  int n_constraints;  // rows + two boxes per variable

  // Slacks in fixed order: rows, then x - lo, then hi - x.
  void slacks(std::span<const double> x, std::vector<double>& g) const {
    for (int r = 0; r < n_rows; ++r) g[r] = cs.row_value(r, x);
    for (int i = 0; i < k; ++i) {
      g[n_rows + i] = x[i] - cs.lower[i];
      g[n_rows + k + i] = cs.upper[i] - x[i];
    }
  }

  double min_slack(std::span<const double> x, std::vector<double>& g) const {
    slacks(x, g);
    return *std::min_element(g.begin(), g.end());
  }

  // Gradient of constraint c (same ordering as the slacks) into `out`.
  void constraint_gradient(int c, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (c < n_rows) {
      for (const auto& [pos, coeff] : cs.rows[c].terms) out[pos] = coeff;
    } else if (c < n_rows + k) {
      out[c - n_rows] = 1.0;
    } else {
      out[c - n_rows - k] = -1.0;
    }
  }

  double objective(std::span<const double> x) const {
    double f = 0.0;
    for (int i = 0; i < k; ++i) f += n * std::log(x[i]) - inv_sums[i] * x[i];
    return f;
  }

  void objective_gradient(std::span<const double> x,
                          std::vector<double>& grad) const {
    for (int i = 0; i < k; ++i) grad[i] = n / x[i] - inv_sums[i];
  }

  // Barrier value; caller guarantees strict feasibility of x.
  double barrier(std::span<const double> x, double mu,
                 std::vector<double>& g) const {
    slacks(x, g);
    double phi = objective(x);
    for (double s : g) phi += mu * std::log(s);
    return phi;
  }

  void gradient_neg_hessian(std::span<const double> x, double mu,
                            const std::vector<double>& g,
                            std::vector<double>& grad,
                            std::vector<double>& negH) const {
    for (int i = 0; i < k; ++i) {
      const double lo_s = g[n_rows + i];
      const double hi_s = g[n_rows + k + i];
      grad[i] = n / x[i] - inv_sums[i] + mu * (1.0 / lo_s - 1.0 / hi_s);
    }
    std::fill(negH.begin(), negH.end(), 0.0);
    for (int i = 0; i < k; ++i) {
      const double lo_s = g[n_rows + i];
      const double hi_s = g[n_rows + k + i];
      negH[i * k + i] = n / (x[i] * x[i]) +
                        mu * (1.0 / (lo_s * lo_s) + 1.0 / (hi_s * hi_s));
    }
    for (int r = 0; r < n_rows; ++r) {
      const double inv_s = 1.0 / g[r];
      for (const auto& [i, ci] : cs.rows[r].terms) {
        grad[i] += mu * ci * inv_s;
        for (const auto& [j, cj] : cs.rows[r].terms) {
          if (j <= i) negH[i * k + j] += mu * ci * cj * inv_s * inv_s;
        }
      }
    }
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) negH[i * k + j] = negH[j * k + i];
    }
  }
};

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// KKT residual at an arbitrary point, with multipliers chosen by a ridge
// least-squares fit of the stationarity condition: minimize over lambda of
// ||grad_f + G^T lambda||^2 + sum_i (g_i lambda_i)^2. The complementarity
// penalty keeps multipliers of slack constraints near zero, and no slack ever
// appears in a denominator, so the report is numerically trustworthy even
// when the barrier has driven active slacks to the rounding floor.
double kkt_residual_at(const BarrierProblem& problem,
                       std::span<const double> x) {
  const int k = problem.k;
  const int mc = problem.n_constraints;
  std::vector<double> g(mc);
  problem.slacks(x, g);
  std::vector<double> grad_f(k);
  problem.objective_gradient(x, grad_f);

  // G is mc x k; normal matrix A = G G^T + diag(g^2).
  std::vector<double> G(static_cast<std::size_t>(mc) * k);
  std::vector<double> row(k);
  for (int c = 0; c < mc; ++c) {
    problem.constraint_gradient(c, row);
    for (int i = 0; i < k; ++i) G[c * k + i] = row[i];
  }
  std::vector<double> A(static_cast<std::size_t>(mc) * mc, 0.0);
  std::vector<double> rhs(mc, 0.0);
  for (int a = 0; a < mc; ++a) {
    for (int b = 0; b <= a; ++b) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += G[a * k + i] * G[b * k + i];
      A[a * mc + b] = s;
      A[b * mc + a] = s;
    }
    A[a * mc + a] += g[a] * g[a];
    double r = 0.0;
    for (int i = 0; i < k; ++i) r += G[a * k + i] * grad_f[i];
    rhs[a] = -r;
  }
  std::vector<double> lambda(mc, 0.0);
  {
    std::vector<double> factor = A;
    double ridge = 1e-13;
    while (!spd_solve(factor, rhs, lambda, mc)) {
      factor = A;
      for (int a = 0; a < mc; ++a) factor[a * mc + a] += ridge;
      ridge *= 100.0;
      if (ridge > 1.0) {
        lambda.assign(mc, 0.0);
        break;
      }
    }
  }
  for (double& l : lambda) l = std::max(l, 0.0);

  double stationarity = 0.0;
  for (int i = 0; i < k; ++i) {
    double s = grad_f[i];
    for (int c = 0; c < mc; ++c) s += G[c * k + i] * lambda[c];
    stationarity = std::max(stationarity, std::abs(s));
  }
  double complementarity = 0.0;
  double infeasibility = 0.0;
  for (int c = 0; c < mc; ++c) {
    complementarity = std::max(complementarity, std::abs(lambda[c] * g[c]));
    infeasibility = std::max(infeasibility, -g[c]);
  }
  return std::max({stationarity, complementarity, infeasibility});
}

// Equality-constrained Newton refinement on the active set detected at the
// barrier solution. Constraints are linear and the objective is separable and
// smooth, so a few iterations reach the exact face optimum; the step is
// accepted only when it stays feasible with nonnegative multipliers.
bool polish_on_active_set(const BarrierProblem& problem,
                          std::vector<double>& x) {
  const int k = problem.k;
  const int mc = problem.n_constraints;
  std::vector<double> g(mc);
  problem.slacks(x, g);

  // Active candidates, deduplicated to a linearly independent family by
  // Gram-Schmidt so the KKT system below is nonsingular.
  std::vector<int> active;
  std::vector<std::vector<double>> basis;
  std::vector<double> row(k);
  for (int c = 0; c < mc && static_cast<int>(active.size()) < k; ++c) {
    if (g[c] > kPolishSlack) continue;
    problem.constraint_gradient(c, row);
    std::vector<double> residual = row;
    for (const auto& b : basis) {
      double dot = 0.0, nb = 0.0;
      for (int i = 0; i < k; ++i) {
        dot += residual[i] * b[i];
        nb += b[i] * b[i];
      }
      for (int i = 0; i < k; ++i) residual[i] -= dot / nb * b[i];
    }
    double norm = 0.0;
    for (int i = 0; i < k; ++i) norm += residual[i] * residual[i];
    if (std::sqrt(norm) < 1e-8) continue;  // dependent on chosen ones
    basis.push_back(residual);
    active.push_back(c);
  }
  if (active.empty()) return false;
  const int na = static_cast<int>(active.size());

  std::vector<double> Ga(static_cast<std::size_t>(na) * k);
  std::vector<double> offset(na);  // g_c(x) - G_c x, the affine part
  for (int a = 0; a < na; ++a) {
    problem.constraint_gradient(active[a], row);
    double gx = 0.0;
    for (int i = 0; i < k; ++i) {
      Ga[a * k + i] = row[i];
      gx += row[i] * x[i];
    }
    offset[a] = g[active[a]] - gx;
  }

  std::vector<double> z = x;
  std::vector<double> lambda(na, 0.0);
  const int dim = k + na;
  std::vector<double> M(static_cast<std::size_t>(dim) * dim);
  std::vector<double> rhs(dim), step(dim);
  bool converged = false;
  for (int iter = 0; iter < 25; ++iter) {
    double err = 0.0;
    for (int i = 0; i < k; ++i) {
      double s = problem.n / z[i] - problem.inv_sums[i];
      for (int a = 0; a < na; ++a) s += Ga[a * k + i] * lambda[a];
      rhs[i] = -s;
      err = std::max(err, std::abs(s));
    }
    for (int a = 0; a < na; ++a) {
      double gz = offset[a];
      for (int i = 0; i < k; ++i) gz += Ga[a * k + i] * z[i];
      rhs[k + a] = -gz;
      err = std::max(err, std::abs(gz));
    }
    if (err < 1e-12 * std::max(1.0, problem.n)) {
      converged = true;
      break;
    }
    std::fill(M.begin(), M.end(), 0.0);
    for (int i = 0; i < k; ++i) {
      M[i * dim + i] = -problem.n / (z[i] * z[i]);
      for (int a = 0; a < na; ++a) {
        M[i * dim + (k + a)] = Ga[a * k + i];
        M[(k + a) * dim + i] = Ga[a * k + i];
      }
    }
    if (!gauss_solve(M, rhs, step, dim)) return false;
    for (int i = 0; i < k; ++i) z[i] += step[i];
    for (int a = 0; a < na; ++a) lambda[a] += step[k + a];
    for (int i = 0; i < k; ++i) {
      if (!(z[i] > 0.0)) return false;
    }
  }
  if (!converged) return false;
  for (double l : lambda) {
    if (l < -1e-9) return false;  // wrong face, keep the barrier point
  }
  std::vector<double> gz(mc);
  if (problem.min_slack(z, gz) < -1e-10) return false;
  x = z;
  return true;
}

}  // namespace

double ConstraintSystem::row_value(std::size_t r,
                                   std::span<const double> a) const {
  const ConstraintRow& row = rows[r];
  double v = row.constant;
  for (const auto& [pos, coeff] : row.terms) v += coeff * a[pos];
  return v;
}

int ConstraintSystem::var_position(std::uint32_t bits) const {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].bits() == bits) return static_cast<int>(i);
  }
  return -1;
}

ConstraintSystem build_constraints(std::span<const double> y) {
  const int m = static_cast<int>(y.size());
  if (m < 1 || m > kMaxDimension) {
    throw std::invalid_argument("dimension out of range");
  }
  ConstraintSystem cs;
  cs.m = m;
  cs.y.assign(y.begin(), y.end());
  cs.u.resize(m);
  for (int i = 0; i < m; ++i) {
    if (!(y[i] > 0.0) || !std::isfinite(y[i])) {
      throw std::invalid_argument("evaluation point must be strictly positive");
    }
    cs.u[i] = 1.0 / y[i];
  }
  std::vector<int> position(std::size_t{1} << m, -1);
  for (const SubsetIndex& B : enumerate_subsets(m)) {
    if (B.size() < 2) continue;
    position[B.bits()] = static_cast<int>(cs.vars.size());
    double s = 0.0;
    double mx = 0.0;
    for (int e : B.elements()) {
      s += cs.u[e - 1];
      mx = std::max(mx, cs.u[e - 1]);
    }
    cs.vars.push_back(B);
    cs.margin_sum.push_back(s);
    cs.lower.push_back(mx / s);  // max w_B
    cs.upper.push_back(1.0);
  }
  for (const SubsetIndex& L : enumerate_subsets(m)) {
    ConstraintRow row{L, 0.0, {}};
    for (const auto& [B, sign] : moebius_coefficients(L)) {
      if (B.size() == 1) {
        row.constant += sign * cs.u[B.elements().front() - 1];
      } else {
        const int pos = position[B.bits()];
        row.terms.emplace_back(pos, sign * cs.margin_sum[pos]);
      }
    }
    cs.rows.push_back(std::move(row));
  }
  return cs;
}

double pseudo_loglik(std::span<const double> a, const HtWeightsMap& weights) {
  if (a.size() != weights.size()) {
    throw std::invalid_argument(
        "one Pickands value per weighted subset required");
  }
  double total = 0.0;
  std::size_t i = 0;
  for (const auto& [bits, w] : weights) {
    (void)bits;
    total += loglik_A(a[i], w);
    ++i;
  }
  return total;
}

ConstrainedEstimate solve_constrained(const HtWeightsMap& weights,
                                      std::span<const double> y,
                                      const SolverOptions& options) {
  const int m = static_cast<int>(y.size());
  if (m < 2) {
    throw std::invalid_argument("joint estimation needs dimension >= 2");
  }
  std::vector<double> inv_sums;
  int n_obs = -1;
  for (const SubsetIndex& B : enumerate_subsets(m)) {
    if (B.size() < 2) continue;
    auto it = weights.find(B.bits());
    if (it == weights.end()) {
      throw std::invalid_argument("missing weights for subset {" + B.label() +
                                  "}");
    }
    if (n_obs < 0) n_obs = it->second.count();
    if (it->second.count() != n_obs) {
      throw std::invalid_argument("weight vectors disagree on sample size");
    }
    inv_sums.push_back(it->second.sum_inverse());
  }
  if (weights.size() != inv_sums.size()) {
    throw std::invalid_argument("weights map holds subsets outside C_m");
  }
  return solve_constrained(y, n_obs, inv_sums, options);
}

ConstrainedEstimate solve_constrained(std::span<const double> y, int n_obs,
                                      std::span<const double> inv_sums,
                                      const SolverOptions& options) {
  return solve_constrained(build_constraints(y), n_obs, inv_sums, options);
}

ConstrainedEstimate solve_constrained(const ConstraintSystem& cs, int n_obs,
                                      std::span<const double> inv_sums,
                                      const SolverOptions& options) {
  validate_options(options);
  if (n_obs < 2) throw std::invalid_argument("need at least two observations");
  const int k = static_cast<int>(cs.vars.size());
  if (static_cast<int>(inv_sums.size()) != k) {
    throw std::invalid_argument("one inverse-weight sum per variable required");
  }
  const double n = static_cast<double>(n_obs);

  std::vector<double> a_clip(k);
  for (int i = 0; i < k; ++i) {
    if (!(inv_sums[i] > 0.0)) {
      throw std::invalid_argument("inverse-weight sums must be positive");
    }
    a_clip[i] = std::min(n / inv_sums[i], 1.0);
  }

  BarrierProblem problem{cs, n, inv_sums, k,
                         static_cast<int>(cs.rows.size()),
                         static_cast<int>(cs.rows.size()) + 2 * k};
  std::vector<double> slack(problem.n_constraints);

  ConstrainedEstimate out;
  out.vars = cs.vars;

  const auto finish = [&](std::vector<double> a) {
    out.kkt_residual = kkt_residual_at(problem, a);
    problem.slacks(a, slack);
    out.active.clear();
    for (int r = 0; r < problem.n_rows; ++r) {
      if (slack[r] <= kActiveSlack) out.active.push_back(cs.rows[r].L);
    }
    out.changed = false;
    for (int i = 0; i < k; ++i) {
      if (std::abs(a[i] - a_clip[i]) > kChangedTol) {
        out.changed = true;
        break;
      }
    }
    out.a = std::move(a);
    return out;
  };

  if (k == 0) return finish({});

  // Short circuit: the clipped raw estimates are optimal whenever feasible.
  if (problem.min_slack(a_clip, slack) >= -options.feasibility_slack) {
    return finish(a_clip);
  }

  // Strictly feasible start: box midpoints when they are safely interior,
  // otherwise the certified mixture point.
  std::vector<double> x(k);
  for (int i = 0; i < k; ++i) x[i] = 0.5 * (cs.lower[i] + cs.upper[i]);
  const double u_scale = *std::max_element(cs.u.begin(), cs.u.end());
  if (problem.min_slack(x, slack) <= 1e-6 * u_scale) {
    x = interior_mixture(cs);
    if (problem.min_slack(x, slack) <= 0.0) {
      throw std::runtime_error("no strictly feasible interior point found");
    }
  }

  std::vector<double> grad(k), negH(k * k), direction(k), x_try(k);
  int iterations_left = options.max_iterations;

  for (double mu = options.barrier_start;; mu *= options.barrier_decay) {
    const bool final_stage = mu * problem.n_constraints < options.gap_tol;
    for (;;) {
      const double phi0 = problem.barrier(x, mu, slack);
      problem.gradient_neg_hessian(x, mu, slack, grad, negH);
      std::vector<double> factor = negH;
      double ridge = 0.0;
      while (!spd_solve(factor, grad, direction, k)) {
        ridge = ridge == 0.0 ? 1e-12 * inf_norm(negH) : ridge * 100.0;
        if (!std::isfinite(ridge) || ridge > inf_norm(negH)) {
          throw std::runtime_error("barrier Hessian is numerically singular");
        }
        factor = negH;
        for (int i = 0; i < k; ++i) factor[i * k + i] += ridge;
      }
      double decrement2 = 0.0;
      for (int i = 0; i < k; ++i) decrement2 += grad[i] * direction[i];
      if (decrement2 <= 0.0 || 0.5 * decrement2 < options.newton_tol) break;
      double t = 1.0;
      bool moved = false;
      while (t >= 1e-20) {
        for (int i = 0; i < k; ++i) x_try[i] = x[i] + t * direction[i];
        if (problem.min_slack(x_try, slack) > 0.0 &&
            problem.barrier(x_try, mu, slack) >=
                phi0 + 0.25 * t * decrement2) {
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;
      x = x_try;
      if (--iterations_left <= 0) {
        std::ostringstream msg;
        msg << "constrained solver did not converge within "
            << options.max_iterations
            << " Newton steps; residual = " << kkt_residual_at(problem, x);
        throw std::runtime_error(msg.str());
      }
    }
    if (final_stage) break;
  }

  // Land exactly on the optimal face; fall back to the barrier point when the
  // active-set guess is rejected.
  polish_on_active_set(problem, x);
  return finish(std::move(x));
}

ExponentEvaluationSet to_evaluation_set(const ConstrainedEstimate& estimate,
                                        std::span<const double> y) {
  ExponentEvaluationSet out(std::vector<double>(y.begin(), y.end()));
  const int m = static_cast<int>(y.size());
  for (const SubsetIndex& B : enumerate_subsets(m)) {
    if (B.size() == 1) out.set(B, 1.0 / y[B.elements().front() - 1]);
  }
  for (std::size_t i = 0; i < estimate.vars.size(); ++i) {
    const SubsetIndex& B = estimate.vars[i];
    double s = 0.0;
    for (int e : B.elements()) s += 1.0 / y[e - 1];
    out.set(B, s * estimate.a[i]);
  }
  return out;
}

}  // namespace evdep
