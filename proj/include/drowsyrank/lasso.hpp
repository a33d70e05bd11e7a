#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace drowsyrank::baselines {

// Lasso in column-major form: minimize (1/2n)||y - Xw||^2 + alpha*||w||_1.
// Columns are expected pre-centered (or an intercept handled by the caller).
struct LassoProblem {
  std::vector<std::vector<double>> columns;  // p columns of length n
  std::vector<double> response;              // length n
  double alpha = 0.0;

  std::size_t n() const { return response.size(); }
  std::size_t p() const { return columns.size(); }
};

struct LassoResult {
  std::vector<double> weights;
  bool converged = false;
  std::size_t sweeps = 0;
  double max_kkt_residual = 0.0;
};

inline double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

inline LassoResult lasso_fit(const LassoProblem& problem, double tol = 1e-8,
                             std::size_t max_sweeps = 1000) {
  const std::size_t n = problem.n();
  const std::size_t p = problem.p();
  if (n == 0) throw std::invalid_argument("lasso_fit: empty response");
  if (problem.alpha < 0.0) throw std::invalid_argument("lasso_fit: alpha < 0");
  for (const auto& col : problem.columns)
    if (col.size() != n) throw std::invalid_argument("lasso_fit: column length mismatch");

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> col_sq(p, 0.0);  // ||X_j||^2 / n
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (double v : problem.columns[j]) s += v * v;
    col_sq[j] = s * inv_n;
  }

  LassoResult out;
  out.weights.assign(p, 0.0);
  std::vector<double> residual = problem.response;  // y - Xw

  for (out.sweeps = 0; out.sweeps < max_sweeps; ++out.sweeps) {
    double max_delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (col_sq[j] <= 0.0) continue;  // constant (all-zero) column stays at 0
      const auto& col = problem.columns[j];
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += col[i] * residual[i];
      const double rho = dot * inv_n + col_sq[j] * out.weights[j];
      const double w_new = soft_threshold(rho, problem.alpha) / col_sq[j];
      const double delta = w_new - out.weights[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= delta * col[i];
        out.weights[j] = w_new;
      }
      max_delta = std::max(max_delta, std::abs(delta));
    }
    if (max_delta < tol) {
      out.converged = true;
      ++out.sweeps;
      break;
    }
  }

  // KKT residuals: g_j = -X_j'(y - Xw)/n must satisfy |g_j| <= alpha at
  // w_j = 0 and g_j = -alpha*sign(w_j) otherwise.
  for (std::size_t j = 0; j < p; ++j) {
    const auto& col = problem.columns[j];
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += col[i] * residual[i];
    const double g = -dot * inv_n;
    double r;
    if (out.weights[j] == 0.0)
      r = std::max(0.0, std::abs(g) - problem.alpha);
    else
      r = std::abs(g + problem.alpha * (out.weights[j] > 0.0 ? 1.0 : -1.0));
    out.max_kkt_residual = std::max(out.max_kkt_residual, r);
  }
  return out;
}

inline double lasso_objective(const LassoProblem& problem,
                              const std::vector<double>& w) {
  const std::size_t n = problem.n();
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = problem.response[i];
    for (std::size_t j = 0; j < problem.p(); ++j)
      r -= problem.columns[j][i] * w[j];
    sq += r * r;
  }
  double l1 = 0.0;
  for (double v : w) l1 += std::abs(v);
  return 0.5 * sq / static_cast<double>(n) + problem.alpha * l1;
}

}  // namespace drowsyrank::baselines
