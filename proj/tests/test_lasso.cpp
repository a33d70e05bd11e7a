#include <doctest.h>

#include <cmath>
#include <vector>

#include "drowsyrank/lasso.hpp"
#include "drowsyrank/rng.hpp"

using namespace drowsyrank;
using baselines::LassoProblem;

namespace {

// Least-squares oracle: solve (X'X) w = X'y by Gaussian elimination.
std::vector<double> least_squares(const LassoProblem& prob) {
  const std::size_t p = prob.p(), n = prob.n();
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t r = 0; r < n; ++r)
        a[i][j] += prob.columns[i][r] * prob.columns[j][r];
    for (std::size_t r = 0; r < n; ++r)
      a[i][p] += prob.columns[i][r] * prob.response[r];
  }
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < p; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> w(p);
  for (std::size_t i = 0; i < p; ++i) w[i] = a[i][p] / a[i][i];
  return w;
}

LassoProblem random_problem(Rng& rng, std::size_t n, std::size_t p, double alpha) {
  LassoProblem prob;
  prob.alpha = alpha;
  prob.columns.assign(p, std::vector<double>(n));
  for (auto& col : prob.columns)
    for (auto& v : col) v = rng.normal();
  std::vector<double> w_true(p, 0.0);
  for (std::size_t j = 0; j < p; j += 2) w_true[j] = rng.normal();
  prob.response.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      prob.response[i] += prob.columns[j][i] * w_true[j];
    prob.response[i] += 0.1 * rng.normal();
  }
  return prob;
}

}  // namespace

TEST_CASE("lasso: orthonormal design gives the soft-threshold closed form") {
  // columns scaled so that ||X_j||^2 / n = 1
  const std::size_t n = 4;
  LassoProblem prob;
  prob.alpha = 0.3;
  prob.columns = {{2, 0, 0, 0}, {0, 2, 0, 0}};
  prob.response = {1.0, -0.2, 0.0, 0.0};
  auto fit = baselines::lasso_fit(prob);
  const double rho0 = (2.0 * 1.0) / n;   // X_0'y / n = 0.5
  const double rho1 = (2.0 * -0.2) / n;  // -0.1
  CHECK(fit.weights[0] == doctest::Approx(baselines::soft_threshold(rho0, 0.3)));
  CHECK(fit.weights[1] == doctest::Approx(baselines::soft_threshold(rho1, 0.3)));
  CHECK(fit.weights[1] == 0.0);
  CHECK(fit.converged);
}

TEST_CASE("lasso: alpha = 0 matches the least-squares oracle") {
  Rng rng(21);
  for (int rep = 0; rep < 5; ++rep) {
    auto prob = random_problem(rng, 100, 6, 0.0);
    auto fit = baselines::lasso_fit(prob, 1e-12, 5000);
    auto ls = least_squares(prob);
    for (std::size_t j = 0; j < ls.size(); ++j)
      CHECK(fit.weights[j] == doctest::Approx(ls[j]).epsilon(1e-6));
  }
}

TEST_CASE("lasso: full shrinkage above the critical alpha") {
  Rng rng(22);
  auto prob = random_problem(rng, 50, 4, 0.0);
  double alpha_max = 0.0;
  for (const auto& col : prob.columns) {
    double dot = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) dot += col[i] * prob.response[i];
    alpha_max = std::max(alpha_max, std::abs(dot) / col.size());
  }
  prob.alpha = alpha_max * 1.0001;
  auto fit = baselines::lasso_fit(prob);
  for (double w : fit.weights) CHECK(w == 0.0);
}

TEST_CASE("lasso: objective non-increasing across sweeps and KKT satisfied") {
  Rng rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    auto prob = random_problem(rng, 100, 10, 0.05);
    // run sweep-by-sweep via max_sweeps and check monotone objective
    double prev = baselines::lasso_objective(prob, std::vector<double>(10, 0.0));
    for (std::size_t sweeps = 1; sweeps <= 12; ++sweeps) {
      auto fit = baselines::lasso_fit(prob, 0.0, sweeps);
      double obj = baselines::lasso_objective(prob, fit.weights);
      CHECK(obj <= prev + 1e-12);
      prev = obj;
    }
    auto fit = baselines::lasso_fit(prob, 1e-10, 5000);
    CHECK(fit.converged);
    CHECK(fit.max_kkt_residual <= 1e-6);
  }
}
