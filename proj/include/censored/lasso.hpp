#pragma once

#include "censored/data_model.hpp"

#include <vector>

namespace censored {

struct LassoConfig {
  double lambda = 0.0;
  double tol = 1e-8;  // max coordinate change within one sweep
  int max_sweeps = 10000;
  double support_threshold = 1e-6;
  bool record_objective = false;

  void validate() const;
};

struct LassoSolution {
  Vector w;
  IndexSet support;
  int sweeps_used = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  IndexSet frozen;  // zero-norm columns held at 0
  std::vector<double> objective_trace;  // objective after each sweep, when requested
};

/// sign(x) * max(|x| - t, 0)
inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// (1/2n)||Xw - y||^2 + lambda ||w||_1
double lasso_objective(const Matrix& design, const Vector& labels, const Vector& w, double lambda);

/// ||(1/n) X^T y||_inf, the smallest lambda with w = 0 optimal.
double lambda_max(const Matrix& design, const Vector& labels);

/// Cyclic coordinate descent from w = 0, coordinates visited in index order.
LassoSolution solve_lasso(const Matrix& design, const Vector& labels, const LassoConfig& config);

/// Largest violation of the subgradient optimality conditions at w.
double kkt_residual(const Matrix& design, const Vector& labels, const Vector& w, double lambda);

IndexSet extract_support(const Vector& w, double threshold);

}  // namespace censored
