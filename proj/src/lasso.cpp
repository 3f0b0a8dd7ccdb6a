#include "censored/lasso.hpp"

#include <algorithm>
#include <cmath>

namespace censored {

void LassoConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("lambda must be a finite non-negative number");
  }
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  if (max_sweeps < 1) throw ValidationError("max_sweeps must be at least 1");
  if (!(support_threshold >= 0.0)) throw ValidationError("support threshold must be non-negative");
}

double lasso_objective(const Matrix& design, const Vector& labels, const Vector& w, double lambda) {
  const double n = static_cast<double>(design.rows());
  return (design * w - labels).squaredNorm() / (2.0 * n) + lambda * w.lpNorm<1>();
}

double lambda_max(const Matrix& design, const Vector& labels) {
  const double n = static_cast<double>(design.rows());
  return (design.transpose() * labels).cwiseAbs().maxCoeff() / n;
}

LassoSolution solve_lasso(const Matrix& design, const Vector& labels, const LassoConfig& config) {
  config.validate();
  const Index n = design.rows();
  const Index p = design.cols();
  if (labels.size() != n) {
    throw ValidationError("design has " + std::to_string(n) + " rows but labels have " +
                          std::to_string(labels.size()) + " entries");
  }
  if (n < 1 || p < 1) throw ValidationError("design must be non-empty");
  if (!design.allFinite() || !labels.allFinite()) {
    throw ValidationError("design and labels must be finite");
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  Vector col_scale(p);  // ||x_j||^2 / n
  LassoSolution sol;
  for (Index j = 0; j < p; ++j) {
    col_scale(j) = design.col(j).squaredNorm() * inv_n;
    if (col_scale(j) == 0.0) sol.frozen.push_back(j);
  }

  sol.w = Vector::Zero(p);
  Vector residual = labels;  // y - Xw
  const double lambda = config.lambda;
  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (col_scale(j) == 0.0) continue;
      const double old = sol.w(j);
      const double rho = design.col(j).dot(residual) * inv_n + col_scale(j) * old;
      const double updated = soft_threshold(rho, lambda) / col_scale(j);
      const double delta = updated - old;
      if (delta != 0.0) {
        residual.noalias() -= delta * design.col(j);
        sol.w(j) = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    sol.sweeps_used = sweep;
    if (config.record_objective) {
      sol.objective_trace.push_back(residual.squaredNorm() * inv_n / 2.0 +
                                    lambda * sol.w.lpNorm<1>());
    }
    if (max_change < config.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.support = extract_support(sol.w, config.support_threshold);
  sol.kkt_residual = kkt_residual(design, labels, sol.w, lambda);
  return sol;
}

double kkt_residual(const Matrix& design, const Vector& labels, const Vector& w, double lambda) {
  const double n = static_cast<double>(design.rows());
  const Vector grad = design.transpose() * (design * w - labels) / n;
  double worst = 0.0;
  for (Index i = 0; i < w.size(); ++i) {
    const double v = w(i) != 0.0 ? std::abs(grad(i) + lambda * (w(i) > 0.0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(grad(i)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

IndexSet extract_support(const Vector& w, double threshold) {
  IndexSet support;
  for (Index i = 0; i < w.size(); ++i) {
    if (std::abs(w(i)) > threshold) support.push_back(i);
  }
  return support;
}

}  // namespace censored
