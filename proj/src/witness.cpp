#include "censored/witness.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace censored {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Below this reciprocal condition number a Gram matrix is treated as singular.
constexpr double kMinRcond = 1e-12;

double min_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return kNaN;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

std::string describe(const IndexSet& cols) {
  std::string s;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    s += (j ? "," : "") + std::to_string(cols[j]);
  }
  return s;
}

// Columns that participate in a null direction of the Gram matrix.
IndexSet dependent_columns(const Matrix& gram, const IndexSet& support) {
  Eigen::FullPivLU<Matrix> lu(gram);
  lu.setThreshold(1e-10);
  const Matrix kernel = lu.kernel();
  IndexSet cols;
  for (Index r = 0; r < kernel.rows(); ++r) {
    if (kernel.cols() > 0 && kernel.row(r).cwiseAbs().maxCoeff() > 1e-8) {
      cols.push_back(support[static_cast<std::size_t>(r)]);
    }
  }
  return cols.empty() ? support : cols;
}

Eigen::LLT<Matrix> factor_gram(const Matrix& xs, const IndexSet& support) {
  const Matrix gram = xs.transpose() * xs;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinRcond) {
    const auto cols = dependent_columns(gram, support);
    throw WitnessUndefinedError("support Gram matrix is singular; dependent columns: " +
                                    describe(cols),
                                cols);
  }
  return llt;
}

// Coordinate descent stops at a max-change tolerance, which leaves the
// stationarity residual at roughly tol / lambda. Re-solve the equality system
// on the active set with the signs fixed; keep it only if it is still a lasso
// optimum, so z_S = sign(w) holds to rounding.
Vector polish_on_active_set(const Matrix& xs, const Vector& labels, const Vector& w,
                            double lambda) {
  IndexSet active;
  for (Index j = 0; j < w.size(); ++j) {
    if (w(j) != 0.0) active.push_back(j);
  }
  if (active.empty()) return w;
  const double n = static_cast<double>(xs.rows());
  const Matrix xa = xs(Eigen::all, active);
  Vector signs(static_cast<Index>(active.size()));
  for (Index a = 0; a < signs.size(); ++a) signs(a) = w(active[static_cast<std::size_t>(a)]) > 0.0 ? 1.0 : -1.0;
  Eigen::LLT<Matrix> llt(xa.transpose() * xa);
  if (llt.info() != Eigen::Success) return w;
  const Vector wa = llt.solve(xa.transpose() * labels - lambda * n * signs);
  for (Index a = 0; a < wa.size(); ++a) {
    if (wa(a) * signs(a) <= 0.0) return w;
  }
  Vector refined = Vector::Zero(w.size());
  refined(active) = wa;
  const Vector grad = xs.transpose() * (labels - xs * refined) / n;
  for (Index j = 0; j < w.size(); ++j) {
    if (refined(j) == 0.0 && std::abs(grad(j)) > lambda) return w;
  }
  return refined;
}

}  // namespace

IndexSet complement_of(const IndexSet& support, Index p) {
  IndexSet out;
  std::size_t pos = 0;
  for (Index i = 0; i < p; ++i) {
    if (pos < support.size() && support[pos] == i) {
      ++pos;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

void validate_support(const IndexSet& support, Index p) {
  if (support.empty()) throw ValidationError("support set must be nonempty");
  for (std::size_t j = 0; j < support.size(); ++j) {
    if (support[j] < 0 || support[j] >= p) {
      throw ValidationError("support index " + std::to_string(support[j]) + " out of range");
    }
    if (j > 0 && support[j] <= support[j - 1]) {
      throw ValidationError("support indices must be strictly increasing");
    }
  }
}

double inf_operator_norm(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

double incoherence_norm(const Matrix& c, const IndexSet& support) {
  validate_support(support, c.rows());
  const auto comp = complement_of(support, c.rows());
  if (comp.empty()) return 0.0;
  const Matrix css = c(support, support);
  Eigen::LLT<Matrix> llt(css);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinRcond) {
    throw ValidationError("covariance restricted to the support is not invertible");
  }
  // (C_SS^-1 C_S,Sc)^T = C_Sc,S C_SS^-1 by symmetry of C_SS.
  const Matrix coef = llt.solve(Matrix(c(support, comp)));
  return inf_operator_norm(coef.transpose());
}

PopulationModel::PopulationModel(Matrix sigma, IndexSet support, double sigma_x2,
                                 double sigma_eps2)
    : sigma_(std::move(sigma)),
      support_(std::move(support)),
      sigma_x2_(sigma_x2),
      sigma_eps2_(sigma_eps2) {
  if (sigma_.rows() != sigma_.cols() || sigma_.rows() < 1) {
    throw ValidationError("population covariance must be square and nonempty");
  }
  if (sigma_ != sigma_.transpose()) {
    throw ValidationError("population covariance must be symmetric");
  }
  if (!(sigma_x2_ > 0.0)) throw ValidationError("sigma_x2 must be positive");
  if (!(sigma_eps2_ >= 0.0)) throw ValidationError("sigma_eps2 must be non-negative");
  validate_support(support_, sigma_.rows());
  complement_ = complement_of(support_, sigma_.rows());

  dmax_ = sigma_.diagonal().maxCoeff();
  dmin_ = sigma_.diagonal().minCoeff();
  beta_ = min_eigenvalue(sigma_(support_, support_));
  gamma_ = kNaN;
  if (beta_ > 0.0) {
    try {
      gamma_ = 1.0 - incoherence_norm(sigma_, support_);
    } catch (const ValidationError&) {
      gamma_ = kNaN;
    }
  }
}

AssumptionReport check_assumptions(const PopulationModel& model) {
  AssumptionReport r;
  r.beta = model.beta();
  r.gamma = model.gamma();
  r.pass_pd = r.beta > 0.0;
  r.pass_incoherence = r.pass_pd && r.gamma > 0.0;
  return r;
}

Vector restricted_lasso(const Matrix& xhat, const Vector& labels, const IndexSet& support,
                        double lambda, LassoConfig solver) {
  validate_support(support, xhat.cols());
  solver.lambda = lambda;
  return solve_lasso(xhat(Eigen::all, support), labels, solver).w;
}

Vector projection_residual(const Matrix& xs, const Vector& v) {
  IndexSet cols(static_cast<std::size_t>(xs.cols()));
  for (Index j = 0; j < xs.cols(); ++j) cols[static_cast<std::size_t>(j)] = j;
  const auto llt = factor_gram(xs, cols);
  return v - xs * llt.solve(xs.transpose() * v);
}

WitnessReport construct_witness(const Matrix& xhat, const Vector& labels, const IndexSet& support,
                                double lambda, const std::optional<WitnessTruth>& truth,
                                LassoConfig solver) {
  const Index n = xhat.rows();
  const Index p = xhat.cols();
  validate_support(support, p);
  if (labels.size() != n) throw ValidationError("label count does not match design rows");
  if (!(lambda > 0.0)) throw ValidationError("witness construction needs lambda > 0");
  const auto comp = complement_of(support, p);

  const Matrix xs = xhat(Eigen::all, support);
  const Matrix xsc = xhat(Eigen::all, comp);
  const auto llt = factor_gram(xs, support);

  solver.lambda = lambda;
  const auto restricted = solve_lasso(xs, labels, solver);

  WitnessReport rep;
  rep.w_restricted = polish_on_active_set(xs, labels, restricted.w, lambda);
  rep.restricted_converged = restricted.converged;
  const double scale = 1.0 / (lambda * static_cast<double>(n));
  const Vector residual = xs * rep.w_restricted - labels;
  rep.z_s = -scale * (xs.transpose() * residual);
  const Vector z_sc_free = -scale * (xsc.transpose() * residual);

  if (truth) {
    if (truth->w_star.size() != p || truth->epsilon.size() != n || truth->delta.rows() != n ||
        truth->delta.cols() != p) {
      throw ValidationError("truth bundle dimensions do not match the design");
    }
    const Vector w_star_s = truth->w_star(support);
    const Vector imputation_noise = truth->delta(Eigen::all, support) * w_star_s;
    const Vector inner = xs * (rep.w_restricted - w_star_s) + imputation_noise - truth->epsilon;
    rep.z_sc = -scale * (xsc.transpose() * inner);
    rep.path_gap = comp.empty() ? 0.0 : (rep.z_sc - z_sc_free).cwiseAbs().maxCoeff();

    const Vector noise = truth->epsilon - imputation_noise;
    const Vector projected = noise - xs * llt.solve(xs.transpose() * noise);
    rep.z_a = scale * (xsc.transpose() * projected);
    rep.z_b = xsc.transpose() * (xs * llt.solve(rep.z_s));

    bool same_sign = true;
    for (Index j = 0; j < w_star_s.size(); ++j) {
      const auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
      same_sign = same_sign && sgn(rep.w_restricted(j)) == sgn(w_star_s(j));
    }
    rep.sign_consistent = same_sign;
  } else {
    rep.z_sc = z_sc_free;
  }

  rep.max_abs_zsc = rep.z_sc.size() ? rep.z_sc.cwiseAbs().maxCoeff() : 0.0;
  rep.max_abs_zs = rep.z_s.cwiseAbs().maxCoeff();
  rep.min_abs_w_restricted = rep.w_restricted.cwiseAbs().minCoeff();
  rep.strictly_feasible = rep.max_abs_zsc < 1.0;
  rep.zs_in_bounds = rep.max_abs_zs <= 1.0 + 1e-10;
  return rep;
}

ScoreSeparation score_separation_condition(const PopulationModel& model) {
  const Matrix& sigma = model.sigma();
  const Index p = model.p();
  if (p < 2) throw ValidationError("score separation needs at least two features");
  const auto pop = population_neighbor_model(sigma);
  ScoreSeparation out;
  out.holds.assign(static_cast<std::size_t>(p), true);
  out.margin = Vector::Constant(p, std::numeric_limits<double>::infinity());
  for (Index i = 0; i < p; ++i) {
    const Index top = pop.top[static_cast<std::size_t>(i)];
    for (Index j = 0; j < p; ++j) {
      if (j == i || j == top) continue;
      const double lhs = pop.scores(i, top) - 3.0 * pop.scores(i, j);
      const double rhs =
          std::abs(sigma(top, top)) + 3.0 * std::abs(sigma(j, j)) + model.sigma_dmin();
      out.margin(i) = std::min(out.margin(i), lhs - rhs);
    }
    out.holds[static_cast<std::size_t>(i)] = out.margin(i) > 0.0;
  }
  return out;
}

LambdaBound lambda_bound(const PopulationModel& model, const Mask& mask, const Vector& tau_h,
                         const Vector& tau_g, const Vector& w_star,
                         const std::vector<Index>& top) {
  const Index p = model.p();
  const Index n = mask.rows();
  if (mask.cols() != p) throw ValidationError("mask width does not match the model");
  if (tau_h.size() != p || tau_g.size() != p || w_star.size() != p ||
      static_cast<Index>(top.size()) != p) {
    throw ValidationError("tau, w_star and top must all have length p");
  }
  const double gamma = model.gamma();
  if (!(gamma > 0.0)) {
    throw BoundUndefinedError("regularization bound needs gamma > 0, got " + format_real(gamma));
  }
  const Matrix& sigma = model.sigma();
  const double sx2 = model.sigma_x2();
  const auto& S = model.support();
  const auto& Sc = model.complement();

  LambdaBound b;
  b.h_per_sample = Vector::Zero(n);
  b.g_per_entry = Matrix::Zero(n, static_cast<Index>(Sc.size()));
  for (Index k = 0; k < n; ++k) {
    double h2 = model.sigma_eps2();
    for (const Index i : S) {
      if (mask(k, i)) continue;
      const Index t = top[static_cast<std::size_t>(i)];
      h2 += sx2 * (tau_h(i) * tau_h(i) * sigma(t, t) + sigma(i, i)) * w_star(i) * w_star(i);
    }
    b.h_per_sample(k) = std::sqrt(h2);
    for (std::size_t c = 0; c < Sc.size(); ++c) {
      const Index i = Sc[c];
      const Index t = top[static_cast<std::size_t>(i)];
      const double g2 = mask(k, i) ? sx2 * sigma(i, i)
                                   : 2.25 * sx2 * sigma(t, t) * tau_g(i) * tau_g(i);
      b.g_per_entry(k, static_cast<Index>(c)) = std::sqrt(g2);
    }
  }
  b.h_max = n > 0 ? b.h_per_sample.maxCoeff() : 0.0;
  b.g_max = b.g_per_entry.size() ? b.g_per_entry.maxCoeff() : 0.0;
  b.lambda_min = 20.0 * b.h_max * b.g_max / gamma;
  return b;
}

LambdaBound lambda_bound(const PopulationModel& model, const Mask& mask, const Vector& tau,
                         const Vector& w_star, const std::vector<Index>& top) {
  return lambda_bound(model, mask, tau, tau, w_star, top);
}

double sample_incoherence(const SampleCovariance& cov, const IndexSet& support) {
  return incoherence_norm(cov.h, support);
}

double sample_min_eigen(const SampleCovariance& cov, const IndexSet& support) {
  validate_support(support, cov.n_features());
  return min_eigenvalue(cov.h(support, support));
}

ImputedCovariance imputed_covariance(const Matrix& xhat) {
  const Index n = xhat.rows();
  const Index p = xhat.cols();
  ImputedCovariance out{Matrix::Zero(p, p)};
  for (Index i = 0; i < p; ++i) {
    for (Index j = i; j < p; ++j) {
      double sum = 0.0;
      for (Index k = 0; k < n; ++k) sum += xhat(k, i) * xhat(k, j);
      out.hhat(i, j) = sum / static_cast<double>(n);
      out.hhat(j, i) = out.hhat(i, j);
    }
  }
  return out;
}

}  // namespace censored
