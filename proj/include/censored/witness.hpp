#pragma once

#include "censored/covariance.hpp"
#include "censored/data_model.hpp"
#include "censored/lasso.hpp"

#include <optional>
#include <vector>

namespace censored {

/// Thrown when the support Gram matrix is singular and no witness exists.
class WitnessUndefinedError : public ValidationError {
 public:
  WitnessUndefinedError(const std::string& what, IndexSet columns)
      : ValidationError(what), columns_(std::move(columns)) {}
  const IndexSet& columns() const noexcept { return columns_; }

 private:
  IndexSet columns_;
};

/// Thrown when a bound needs gamma > 0 and the model does not provide it.
class BoundUndefinedError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Population covariance with a support set and the scale parameters of the
/// generating model. beta, gamma and the diagonal extremes are always
/// recomputed from sigma.
class PopulationModel {
 public:
  PopulationModel(Matrix sigma, IndexSet support, double sigma_x2 = 1.0, double sigma_eps2 = 0.0);

  const Matrix& sigma() const noexcept { return sigma_; }
  const IndexSet& support() const noexcept { return support_; }
  const IndexSet& complement() const noexcept { return complement_; }
  Index p() const noexcept { return sigma_.rows(); }
  Index s() const noexcept { return static_cast<Index>(support_.size()); }
  double sigma_x2() const noexcept { return sigma_x2_; }
  double sigma_eps2() const noexcept { return sigma_eps2_; }

  /// Smallest eigenvalue of sigma restricted to the support.
  double beta() const noexcept { return beta_; }
  /// 1 - ||sigma_{Sc,S} sigma_{S,S}^-1||_inf; NaN when sigma_{S,S} is singular.
  double gamma() const noexcept { return gamma_; }
  double sigma_dmax() const noexcept { return dmax_; }
  double sigma_dmin() const noexcept { return dmin_; }

 private:
  Matrix sigma_;
  IndexSet support_;
  IndexSet complement_;
  double sigma_x2_;
  double sigma_eps2_;
  double beta_ = 0.0;
  double gamma_ = 0.0;
  double dmax_ = 0.0;
  double dmin_ = 0.0;
};

/// Sorted complement of `support` in [0, p).
IndexSet complement_of(const IndexSet& support, Index p);
void validate_support(const IndexSet& support, Index p);

/// Max absolute row sum.
double inf_operator_norm(const Matrix& a);

/// ||C_{Sc,S} C_{S,S}^-1||_inf. Throws ValidationError if C_{S,S} is not
/// positive definite.
double incoherence_norm(const Matrix& c, const IndexSet& support);

struct AssumptionReport {
  double beta = 0.0;
  double gamma = 0.0;
  bool pass_pd = false;
  bool pass_incoherence = false;
};

AssumptionReport check_assumptions(const PopulationModel& model);

/// Lasso on columns S only; returns the s coefficients.
Vector restricted_lasso(const Matrix& xhat, const Vector& labels, const IndexSet& support,
                        double lambda, LassoConfig solver = {});

/// Quantities only synthetic data provides.
struct WitnessTruth {
  Vector w_star;   // length p
  Vector epsilon;  // length n
  Matrix delta;    // imputation error xhat - x, n x p
};

struct WitnessReport {
  Vector w_restricted;  // restricted solve, refined on its active set
  Vector z_s;
  Vector z_sc;
  std::optional<Vector> z_a;
  std::optional<Vector> z_b;
  double max_abs_zsc = 0.0;
  double max_abs_zs = 0.0;
  double min_abs_w_restricted = 0.0;
  bool strictly_feasible = false;
  bool zs_in_bounds = false;  // |z_S| <= 1 + 1e-10
  bool restricted_converged = false;
  std::optional<bool> sign_consistent;
  /// ||z_Sc(truth-free) - z_Sc(truth form)||_inf, when truth is supplied.
  std::optional<double> path_gap;
};

/// Residual of the orthogonal projection onto the column span of xs:
/// (I - xs (xs^T xs)^-1 xs^T) v.
Vector projection_residual(const Matrix& xs, const Vector& v);

/// Primal-dual witness for support S at the given lambda.
WitnessReport construct_witness(const Matrix& xhat, const Vector& labels, const IndexSet& support,
                                double lambda, const std::optional<WitnessTruth>& truth = {},
                                LassoConfig solver = {});

struct ScoreSeparation {
  std::vector<bool> holds;
  Vector margin;  // min over competitors of (lhs - rhs); +inf when there are none
};

/// Population score-separation condition for consistent top-neighbor choice.
ScoreSeparation score_separation_condition(const PopulationModel& model);

struct LambdaBound {
  Vector h_per_sample;
  Matrix g_per_entry;  // n x (p - s), columns follow model.complement()
  double h_max = 0.0;
  double g_max = 0.0;
  double lambda_min = 0.0;
};

/// Variance proxies and the regularization threshold 20 h_max g_max / gamma.
/// `tau_h` enters the per-sample proxy h, `tau_g` the per-entry proxy g.
LambdaBound lambda_bound(const PopulationModel& model, const Mask& mask, const Vector& tau_h,
                         const Vector& tau_g, const Vector& w_star, const std::vector<Index>& top);
LambdaBound lambda_bound(const PopulationModel& model, const Mask& mask, const Vector& tau,
                         const Vector& w_star, const std::vector<Index>& top);

double sample_incoherence(const SampleCovariance& cov, const IndexSet& support);
double sample_min_eigen(const SampleCovariance& cov, const IndexSet& support);

struct ImputedCovariance {
  Matrix hhat;
};

/// (1/n) xhat^T xhat, accumulated per pair so the result is bit-symmetric.
ImputedCovariance imputed_covariance(const Matrix& xhat);

}  // namespace censored
