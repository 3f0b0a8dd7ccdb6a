#pragma once

#include "censored/data_model.hpp"
#include "censored/imputation.hpp"
#include "censored/lasso.hpp"
#include "censored/synthgen.hpp"
#include "censored/witness.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace censored {

enum class ExperimentId { exp1, exp2, exp3 };
enum class Method { neighbor, zero, mean, median, lowrank };

std::string to_string(ExperimentId id);
std::string to_string(Method m);
Method parse_method(const std::string& name);

struct LambdaPolicy {
  enum class Kind { theory, scaled, fixed };
  Kind kind = Kind::scaled;
  double value = 0.0;  // fixed policy only
  double scale = 2.0;  // c in c * sigma_hat * sqrt(log p / n)

  /// "theory", "scaled", "scaled:c" or "fixed:v".
  static LambdaPolicy parse(const std::string& text);
  std::string describe() const;
};

/// Everything a lambda policy may consult. The theory policy needs the
/// population model, mask, w* and the population neighbor terms.
struct LambdaContext {
  const Matrix* design = nullptr;
  const Vector* labels = nullptr;
  const PopulationModel* model = nullptr;
  const Mask* mask = nullptr;
  const Vector* w_star = nullptr;
  const Vector* tau = nullptr;
  const std::vector<Index>* top = nullptr;
};

struct LambdaChoice {
  double lambda = 0.0;
  bool clamped = false;  // theory bound collapsed to 0 and was lifted to kMinLambda
};

inline constexpr double kMinLambda = 1e-8;

/// Noise scale from a lightly ridge-regularized least-squares fit:
/// sqrt(RSS / (n - df)) with df the trace of the ridge hat matrix.
double estimate_noise_scale(const Matrix& design, const Vector& labels, double ridge = 1e-3);

LambdaChoice choose_lambda(const LambdaPolicy& policy, const LambdaContext& context);

/// log(n / (s^3 log(s (p - s)))); empty when s (p - s) <= 1.
std::optional<double> weighted_constant(Index n, Index p, Index s);

struct ExperimentRecord {
  ExperimentId experiment = ExperimentId::exp1;
  int trial = 0;
  std::uint64_t seed = 0;
  Index n = 0;
  Index p = 0;
  Index s = 0;
  std::optional<double> missing_fraction;
  std::optional<Index> chain_width;
  Method method = Method::neighbor;
  double lambda_used = 0.0;
  bool recovered = false;
  double linf_error = 0.0;
  std::optional<double> c_constant;
  std::string error;  // nonempty for a failed trial
};

/// Default regularization for the experiment drivers. Independent of n, as
/// the censored-recovery threshold is; see README for how it was chosen.
inline constexpr double kDefaultExperimentLambda = 0.03;

struct ExperimentOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  LambdaPolicy lambda_policy{.kind = LambdaPolicy::Kind::fixed, .value = kDefaultExperimentLambda};
  LassoConfig lasso;
  LowRankConfig lowrank{.rank_budget = 0, .shrinkage = 0.0, .max_iters = 200, .tol = 1e-6};
  /// When true, the low-rank baseline picks its shrinkage from the data (see
  /// lowrank_shrinkage_fraction) instead of using lowrank.shrinkage.
  bool lowrank_auto_shrinkage = true;
  double lowrank_shrinkage_fraction = 0.1;
};

/// One synthetic trial before any imputation: truth, data and censorship.
struct TrialInstance {
  GenerationConfig config;
  Matrix sigma;
  GroundTruth truth;
  SyntheticSample sample;
  Mask mask;
};

struct MethodOutcome {
  ImputedDesign imputed;
  LambdaChoice lambda;
  LassoSolution solution;
  bool recovered = false;
  double linf_error = 0.0;
};

/// Draws truth and data from the (seed, experiment, data_key, trial) stream
/// and the mask from a separate stream that additionally keys on mask_key.
/// Trials sharing data_key share X, w* and epsilon.
TrialInstance generate_trial(const GenerationConfig& config, const MaskSpec& mask_spec,
                             ExperimentId id, std::uint64_t seed, int trial,
                             std::uint64_t data_key, std::uint64_t mask_key);

ImputedDesign impute_with(const CensoredMatrix& data, Method method,
                          const ExperimentOptions& options);

MethodOutcome run_method(const TrialInstance& instance, Method method,
                         const ExperimentOptions& options);

/// The fully observed pipeline on the same instance (no censoring).
MethodOutcome run_uncensored(const TrialInstance& instance, const ExperimentOptions& options);

struct GridPoint {
  Index n;
  Index p;
  Index s;
};

std::vector<ExperimentRecord> run_experiment1(const std::vector<double>& fractions,
                                              const GenerationConfig& base,
                                              const ExperimentOptions& options);
std::vector<ExperimentRecord> run_experiment2(const std::vector<GridPoint>& grid,
                                              const GenerationConfig& base,
                                              const ExperimentOptions& options,
                                              double fraction = 0.2);
std::vector<ExperimentRecord> run_experiment3(const std::vector<Index>& widths,
                                              const GenerationConfig& base,
                                              const ExperimentOptions& options);

std::vector<GridPoint> default_experiment2_grid();
GenerationConfig experiment1_defaults();
GenerationConfig experiment3_defaults();

struct SummaryRow {
  ExperimentId experiment;
  Method method;
  Index n = 0;
  Index p = 0;
  Index s = 0;
  std::optional<double> missing_fraction;
  std::optional<Index> chain_width;
  std::optional<double> c_constant;
  double recovery_probability = 0.0;
  double mean_linf = 0.0;
  double std_linf = 0.0;
  int trial_count = 0;
};

/// Groups successful records by (experiment, method, sweep point).
std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records);

/// Stable order: experiment, sweep point, trial, method.
void sort_records(std::vector<ExperimentRecord>& records);

Table records_table(const std::vector<ExperimentRecord>& records);
Table summary_table(const std::vector<SummaryRow>& rows);

/// Writes records.csv (with a leading timestamp comment) and summary.csv.
void write_run(const std::vector<ExperimentRecord>& records, const std::filesystem::path& dir);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace censored
