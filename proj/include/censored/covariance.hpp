#pragma once

#include "censored/data_model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace censored {

/// Pairwise-complete second-moment matrix of a censored design.
struct SampleCovariance {
  Matrix h;                // p x p, exactly symmetric
  Eigen::MatrixXi co_counts;  // samples observing both features

  Index n_features() const noexcept { return h.rows(); }
};

/// Score assigned to candidates that can never be selected as a neighbor.
inline constexpr double kUnselectable = -std::numeric_limits<double>::infinity();

/// Empirical neighbor model: scores, per-feature rankings, top neighbors and
/// error ratios. Keeps the covariance it was built from so imputation can
/// recompute the ratio for any fallback neighbor.
struct NeighborModel {
  SampleCovariance covariance;
  Matrix scores;
  std::vector<std::vector<Index>> ranking;  // ranking[i] excludes i
  std::vector<Index> top;
  Vector ratio;
  std::vector<bool> ratio_degenerate;  // denominator h[top, top] was zero

  Index n_features() const noexcept { return scores.rows(); }
  /// h[i, j] / h[j, j], or 0 when h[j, j] is zero or the pair was never co-observed.
  double ratio_for(Index i, Index j) const;
};

struct PopulationNeighborModel {
  Matrix scores;
  std::vector<Index> top;
  Vector ratio;
};

/// h[i,j] averages x[k,i]*x[k,j] over samples observing both features. No
/// centering. Pairs that are never co-observed get h = 0 and co_counts = 0.
SampleCovariance pairwise_covariance(const CensoredMatrix& data);

/// scores[i,j] = h[i,j]^2 / h[j,j]; kUnselectable on the diagonal, for
/// non-positive h[j,j], and for pairs without co-observations.
Matrix neighbor_scores(const SampleCovariance& cov);

/// Orders candidates j != i by (score descending, index ascending).
std::vector<Index> rank_candidates(const Matrix& scores, Index i);

NeighborModel build_neighbor_model(const SampleCovariance& cov);

/// Same construction with a population covariance in place of H.
PopulationNeighborModel population_neighbor_model(const Matrix& sigma);

}  // namespace censored
