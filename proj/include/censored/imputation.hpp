#pragma once

#include "censored/covariance.hpp"
#include "censored/data_model.hpp"

#include <optional>
#include <vector>

namespace censored {

/// One masked entry that was not filled from its top neighbor.
struct FallbackEntry {
  Index sample;
  Index feature;
  std::optional<Index> neighbor;  // empty when zero-filled
  Index rank;                     // position in the ranking, -1 when zero-filled
};

struct ImputedDesign {
  Matrix xhat;
  Mask source_mask;
  std::vector<FallbackEntry> fallback_log;
  // Only meaningful for iterative imputers.
  bool converged = true;
  int iterations = 0;
};

struct ImputationError {
  Matrix delta;
  double sup_norm = 0.0;
  double frobenius = 0.0;
};

enum class BaselineStrategy { zero, mean, median };

/// Fills each masked (k, i) from the first neighbor in ranking[i] observed in
/// row k, scaled by h[i,j]/h[j,j]. Rows with nothing observed are zero-filled.
ImputedDesign impute_top_neighbor(const CensoredMatrix& data, const NeighborModel& model);

/// Column-wise constant fill. Features with no observed samples fall back to 0.
ImputedDesign impute_baseline(const CensoredMatrix& data, BaselineStrategy strategy);

struct LowRankConfig {
  Index rank_budget = 0;  // 0 means min(n, p)
  double shrinkage = 0.0;
  int max_iters = 200;
  double tol = 1e-6;
};

/// Soft-impute: alternate a shrunk, truncated SVD reconstruction with
/// re-imposing the observed entries.
ImputedDesign impute_lowrank(const CensoredMatrix& data, const LowRankConfig& config = {});

ImputationError imputation_error(const ImputedDesign& imp, const Matrix& truth);

}  // namespace censored
