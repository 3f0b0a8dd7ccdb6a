#include "censored/imputation.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace censored {

namespace {

ImputedDesign copy_observed(const CensoredMatrix& data) {
  ImputedDesign out;
  out.source_mask = data.mask();
  out.xhat = Matrix::Zero(data.n_samples(), data.n_features());
  for (Index k = 0; k < data.n_samples(); ++k) {
    for (Index i = 0; i < data.n_features(); ++i) {
      if (data.observed(k, i)) out.xhat(k, i) = data.values()(k, i);
    }
  }
  return out;
}

double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

ImputedDesign impute_top_neighbor(const CensoredMatrix& data, const NeighborModel& model) {
  const Index p = data.n_features();
  if (model.n_features() != p || static_cast<Index>(model.ranking.size()) != p) {
    throw ValidationError("neighbor model has " + std::to_string(model.n_features()) +
                          " features, data has " + std::to_string(p));
  }
  if (p < 2) throw ValidationError("neighbor imputation needs at least two features");

  auto out = copy_observed(data);
  const auto& x = data.values();
  for (Index k = 0; k < data.n_samples(); ++k) {
    for (Index i = 0; i < p; ++i) {
      if (data.observed(k, i)) continue;
      const auto& ranking = model.ranking[static_cast<std::size_t>(i)];
      bool filled = false;
      for (std::size_t r = 0; r < ranking.size(); ++r) {
        const Index j = ranking[r];
        if (!data.observed(k, j)) continue;
        out.xhat(k, i) = x(k, j) * model.ratio_for(i, j);
        if (r > 0) out.fallback_log.push_back({k, i, j, static_cast<Index>(r)});
        filled = true;
        break;
      }
      if (!filled) out.fallback_log.push_back({k, i, std::nullopt, -1});
    }
  }
  return out;
}

ImputedDesign impute_baseline(const CensoredMatrix& data, BaselineStrategy strategy) {
  auto out = copy_observed(data);
  if (strategy == BaselineStrategy::zero) return out;

  const auto& x = data.values();
  for (Index i = 0; i < data.n_features(); ++i) {
    std::vector<double> observed;
    for (Index k = 0; k < data.n_samples(); ++k) {
      if (data.observed(k, i)) observed.push_back(x(k, i));
    }
    const bool any_observed = !observed.empty();
    double fill = 0.0;
    if (any_observed) {
      if (strategy == BaselineStrategy::mean) {
        double sum = 0.0;
        for (double v : observed) sum += v;
        fill = sum / static_cast<double>(observed.size());
      } else {
        fill = median_of(std::move(observed));
      }
    }
    for (Index k = 0; k < data.n_samples(); ++k) {
      if (data.observed(k, i)) continue;
      out.xhat(k, i) = fill;
      if (!any_observed) out.fallback_log.push_back({k, i, std::nullopt, -1});
    }
  }
  return out;
}

ImputedDesign impute_lowrank(const CensoredMatrix& data, const LowRankConfig& config) {
  const Index n = data.n_samples();
  const Index p = data.n_features();
  const Index max_rank = std::min(n, p);
  const Index rank = config.rank_budget == 0 ? max_rank : config.rank_budget;
  if (rank < 1 || rank > max_rank) {
    throw ValidationError("rank budget must lie in [1, min(n, p)] = [1, " +
                          std::to_string(max_rank) + "]");
  }
  if (config.shrinkage < 0.0) throw ValidationError("shrinkage must be non-negative");
  if (config.max_iters < 1) throw ValidationError("max_iters must be positive");
  if (!(config.tol > 0.0)) throw ValidationError("tol must be positive");

  auto out = copy_observed(data);
  if (data.observed_count() == n * p) return out;

  const Mask& mask = data.mask();
  Matrix current = out.xhat;
  out.converged = false;
  for (int it = 1; it <= config.max_iters; ++it) {
    Eigen::BDCSVD<Matrix> svd(current, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sv = (svd.singularValues().array() - config.shrinkage).max(0.0).matrix();
    for (Index r = rank; r < sv.size(); ++r) sv(r) = 0.0;
    const Matrix recon = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();

    Matrix next = current;
    for (Index k = 0; k < n; ++k) {
      for (Index i = 0; i < p; ++i) {
        if (!mask(k, i)) next(k, i) = recon(k, i);
      }
    }
    const double change = (next - current).norm();
    current = std::move(next);
    out.iterations = it;
    if (change < config.tol) {
      out.converged = true;
      break;
    }
  }
  // Observed entries were never touched, so they are still bit-exact.
  out.xhat = std::move(current);
  return out;
}

ImputationError imputation_error(const ImputedDesign& imp, const Matrix& truth) {
  if (truth.rows() != imp.xhat.rows() || truth.cols() != imp.xhat.cols()) {
    throw ValidationError("truth matrix dimensions do not match the imputed design");
  }
  ImputationError err;
  err.delta = imp.xhat - truth;
  err.sup_norm = err.delta.size() ? err.delta.cwiseAbs().maxCoeff() : 0.0;
  err.frobenius = err.delta.norm();
  return err;
}

}  // namespace censored
