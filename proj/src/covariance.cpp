#include "censored/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace censored {

SampleCovariance pairwise_covariance(const CensoredMatrix& data) {
  const Index n = data.n_samples();
  const Index p = data.n_features();
  const auto& x = data.values();
  const auto& mask = data.mask();

  SampleCovariance cov{Matrix::Zero(p, p), Eigen::MatrixXi::Zero(p, p)};
  // Upper triangle only, mirrored afterwards so h is bit-symmetric.
  for (Index i = 0; i < p; ++i) {
    for (Index j = i; j < p; ++j) {
      double sum = 0.0;
      int count = 0;
      for (Index k = 0; k < n; ++k) {
        if (mask(k, i) && mask(k, j)) {
          sum += x(k, i) * x(k, j);
          ++count;
        }
      }
      cov.co_counts(i, j) = count;
      cov.h(i, j) = count > 0 ? sum / count : 0.0;
    }
  }
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < i; ++j) {
      cov.h(i, j) = cov.h(j, i);
      cov.co_counts(i, j) = cov.co_counts(j, i);
    }
  }
  return cov;
}

Matrix neighbor_scores(const SampleCovariance& cov) {
  const Index p = cov.n_features();
  Matrix scores = Matrix::Constant(p, p, kUnselectable);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (j == i || cov.co_counts(i, j) == 0 || !(cov.h(j, j) > 0.0)) continue;
      scores(i, j) = cov.h(i, j) * cov.h(i, j) / cov.h(j, j);
    }
  }
  return scores;
}

std::vector<Index> rank_candidates(const Matrix& scores, Index i) {
  const Index p = scores.rows();
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(p - 1));
  for (Index j = 0; j < p; ++j) {
    if (j != i) order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return scores(i, a) > scores(i, b);
  });
  return order;
}

double NeighborModel::ratio_for(Index i, Index j) const {
  const auto& h = covariance.h;
  if (covariance.co_counts(i, j) == 0 || h(j, j) == 0.0) return 0.0;
  return h(i, j) / h(j, j);
}

NeighborModel build_neighbor_model(const SampleCovariance& cov) {
  const Index p = cov.n_features();
  if (p < 2) throw ValidationError("neighbor model needs at least two features");

  NeighborModel model;
  model.covariance = cov;
  model.scores = neighbor_scores(cov);
  model.ranking.resize(static_cast<std::size_t>(p));
  model.top.resize(static_cast<std::size_t>(p));
  model.ratio = Vector::Zero(p);
  model.ratio_degenerate.assign(static_cast<std::size_t>(p), false);
  for (Index i = 0; i < p; ++i) {
    const auto u = static_cast<std::size_t>(i);
    model.ranking[u] = rank_candidates(model.scores, i);
    const Index top = model.ranking[u].front();
    model.top[u] = top;
    if (cov.h(top, top) == 0.0) {
      model.ratio_degenerate[u] = true;
    } else {
      model.ratio(i) = cov.h(i, top) / cov.h(top, top);
    }
  }
  return model;
}

PopulationNeighborModel population_neighbor_model(const Matrix& sigma) {
  const Index p = sigma.rows();
  if (sigma.cols() != p) throw ValidationError("covariance must be square");
  if (p < 2) throw ValidationError("neighbor model needs at least two features");
  for (Index i = 0; i < p; ++i) {
    if (!(sigma(i, i) > 0.0)) throw ValidationError("covariance diagonal must be positive");
    for (Index j = 0; j < i; ++j) {
      if (sigma(i, j) != sigma(j, i)) throw ValidationError("covariance must be symmetric");
    }
  }
  SampleCovariance as_cov{sigma, Eigen::MatrixXi::Ones(p, p)};
  PopulationNeighborModel model;
  model.scores = neighbor_scores(as_cov);
  model.top.resize(static_cast<std::size_t>(p));
  model.ratio = Vector::Zero(p);
  for (Index i = 0; i < p; ++i) {
    const Index top = rank_candidates(model.scores, i).front();
    model.top[static_cast<std::size_t>(i)] = top;
    model.ratio(i) = sigma(i, top) / sigma(top, top);
  }
  return model;
}

}  // namespace censored
