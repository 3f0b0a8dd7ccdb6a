#include "censored/synthgen.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <numeric>

namespace censored {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// The helpers below avoid the standard distributions, whose output is
// library-specific, so streams are portable across toolchains.
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

double standard_normal(Rng& rng) {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 == 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void check_symmetric_psd(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw ValidationError("covariance must be square");
  if (sigma != sigma.transpose()) throw ValidationError("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-10) {
    throw ValidationError("covariance is indefinite (min eigenvalue " + format_real(min_eig) + ")");
  }
}

}  // namespace

Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = splitmix64(seed);
  for (const auto part : path) state = splitmix64(state ^ splitmix64(part + 1));
  return Rng(state);
}

void GenerationConfig::validate() const {
  if (n < 1 || p < 1) throw ValidationError("n and p must be positive");
  if (s < 1 || s > p) throw ValidationError("support size must satisfy 1 <= s <= p");
  if (const auto* eq = std::get_if<Equicorrelation>(&sigma)) {
    const double lower = p > 1 ? -1.0 / static_cast<double>(p - 1) : -1.0;
    if (!(eq->rho > lower && eq->rho < 1.0)) {
      throw ValidationError("equicorrelation rho must lie in (" + format_real(lower) + ", 1)");
    }
  }
  if (!(sigma_eps >= 0.0)) throw ValidationError("sigma_eps must be non-negative");
  if (!(wstar_low > 0.0 && wstar_low <= wstar_high)) {
    throw ValidationError("w* magnitude range must satisfy 0 < low <= high");
  }
}

Matrix make_sigma(const SigmaSpec& spec, Index p) {
  if (p < 1) throw ValidationError("p must be positive");
  if (const auto* eq = std::get_if<Equicorrelation>(&spec)) {
    Matrix sigma = Matrix::Constant(p, p, eq->rho);
    sigma.diagonal().setOnes();
    // Eigenvalues are 1 + (p-1) rho and 1 - rho.
    const double lo = std::min(1.0 + static_cast<double>(p - 1) * eq->rho, 1.0 - eq->rho);
    if (p > 1 && lo < -1e-10) {
      throw ValidationError("equicorrelation(" + format_real(eq->rho) + ") is indefinite for p = " +
                            std::to_string(p));
    }
    return sigma;
  }
  if (std::holds_alternative<IdentitySigma>(spec)) return Matrix::Identity(p, p);
  const auto& custom = std::get<CustomSigma>(spec).sigma;
  if (custom.rows() != p) throw ValidationError("custom covariance is not p x p");
  check_symmetric_psd(custom);
  return custom;
}

GroundTruth sample_ground_truth(const GenerationConfig& config, Rng& rng) {
  config.validate();
  std::vector<Index> perm(static_cast<std::size_t>(config.p));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[uniform_below(rng, i + 1)]);
  }
  GroundTruth truth;
  truth.support.assign(perm.begin(), perm.begin() + config.s);
  std::sort(truth.support.begin(), truth.support.end());
  truth.w_star = Vector::Zero(config.p);
  for (const Index i : truth.support) {
    const double sign = uniform_below(rng, 2) == 0 ? -1.0 : 1.0;
    const double mag = config.wstar_low + (config.wstar_high - config.wstar_low) * uniform01(rng);
    truth.w_star(i) = sign * mag;
  }
  return truth;
}

SyntheticSample sample_dataset(const GenerationConfig& config, const Matrix& sigma,
                               const GroundTruth& truth, Rng& rng) {
  config.validate();
  if (sigma.rows() != config.p || sigma.cols() != config.p) {
    throw ValidationError("covariance is not p x p");
  }
  if (truth.w_star.size() != config.p) throw ValidationError("w* length is not p");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
    throw ValidationError("covariance is not positive definite (smallest eigenvalue " +
                          format_real(eig.eigenvalues().minCoeff()) + ")");
  }
  const Matrix lower = llt.matrixL();

  Matrix z(config.n, config.p);
  for (Index k = 0; k < config.n; ++k) {
    for (Index i = 0; i < config.p; ++i) z(k, i) = standard_normal(rng);
  }
  SyntheticSample out;
  out.x_true = z * lower.transpose();
  out.epsilon = Vector::Zero(config.n);
  if (config.sigma_eps > 0.0) {
    for (Index k = 0; k < config.n; ++k) out.epsilon(k) = config.sigma_eps * standard_normal(rng);
  }
  out.y = out.x_true * truth.w_star + out.epsilon;
  return out;
}

std::vector<std::pair<Index, Index>> chain_blocks(Index p, Index width) {
  if (width < 1 || width > p) throw ValidationError("chain width must lie in [1, p]");
  if (width == p) return {{0, p - 1}};
  if (width < 2) throw ValidationError("chain width must be at least 2 when it is below p");
  std::vector<std::pair<Index, Index>> blocks;
  for (Index start = 0;; start += width - 1) {
    const Index end = std::min(start + width - 1, p - 1);
    blocks.emplace_back(start, end);
    if (end == p - 1) break;
  }
  return blocks;
}

Mask make_mask(const MaskSpec& spec, Index n, Index p, Rng& rng) {
  if (n < 1 || p < 1) throw ValidationError("mask dimensions must be positive");

  if (const auto* frac = std::get_if<FractionMask>(&spec)) {
    if (!(frac->theta >= 0.0 && frac->theta < 1.0)) {
      throw ValidationError("missing fraction must lie in [0, 1)");
    }
    const auto total = static_cast<std::uint64_t>(n * p);
    const auto zeros = static_cast<std::uint64_t>(std::llround(frac->theta * static_cast<double>(total)));
    std::vector<std::uint64_t> cells(total);
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::iota(cells.begin(), cells.end(), std::uint64_t{0});
      Mask mask = Mask::Ones(n, p);
      // Partial Fisher-Yates: the first `zeros` cells are a uniform sample.
      for (std::uint64_t i = 0; i < zeros; ++i) {
        std::swap(cells[i], cells[i + uniform_below(rng, total - i)]);
        mask(static_cast<Index>(cells[i] / static_cast<std::uint64_t>(p)),
             static_cast<Index>(cells[i] % static_cast<std::uint64_t>(p))) = 0;
      }
      bool every_feature_seen = true;
      for (Index i = 0; i < p && every_feature_seen; ++i) {
        every_feature_seen = mask.col(i).cast<int>().sum() > 0;
      }
      if (every_feature_seen) return mask;
    }
    throw ValidationError("could not place " + std::to_string(zeros) +
                          " censored entries leaving every feature observed after 100 draws");
  }

  if (const auto* chain = std::get_if<ChainMask>(&spec)) {
    const auto blocks = chain_blocks(p, chain->width);
    const auto n_blocks = static_cast<Index>(blocks.size());
    Mask mask = Mask::Zero(n, p);
    for (Index k = 0; k < n; ++k) {
      const Index band = k * n_blocks / n;
      const auto [first, last] = blocks[static_cast<std::size_t>(band)];
      for (Index i = first; i <= last; ++i) mask(k, i) = 1;
    }
    return mask;
  }

  const auto& custom = std::get<CustomMask>(spec).mask;
  if (custom.rows() != n || custom.cols() != p) throw ValidationError("custom mask is not n x p");
  if ((custom.array() > 1).any()) throw ValidationError("custom mask must be 0/1");
  return custom;
}

CensoredMatrix apply_mask(const Matrix& x_true, const Mask& mask) {
  if (mask.rows() != x_true.rows() || mask.cols() != x_true.cols()) {
    throw ValidationError("mask dimensions do not match the design");
  }
  return CensoredMatrix(x_true, mask);
}

}  // namespace censored
