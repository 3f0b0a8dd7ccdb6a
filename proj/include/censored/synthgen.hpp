#pragma once

#include "censored/data_model.hpp"

#include <cstdint>
#include <random>
#include <variant>

namespace censored {

/// Generator used for every synthetic draw. The stream for a given
/// (seed, stream id) pair is fixed: see substream().
using Rng = std::mt19937_64;

/// Version tag of the (engine, seeding, stream-split) contract. Bump when any
/// of them changes, since results stop being comparable.
inline constexpr const char* kRngContract = "mt19937_64/splitmix64-v1";

/// Independent stream derived from a top-level seed and a stream path.
/// The path components are mixed through splitmix64 in order.
Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

struct Equicorrelation {
  double rho;
};
struct IdentitySigma {};
struct CustomSigma {
  Matrix sigma;
};
using SigmaSpec = std::variant<Equicorrelation, IdentitySigma, CustomSigma>;

struct GenerationConfig {
  Index n = 1000;
  Index p = 50;
  Index s = 10;
  SigmaSpec sigma = Equicorrelation{0.8};
  double wstar_low = 0.25;
  double wstar_high = 1.0;
  double sigma_eps = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  Vector w_star;
  IndexSet support;
};

struct FractionMask {
  double theta;
};
struct ChainMask {
  Index width;
};
struct CustomMask {
  Mask mask;
};
using MaskSpec = std::variant<FractionMask, ChainMask, CustomMask>;

struct SyntheticSample {
  Matrix x_true;
  Vector y;
  Vector epsilon;
};

Matrix make_sigma(const SigmaSpec& spec, Index p);

/// Support = first s entries of a uniform permutation of [0, p); magnitudes
/// uniform on [low, high] with a uniform random sign.
GroundTruth sample_ground_truth(const GenerationConfig& config, Rng& rng);

/// Rows z L^T with L the lower Cholesky factor of sigma, y = X w* + eps.
SyntheticSample sample_dataset(const GenerationConfig& config, const Matrix& sigma,
                               const GroundTruth& truth, Rng& rng);

/// Deterministic censorship filter for one trial.
Mask make_mask(const MaskSpec& spec, Index n, Index p, Rng& rng);

/// Feature blocks of a chain mask: consecutive windows of `width` features
/// where adjacent windows share one feature.
std::vector<std::pair<Index, Index>> chain_blocks(Index p, Index width);

CensoredMatrix apply_mask(const Matrix& x_true, const Mask& mask);

}  // namespace censored
