#pragma once

#include "censored/synthgen.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

using namespace censored;

// Test-only randomness; portability of the stream is not needed here.
inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index k = 0; k < rows; ++k)
    for (Index i = 0; i < cols; ++i) m(k, i) = normal(rng);
  return m;
}

inline Vector random_vector(Index size, std::mt19937_64& rng) {
  return random_matrix(size, 1, rng).col(0);
}

inline Mask random_mask(Index rows, Index cols, double keep, std::mt19937_64& rng) {
  std::bernoulli_distribution b(keep);
  Mask m(rows, cols);
  for (Index k = 0; k < rows; ++k)
    for (Index i = 0; i < cols; ++i) m(k, i) = b(rng) ? 1 : 0;
  return m;
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "censored_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace testing
