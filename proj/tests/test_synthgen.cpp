#include "censored/synthgen.hpp"

#include "doctest.h"
#include "helpers.hpp"

#include <set>

using namespace censored;

namespace {

Index zeros(const Mask& m) { return m.size() - m.cast<Index>().sum(); }

}  // namespace

TEST_CASE("stream contract") {
  // splitmix64 of 0 is the published first output of that generator.
  auto rng = substream(0, {});
  std::mt19937_64 reference(0xe220a8397b1dcdafULL);
  CHECK(rng() == reference());
  // The engine itself is standardized: the 10000th draw from the default seed.
  std::mt19937_64 std_engine;
  std_engine.discard(9999);
  CHECK(std_engine() == 9981545732273789042ULL);

  auto a = substream(5, {1, 2, 3});
  auto b = substream(5, {1, 2, 3});
  auto c = substream(5, {1, 2, 4});
  auto d = substream(5, {1, 2});
  const auto va = a();
  CHECK(va == b());
  CHECK(va != c());
  CHECK(va != d());
  CHECK(std::string(kRngContract) == "mt19937_64/splitmix64-v1");
}

TEST_CASE("make_sigma") {
  SUBCASE("equicorrelation") {
    Matrix expected(3, 3);
    expected << 1, .8, .8, .8, 1, .8, .8, .8, 1;
    CHECK(make_sigma(Equicorrelation{0.8}, 3) == expected);
  }
  SUBCASE("identity") { CHECK(make_sigma(IdentitySigma{}, 2) == Matrix::Identity(2, 2)); }
  SUBCASE("indefinite equicorrelation") {
    // Eigenvalues 1 + 2 rho = -0.2 and 1 - rho = 1.6.
    CHECK_THROWS_AS(make_sigma(Equicorrelation{-0.6}, 3), ValidationError);
    CHECK_NOTHROW(make_sigma(Equicorrelation{-0.4}, 3));
  }
  SUBCASE("custom") {
    Matrix asym = Matrix::Identity(2, 2);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(make_sigma(CustomSigma{asym}, 2), ValidationError);
    Matrix indefinite(2, 2);
    indefinite << 1, 2, 2, 1;
    CHECK_THROWS_AS(make_sigma(CustomSigma{indefinite}, 2), ValidationError);
    CHECK_THROWS_AS(make_sigma(CustomSigma{Matrix::Identity(3, 3)}, 2), ValidationError);
    CHECK(make_sigma(CustomSigma{Matrix::Ones(2, 2)}, 2) == Matrix::Ones(2, 2));
  }
}

TEST_CASE("generation config validation") {
  GenerationConfig c;
  CHECK_NOTHROW(c.validate());
  c.s = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.s = 51;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = GenerationConfig{};
  c.sigma = Equicorrelation{1.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.sigma = Equicorrelation{-1.0 / 49.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = GenerationConfig{};
  c.sigma_eps = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("ground truth") {
  GenerationConfig c;
  SUBCASE("dense support") {
    c.s = c.p;
    auto rng = substream(1, {});
    const auto t = sample_ground_truth(c, rng);
    CHECK(static_cast<Index>(t.support.size()) == c.p);
    for (Index i = 0; i < c.p; ++i) {
      CHECK(std::abs(t.w_star(i)) >= 0.25);
      CHECK(std::abs(t.w_star(i)) <= 1.0);
    }
  }
  SUBCASE("sparse support is exact and sorted") {
    auto rng = substream(2, {});
    const auto t = sample_ground_truth(c, rng);
    CHECK(t.support.size() == 10);
    CHECK(std::is_sorted(t.support.begin(), t.support.end()));
    CHECK(std::set<Index>(t.support.begin(), t.support.end()).size() == 10);
    Index nonzero = 0;
    for (Index i = 0; i < c.p; ++i) nonzero += t.w_star(i) != 0.0 ? 1 : 0;
    CHECK(nonzero == 10);
  }
  SUBCASE("empty support is rejected") {
    c.s = 0;
    auto rng = substream(3, {});
    CHECK_THROWS_AS(sample_ground_truth(c, rng), ValidationError);
  }
  SUBCASE("fixed seed is reproducible") {
    auto r1 = substream(4, {7});
    auto r2 = substream(4, {7});
    const auto a = sample_ground_truth(c, r1);
    const auto b = sample_ground_truth(c, r2);
    CHECK(a.support == b.support);
    CHECK(a.w_star == b.w_star);
  }
  SUBCASE("both signs and the whole magnitude range appear") {
    c.p = 2000;
    c.s = 2000;
    auto rng = substream(5, {});
    const auto t = sample_ground_truth(c, rng);
    CHECK(t.w_star.minCoeff() < -0.95);
    CHECK(t.w_star.maxCoeff() > 0.95);
    CHECK(t.w_star.cwiseAbs().minCoeff() < 0.3);
  }
}

TEST_CASE("sample dataset") {
  GenerationConfig c;
  c.n = 200;
  c.p = 5;
  c.s = 2;
  SUBCASE("noiseless labels") {
    c.sigma_eps = 0.0;
    const auto sigma = make_sigma(c.sigma, c.p);
    auto rng = substream(1, {});
    const auto t = sample_ground_truth(c, rng);
    const auto d = sample_dataset(c, sigma, t, rng);
    CHECK(d.epsilon.isZero(0.0));
    CHECK(d.y == Vector(d.x_true * t.w_star));
  }
  SUBCASE("identity covariance concentrates") {
    c.n = 10000;
    c.sigma = IdentitySigma{};
    const auto sigma = make_sigma(c.sigma, c.p);
    auto rng = substream(2, {});
    const auto t = sample_ground_truth(c, rng);
    const auto d = sample_dataset(c, sigma, t, rng);
    const Matrix cov = d.x_true.transpose() * d.x_true / static_cast<double>(c.n);
    CHECK((cov - Matrix::Identity(c.p, c.p)).cwiseAbs().maxCoeff() < 0.1);
  }
  SUBCASE("noise has the configured scale") {
    c.n = 20000;
    c.sigma_eps = 0.3;
    const auto sigma = make_sigma(c.sigma, c.p);
    auto rng = substream(3, {});
    const auto t = sample_ground_truth(c, rng);
    const auto d = sample_dataset(c, sigma, t, rng);
    const double sd = std::sqrt(d.epsilon.squaredNorm() / static_cast<double>(c.n));
    CHECK(sd == doctest::Approx(0.3).epsilon(0.03));
  }
  SUBCASE("fixed seed gives bit-identical data") {
    const auto sigma = make_sigma(c.sigma, c.p);
    auto r1 = substream(4, {});
    auto r2 = substream(4, {});
    const auto t1 = sample_ground_truth(c, r1);
    const auto t2 = sample_ground_truth(c, r2);
    CHECK(sample_dataset(c, sigma, t1, r1).x_true == sample_dataset(c, sigma, t2, r2).x_true);
  }
  SUBCASE("singular covariance names its smallest eigenvalue") {
    c.p = 2;
    c.s = 1;
    auto rng = substream(5, {});
    const auto t = sample_ground_truth(c, rng);
    try {
      sample_dataset(c, Matrix::Ones(2, 2), t, rng);
      FAIL("expected a Cholesky failure");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("smallest eigenvalue") != std::string::npos);
    }
  }
}

TEST_CASE("fraction masks") {
  auto rng = substream(1, {});
  CHECK(make_mask(FractionMask{0.0}, 10, 4, rng) == Mask::Ones(10, 4));
  const auto m = make_mask(FractionMask{0.2}, 1000, 50, rng);
  CHECK(zeros(m) == 10000);
  for (Index i = 0; i < 50; ++i) CHECK(m.col(i).cast<int>().sum() > 0);
  CHECK(zeros(make_mask(FractionMask{0.33}, 7, 3, rng)) == 7);  // round(6.93)
  CHECK_THROWS_AS(make_mask(FractionMask{1.0}, 4, 4, rng), ValidationError);
  CHECK_THROWS_AS(make_mask(FractionMask{-0.1}, 4, 4, rng), ValidationError);
  // A single row cannot lose any entry without hiding a feature entirely.
  CHECK_THROWS_AS(make_mask(FractionMask{0.5}, 1, 3, rng), ValidationError);

  auto r1 = substream(9, {});
  auto r2 = substream(9, {});
  CHECK(make_mask(FractionMask{0.3}, 40, 8, r1) == make_mask(FractionMask{0.3}, 40, 8, r2));
}

TEST_CASE("chain masks") {
  auto rng = substream(1, {});
  CHECK(make_mask(ChainMask{50}, 200, 50, rng) == Mask::Ones(200, 50));
  CHECK_THROWS_AS(make_mask(ChainMask{51}, 200, 50, rng), ValidationError);
  CHECK_THROWS_AS(make_mask(ChainMask{1}, 200, 50, rng), ValidationError);

  for (Index width = 2; width <= 20; ++width) {
    const Index n = 200, p = 50;
    const auto m = make_mask(ChainMask{width}, n, p, rng);
    const auto blocks = chain_blocks(p, width);
    CHECK(blocks.front().first == 0);
    CHECK(blocks.back().second == p - 1);
    for (std::size_t b = 1; b < blocks.size(); ++b) {
      CHECK(blocks[b].first == blocks[b - 1].second);  // exactly one shared feature
    }
    for (Index k = 0; k < n; ++k) CHECK(m.row(k).cast<int>().sum() > 0);
    // Two features are observed together exactly when one block holds both,
    // so features in non-adjacent blocks never are.
    for (Index i = 0; i < p; ++i) {
      for (Index j = i + 1; j < p; ++j) {
        bool same_block = false;
        for (const auto& [first, last] : blocks) same_block = same_block || (first <= i && j <= last);
        bool together = false;
        for (Index k = 0; k < n && !together; ++k) together = m(k, i) && m(k, j);
        REQUIRE(together == same_block);
      }
    }
    // Every feature is observed somewhere.
    for (Index i = 0; i < p; ++i) CHECK(m.col(i).cast<int>().sum() > 0);
  }
}

TEST_CASE("chain blocks for width 3 over 7 features") {
  const auto b = chain_blocks(7, 3);
  const std::vector<std::pair<Index, Index>> expected{{0, 2}, {2, 4}, {4, 6}};
  CHECK(b == expected);
}

TEST_CASE("custom masks") {
  auto rng = substream(1, {});
  Mask m = Mask::Ones(2, 2);
  m(0, 1) = 0;
  CHECK(make_mask(CustomMask{m}, 2, 2, rng) == m);
  Mask bad = m;
  bad(1, 1) = 3;
  CHECK_THROWS_AS(make_mask(CustomMask{bad}, 2, 2, rng), ValidationError);
  CHECK_THROWS_AS(make_mask(CustomMask{m}, 3, 2, rng), ValidationError);
}

TEST_CASE("apply_mask") {
  std::mt19937_64 rng(1);
  const Matrix x = testing::random_matrix(4, 4, rng);
  const auto full = apply_mask(x, Mask::Ones(4, 4));
  CHECK(Matrix(full.values()) == x);
  CHECK(apply_mask(x, Mask::Zero(4, 4)).observed_count() == 0);
  Mask checker(4, 4);
  for (Index k = 0; k < 4; ++k)
    for (Index i = 0; i < 4; ++i) checker(k, i) = (k + i) % 2;
  CHECK(apply_mask(x, checker).observed_count() == 8);
  CHECK_THROWS_AS(apply_mask(x, Mask::Ones(3, 4)), ValidationError);
}
