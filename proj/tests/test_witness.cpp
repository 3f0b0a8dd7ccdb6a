#include "censored/covariance.hpp"
#include "censored/experiments.hpp"
#include "censored/imputation.hpp"
#include "censored/witness.hpp"

#include "doctest.h"
#include "helpers.hpp"

#include <cmath>

using namespace censored;

namespace {

// n x p with orthogonal columns of squared norm n (rows of a Hadamard matrix).
Matrix hadamard_design(Index n, Index p) {
  Matrix h = Matrix::Ones(1, 1);
  while (h.rows() < n) {
    Matrix next(2 * h.rows(), 2 * h.cols());
    next << h, h, h, -h;
    h = next;
  }
  return h.leftCols(p);
}

struct Instance {
  Matrix xhat;
  Vector y;
  IndexSet support;
  WitnessTruth truth;
};

Instance censored_instance(std::uint64_t seed, int trial, Index n = 300) {
  GenerationConfig cfg;
  cfg.n = n;
  cfg.p = 20;
  cfg.s = 4;
  const auto inst = generate_trial(cfg, FractionMask{0.2}, ExperimentId::exp1, seed, trial, 0, 0);
  const auto d = apply_mask(inst.sample.x_true, inst.mask);
  const auto imp = impute_top_neighbor(d, build_neighbor_model(pairwise_covariance(d)));
  return {imp.xhat, inst.sample.y, inst.truth.support,
          {inst.truth.w_star, inst.sample.epsilon, imp.xhat - inst.sample.x_true}};
}

}  // namespace

TEST_CASE("assumptions: identity covariance") {
  const PopulationModel m(Matrix::Identity(5, 5), {1, 3});
  const auto r = check_assumptions(m);
  CHECK(r.beta == doctest::Approx(1.0));
  CHECK(r.gamma == doctest::Approx(1.0));
  CHECK(r.pass_pd);
  CHECK(r.pass_incoherence);
}

TEST_CASE("assumptions: equicorrelated design") {
  const double rho = 0.8;
  const Index p = 50, s = 10;
  IndexSet support;
  for (Index i = 0; i < s; ++i) support.push_back(3 * i);
  const PopulationModel m(make_sigma(Equicorrelation{rho}, p), support);
  // Each off-support row of sigma_{Sc,S} sigma_{S,S}^-1 is the constant
  // rho / (1 + (s - 1) rho), so the row sum is s rho / (1 + (s - 1) rho).
  const double closed_form = 1.0 - static_cast<double>(s) * rho / (1.0 + (s - 1) * rho);
  const auto r = check_assumptions(m);
  CHECK(r.gamma == doctest::Approx(closed_form).epsilon(1e-10));
  CHECK(r.gamma > 0.0);
  CHECK(r.gamma < 1.0);
  CHECK(r.beta == doctest::Approx(1.0 - rho));
  CHECK(r.pass_incoherence);
}

TEST_CASE("assumptions: singular support block") {
  Matrix sigma(3, 3);
  sigma << 1, 1, 0,
           1, 1, 0,
           0, 0, 1;
  const PopulationModel m(sigma, {0, 1});
  const auto r = check_assumptions(m);
  CHECK_FALSE(r.pass_pd);
  CHECK(r.beta <= 0.0);
  CHECK_FALSE(r.pass_incoherence);
}

TEST_CASE("population model validation") {
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 0.2;
  CHECK_THROWS_AS(PopulationModel(asym, {0}), ValidationError);
  CHECK_THROWS_AS(PopulationModel(Matrix::Identity(3, 3), {}), ValidationError);
  CHECK_THROWS_AS(PopulationModel(Matrix::Identity(3, 3), {3}), ValidationError);
  CHECK_THROWS_AS(PopulationModel(Matrix::Identity(3, 3), {1, 0}), ValidationError);
}

TEST_CASE("infinity operator norm is the max absolute row sum") {
  Matrix a(2, 3);
  a << 1, -2, 3,
       -4, 0.5, 0;
  CHECK(inf_operator_norm(a) == 6.0);
}

TEST_CASE("restricted lasso") {
  std::mt19937_64 rng(1);
  const Matrix x = testing::random_matrix(30, 4, rng);
  const Vector y = testing::random_vector(30, rng);
  SUBCASE("full support equals the full solve") {
    const auto full = solve_lasso(x, y, {.lambda = 0.05});
    CHECK(restricted_lasso(x, y, {0, 1, 2, 3}, 0.05) == full.w);
  }
  SUBCASE("lambda above the restricted lambda_max") {
    const IndexSet s{1, 2};
    const double lmax = lambda_max(x(Eigen::all, s), y);
    CHECK(restricted_lasso(x, y, s, 1.01 * lmax).isZero(0.0));
  }
  SUBCASE("single coordinate closed form") {
    const double n = 30.0;
    const double lambda = 0.05;
    const double expected = soft_threshold(x.col(2).dot(y) / n, lambda) / (x.col(2).squaredNorm() / n);
    CHECK(restricted_lasso(x, y, {2}, lambda)(0) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("witness: orthogonal noiseless design") {
  const Index n = 16;
  const Matrix x = hadamard_design(n, 6);
  Vector w_star = Vector::Zero(6);
  w_star(1) = 0.7;
  w_star(4) = -0.4;
  const Vector y = x * w_star;
  const double lambda = 0.01;
  const WitnessTruth truth{w_star, Vector::Zero(n), Matrix::Zero(n, 6)};
  const auto rep = construct_witness(x, y, {1, 4}, lambda, truth);
  CHECK(rep.z_s(0) == doctest::Approx(1.0));
  CHECK(rep.z_s(1) == doctest::Approx(-1.0));
  CHECK(rep.max_abs_zsc < 1e-12);
  CHECK(rep.strictly_feasible);
  CHECK(*rep.sign_consistent);
  CHECK(rep.w_restricted(0) == doctest::Approx(0.7 - lambda));
  CHECK(rep.w_restricted(1) == doctest::Approx(-0.4 + lambda));
}

TEST_CASE("witness: truth-supplied decomposition and path agreement") {
  for (int t = 0; t < 10; ++t) {
    const auto inst = censored_instance(3, t);
    const auto rep = construct_witness(inst.xhat, inst.y, inst.support, 0.03, inst.truth);
    REQUIRE(rep.z_a.has_value());
    REQUIRE(rep.z_b.has_value());
    CHECK((*rep.z_a + *rep.z_b - rep.z_sc).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(*rep.path_gap <= 1e-8);
    CHECK(rep.zs_in_bounds);
    CHECK(rep.max_abs_zs <= 1.0 + 1e-10);
    // Independent recomputation of z_Sc from the stationarity form.
    const auto comp = complement_of(inst.support, inst.xhat.cols());
    const Matrix xs = inst.xhat(Eigen::all, inst.support);
    const Vector direct = -(inst.xhat(Eigen::all, comp).transpose() * (xs * rep.w_restricted - inst.y)) /
                          (0.03 * static_cast<double>(inst.xhat.rows()));
    CHECK((direct - rep.z_sc).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("witness: truth-free report") {
  const auto inst = censored_instance(4, 0);
  const auto rep = construct_witness(inst.xhat, inst.y, inst.support, 0.03);
  CHECK_FALSE(rep.z_a.has_value());
  CHECK_FALSE(rep.sign_consistent.has_value());
  CHECK(rep.z_sc.size() == 16);
  CHECK(rep.strictly_feasible == (rep.max_abs_zsc < 1.0));
}

TEST_CASE("witness: duplicated support column") {
  std::mt19937_64 rng(2);
  Matrix x = testing::random_matrix(20, 5, rng);
  x.col(3) = x.col(1);
  const Vector y = testing::random_vector(20, rng);
  try {
    construct_witness(x, y, {0, 1, 3}, 0.1);
    FAIL("expected a singular Gram error");
  } catch (const WitnessUndefinedError& e) {
    CHECK(e.columns() == IndexSet{1, 3});
  }
  CHECK_THROWS_AS(construct_witness(x, y, {0, 1}, 0.0), ValidationError);
}

TEST_CASE("projection residual is idempotent and orthogonal") {
  std::mt19937_64 rng(3);
  const Matrix xs = testing::random_matrix(25, 4, rng);
  const Vector v = testing::random_vector(25, rng);
  const Vector once = projection_residual(xs, v);
  const Vector twice = projection_residual(xs, once);
  CHECK((once - twice).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((xs.transpose() * once).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("score separation") {
  SUBCASE("two features hold vacuously") {
    Matrix s(2, 2);
    s << 1, 0.3, 0.3, 1;
    const auto r = score_separation_condition(PopulationModel(s, {0}));
    CHECK(r.holds[0]);
    CHECK(r.holds[1]);
  }
  SUBCASE("equicorrelated fails everywhere") {
    const auto r = score_separation_condition(PopulationModel(make_sigma(Equicorrelation{0.8}, 5), {0}));
    for (const bool h : r.holds) CHECK_FALSE(h);
  }
  SUBCASE("dominant pair, both sides evaluated explicitly") {
    Matrix s(3, 3);
    s << 1, 0.9, 0.01,
         0.9, 1, 0.01,
         0.01, 0.01, 1;
    const auto r = score_separation_condition(PopulationModel(s, {0}));
    // Feature 0: top 1, competitor 2.
    const double lhs0 = 0.81 - 3.0 * 0.0001;
    const double rhs0 = 1.0 + 3.0 * 1.0 + 1.0;
    CHECK(r.margin(0) == doctest::Approx(lhs0 - rhs0));
    CHECK_FALSE(r.holds[0]);
    // Feature 2: scores to 0 and 1 tie, so top is 0 and the competitor is 1.
    const double lhs2 = 0.0001 - 3.0 * 0.0001;
    CHECK(r.margin(2) == doctest::Approx(lhs2 - rhs0));
  }
  SUBCASE("dominant variance can satisfy it") {
    Matrix s(3, 3);
    s << 10, 3, 0,
         3, 1, 0,
         0, 0, 1;
    const auto r = score_separation_condition(PopulationModel(s, {0}));
    CHECK(r.margin(0) == doctest::Approx(9.0 - 5.0));
    CHECK(r.holds[0]);
  }
}

TEST_CASE("lambda bound") {
  const Index p = 4, n = 6;
  const Matrix sigma = make_sigma(Equicorrelation{0.3}, p);
  const double sx2 = 1.5, se2 = 0.04;
  const PopulationModel model(sigma, {0, 1}, sx2, se2);
  const auto pop = population_neighbor_model(sigma);
  Vector w_star = Vector::Zero(p);
  w_star(0) = 0.5;
  w_star(1) = -1.0;

  SUBCASE("no censorship") {
    const auto b = lambda_bound(model, Mask::Ones(n, p), pop.ratio, w_star, pop.top);
    for (Index k = 0; k < n; ++k) CHECK(b.h_per_sample(k) == doctest::Approx(std::sqrt(se2)));
    CHECK((b.g_per_entry.array() - std::sqrt(sx2)).abs().maxCoeff() < 1e-12);
    CHECK(b.lambda_min == doctest::Approx(20.0 * std::sqrt(se2) * std::sqrt(sx2) / model.gamma()));
  }
  SUBCASE("single masked support entry") {
    Mask m = Mask::Ones(n, p);
    m(2, 1) = 0;
    const auto b = lambda_bound(model, m, pop.ratio, w_star, pop.top);
    const Index t = pop.top[1];
    const double tau = sigma(1, t) / sigma(t, t);
    const double expected = sx2 * (tau * tau * sigma(t, t) + sigma(1, 1)) * 1.0;
    CHECK(b.h_per_sample(2) * b.h_per_sample(2) - se2 == doctest::Approx(expected));
    for (Index k = 0; k < n; ++k)
      if (k != 2) CHECK(b.h_per_sample(k) == doctest::Approx(std::sqrt(se2)));
  }
  SUBCASE("masked off-support entry uses the neighbor proxy") {
    Mask m = Mask::Ones(n, p);
    m(4, 3) = 0;
    const auto b = lambda_bound(model, m, pop.ratio, w_star, pop.top);
    const Index t = pop.top[3];
    const double tau = sigma(3, t) / sigma(t, t);
    CHECK(b.g_per_entry(4, 1) == doctest::Approx(std::sqrt(2.25 * sx2 * sigma(t, t) * tau * tau)));
  }
  SUBCASE("zero noise and no censorship collapse to zero") {
    const PopulationModel quiet(sigma, {0, 1}, 1.0, 0.0);
    const auto b = lambda_bound(quiet, Mask::Ones(n, p), pop.ratio, w_star, pop.top);
    CHECK(b.h_max == 0.0);
    CHECK(b.lambda_min == 0.0);
  }
  SUBCASE("non-positive gamma is rejected") {
    // Feature 2 is the sum direction of features 0 and 1: row sum 1.4.
    Matrix c(3, 3);
    c << 1, 0, 0.7,
         0, 1, 0.7,
         0.7, 0.7, 1;
    const PopulationModel coherent(c, {0, 1});
    REQUIRE(coherent.gamma() == doctest::Approx(-0.4));
    CHECK_THROWS_AS(lambda_bound(coherent, Mask::Ones(2, 3), Vector::Zero(3), Vector::Zero(3),
                                 std::vector<Index>{2, 2, 0}),
                    BoundUndefinedError);
  }
}

TEST_CASE("sample incoherence and minimum eigenvalue") {
  SampleCovariance id{Matrix::Identity(4, 4), Eigen::MatrixXi::Ones(4, 4)};
  CHECK(sample_incoherence(id, {0, 2}) == 0.0);
  CHECK(sample_min_eigen(id, {0, 2}) == doctest::Approx(1.0));

  SampleCovariance d{Matrix::Zero(2, 2), Eigen::MatrixXi::Ones(2, 2)};
  d.h(0, 0) = 2.0;
  d.h(1, 1) = 0.5;
  CHECK(sample_min_eigen(d, {0, 1}) == doctest::Approx(0.5));

  const Matrix sigma = make_sigma(Equicorrelation{0.5}, 8);
  SampleCovariance plug{sigma, Eigen::MatrixXi::Ones(8, 8)};
  CHECK(sample_incoherence(plug, {1, 4}) == incoherence_norm(sigma, {1, 4}));

  SampleCovariance singular{Matrix::Ones(3, 3), Eigen::MatrixXi::Ones(3, 3)};
  CHECK_THROWS_AS(sample_incoherence(singular, {0, 1}), ValidationError);
}

TEST_CASE("imputed covariance") {
  const Matrix h = hadamard_design(8, 8);
  CHECK(imputed_covariance(h).hhat.isApprox(Matrix::Identity(8, 8)));

  Matrix col(3, 1);
  col << 1, 2, 2;
  CHECK(imputed_covariance(col).hhat(0, 0) == doctest::Approx(3.0));

  std::mt19937_64 rng(4);
  const Matrix x = testing::random_matrix(40, 5, rng);
  const auto a = imputed_covariance(x).hhat;
  CHECK(a == pairwise_covariance(CensoredMatrix::fully_observed(x)).h);
  CHECK(a == a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
}
