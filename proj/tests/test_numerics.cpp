#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rem/error.hpp"
#include "rem/numerics.hpp"
#include "rem/rng.hpp"

using namespace rem;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  SeededRng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (auto& v : m.reshaped()) v = rng.gaussian();
  return m;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("rng streams are reproducible") {
  SeededRng a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next_u64();
    REQUIRE(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);

  // Reference values of the FNV-1a 64-bit hash.
  CHECK(hash_string("") == 0xCBF29CE484222325ULL);
  CHECK(hash_string("a") == 0xAF63DC4C8601EC8CULL);
}

TEST_CASE("rng draws stay in range") {
  SeededRng rng(3);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const long k = rng.uniform_int(-2, 2);
    REQUIRE(k >= -2);
    REQUIRE(k <= 2);
    const double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("split does not advance the parent") {
  SeededRng a(9);
  SeededRng b(9);
  const auto child = a.split(3);
  CHECK(a.next_u64() == b.next_u64());
  SeededRng c1 = a.split(1), c2 = a.split(2);
  CHECK(c1.next_u64() != c2.next_u64());
  (void)child;
}

TEST_CASE("pca of points on an axis") {
  Eigen::MatrixXd x(4, 3);
  x << -2, 0, 0, 2, 0, 0, -1, 0, 0, 1, 0, 0;
  const auto basis = pca_top_p(x, 1);
  REQUIRE(basis.p == 1);
  CHECK(std::abs(std::abs(basis.components(0, 0)) - 1.0) < 1e-12);
  CHECK(basis.components.col(0).tail(2).norm() < 1e-12);
  CHECK(basis.explained_variance == doctest::Approx(1.0));
}

TEST_CASE("pca against a Jacobi eigensolve") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::MatrixXd x = random_matrix(5, 3, seed);
    const auto basis = pca_top_p(x, 2);
    const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(x));
    REQUIRE(basis.p == 2);
    for (int j = 0; j < 2; ++j) {
      const double sign = basis.components.col(j).dot(vectors.col(j)) < 0 ? -1.0 : 1.0;
      CHECK(max_abs(basis.components.col(j) - sign * vectors.col(j)) < 1e-5);
      CHECK(std::abs(basis.eigenvalues(j) - values(j)) < 1e-5);
    }
    CHECK(std::abs(basis.explained_variance - values.head(2).sum() / values.sum()) < 1e-9);
  }
}

TEST_CASE("pca on small covariances up to 5x5") {
  for (int d = 1; d <= 5; ++d) {
    const Eigen::MatrixXd x = random_matrix(d + 4, d, 100 + d);
    const auto basis = pca_top_p(x, d);
    const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(x));
    for (int j = 0; j < d; ++j) {
      const double sign = basis.components.col(j).dot(vectors.col(j)) < 0 ? -1.0 : 1.0;
      CHECK(max_abs(basis.components.col(j) - sign * vectors.col(j)) < 1e-5);
    }
    // Largest-magnitude entry of each column is nonnegative.
    for (int j = 0; j < d; ++j) {
      Eigen::Index at = 0;
      basis.components.col(j).cwiseAbs().maxCoeff(&at);
      CHECK(basis.components(at, j) >= 0);
    }
  }
}

TEST_CASE("pca basis is orthonormal") {
  const Eigen::MatrixXd x = random_matrix(50, 12, 5);
  const auto basis = pca_top_p(x, 7);
  const Eigen::MatrixXd gram = basis.components.transpose() * basis.components;
  CHECK(max_abs(gram - Eigen::MatrixXd::Identity(7, 7)) <= 1e-6);
}

TEST_CASE("pca clamps to the covariance rank") {
  // Five collinear points in R^4: covariance rank 1.
  Eigen::MatrixXd x(5, 4);
  for (int i = 0; i < 5; ++i) x.row(i) = Eigen::RowVector4d(1, 2, -1, 0.5) * (i - 1.5);
  const auto basis = pca_top_p(x, 3);
  CHECK(basis.clamped);
  CHECK(basis.p == 1);
  CHECK_THROWS_AS(pca_top_p(Eigen::MatrixXd::Ones(1, 3), 1), Error);
}

TEST_CASE("pca by variance picks the smallest sufficient p") {
  SeededRng rng(11);
  Eigen::MatrixXd x(400, 6);
  const double scales[6] = {10, 5, 1, 0.1, 0.1, 0.1};
  for (int i = 0; i < 400; ++i)
    for (int j = 0; j < 6; ++j) x(i, j) = scales[j] * rng.gaussian();
  const auto full = pca_top_p(x, 6);
  const auto b = pca_by_variance(x, 0.9, 5);
  int expected = 0;
  double cum = 0;
  while (cum < 0.9 * full.eigenvalues.sum()) cum += full.eigenvalues(expected++);
  CHECK(b.p == expected);
  CHECK(b.explained_variance >= 0.9);
  CHECK(pca_by_variance(x, 0.99999, 5).p == 5);
}

TEST_CASE("projection never adds variance") {
  const Eigen::MatrixXd x = random_matrix(40, 6, 8);
  const auto basis = pca_top_p(x, 3);
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd recon = centered * basis.components * basis.components.transpose();
  CHECK(recon.squaredNorm() <= centered.squaredNorm() + 1e-12);
}

TEST_CASE("project_off_tangent examples") {
  TangentBasis e1;
  e1.dim = 2;
  e1.p = 1;
  e1.components = Eigen::MatrixXd::Zero(2, 1);
  e1.components(0, 0) = 1;
  const Eigen::VectorXd r = project_off_tangent(e1, Eigen::Vector2d(3, 4));
  CHECK(r(0) == 0.0);
  CHECK(r(1) == 4.0);

  const Eigen::MatrixXd x = random_matrix(30, 4, 21);
  const auto basis = pca_top_p(x, 2);
  const Eigen::VectorXd in_span = basis.components * Eigen::Vector2d(0.7, -1.3);
  CHECK(project_off_tangent(basis, in_span).norm() < 1e-12);

  CHECK_THROWS_AS(project_off_tangent(basis, Eigen::Vector3d(1, 2, 3)), Error);
}

TEST_CASE("project_off_tangent matches the explicit projector") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Eigen::MatrixXd x = random_matrix(20, 4, seed);
    const auto basis = pca_top_p(x, 2);
    const Eigen::VectorXd v = random_matrix(4, 1, seed + 50);
    const Eigen::MatrixXd p = basis.components * basis.components.transpose();
    const Eigen::VectorXd expected = (Eigen::MatrixXd::Identity(4, 4) - p) * v;
    const Eigen::VectorXd got = project_off_tangent(basis, v);
    CHECK(max_abs(got - expected) < 1e-6);
    CHECK(max_abs(basis.components.transpose() * got) < 1e-6);
    CHECK(max_abs(project_off_tangent(basis, got) - got) < 1e-6);
    CHECK(max_abs(p * p - p) < 1e-6);

    const Eigen::MatrixXd cols = random_matrix(4, 5, seed + 70);
    const Eigen::MatrixXd pc = project_off_tangent_cols(basis, cols);
    for (int j = 0; j < 5; ++j) CHECK(max_abs(pc.col(j) - project_off_tangent(basis, cols.col(j))) < 1e-12);
  }
}

TEST_CASE("full basis leaves nothing off the tangent space") {
  const Eigen::MatrixXd x = random_matrix(30, 5, 4);
  const auto basis = pca_top_p(x, 5);
  CHECK(max_abs(basis.components * basis.components.transpose() - Eigen::MatrixXd::Identity(5, 5)) < 1e-9);
  CHECK(project_off_tangent(basis, Eigen::VectorXd::Ones(5)).norm() < 1e-9);
}

TEST_CASE("dft2 magnitude examples") {
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd m = dft2_magnitude(ones);
  CHECK(m(0, 0) == doctest::Approx(4.0));
  CHECK(std::abs(m(0, 1)) < 1e-12);
  CHECK(std::abs(m(1, 0)) < 1e-12);
  CHECK(std::abs(m(1, 1)) < 1e-12);

  Eigen::MatrixXd impulse = Eigen::MatrixXd::Zero(2, 2);
  impulse(0, 0) = 1;
  CHECK(max_abs(dft2_magnitude(impulse) - Eigen::MatrixXd::Ones(2, 2)) < 1e-12);
}

TEST_CASE("dft2 against a naive transform") {
  for (int h : {1, 3, 4, 5, 8})
    for (int w : {1, 4, 6}) {
      const Eigen::MatrixXd img = random_matrix(h, w, static_cast<std::uint64_t>(h * 10 + w));
      const Eigen::MatrixXd got = dft2_magnitude(img);
      CHECK(max_abs(got - oracle::naive_dft_magnitude(img)) < 1e-4);
      CHECK(got(0, 0) == doctest::Approx(std::abs(img.sum())));
      // Parseval.
      CHECK(got.squaredNorm() == doctest::Approx(h * w * img.squaredNorm()).epsilon(1e-4));
      CHECK(max_abs(idft2_real(dft2(img)) - img) < 1e-10);
    }
}

TEST_CASE("bin frequency is signed") {
  CHECK(bin_frequency(0, 8) == 0.0);
  CHECK(bin_frequency(4, 8) == 0.5);
  CHECK(bin_frequency(5, 8) == -0.375);
  CHECK(bin_frequency(2, 5) == 0.4);
  CHECK(bin_frequency(3, 5) == -0.4);
}
