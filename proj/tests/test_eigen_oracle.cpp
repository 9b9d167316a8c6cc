#include <cmath>
#include <random>

#include "botscope/eigen_oracle.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace botscope;
using namespace botscope::oracle;

namespace {

window::CountMatrix counts_from(const std::vector<std::vector<std::int64_t>>& dense) {
  window::CountMatrix c;
  const std::size_t m = dense.empty() ? 0 : dense[0].size();
  for (std::size_t j = 0; j < m; ++j) c.host_ids[HostKey{j + 1}] = "h" + std::to_string(j);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    SparseRow row;
    for (std::size_t j = 0; j < m; ++j)
      if (dense[i][j] != 0) row.emplace_back(HostKey{j + 1}, dense[i][j]);
    c.rows[RowKey{i + 1}] = row;
    c.request_ids[RowKey{i + 1}] = "/r" + std::to_string(i);
  }
  return c;
}

void check_decomposition(const SymmetricMatrix& r, const EigenResult& e) {
  const std::size_t m = r.size();
  const DenseMatrix& q = e.eigenvectors;
  double orth = 0.0, resid = 0.0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      double s = 0.0, rq = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        s += q(i, a) * q(i, b);
        rq += r(a, i) * q(i, b);
      }
      orth = std::max(orth, std::abs(s - (a == b ? 1.0 : 0.0)));
      resid = std::max(resid, std::abs(rq - q(a, b) * e.eigenvalues[b]));
    }
  CHECK(orth <= 1e-10);
  CHECK(resid <= 1e-9 * std::max(r.max_abs(), 1.0) * static_cast<double>(m));
  for (std::size_t i = 1; i < m; ++i) CHECK(e.eigenvalues[i - 1] >= e.eigenvalues[i]);
}

}  // namespace

TEST_CASE("identity spectrum") {
  auto e = jacobi_eigen(SymmetricMatrix::identity(5));
  for (double v : e.eigenvalues) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t j = 0; j < 5; ++j) {
    double mx = 0.0;
    for (std::size_t i = 0; i < 5; ++i) mx = std::max(mx, std::abs(e.eigenvectors(i, j)));
    CHECK(mx == doctest::Approx(1.0));
  }
}

TEST_CASE("rank one all-ones") {
  SymmetricMatrix r(2, 1.0);
  auto e = jacobi_eigen(r);
  CHECK(e.eigenvalues[0] == doctest::Approx(2.0));
  CHECK(std::abs(e.eigenvalues[1]) < 1e-14);
  CHECK(std::abs(e.eigenvectors(0, 0)) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(e.eigenvectors(0, 0) * e.eigenvectors(1, 0) > 0.0);
}

TEST_CASE("two by two with off-diagonal one half") {
  SymmetricMatrix r = SymmetricMatrix::identity(2);
  r(0, 1) = 0.5;
  auto e = jacobi_eigen(r);
  CHECK(e.eigenvalues[0] == doctest::Approx(1.5));
  CHECK(e.eigenvalues[1] == doctest::Approx(0.5));
}

TEST_CASE("fixed tridiagonal against an independent eigensolver") {
  // Frozen from a LAPACK symmetric eigensolver.
  DenseMatrix t(4, 4);
  const double a[] = {1.0, 2.5, -0.5, 3.0}, b[] = {0.7, 0.2, 1.1};
  for (int i = 0; i < 4; ++i) t(i, i) = a[i];
  for (int i = 0; i < 3; ++i) t(i, i + 1) = t(i + 1, i) = b[i];
  auto e = jacobi_eigen(t);
  const double want[] = {3.3220964606442065, 2.77986021307854, 0.7271137914434537,
                         -0.8290704651662003};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(e.eigenvalues[i] - want[i]) < 1e-12);
}

TEST_CASE("random symmetric decompositions") {
  std::mt19937_64 rng(21);
  for (std::size_t m : {1u, 2u, 3u, 10u, 37u, 60u}) {
    auto r = testsupport::random_symmetric(rng, m);
    check_decomposition(r, jacobi_eigen(r));
    // Dense and packed entry points agree.
    CHECK(jacobi_eigen(r.to_dense()).eigenvalues == jacobi_eigen(r).eigenvalues);
  }
}

TEST_CASE("perfectly correlated columns") {
  auto r = recompute_correlation(counts_from({{1, 2}, {3, 4}}));
  CHECK(r(0, 0) == doctest::Approx(1.0));
  CHECK(r(0, 1) == doctest::Approx(1.0));
  CHECK(r(1, 1) == doctest::Approx(1.0));
  auto s = recompute_statistics(counts_from({{1, 2}, {3, 4}}));
  CHECK(s.mean == std::vector<double>{2.0, 3.0});
  CHECK(s.sigma[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(s.sigma[1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("three row example") {
  auto s = recompute_statistics(counts_from({{1, 1}, {2, 3}, {3, 2}}));
  CHECK(s.mean == std::vector<double>{2.0, 2.0});
  CHECK(s.sigma[0] == doctest::Approx(1.0));
  CHECK(s.sigma[1] == doctest::Approx(1.0));
  CHECK(s.r(0, 1) == doctest::Approx(0.5));
  CHECK(s.col_sum == std::vector<std::int64_t>{6, 6});
  CHECK(s.col_sumsq == std::vector<std::int64_t>{14, 14});
}

TEST_CASE("five by four counts match a reference correlation") {
  // Frozen from numpy.corrcoef on the same counts.
  auto r = recompute_correlation(
      counts_from({{3, 0, 1, 2}, {1, 4, 0, 2}, {0, 2, 5, 1}, {2, 2, 2, 0}, {4, 1, 0, 3}}));
  const double want[4][4] = {
      {1.0, -0.6396021490668312, -0.686243566496721, 0.5547001962252291},
      {-0.6396021490668312, 1.0, -0.03251280443811778, -0.20695933859617888},
      {-0.686243566496721, -0.03251280443811778, 1.0, -0.6132846549348296},
      {0.5547001962252291, -0.20695933859617888, -0.6132846549348296, 1.0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(std::abs(r(i, j) - want[i][j]) < 1e-14);
  CHECK(jacobi_eigen(r).eigenvalues[0] == doctest::Approx(2.4058865465450934).epsilon(1e-13));
}

TEST_CASE("constant column is inactive") {
  auto s = recompute_statistics(counts_from({{2, 1}, {2, 3}, {2, 2}}));
  CHECK(s.active == std::vector<char>{0, 1});
  CHECK(s.sigma[0] == 0.0);
  CHECK(s.r(0, 0) == 0.0);
  CHECK(s.r(0, 1) == 0.0);
  CHECK(s.r(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("too few rows") {
  CHECK_THROWS_AS(recompute_correlation(counts_from({{1, 2}})), TooFewRows);
}

TEST_CASE("random count correlations are well formed and match the textbook formula") {
  std::mt19937_64 rng(8);
  std::poisson_distribution<int> pois(1.5);
  std::vector<std::vector<std::int64_t>> dense(100, std::vector<std::int64_t>(30));
  for (auto& row : dense) {
    for (auto& v : row) v = pois(rng);
    row[0] += 1;  // keep every row nonempty
  }
  auto counts = counts_from(dense);
  auto r = recompute_correlation(counts);
  auto naive = testsupport::naive_correlation(counts.to_dense());
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(r(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 30; ++j) {
      CHECK(std::abs(r(i, j)) <= 1.0 + 1e-12);
      CHECK(std::abs(r(i, j) - naive(i, j)) < 1e-12);
    }
  }
}
