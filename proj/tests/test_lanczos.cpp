#include <algorithm>
#include <cmath>
#include <random>

#include "botscope/eigen_oracle.hpp"
#include "botscope/lanczos.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace botscope;
using namespace botscope::lanczos;

namespace {

double min_distance(const std::vector<double>& spectrum, double x) {
  double best = INFINITY;
  for (double v : spectrum) best = std::min(best, std::abs(v - x));
  return best;
}

std::size_t count_below(const std::vector<double>& spectrum, double x) {
  return static_cast<std::size_t>(std::count_if(spectrum.begin(), spectrum.end(), [x](double v) { return v < x; }));
}

/// Block of `block` identical columns among m, the rest independent noise.
SymmetricMatrix block_correlation(std::size_t m, std::size_t block, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const std::size_t n = 400;
  DenseMatrix x(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = g(rng);
    for (std::size_t j = 0; j < m; ++j) x(i, j) = j < block ? f : g(rng);
  }
  return SymmetricMatrix::from_dense(testsupport::naive_correlation(x));
}

}  // namespace

TEST_CASE("identity breaks down at the first step") {
  LanczosState st;
  lanczos_extend(SymmetricMatrix::identity(6), st, 5, 1);
  CHECK(st.k() == 1);
  CHECK(st.alpha[0] == doctest::Approx(1.0));
  CHECK(st.broke_down);
  CHECK(st.residual_norm == 0.0);
  CHECK(bisect_largest(st.alpha, st.beta, 1e-10) == doctest::Approx(1.0));
  auto ritz = recover_eigenvector(st, 1.0, 1);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(ritz.mu_hat[i]) == doctest::Approx(std::abs(st.v[0][i])));
}

TEST_CASE("diag(2,1) from the balanced start vector") {
  SymmetricMatrix r(2);
  r(0, 0) = 2.0;
  r(1, 1) = 1.0;
  LanczosState st;
  st.start = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  lanczos_extend(r, st, 5, 0);
  REQUIRE(st.k() == 2);
  CHECK(st.alpha[0] == doctest::Approx(1.5));
  CHECK(st.alpha[1] == doctest::Approx(1.5));
  CHECK(st.beta[0] == doctest::Approx(0.5));
  CHECK(st.broke_down);
  CHECK(bisect_largest(st.alpha, st.beta, 1e-12) == doctest::Approx(2.0).epsilon(1e-11));
  CHECK(sturm_count(st.alpha, st.beta, 1.0 + 1e-9) == 1);
}

TEST_CASE("full run on a random symmetric matrix reproduces the spectrum") {
  std::mt19937_64 rng(40);
  auto r = testsupport::random_symmetric(rng, 40);
  LanczosState st;
  lanczos_extend(r, st, 40, 3);
  REQUIRE(st.k() == 40);
  auto t = oracle::jacobi_eigen(testsupport::tridiagonal_dense({st.alpha, st.beta})).eigenvalues;
  auto full = oracle::jacobi_eigen(r).eigenvalues;
  for (std::size_t i = 0; i < 40; ++i) CHECK(std::abs(t[i] - full[i]) <= 1e-8);
}

TEST_CASE("basis stays orthonormal and tridiagonalizes R") {
  std::mt19937_64 rng(41);
  for (std::size_t m : {5u, 20u, 50u}) {
    auto r = testsupport::random_correlation(rng, m, 200, 0.8);
    LanczosState st;
    lanczos_extend(r, st, m / 2 + 1, 9);
    const std::size_t k = st.k();
    double orth = 0.0, tri = 0.0;
    std::vector<double> rv(m);
    for (std::size_t a = 0; a < k; ++a) {
      r.multiply(st.v[a], rv);
      for (std::size_t b = 0; b < k; ++b) {
        orth = std::max(orth, std::abs(dot(st.v[a], st.v[b]) - (a == b ? 1.0 : 0.0)));
        double want = 0.0;
        if (a == b) want = st.alpha[a];
        else if (b + 1 == a) want = st.beta[b];
        else if (a + 1 == b) want = st.beta[a];
        tri = std::max(tri, std::abs(dot(st.v[b], rv) - want));
      }
    }
    CHECK(orth <= 1e-8);
    CHECK(tri <= 1e-8);
    for (double b : st.beta) CHECK(b > 0.0);
    CHECK(st.residual_norm >= 0.0);
  }
}

TEST_CASE("extending in pieces equals one run") {
  std::mt19937_64 rng(42);
  auto r = testsupport::random_correlation(rng, 30, 100, 1.0);
  LanczosState a, b;
  lanczos_extend(r, a, 12, 5);
  lanczos_extend(r, b, 4, 5);
  lanczos_extend(r, b, 3, 5);
  lanczos_extend(r, b, 5, 5);
  CHECK(a.alpha == b.alpha);
  CHECK(a.beta == b.beta);
}

TEST_CASE("eigenvalue bounds") {
  CHECK(eig_bounds({2.0, 2.0}, {1.0}) == std::pair<double, double>{1.0, 3.0});
  CHECK(eig_bounds({5.0}, {}) == std::pair<double, double>{5.0, 5.0});

  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    auto t = testsupport::random_tridiagonal(rng, 1 + trial % 25);
    const std::size_t k = t.alpha.size();
    double gersh_lo = INFINITY, gersh_hi = -INFINITY;
    for (std::size_t i = 0; i < k; ++i) {
      double rad = (i > 0 ? t.beta[i - 1] : 0.0) + (i + 1 < k ? t.beta[i] : 0.0);
      gersh_lo = std::min(gersh_lo, t.alpha[i] - rad);
      gersh_hi = std::max(gersh_hi, t.alpha[i] + rad);
    }
    auto ev = oracle::jacobi_eigen(testsupport::tridiagonal_dense(t)).eigenvalues;
    CHECK(ev.back() >= gersh_lo - 1e-12);
    CHECK(ev.front() <= gersh_hi + 1e-12);
    auto [lo, hi] = eig_bounds(t.alpha, t.beta);
    CHECK(lo >= 0.0);
    CHECK(hi <= gersh_hi);

    // Shifted to be positive semidefinite, as every T_k of a correlation matrix is:
    // then the trace cap is a valid upper bound and the zero floor a valid lower one.
    if (gersh_lo < 0.0)
      for (auto& a : t.alpha) a -= gersh_lo;
    auto psd = oracle::jacobi_eigen(testsupport::tridiagonal_dense(t)).eigenvalues;
    auto [plo, phi] = eig_bounds(t.alpha, t.beta);
    CHECK(phi >= psd.front() - 1e-12);
    CHECK(plo <= psd.back() + 1e-12);
  }
}

TEST_CASE("sturm counts on the two by two example") {
  const std::vector<double> a{2.0, 2.0}, b{1.0};
  CHECK(sturm_count(a, b, 0.0) == 0);
  CHECK(sturm_count(a, b, 2.0) == 1);
  CHECK(sturm_count(a, b, 4.0) == 2);
}

TEST_CASE("sturm counts match the oracle on random tridiagonals") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> probe(-5.0, 7.0);
  for (int trial = 0; trial < 150; ++trial) {
    auto t = testsupport::random_tridiagonal(rng, 1 + trial % 40);
    auto ev = oracle::jacobi_eigen(testsupport::tridiagonal_dense(t)).eigenvalues;
    for (int p = 0; p < 20; ++p) {
      double x = probe(rng);
      while (min_distance(ev, x) < 1e-9) x = probe(rng);
      CHECK(sturm_count(t.alpha, t.beta, x) == count_below(ev, x));
    }
  }
}

TEST_CASE("sturm count survives an exact zero pivot") {
  // T - 1 I has a zero leading minor; 1 is not an eigenvalue.
  const std::vector<double> a{1.0, 2.0}, b{1.0};
  auto ev = oracle::jacobi_eigen(testsupport::tridiagonal_dense({a, b})).eigenvalues;
  CHECK(sturm_count(a, b, 1.0) == count_below(ev, 1.0));
}

TEST_CASE("bisection") {
  CHECK(std::abs(bisect_largest({2.0, 2.0}, {1.0}, 1e-10) - 3.0) <= 1e-9);
  CHECK(bisect_largest({5.0}, {}, 1e-10) == 5.0);

  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = testsupport::random_tridiagonal(rng, 30);
    auto ev = oracle::jacobi_eigen(testsupport::tridiagonal_dense(t)).eigenvalues;
    CHECK(std::abs(bisect_largest(t.alpha, t.beta, 1e-12) - ev.front()) <= 1e-8);
  }
}

TEST_CASE("tridiagonal eigenvector") {
  auto mu = tridiagonal_eigenvector({2.0, 2.0}, {1.0}, 3.0, 1);
  CHECK(std::abs(mu[0]) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(mu[0] * mu[1] > 0.0);

  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = testsupport::random_correlation(rng, 30, 120, 0.7);
    LanczosState st;
    lanczos_extend(r, st, 30, trial);
    const double lam = bisect_largest(st.alpha, st.beta, 1e-12);
    auto ritz = recover_eigenvector(st, lam, trial);
    const std::size_t k = st.k();
    double tres = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double v = st.alpha[i] * ritz.mu_tilde[i] - lam * ritz.mu_tilde[i];
      if (i > 0) v += st.beta[i - 1] * ritz.mu_tilde[i - 1];
      if (i + 1 < k) v += st.beta[i] * ritz.mu_tilde[i + 1];
      tres += v * v;
    }
    CHECK(std::sqrt(tres) <= 1e-6);
    std::vector<double> rm(30);
    r.multiply(ritz.mu_hat, rm);
    double rres = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
      rres += (rm[i] - lam * ritz.mu_hat[i]) * (rm[i] - lam * ritz.mu_hat[i]);
      sum += ritz.mu_hat[i];
    }
    CHECK(std::sqrt(rres) <= error_bound(st.residual_norm, ritz.mu_tilde) + 1e-6);
    CHECK(sum >= 0.0);
    CHECK(norm2(ritz.mu_hat) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("error bound") {
  CHECK(error_bound(0.0, {0.6, 0.8}) == 0.0);
  CHECK(error_bound(0.3, {0.0, 0.0, 1.0}) == doctest::Approx(0.3));
  CHECK(error_bound(0.3, {0.0, 0.0, -2.0}) == doctest::Approx(0.3));
  CHECK(error_bound(1.0, {0.6, 0.8}) == doctest::Approx(0.8));
}

TEST_CASE("Ritz values lie within the error bound of the spectrum and grow with k") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial) % 39;
    auto r = testsupport::random_symmetric(rng, m);
    auto spectrum = oracle::jacobi_eigen(r).eigenvalues;
    LanczosState st;
    double previous = -INFINITY;
    while (!st.broke_down && st.k() < m) {
      lanczos_extend(r, st, 1, trial);
      const double lam = bisect_largest(st.alpha, st.beta, 1e-10);
      const double d = error_bound(st.residual_norm, recover_eigenvector(st, lam, trial).mu_tilde);
      CHECK(min_distance(spectrum, lam) <= d + 1e-9);
      CHECK(lam >= previous - 2e-10 * std::abs(eig_bounds(st.alpha, st.beta).second) - 1e-12);
      previous = lam;
    }
    CHECK(std::abs(previous - spectrum.front()) <= 1e-8);
  }
}

TEST_CASE("compact_active drops masked columns") {
  SymmetricMatrix r(3);
  r(0, 0) = 1; r(0, 1) = 0.2; r(0, 2) = 0.3; r(1, 1) = 1; r(1, 2) = 0.4; r(2, 2) = 1;
  auto c = compact_active(r, {1, 0, 1});
  REQUIRE(c.size() == 2);
  CHECK(c(0, 1) == 0.3);
}

TEST_CASE("identity estimate is clear") {
  DetectionParams p;
  for (std::size_t m : {4u, 8u, 50u}) {
    auto est = estimate_principal(SymmetricMatrix::identity(m), p, 1);
    CHECK(est.verdict == Verdict::clear);
    CHECK(est.lambda_norm == doctest::Approx(1.0 / static_cast<double>(m)));
    CHECK(est.k_used == 1);
  }
}

TEST_CASE("dominant identical block warns") {
  DetectionParams p;
  auto r = block_correlation(20, 10, 5);
  auto est = estimate_principal(r, p, 1);
  auto top = oracle::jacobi_eigen(r).eigenvalues.front() / 20.0;
  CHECK(top >= 0.5);
  CHECK(est.lambda_norm >= 0.5 - est.error_norm);
  if (top >= p.omega + 0.05) CHECK(est.verdict == Verdict::warn);

  auto strong = block_correlation(20, 16, 6);
  auto est2 = estimate_principal(strong, p, 1);
  CHECK(est2.verdict == Verdict::warn);
  CHECK(est2.lambda_norm - est2.error_norm >= p.omega);
  double sum = 0.0;
  for (double v : est2.eigvec) sum += v;
  CHECK(sum > 0.0);
}

TEST_CASE("estimate invariants and verdict soundness") {
  DetectionParams p;
  std::mt19937_64 rng(48);
  std::uniform_real_distribution<double> w(0.0, 4.0);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 10 + static_cast<std::size_t>(trial) % 50;
    auto r = testsupport::random_correlation(rng, m, 3 * m, w(rng));
    auto est = estimate_principal(r, p, trial);
    const double truth = oracle::jacobi_eigen(r).eigenvalues.front() / static_cast<double>(m);
    CHECK(est.lambda_norm >= 0.0);
    CHECK(est.lambda_norm <= 1.0 + est.error_norm + 1e-12);
    CHECK(norm2(est.eigvec) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(est.lambda_norm - truth) <= est.error_norm + 1e-9);
    CHECK(est.k_used <= static_cast<std::size_t>(std::ceil(p.k_u_frac * static_cast<double>(m))));
    if (est.verdict == Verdict::warn) CHECK(truth >= p.omega);
    if (est.verdict == Verdict::clear && est.lambda_norm - est.error_norm >= 0.5) CHECK(truth < p.omega);
  }
}

TEST_CASE("estimate is deterministic per seed") {
  std::mt19937_64 rng(49);
  auto r = testsupport::random_correlation(rng, 40, 120, 1.5);
  DetectionParams p;
  CHECK(estimate_principal(r, p, 7) == estimate_principal(r, p, 7));
}

TEST_CASE("masked columns are ignored") {
  std::mt19937_64 rng(50);
  auto r = testsupport::random_correlation(rng, 12, 60, 2.0);
  std::vector<char> mask(12, 1);
  mask[3] = mask[7] = 0;
  DetectionParams p;
  auto est = estimate_principal(r, p, 2, &mask);
  CHECK(est.m_active == 10);
  CHECK(est.eigvec[3] == 0.0);
  CHECK(est.eigvec[7] == 0.0);
  auto sub = estimate_principal(compact_active(r, mask), p, 2);
  CHECK(est.lambda_raw == sub.lambda_raw);

  std::vector<char> one(12, 0);
  one[0] = 1;
  auto tiny = estimate_principal(r, p, 2, &one);
  CHECK(tiny.verdict == Verdict::clear);
  CHECK(tiny.m_active == 1);
}

TEST_CASE("tighter eps2 and larger c never cut work") {
  std::mt19937_64 rng(51);
  auto r = testsupport::random_correlation(rng, 80, 240, 2.5);
  std::uint64_t last = 0;
  for (double eps2 : {0.1, 0.05, 0.01, 0.005}) {
    DetectionParams p;
    p.eps2 = eps2;
    auto est = estimate_principal(r, p, 3);
    CHECK(est.flops >= last);
    last = est.flops;
  }
}

TEST_CASE("work per Krylov step grows roughly quadratically in m") {
  DetectionParams p;
  std::mt19937_64 rng(52);
  auto small = estimate_principal(testsupport::random_correlation(rng, 100, 300, 3.0), p, 1);
  auto large = estimate_principal(testsupport::random_correlation(rng, 200, 600, 3.0), p, 1);
  const double ratio = (static_cast<double>(large.flops) / static_cast<double>(large.k_used)) /
                       (static_cast<double>(small.flops) / static_cast<double>(small.k_used));
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}
