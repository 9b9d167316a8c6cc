#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "botscope/matrix.hpp"
#include "botscope/types.hpp"
#include "botscope/window_engine.hpp"

namespace testsupport {

using botscope::DenseMatrix;
using botscope::LogEntry;
using botscope::SymmetricMatrix;

/// Random log stream over a fixed pool of hosts and requests. Arrival times are
/// sorted; each entry picks a host and request uniformly from its pool. With
/// `churn`, hosts have limited lifetimes so columns appear and disappear.
inline std::vector<LogEntry> random_stream(std::mt19937_64& rng, int hosts, int requests,
                                           std::int64_t duration, int entries, bool churn = true) {
  std::uniform_int_distribution<std::int64_t> ts(0, duration - 1);
  std::uniform_int_distribution<int> host(0, hosts - 1);
  std::uniform_int_distribution<int> req(0, requests - 1);
  std::vector<std::int64_t> born(hosts, 0), dies(hosts, duration);
  if (churn) {
    for (int h = 0; h < hosts; ++h) {
      const auto a = ts(rng), b = ts(rng);
      born[h] = std::min(a, b);
      dies[h] = std::max(a, b) + duration / 5;
    }
  }
  std::vector<LogEntry> out;
  while (static_cast<int>(out.size()) < entries) {
    const auto t = ts(rng);
    const int h = host(rng);
    if (t < born[h] || t >= dies[h]) continue;
    out.push_back({t, "h" + std::to_string(h), "/r" + std::to_string(req(rng))});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LogEntry& a, const LogEntry& b) { return a.timestamp < b.timestamp; });
  return out;
}

/// Textbook two-pass sample correlation of the columns of a dense count
/// matrix. Constant columns get zero rows/columns.
inline DenseMatrix naive_correlation(const DenseMatrix& x) {
  const std::size_t n = x.rows(), m = x.cols();
  std::vector<double> mean(m, 0.0), sd(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) mean[j] += x(i, j);
    mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sd[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n - 1));
  }
  DenseMatrix r(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      if (sd[a] == 0.0 || sd[b] == 0.0) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (x(i, a) - mean[a]) * (x(i, b) - mean[b]);
      r(a, b) = s / (static_cast<double>(n - 1) * sd[a] * sd[b]);
    }
  return r;
}

inline double max_abs_diff(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  double worst = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    for (std::size_t j = i; j < std::min(a.size(), b.size()); ++j)
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  return worst;
}

inline SymmetricMatrix random_symmetric(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SymmetricMatrix r(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) r(i, j) = u(rng);
  return r;
}

/// Correlation matrix of random data with a tunable common factor, so the
/// normalized top eigenvalue spans roughly 1/m .. 1.
inline SymmetricMatrix random_correlation(std::mt19937_64& rng, std::size_t m, std::size_t n,
                                          double factor_weight) {
  std::normal_distribution<double> g;
  DenseMatrix x(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = g(rng);
    for (std::size_t j = 0; j < m; ++j) x(i, j) = factor_weight * f + g(rng);
  }
  return SymmetricMatrix::from_dense(naive_correlation(x));
}

struct Tridiagonal {
  std::vector<double> alpha, beta;
};

inline Tridiagonal random_tridiagonal(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> a(-2.0, 4.0), b(0.05, 1.5);
  Tridiagonal t;
  for (std::size_t i = 0; i < k; ++i) t.alpha.push_back(a(rng));
  for (std::size_t i = 0; i + 1 < k; ++i) t.beta.push_back(b(rng));
  return t;
}

inline DenseMatrix tridiagonal_dense(const Tridiagonal& t) {
  const std::size_t k = t.alpha.size();
  DenseMatrix d(k, k);
  for (std::size_t i = 0; i < k; ++i) d(i, i) = t.alpha[i];
  for (std::size_t i = 0; i + 1 < k; ++i) d(i, i + 1) = d(i + 1, i) = t.beta[i];
  return d;
}

}  // namespace testsupport
