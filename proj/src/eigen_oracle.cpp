#include "botscope/eigen_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace botscope::oracle {

EigenResult jacobi_eigen(const DenseMatrix& input) {
  const std::size_t m = input.rows();
  if (m == 0 || input.cols() != m) throw std::invalid_argument("jacobi_eigen: need a square matrix");

  DenseMatrix a = input;
  // Symmetrize from the upper triangle so only one triangle is trusted.
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) a(j, i) = a(i, j);
  DenseMatrix vt = DenseMatrix::identity(m);  // rows are eigenvectors

  double frob = 0.0;
  for (double x : a.data()) frob += x * x;
  frob = std::sqrt(frob);

  EigenResult result;
  bool converged = false;
  for (int sweep = 0; sweep <= 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) off += a(i, j) * a(i, j);
    off = std::sqrt(2.0 * off);
    if (off <= 1e-12 * frob) {
      converged = true;
      result.sweeps = sweep;
      break;
    }
    if (sweep == 100) break;

    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        if (std::abs(apq) < 1e-300 + 1e-18 * std::sqrt(std::abs(app * aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        auto rp = a.row(p);
        auto rq = a.row(q);
        for (std::size_t k = 0; k < m; ++k) {
          if (k == p || k == q) continue;
          const double akp = rp[k];
          const double akq = rq[k];
          rp[k] = c * akp - s * akq;
          rq[k] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          if (k == p || k == q) continue;
          a(k, p) = rp[k];
          a(k, q) = rq[k];
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;

        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t k = 0; k < m; ++k) {
          const double x = vp[k];
          const double y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
  }
  if (!converged) throw NonConvergence("jacobi_eigen: no convergence after 100 sweeps");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  result.eigenvalues.resize(m);
  result.eigenvectors = DenseMatrix(m, m);
  for (std::size_t c = 0; c < m; ++c) {
    result.eigenvalues[c] = a(order[c], order[c]);
    for (std::size_t k = 0; k < m; ++k) result.eigenvectors(k, c) = vt(order[c], k);
  }
  return result;
}

EigenResult jacobi_eigen(const SymmetricMatrix& r) { return jacobi_eigen(r.to_dense()); }

ColumnStatistics statistics_from_positions(
    const std::vector<std::vector<std::pair<std::size_t, std::int64_t>>>& rows, std::size_t m,
    double sigma_tol_rel) {
  const std::size_t n = rows.size();
  if (n < 2) throw TooFewRows("correlation needs at least 2 rows");

  ColumnStatistics st;
  st.n = n;
  st.col_sum.assign(m, 0);
  st.col_sumsq.assign(m, 0);
  // Exact cross products sum_r x_ri x_rj over the upper triangle.
  std::vector<std::int64_t> cross(m * (m + 1) / 2, 0);
  auto idx = [m](std::size_t i, std::size_t j) { return i * m - (i * (i - 1)) / 2 + (j - i); };
  for (const auto& row : rows) {
    for (std::size_t a = 0; a < row.size(); ++a) {
      const auto [i, xi] = row[a];
      st.col_sum[i] += xi;
      st.max_count = std::max(st.max_count, xi);
      for (std::size_t b = 0; b < row.size(); ++b) {
        const auto [j, xj] = row[b];
        if (j >= i) cross[idx(i, j)] += xi * xj;
      }
    }
  }
  for (std::size_t j = 0; j < m; ++j) st.col_sumsq[j] = cross[idx(j, j)];

  // n^2 * covariance numerator: n * sum(x_i x_j) - S_i S_j, exact.
  const auto nn = static_cast<__int128>(n);
  auto centered = [&](std::size_t i, std::size_t j) {
    return nn * cross[idx(i, j)] - static_cast<__int128>(st.col_sum[i]) * st.col_sum[j];
  };

  const double tol = sigma_tol_rel * std::max<double>(1.0, static_cast<double>(st.max_count));
  st.mean.resize(m);
  st.sigma.resize(m);
  st.active.assign(m, 0);
  std::vector<double> root(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    st.mean[j] = static_cast<double>(st.col_sum[j]) / static_cast<double>(n);
    const __int128 ss = centered(j, j);
    const double var = static_cast<double>(ss) / (static_cast<double>(n) * static_cast<double>(n - 1));
    st.sigma[j] = ss > 0 ? std::sqrt(var) : 0.0;
    st.active[j] = ss > 0 && st.sigma[j] >= tol;
    root[j] = std::sqrt(static_cast<double>(ss));
  }

  st.r = SymmetricMatrix(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!st.active[i]) continue;
    st.r(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      if (!st.active[j]) continue;
      st.r(i, j) = static_cast<double>(centered(i, j)) / (root[i] * root[j]);
    }
  }
  return st;
}

ColumnStatistics recompute_statistics(const window::CountMatrix& counts, double sigma_tol_rel) {
  return recompute_statistics(counts.rows, counts.host_keys(), sigma_tol_rel);
}

SymmetricMatrix recompute_correlation(const window::CountMatrix& counts, double sigma_tol_rel) {
  return recompute_statistics(counts, sigma_tol_rel).r;
}

}  // namespace botscope::oracle
