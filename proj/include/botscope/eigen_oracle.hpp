#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "botscope/matrix.hpp"
#include "botscope/types.hpp"
#include "botscope/window_engine.hpp"

// Brute-force references: cyclic Jacobi eigensolver and from-scratch
// correlation. Shares no code with the Lanczos or incremental paths.
namespace botscope::oracle {

struct EigenResult {
  std::vector<double> eigenvalues;  // descending
  DenseMatrix eigenvectors;         // column i pairs with eigenvalues[i]
  int sweeps = 0;
};

struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations.
/// Stops when the off-diagonal Frobenius norm is <= 1e-12 * ||R||_F; throws
/// NonConvergence after 100 sweeps.
EigenResult jacobi_eigen(const DenseMatrix& r);
EigenResult jacobi_eigen(const SymmetricMatrix& r);

struct TooFewRows : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Column statistics of a count matrix computed directly from the definitions
/// (column means, sample standard deviations, correlation of centered columns).
/// Columns are ordered as `columns`. A column is inactive when it is constant
/// or its deviation is below sigma_tol_rel * max(1, max count); inactive
/// columns have zero rows/columns in `r`, including the diagonal.
struct ColumnStatistics {
  std::size_t n = 0;
  std::vector<std::int64_t> col_sum;    // exact n * mean
  std::vector<std::int64_t> col_sumsq;  // exact sum of squares
  std::vector<double> mean;
  std::vector<double> sigma;
  std::vector<char> active;
  SymmetricMatrix r;
  std::int64_t max_count = 0;
};

template <typename RowRange>
ColumnStatistics recompute_statistics(const RowRange& rows, const std::vector<HostKey>& columns,
                                      double sigma_tol_rel);

ColumnStatistics recompute_statistics(const window::CountMatrix& counts, double sigma_tol_rel = 1e-12);

/// Correlation matrix of a count matrix (columns by ascending host key).
/// Throws TooFewRows when n < 2.
SymmetricMatrix recompute_correlation(const window::CountMatrix& counts, double sigma_tol_rel = 1e-12);

/// Exact integer kernel behind recompute_statistics; rows given as sparse
/// (column position, count) lists.
ColumnStatistics statistics_from_positions(
    const std::vector<std::vector<std::pair<std::size_t, std::int64_t>>>& rows, std::size_t m,
    double sigma_tol_rel);

template <typename RowRange>
ColumnStatistics recompute_statistics(const RowRange& rows, const std::vector<HostKey>& columns,
                                      double sigma_tol_rel) {
  std::unordered_map<HostKey, std::size_t> pos;
  for (std::size_t j = 0; j < columns.size(); ++j) pos.emplace(columns[j], j);
  std::vector<std::vector<std::pair<std::size_t, std::int64_t>>> positional;
  for (const auto& entry : rows) {
    const SparseRow& row = entry.second;
    auto& out = positional.emplace_back();
    for (const auto& [k, v] : row) {
      auto it = pos.find(k);
      if (it != pos.end() && v != 0) out.emplace_back(it->second, v);
    }
  }
  return statistics_from_positions(positional, columns.size(), sigma_tol_rel);
}

}  // namespace botscope::oracle
