#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "botscope/matrix.hpp"
#include "botscope/types.hpp"
#include "botscope/window_engine.hpp"

// Incremental host-host correlation over a sliding window.
//
// Notation: X0 is the raw request-host count matrix (n rows, m columns), b its
// column means, X = X0 - 1 b^T the centered matrix, sigma the column sample
// deviations and R the correlation matrix. After a slide the retained rows of
// X become X - D - 1 db^T (D = old - new for changed rows, db = b' - b), and
//
//   (n' - 1) R' = (n - 1) S'^-1 S R S S'^-1 + S'^-1 Y S'^-1
//
// with S = diag(sigma) and the correction Y = X'^T X' - X^T X assembled from
// the touched rows only:
//
//   Y = (n - n_removed) db db^T                         rank-one mean shift
//     + sum_added   w w^T,     w = x - b'               appended rows
//     - sum_removed u u^T,     u = x - b                removed rows
//     + (sum_removed u) db^T + db (sum_removed u)^T
//     - sum_changed (v D^T + D v^T + D D^T),  v = x_new - b'
//
// The diagonal of Y is the per-column variance update.
namespace botscope::corr {

struct CorrelationOptions {
  double sigma_tol = 1e-12;          // relative to max(1, max count)
  std::size_t reanchor_period = 128;  // 0 disables re-anchoring
  bool inject_fault = false;         // test hook: drops the mean-shift term of Y
};

struct EmptyWindow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Work done by the last slide, counted in multiply-adds.
struct SlideCost {
  std::uint64_t correction_terms = 0;  // rank-one / rank-two terms added into Y
  std::uint64_t flops = 0;
};

struct CorrelationState {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<HostKey> columns;  // positional order == ascending host key
  std::vector<std::int64_t> col_sum;    // n * b, exact
  std::vector<std::int64_t> col_sumsq;  // exact, used only to detect constant columns
  std::vector<double> b;
  std::vector<double> sigma;
  std::vector<char> active;
  SymmetricMatrix r;
  std::unordered_map<RowKey, SparseRow> x_raw;
  std::int64_t max_count = 0;
  std::size_t slides_since_anchor = 0;
  std::uint64_t sigma_clamps = 0;
  SlideCost last_cost;

  std::unordered_map<HostKey, std::size_t> column_index;

  std::size_t active_count() const;
};

/// Touched rows of a delta, densified over the state's current columns.
struct SlideBlocks {
  std::size_t n_before = 0;
  std::size_t n_after = 0;
  std::vector<std::vector<double>> removed;      // old raw values
  std::vector<std::vector<double>> changed_old;  // old raw values of changed rows
  std::vector<std::vector<std::pair<std::size_t, double>>> changed_d;  // D, by column position
  std::vector<std::vector<double>> added;        // new raw values
  std::vector<std::int64_t> colsum_removed, colsum_d, colsum_added;
  std::vector<std::int64_t> sumsq_change;  // exact change of per-column sum of squares
  std::int64_t max_new_count = 0;
};

struct MeanUpdate {
  std::size_t n = 0;
  std::vector<std::int64_t> col_sum;
  std::vector<std::int64_t> col_sumsq;
  std::vector<double> b;
  std::vector<double> delta_b;
};

/// Centered rows the correction needs: u (removed, old mean), v (changed, new
/// mean) and w (added, new mean).
struct CenteredUpdate {
  std::vector<std::vector<double>> removed_u;
  std::vector<std::vector<double>> changed_v;
  std::vector<std::vector<double>> added_w;
};

/// From-scratch statistics of the window. Throws oracle::TooFewRows when n < 2.
CorrelationState init_state(const window::CountMatrix& counts, const CorrelationOptions& options = {});

/// Drops removed host columns and appends zero columns for added hosts.
void align_columns(CorrelationState& state, const window::WindowDelta& delta);

SlideBlocks materialize_blocks(const CorrelationState& state, const window::WindowDelta& delta);

/// n' b' = n b + colsum(added) - colsum(removed) - colsum(D). Throws EmptyWindow when n' < 2.
MeanUpdate update_means(const CorrelationState& state, const SlideBlocks& blocks);

CenteredUpdate update_centered(const CorrelationState& state, const SlideBlocks& blocks,
                               const MeanUpdate& means);

/// New column deviations from the diagonal of Y; negative variances are clamped to 0.
/// Also returns the new activity flags (exact constancy test plus sigma_tol).
struct StddevUpdate {
  std::vector<double> sigma;
  std::vector<char> active;
  std::uint64_t clamps = 0;
};
StddevUpdate update_stddevs(const CorrelationState& state, const SlideBlocks& blocks,
                            const MeanUpdate& means, const CenteredUpdate& centered,
                            const CorrelationOptions& options = {});

/// Builds Y and rescales R. Inactive columns come out as zero rows/columns.
SymmetricMatrix update_correlation(const CorrelationState& state, const SlideBlocks& blocks,
                                   const MeanUpdate& means, const CenteredUpdate& centered,
                                   const StddevUpdate& stddevs, const CorrelationOptions& options,
                                   SlideCost* cost = nullptr);

/// Full slide: align, means, centering, deviations, correlation, then commit the
/// raw rows. Re-anchors from scratch every reanchor_period slides. Throws
/// EmptyWindow (state untouched) when the window would drop below 2 rows.
void apply_slide(CorrelationState& state, const window::WindowDelta& delta,
                 const CorrelationOptions& options = {});

/// Recomputes every statistic from the state's own raw rows.
void reanchor(CorrelationState& state, const CorrelationOptions& options);

/// Centered matrix X0 - 1 b^T, rows by ascending row key.
DenseMatrix materialize_centered(const CorrelationState& state);

/// Snapshot blob: u64 n, u64 m, then b, sigma and R (full m x m, row-major),
/// all little-endian; floats as IEEE-754 binary64.
void write_snapshot(const CorrelationState& state, std::ostream& out);

struct Snapshot {
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  std::vector<double> b, sigma;
  DenseMatrix r;
};
Snapshot read_snapshot(std::istream& in);

}  // namespace botscope::corr
