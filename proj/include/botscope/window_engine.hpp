#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "botscope/matrix.hpp"
#include "botscope/types.hpp"

namespace botscope::window {

enum class WindowMode { fixed, sliding };

struct WindowConfig {
  std::int64_t window_len = 600;
  std::int64_t step = 60;
  std::int64_t reorder_slack = 5;
  WindowMode mode = WindowMode::sliding;

  /// Sliding config with the conventional step of 10% of the window length.
  static WindowConfig sliding(std::int64_t len, std::int64_t slack = 5);
  static WindowConfig fixed(std::int64_t len, std::int64_t slack = 5);

  /// Throws std::invalid_argument unless 0 < step <= window_len (step == window_len when fixed).
  void validate() const;
};

WindowMode parse_mode(const std::string& name);

/// Request-host count matrix of the current window. Rows are requests, columns hosts.
/// Every stored row and column has at least one nonzero count.
struct CountMatrix {
  std::map<RowKey, SparseRow> rows;
  std::map<RowKey, std::string> request_ids;
  std::map<HostKey, std::string> host_ids;

  std::size_t n() const { return rows.size(); }
  std::size_t m() const { return host_ids.size(); }

  /// Column order used everywhere downstream: ascending host key.
  std::vector<HostKey> host_keys() const;

  /// Dense n x m, rows by ascending row key, columns by ascending host key.
  DenseMatrix to_dense() const;

  friend bool operator==(const CountMatrix&, const CountMatrix&) = default;
};

struct DeltaRow {
  RowKey key{};
  SparseRow values;
  std::string request_id;  // filled for added rows only
};

/// Row/column changes produced by one slide. Changed rows carry D = old - new.
struct WindowDelta {
  std::int64_t window_start = 0;  // after the slide
  std::int64_t window_end = 0;
  std::size_t n_before = 0;
  std::size_t n_after = 0;
  std::vector<DeltaRow> removed_rows;
  std::vector<DeltaRow> changed_rows;
  std::vector<DeltaRow> added_rows;
  std::vector<std::pair<HostKey, std::string>> added_hosts;
  std::vector<HostKey> removed_hosts;

  std::size_t touched_rows() const {
    return removed_rows.size() + changed_rows.size() + added_rows.size();
  }
  bool is_identity() const {
    return touched_rows() == 0 && added_hosts.empty() && removed_hosts.empty();
  }
};

/// Applies a delta to the matrix it was computed against.
CountMatrix apply_delta(const CountMatrix& before, const WindowDelta& delta);

enum class PushResult { accepted, stale };

struct WindowCounters {
  std::uint64_t accepted = 0;
  std::uint64_t stale = 0;
  std::uint64_t slides = 0;
};

/// Event-time sliding window over a log stream. Single writer.
///
/// The first window starts at the first entry's timestamp rounded down to a
/// multiple of window_len, so fixed and sliding engines over the same stream
/// share window boundaries whenever window_len is a multiple of step.
class WindowEngine {
 public:
  explicit WindowEngine(WindowConfig config);

  /// Buffers an entry. Entries older than (latest seen - reorder_slack), or
  /// older than an already materialized window end, are dropped.
  PushResult push_entry(const LogEntry& entry);

  /// Latest time up to which the stream is final.
  std::optional<std::int64_t> watermark() const;

  /// Materializes the first window once `now` reaches its end. Returns true when primed.
  bool try_prime(std::int64_t now);
  bool primed() const { return primed_; }

  /// Advances one step if `now` reached the next window end; nullopt means not yet due.
  /// Requires primed().
  std::optional<WindowDelta> advance_window(std::int64_t now);

  const CountMatrix& counts() const { return counts_; }
  const WindowConfig& config() const { return config_; }
  std::int64_t window_start() const { return start_; }
  std::int64_t window_end() const { return start_ + config_.window_len; }
  const WindowCounters& counters() const { return counters_; }

  /// Number of buffered entries (current window plus pending future entries).
  std::size_t buffered() const { return buffered_; }

 private:
  using CellKey = std::pair<std::uint32_t, std::uint32_t>;  // (request, host) intern ids

  std::uint32_t intern_request(const std::string& id);
  std::uint32_t intern_host(const std::string& id);
  void collect(std::int64_t from, std::int64_t to, int sign, std::map<CellKey, std::int64_t>& out) const;
  void drop_before(std::int64_t t);

  WindowConfig config_;
  bool started_ = false;
  bool primed_ = false;
  std::int64_t start_ = 0;
  std::int64_t latest_ = 0;
  std::int64_t closed_until_ = 0;  // entries before this time can no longer be counted

  std::map<std::int64_t, std::vector<CellKey>> buffer_;
  std::size_t buffered_ = 0;

  std::unordered_map<std::string, std::uint32_t> request_intern_;
  std::unordered_map<std::string, std::uint32_t> host_intern_;
  std::vector<std::string> request_names_;
  std::vector<std::string> host_names_;

  // Active keys for interned ids currently present in the window.
  std::unordered_map<std::uint32_t, RowKey> row_of_;
  std::unordered_map<std::uint32_t, HostKey> col_of_;
  std::unordered_map<std::uint32_t, std::int64_t> host_total_;
  std::uint64_t next_row_ = 1;
  std::uint64_t next_col_ = 1;

  CountMatrix counts_;
  WindowCounters counters_;
};

}  // namespace botscope::window
