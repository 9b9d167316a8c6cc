#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace botscope {

/// One parsed access-log record. The raw line is never kept.
struct LogEntry {
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  std::string host_id;
  std::string request_id;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

// Column and row identities inside one window engine run. A host (or request)
// that leaves the window and later returns gets a fresh key.
enum class HostKey : std::uint64_t {};
enum class RowKey : std::uint64_t {};

/// Sparse request row: (host column, count) pairs sorted by host key, no zeros.
using SparseRow = std::vector<std::pair<HostKey, std::int64_t>>;

}  // namespace botscope
