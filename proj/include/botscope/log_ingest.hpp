#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "botscope/types.hpp"

namespace botscope::ingest {

enum class LogFormat { apache_common, apache_combined, triple_csv };

/// Throws std::invalid_argument for an unknown format name (a startup config error).
LogFormat parse_format(std::string_view name);
std::string_view format_name(LogFormat format);

struct ParseOptions {
  bool strip_query = true;
};

enum class ParseError { malformed_line };

using ParseResult = std::variant<LogEntry, ParseError>;

/// Parses one log line. Total over arbitrary bytes: never throws on content.
ParseResult parse_line(std::string_view raw, LogFormat format, const ParseOptions& options = {});

/// "[10/Oct/2000:13:55:36 -0700]" body (without brackets) to UTC epoch seconds.
std::optional<std::int64_t> parse_clf_timestamp(std::string_view text);

/// True for the optional triple-csv header line.
bool is_csv_header(std::string_view raw);

/// Keyed hash (HMAC-SHA256, lowercase hex) of both identifiers.
/// An empty salt means anonymization is disabled and the entry is returned as is.
LogEntry anonymize(const LogEntry& entry, std::string_view salt);

std::string keyed_digest(std::string_view id, std::string_view salt);

/// Counts what a reader saw; malformed lines are skipped, never fatal.
struct IngestCounters {
  std::uint64_t lines = 0;
  std::uint64_t parsed = 0;
  std::uint64_t malformed = 0;
};

/// Stateful line reader: skips a leading csv header, counts malformed lines.
class LineParser {
 public:
  LineParser(LogFormat format, ParseOptions options = {}, std::string salt = {})
      : format_(format), options_(options), salt_(std::move(salt)) {}

  std::optional<LogEntry> feed(std::string_view raw);

  const IngestCounters& counters() const { return counters_; }

 private:
  LogFormat format_;
  ParseOptions options_;
  std::string salt_;
  IngestCounters counters_;
};

}  // namespace botscope::ingest
