#include "botscope/log_ingest.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <array>
#include <charconv>
#include <chrono>

namespace botscope::ingest {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t'; }

std::string_view trim_eol(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || is_space(s.back())))
    s.remove_suffix(1);
  return s;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

/// Cursor over one line; each take_* consumes a field and the separator after it.
struct Cursor {
  std::string_view rest;

  std::optional<std::string_view> take_token() {
    if (rest.empty() || is_space(rest.front())) return std::nullopt;
    std::size_t end = 0;
    while (end < rest.size() && !is_space(rest[end])) ++end;
    auto tok = rest.substr(0, end);
    rest.remove_prefix(end);
    return tok;
  }

  std::optional<std::string_view> take_delimited(char open, char close) {
    if (rest.empty() || rest.front() != open) return std::nullopt;
    for (std::size_t i = 1; i < rest.size(); ++i) {
      if (rest[i] == '\\' && close == '"') {
        ++i;
        continue;
      }
      if (rest[i] == close) {
        auto body = rest.substr(1, i - 1);
        rest.remove_prefix(i + 1);
        return body;
      }
    }
    return std::nullopt;
  }

  bool take_space() {
    if (rest.empty() || !is_space(rest.front())) return false;
    while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
    return true;
  }
};

std::string_view strip_query(std::string_view url) {
  auto q = url.find_first_of("?#");
  return q == std::string_view::npos ? url : url.substr(0, q);
}

ParseResult parse_clf(std::string_view line, bool combined, const ParseOptions& options) {
  Cursor cur{line};
  auto host = cur.take_token();
  if (!host || !cur.take_space()) return ParseError::malformed_line;
  if (!cur.take_token() || !cur.take_space()) return ParseError::malformed_line;  // ident
  if (!cur.take_token() || !cur.take_space()) return ParseError::malformed_line;  // authuser
  auto stamp = cur.take_delimited('[', ']');
  if (!stamp || !cur.take_space()) return ParseError::malformed_line;
  auto request = cur.take_delimited('"', '"');
  if (!request || !cur.take_space()) return ParseError::malformed_line;
  auto status = cur.take_token();
  if (!status || status->size() != 3 || !all_digits(*status) || !cur.take_space())
    return ParseError::malformed_line;
  auto bytes = cur.take_token();
  if (!bytes || (*bytes != "-" && !all_digits(*bytes))) return ParseError::malformed_line;
  if (combined) {
    if (!cur.take_space() || !cur.take_delimited('"', '"')) return ParseError::malformed_line;
    if (!cur.take_space() || !cur.take_delimited('"', '"')) return ParseError::malformed_line;
  }
  if (!cur.rest.empty()) return ParseError::malformed_line;

  auto ts = parse_clf_timestamp(*stamp);
  if (!ts) return ParseError::malformed_line;

  // "METHOD URI [PROTOCOL]"
  Cursor req{*request};
  auto method = req.take_token();
  if (!method || !req.take_space()) return ParseError::malformed_line;
  auto uri = req.take_token();
  if (!uri) return ParseError::malformed_line;
  if (req.take_space()) {
    if (!req.take_token() || !req.rest.empty()) return ParseError::malformed_line;
  } else if (!req.rest.empty()) {
    return ParseError::malformed_line;
  }
  std::string_view path = options.strip_query ? strip_query(*uri) : *uri;
  if (path.empty()) return ParseError::malformed_line;
  return LogEntry{*ts, std::string(*host), std::string(path)};
}

ParseResult parse_csv(std::string_view line, const ParseOptions& options) {
  auto c1 = line.find(',');
  if (c1 == std::string_view::npos) return ParseError::malformed_line;
  auto c2 = line.find(',', c1 + 1);
  if (c2 == std::string_view::npos) return ParseError::malformed_line;
  if (line.find(',', c2 + 1) != std::string_view::npos) return ParseError::malformed_line;
  std::int64_t ts = 0;
  if (!parse_int(line.substr(0, c1), ts) || ts < 0) return ParseError::malformed_line;
  auto host = line.substr(c1 + 1, c2 - c1 - 1);
  auto request = line.substr(c2 + 1);
  if (options.strip_query) request = strip_query(request);
  if (host.empty() || request.empty()) return ParseError::malformed_line;
  return LogEntry{ts, std::string(host), std::string(request)};
}

}  // namespace

LogFormat parse_format(std::string_view name) {
  if (name == "apache-common") return LogFormat::apache_common;
  if (name == "apache-combined") return LogFormat::apache_combined;
  if (name == "triple-csv") return LogFormat::triple_csv;
  throw std::invalid_argument("unknown log format: " + std::string(name));
}

std::string_view format_name(LogFormat format) {
  switch (format) {
    case LogFormat::apache_common: return "apache-common";
    case LogFormat::apache_combined: return "apache-combined";
    case LogFormat::triple_csv: return "triple-csv";
  }
  return "?";
}

std::optional<std::int64_t> parse_clf_timestamp(std::string_view text) {
  // dd/Mon/yyyy:HH:MM:SS +zzzz
  if (text.size() != 26 || text[2] != '/' || text[6] != '/' || text[11] != ':' ||
      text[14] != ':' || text[17] != ':' || text[20] != ' ')
    return std::nullopt;
  static constexpr std::array<std::string_view, 12> kMonths = {
      "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  unsigned mon = 0;
  for (unsigned i = 0; i < kMonths.size(); ++i)
    if (text.substr(3, 3) == kMonths[i]) mon = i + 1;
  if (mon == 0) return std::nullopt;
  unsigned d = 0, hh = 0, mm = 0, ss = 0, off_h = 0, off_m = 0;
  int y = 0;
  if (!all_digits(text.substr(0, 2)) || !all_digits(text.substr(7, 4)) ||
      !all_digits(text.substr(12, 2)) || !all_digits(text.substr(15, 2)) ||
      !all_digits(text.substr(18, 2)) || !all_digits(text.substr(22, 4)))
    return std::nullopt;
  parse_int(text.substr(0, 2), d);
  parse_int(text.substr(7, 4), y);
  parse_int(text.substr(12, 2), hh);
  parse_int(text.substr(15, 2), mm);
  parse_int(text.substr(18, 2), ss);
  parse_int(text.substr(22, 2), off_h);
  parse_int(text.substr(24, 2), off_m);
  const char sign = text[21];
  if ((sign != '+' && sign != '-') || hh > 23 || mm > 59 || ss > 60 || off_m > 59)
    return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mon}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
  std::int64_t t = days * 86400 + hh * 3600 + mm * 60 + ss;
  const std::int64_t offset = static_cast<std::int64_t>(off_h) * 3600 + off_m * 60;
  t += sign == '+' ? -offset : offset;  // local = UTC + offset
  if (t < 0) return std::nullopt;
  return t;
}

bool is_csv_header(std::string_view raw) {
  return trim_eol(raw) == "timestamp,host,request";
}

ParseResult parse_line(std::string_view raw, LogFormat format, const ParseOptions& options) {
  auto line = trim_eol(raw);
  switch (format) {
    case LogFormat::apache_common: return parse_clf(line, false, options);
    case LogFormat::apache_combined: return parse_clf(line, true, options);
    case LogFormat::triple_csv: return parse_csv(line, options);
  }
  return ParseError::malformed_line;
}

std::string keyed_digest(std::string_view id, std::string_view salt) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  HMAC(EVP_sha256(), salt.data(), static_cast<int>(salt.size()),
       reinterpret_cast<const unsigned char*>(id.data()), id.size(), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

LogEntry anonymize(const LogEntry& entry, std::string_view salt) {
  if (salt.empty()) return entry;
  return LogEntry{entry.timestamp, keyed_digest(entry.host_id, salt),
                  keyed_digest(entry.request_id, salt)};
}

std::optional<LogEntry> LineParser::feed(std::string_view raw) {
  ++counters_.lines;
  if (counters_.lines == 1 && format_ == LogFormat::triple_csv && is_csv_header(raw))
    return std::nullopt;
  auto result = parse_line(raw, format_, options_);
  if (auto* entry = std::get_if<LogEntry>(&result)) {
    ++counters_.parsed;
    return salt_.empty() ? std::move(*entry) : anonymize(*entry, salt_);
  }
  ++counters_.malformed;
  return std::nullopt;
}

}  // namespace botscope::ingest
