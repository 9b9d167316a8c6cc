#include "botscope/window_engine.hpp"

#include <algorithm>

namespace botscope::window {

namespace {

std::int64_t floor_to(std::int64_t t, std::int64_t unit) {
  std::int64_t q = t / unit;
  if (t % unit != 0 && t < 0) --q;
  return q * unit;
}

void subtract_into(SparseRow& row, const SparseRow& d) {
  std::map<HostKey, std::int64_t> cells(row.begin(), row.end());
  for (const auto& [k, v] : d) cells[k] -= v;
  row.clear();
  for (const auto& [k, v] : cells)
    if (v != 0) row.emplace_back(k, v);
}

}  // namespace

WindowConfig WindowConfig::sliding(std::int64_t len, std::int64_t slack) {
  return WindowConfig{len, std::max<std::int64_t>(1, len / 10), slack, WindowMode::sliding};
}

WindowConfig WindowConfig::fixed(std::int64_t len, std::int64_t slack) {
  return WindowConfig{len, len, slack, WindowMode::fixed};
}

void WindowConfig::validate() const {
  if (window_len <= 0) throw std::invalid_argument("window_len_secs must be positive");
  if (step <= 0 || step > window_len)
    throw std::invalid_argument("step_secs must satisfy 0 < step <= window_len");
  if (mode == WindowMode::fixed && step != window_len)
    throw std::invalid_argument("fixed mode requires step == window_len");
  if (reorder_slack < 0) throw std::invalid_argument("reorder_slack_secs must be >= 0");
}

WindowMode parse_mode(const std::string& name) {
  if (name == "fixed") return WindowMode::fixed;
  if (name == "sliding") return WindowMode::sliding;
  throw std::invalid_argument("mode must be fixed or sliding, got " + name);
}

std::vector<HostKey> CountMatrix::host_keys() const {
  std::vector<HostKey> keys;
  keys.reserve(host_ids.size());
  for (const auto& [k, _] : host_ids) keys.push_back(k);
  return keys;
}

DenseMatrix CountMatrix::to_dense() const {
  std::map<HostKey, std::size_t> pos;
  for (const auto& [k, _] : host_ids) pos.emplace(k, pos.size());
  DenseMatrix d(rows.size(), host_ids.size());
  std::size_t i = 0;
  for (const auto& [_, row] : rows) {
    for (const auto& [k, v] : row) d(i, pos.at(k)) = static_cast<double>(v);
    ++i;
  }
  return d;
}

CountMatrix apply_delta(const CountMatrix& before, const WindowDelta& delta) {
  CountMatrix after = before;
  for (const auto& r : delta.removed_rows) {
    after.rows.erase(r.key);
    after.request_ids.erase(r.key);
  }
  for (const auto& r : delta.changed_rows) subtract_into(after.rows.at(r.key), r.values);
  for (const auto& r : delta.added_rows) {
    after.rows[r.key] = r.values;
    after.request_ids[r.key] = r.request_id;
  }
  for (const auto& [k, id] : delta.added_hosts) after.host_ids[k] = id;
  for (auto k : delta.removed_hosts) after.host_ids.erase(k);
  return after;
}

WindowEngine::WindowEngine(WindowConfig config) : config_(config) { config_.validate(); }

std::uint32_t WindowEngine::intern_request(const std::string& id) {
  auto [it, inserted] = request_intern_.try_emplace(id, static_cast<std::uint32_t>(request_names_.size()));
  if (inserted) request_names_.push_back(id);
  return it->second;
}

std::uint32_t WindowEngine::intern_host(const std::string& id) {
  auto [it, inserted] = host_intern_.try_emplace(id, static_cast<std::uint32_t>(host_names_.size()));
  if (inserted) host_names_.push_back(id);
  return it->second;
}

PushResult WindowEngine::push_entry(const LogEntry& entry) {
  const std::int64_t ts = entry.timestamp;
  if (!started_) {
    started_ = true;
    start_ = floor_to(ts, config_.window_len);
    latest_ = ts;
    closed_until_ = start_;
  }
  if (ts < latest_ - config_.reorder_slack || ts < closed_until_ || ts < start_) {
    ++counters_.stale;
    return PushResult::stale;
  }
  latest_ = std::max(latest_, ts);
  buffer_[ts].emplace_back(intern_request(entry.request_id), intern_host(entry.host_id));
  ++buffered_;
  ++counters_.accepted;
  return PushResult::accepted;
}

std::optional<std::int64_t> WindowEngine::watermark() const {
  if (!started_) return std::nullopt;
  return latest_ - config_.reorder_slack;
}

void WindowEngine::collect(std::int64_t from, std::int64_t to, int sign,
                           std::map<CellKey, std::int64_t>& out) const {
  for (auto it = buffer_.lower_bound(from); it != buffer_.end() && it->first < to; ++it)
    for (const auto& cell : it->second) out[cell] += sign;
}

void WindowEngine::drop_before(std::int64_t t) {
  auto end = buffer_.lower_bound(t);
  for (auto it = buffer_.begin(); it != end; ++it) buffered_ -= it->second.size();
  buffer_.erase(buffer_.begin(), end);
}

bool WindowEngine::try_prime(std::int64_t now) {
  if (primed_) return true;
  if (!started_ || now < window_end()) return false;

  std::map<CellKey, std::int64_t> cells;
  collect(start_, window_end(), +1, cells);
  for (const auto& [cell, count] : cells) {
    const auto [req, host] = cell;
    auto col = col_of_.find(host);
    if (col == col_of_.end()) {
      col = col_of_.emplace(host, HostKey{next_col_++}).first;
      counts_.host_ids.emplace(col->second, host_names_[host]);
    }
    auto row = row_of_.find(req);
    if (row == row_of_.end()) {
      row = row_of_.emplace(req, RowKey{next_row_++}).first;
      counts_.request_ids.emplace(row->second, request_names_[req]);
    }
    counts_.rows[row->second].emplace_back(col->second, count);
    host_total_[host] += count;
  }
  for (auto& [_, row] : counts_.rows) std::sort(row.begin(), row.end());
  closed_until_ = window_end();
  primed_ = true;
  return true;
}

std::optional<WindowDelta> WindowEngine::advance_window(std::int64_t now) {
  if (!primed_) throw std::logic_error("advance_window called before the first window was primed");
  const std::int64_t old_end = window_end();
  if (now < old_end + config_.step) return std::nullopt;

  // Net count change per (request, host) cell: + entering, - leaving.
  std::map<CellKey, std::int64_t> net;
  collect(start_, start_ + config_.step, -1, net);
  collect(old_end, old_end + config_.step, +1, net);

  WindowDelta delta;
  delta.n_before = counts_.n();

  // Host columns first, so rows can reference keys of newly appearing hosts.
  std::map<std::uint32_t, std::int64_t> host_net;
  for (const auto& [cell, v] : net)
    if (v != 0) host_net[cell.second] += v;
  std::vector<std::uint32_t> vanished;
  for (const auto& [host, v] : host_net) {
    if (v == 0) continue;
    auto& total = host_total_[host];
    const bool was_present = total > 0;
    total += v;
    if (!was_present && total > 0) {
      const HostKey key{next_col_++};
      col_of_[host] = key;
      delta.added_hosts.emplace_back(key, host_names_[host]);
    } else if (was_present && total == 0) {
      vanished.push_back(host);
    }
  }

  // Group cell changes by request row.
  std::map<std::uint32_t, std::vector<std::pair<HostKey, std::int64_t>>> by_request;
  for (const auto& [cell, v] : net)
    if (v != 0) by_request[cell.first].emplace_back(col_of_.at(cell.second), v);

  for (auto& [req, changes] : by_request) {
    std::sort(changes.begin(), changes.end());
    auto row_it = row_of_.find(req);
    if (row_it == row_of_.end()) {
      // Absent before; anything left after is an appended row.
      DeltaRow added{RowKey{next_row_++}, {}, request_names_[req]};
      for (const auto& [k, v] : changes)
        if (v != 0) added.values.emplace_back(k, v);
      if (added.values.empty()) continue;
      row_of_.emplace(req, added.key);
      counts_.rows[added.key] = added.values;
      counts_.request_ids[added.key] = added.request_id;
      delta.added_rows.push_back(std::move(added));
      continue;
    }
    const RowKey key = row_it->second;
    SparseRow& row = counts_.rows.at(key);
    SparseRow d;
    for (const auto& [k, v] : changes) d.emplace_back(k, -v);  // old - new
    SparseRow updated = row;
    subtract_into(updated, d);
    if (updated.empty()) {
      delta.removed_rows.push_back(DeltaRow{key, row, {}});
      counts_.rows.erase(key);
      counts_.request_ids.erase(key);
      row_of_.erase(row_it);
    } else {
      delta.changed_rows.push_back(DeltaRow{key, std::move(d), {}});
      row = std::move(updated);
    }
  }
  auto by_key = [](const DeltaRow& a, const DeltaRow& b) { return a.key < b.key; };
  std::sort(delta.removed_rows.begin(), delta.removed_rows.end(), by_key);
  std::sort(delta.changed_rows.begin(), delta.changed_rows.end(), by_key);

  for (const auto& [key, id] : delta.added_hosts) counts_.host_ids.emplace(key, id);
  for (auto host : vanished) {
    const HostKey key = col_of_.at(host);
    delta.removed_hosts.push_back(key);
    counts_.host_ids.erase(key);
    col_of_.erase(host);
    host_total_.erase(host);
  }
  std::sort(delta.removed_hosts.begin(), delta.removed_hosts.end());

  start_ += config_.step;
  closed_until_ = window_end();
  drop_before(start_);
  delta.window_start = start_;
  delta.window_end = window_end();
  delta.n_after = counts_.n();
  ++counters_.slides;
  return delta;
}

}  // namespace botscope::window
