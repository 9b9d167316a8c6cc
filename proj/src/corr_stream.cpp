#include "botscope/corr_stream.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>

#include "botscope/eigen_oracle.hpp"

namespace botscope::corr {

namespace {

void index_columns(CorrelationState& st) {
  st.column_index.clear();
  st.column_index.reserve(st.columns.size());
  for (std::size_t j = 0; j < st.columns.size(); ++j) st.column_index.emplace(st.columns[j], j);
}

void load_statistics(CorrelationState& st, oracle::ColumnStatistics&& stats) {
  st.n = stats.n;
  st.col_sum = std::move(stats.col_sum);
  st.col_sumsq = std::move(stats.col_sumsq);
  st.b = std::move(stats.mean);
  st.sigma = std::move(stats.sigma);
  st.active = std::move(stats.active);
  st.r = std::move(stats.r);
  st.max_count = stats.max_count;
  st.slides_since_anchor = 0;
}

std::vector<double> densify(const CorrelationState& st, const SparseRow& row) {
  std::vector<double> out(st.m, 0.0);
  for (const auto& [k, v] : row) {
    auto it = st.column_index.find(k);
    if (it != st.column_index.end()) out[it->second] = static_cast<double>(v);
  }
  return out;
}

void subtract_sparse(SparseRow& row, const SparseRow& d) {
  std::map<HostKey, std::int64_t> cells(row.begin(), row.end());
  for (const auto& [k, v] : d) cells[k] -= v;
  row.clear();
  for (const auto& [k, v] : cells)
    if (v != 0) row.emplace_back(k, v);
}

void commit_rows(CorrelationState& st, const window::WindowDelta& delta) {
  for (const auto& r : delta.removed_rows) st.x_raw.erase(r.key);
  for (const auto& r : delta.changed_rows) subtract_sparse(st.x_raw.at(r.key), r.values);
  for (const auto& r : delta.added_rows) st.x_raw[r.key] = r.values;
}

}  // namespace

std::size_t CorrelationState::active_count() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), 1));
}

CorrelationState init_state(const window::CountMatrix& counts, const CorrelationOptions& options) {
  CorrelationState st;
  st.columns = counts.host_keys();
  st.m = st.columns.size();
  index_columns(st);
  load_statistics(st, oracle::recompute_statistics(counts.rows, st.columns, options.sigma_tol));
  st.x_raw.reserve(counts.rows.size());
  for (const auto& [key, row] : counts.rows) st.x_raw.emplace(key, row);
  return st;
}

void reanchor(CorrelationState& st, const CorrelationOptions& options) {
  load_statistics(st, oracle::recompute_statistics(st.x_raw, st.columns, options.sigma_tol));
}

void align_columns(CorrelationState& st, const window::WindowDelta& delta) {
  if (delta.added_hosts.empty() && delta.removed_hosts.empty()) return;

  std::vector<std::size_t> keep;
  keep.reserve(st.m);
  for (std::size_t j = 0; j < st.m; ++j)
    if (!std::binary_search(delta.removed_hosts.begin(), delta.removed_hosts.end(), st.columns[j]))
      keep.push_back(j);
  const std::size_t m_new = keep.size() + delta.added_hosts.size();

  CorrelationState out;
  out.columns.reserve(m_new);
  out.col_sum.reserve(m_new);
  for (std::size_t j : keep) {
    out.columns.push_back(st.columns[j]);
    out.col_sum.push_back(st.col_sum[j]);
    out.col_sumsq.push_back(st.col_sumsq[j]);
    out.b.push_back(st.b[j]);
    out.sigma.push_back(st.sigma[j]);
    out.active.push_back(st.active[j]);
  }
  for (const auto& [key, _] : delta.added_hosts) {
    out.columns.push_back(key);
    out.col_sum.push_back(0);
    out.col_sumsq.push_back(0);
    out.b.push_back(0.0);
    out.sigma.push_back(0.0);
    out.active.push_back(0);
  }
  SymmetricMatrix r(m_new);
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t c = a; c < keep.size(); ++c) r(a, c) = st.r(keep[a], keep[c]);

  st.columns = std::move(out.columns);
  st.col_sum = std::move(out.col_sum);
  st.col_sumsq = std::move(out.col_sumsq);
  st.b = std::move(out.b);
  st.sigma = std::move(out.sigma);
  st.active = std::move(out.active);
  st.r = std::move(r);
  st.m = m_new;
  index_columns(st);
}

SlideBlocks materialize_blocks(const CorrelationState& st, const window::WindowDelta& delta) {
  SlideBlocks bl;
  bl.n_before = st.n;
  bl.n_after = st.n + delta.added_rows.size() - delta.removed_rows.size();
  bl.colsum_removed.assign(st.m, 0);
  bl.colsum_d.assign(st.m, 0);
  bl.colsum_added.assign(st.m, 0);
  bl.sumsq_change.assign(st.m, 0);

  for (const auto& row : delta.removed_rows) {
    bl.removed.push_back(densify(st, row.values));
    for (const auto& [k, v] : row.values) {
      auto it = st.column_index.find(k);
      if (it == st.column_index.end()) continue;
      bl.colsum_removed[it->second] += v;
      bl.sumsq_change[it->second] -= v * v;
    }
  }
  for (const auto& row : delta.changed_rows) {
    const SparseRow& old_row = st.x_raw.at(row.key);
    bl.changed_old.push_back(densify(st, old_row));
    const auto& old_dense = bl.changed_old.back();
    auto& d = bl.changed_d.emplace_back();
    for (const auto& [k, v] : row.values) {
      auto it = st.column_index.find(k);
      if (it == st.column_index.end()) continue;
      const std::size_t j = it->second;
      d.emplace_back(j, static_cast<double>(v));
      bl.colsum_d[j] += v;
      const auto old_v = static_cast<std::int64_t>(old_dense[j]);
      const std::int64_t new_v = old_v - v;
      bl.sumsq_change[j] += new_v * new_v - old_v * old_v;
      bl.max_new_count = std::max(bl.max_new_count, new_v);
    }
  }
  for (const auto& row : delta.added_rows) {
    bl.added.push_back(densify(st, row.values));
    for (const auto& [k, v] : row.values) {
      auto it = st.column_index.find(k);
      if (it == st.column_index.end()) continue;
      bl.colsum_added[it->second] += v;
      bl.sumsq_change[it->second] += v * v;
      bl.max_new_count = std::max(bl.max_new_count, v);
    }
  }
  return bl;
}

MeanUpdate update_means(const CorrelationState& st, const SlideBlocks& bl) {
  if (bl.n_after < 2) throw EmptyWindow("window would hold fewer than 2 request rows");
  MeanUpdate mu;
  mu.n = bl.n_after;
  mu.col_sum.resize(st.m);
  mu.col_sumsq.resize(st.m);
  mu.b.resize(st.m);
  mu.delta_b.resize(st.m);
  const auto n_new = static_cast<double>(mu.n);
  for (std::size_t j = 0; j < st.m; ++j) {
    mu.col_sum[j] = st.col_sum[j] + bl.colsum_added[j] - bl.colsum_removed[j] - bl.colsum_d[j];
    mu.col_sumsq[j] = st.col_sumsq[j] + bl.sumsq_change[j];
    mu.b[j] = mu.n == st.n && mu.col_sum[j] == st.col_sum[j]
                  ? st.b[j]
                  : static_cast<double>(mu.col_sum[j]) / n_new;
    mu.delta_b[j] = mu.b[j] - st.b[j];
  }
  return mu;
}

CenteredUpdate update_centered(const CorrelationState& st, const SlideBlocks& bl,
                               const MeanUpdate& mu) {
  CenteredUpdate cu;
  cu.removed_u.reserve(bl.removed.size());
  for (const auto& x : bl.removed) {
    auto& u = cu.removed_u.emplace_back(st.m);
    for (std::size_t j = 0; j < st.m; ++j) u[j] = x[j] - st.b[j];
  }
  cu.changed_v.reserve(bl.changed_old.size());
  for (std::size_t r = 0; r < bl.changed_old.size(); ++r) {
    auto& v = cu.changed_v.emplace_back(bl.changed_old[r]);
    for (const auto& [j, d] : bl.changed_d[r]) v[j] -= d;
    for (std::size_t j = 0; j < st.m; ++j) v[j] -= mu.b[j];
  }
  cu.added_w.reserve(bl.added.size());
  for (const auto& x : bl.added) {
    auto& w = cu.added_w.emplace_back(st.m);
    for (std::size_t j = 0; j < st.m; ++j) w[j] = x[j] - mu.b[j];
  }
  return cu;
}

StddevUpdate update_stddevs(const CorrelationState& st, const SlideBlocks& bl,
                            const MeanUpdate& mu, const CenteredUpdate& cu,
                            const CorrelationOptions& options) {
  const std::size_t m = st.m;
  const double n_old = static_cast<double>(st.n);
  const double n_new = static_cast<double>(mu.n);
  const double kept = static_cast<double>(st.n - bl.removed.size());

  // Diagonal of Y.
  std::vector<double> y(m, 0.0);
  std::vector<double> sum_u(m, 0.0);
  for (const auto& u : cu.removed_u)
    for (std::size_t j = 0; j < m; ++j) {
      y[j] -= u[j] * u[j];
      sum_u[j] += u[j];
    }
  for (const auto& w : cu.added_w)
    for (std::size_t j = 0; j < m; ++j) y[j] += w[j] * w[j];
  for (std::size_t r = 0; r < cu.changed_v.size(); ++r)
    for (const auto& [j, d] : bl.changed_d[r]) y[j] -= 2.0 * cu.changed_v[r][j] * d + d * d;
  for (std::size_t j = 0; j < m; ++j) {
    const double db = mu.delta_b[j];
    if (!options.inject_fault) y[j] += kept * db * db;
    y[j] += 2.0 * sum_u[j] * db;
  }

  StddevUpdate su;
  su.sigma.resize(m);
  su.active.resize(m);
  const std::int64_t max_count = std::max(st.max_count, bl.max_new_count);
  const double tol = options.sigma_tol * std::max(1.0, static_cast<double>(max_count));
  const auto n_int = static_cast<__int128>(mu.n);
  for (std::size_t j = 0; j < m; ++j) {
    const bool constant =
        n_int * mu.col_sumsq[j] - static_cast<__int128>(mu.col_sum[j]) * mu.col_sum[j] == 0;
    double sigma = 0.0;
    if (!constant) {
      if (mu.n == st.n && y[j] == 0.0 && st.active[j]) {
        sigma = st.sigma[j];
      } else {
        const double old_ss = st.active[j] ? (n_old - 1.0) * st.sigma[j] * st.sigma[j] : 0.0;
        double var = (old_ss + y[j]) / (n_new - 1.0);
        if (var < 0.0) {
          var = 0.0;
          ++su.clamps;
        }
        sigma = std::sqrt(var);
      }
    }
    su.sigma[j] = sigma;
    su.active[j] = !constant && sigma >= tol;
  }
  return su;
}

SymmetricMatrix update_correlation(const CorrelationState& st, const SlideBlocks& bl,
                                   const MeanUpdate& mu, const CenteredUpdate& cu,
                                   const StddevUpdate& su, const CorrelationOptions& options,
                                   SlideCost* cost) {
  const std::size_t m = st.m;
  std::vector<std::size_t> act;
  for (std::size_t j = 0; j < m; ++j)
    if (su.active[j]) act.push_back(j);
  const std::size_t a = act.size();
  auto gather = [&](const std::vector<double>& full) {
    std::vector<double> out(a);
    for (std::size_t i = 0; i < a; ++i) out[i] = full[act[i]];
    return out;
  };
  std::vector<std::size_t> compact(m, SIZE_MAX);
  for (std::size_t i = 0; i < a; ++i) compact[act[i]] = i;

  SlideCost c;
  const std::uint64_t tri = a * (a + 1) / 2;
  SymmetricMatrix y(a);

  // Mean-shift terms: (n - n_removed) db db^T + s db^T + db s^T, s = sum of removed u.
  const double kept = static_cast<double>(st.n - bl.removed.size());
  const auto db = gather(mu.delta_b);
  std::vector<double> s(a, 0.0);
  for (const auto& u : cu.removed_u)
    for (std::size_t i = 0; i < a; ++i) s[i] += u[act[i]];
  for (std::size_t i = 0; i < a; ++i) {
    auto row = y.upper_row(i);
    const double shift = options.inject_fault ? 0.0 : kept * db[i];
    for (std::size_t j = i; j < a; ++j) row[j - i] += shift * db[j] + s[i] * db[j] + db[i] * s[j];
  }
  c.correction_terms += 2;
  c.flops += 3 * tri;

  auto rank_one = [&](const std::vector<double>& full, double sign) {
    const auto x = gather(full);
    for (std::size_t i = 0; i < a; ++i) {
      auto row = y.upper_row(i);
      const double xi = sign * x[i];
      if (xi == 0.0) continue;
      for (std::size_t j = i; j < a; ++j) row[j - i] += xi * x[j];
    }
    ++c.correction_terms;
    c.flops += tri;
  };
  for (const auto& w : cu.added_w) rank_one(w, +1.0);
  for (const auto& u : cu.removed_u) rank_one(u, -1.0);

  // Changed rows: -(v D^T + D v^T + D D^T); D is sparse.
  for (std::size_t r = 0; r < cu.changed_v.size(); ++r) {
    const auto& v = cu.changed_v[r];
    std::vector<std::pair<std::size_t, double>> d;
    for (const auto& [j, val] : bl.changed_d[r])
      if (compact[j] != SIZE_MAX) d.emplace_back(compact[j], val);
    for (const auto& [p, dp] : d) {
      for (std::size_t i = 0; i < a; ++i) y(i, p) -= (i == p ? 2.0 : 1.0) * v[act[i]] * dp;
      for (const auto& [q, dq] : d)
        if (q >= p) y(p, q) -= dp * dq;
    }
    ++c.correction_terms;
    c.flops += d.size() * (a + d.size());
  }

  // Rescale: R'_ij = ratio s_i s_j R_ij + Y_ij / ((n'-1) sigma'_i sigma'_j).
  const double ratio = static_cast<double>(st.n - 1) / static_cast<double>(mu.n - 1);
  const double denom = static_cast<double>(mu.n - 1);
  std::vector<double> scale(a), inv(a);
  for (std::size_t i = 0; i < a; ++i) {
    const std::size_t j = act[i];
    scale[i] = st.active[j] ? st.sigma[j] / su.sigma[j] : 0.0;
    inv[i] = 1.0 / su.sigma[j];
  }
  SymmetricMatrix out(m);
  for (std::size_t i = 0; i < a; ++i) {
    const auto yrow = y.upper_row(i);
    for (std::size_t j = i; j < a; ++j) {
      const double old = scale[i] == 0.0 || scale[j] == 0.0 ? 0.0 : st.r(act[i], act[j]);
      out(act[i], act[j]) = ratio * scale[i] * scale[j] * old + yrow[j - i] * inv[i] * inv[j] / denom;
    }
  }
  c.flops += 2 * tri;
  if (cost) *cost = c;
  return out;
}

void apply_slide(CorrelationState& st, const window::WindowDelta& delta,
                 const CorrelationOptions& options) {
  if (delta.n_before != st.n)
    throw std::logic_error("apply_slide: delta does not belong to this state");
  if (delta.n_after < 2) throw EmptyWindow("window would hold fewer than 2 request rows");

  if (delta.is_identity()) {
    st.last_cost = {};
    if (options.reanchor_period != 0 && ++st.slides_since_anchor >= options.reanchor_period)
      reanchor(st, options);
    return;
  }

  align_columns(st, delta);
  if (options.reanchor_period != 0 && st.slides_since_anchor + 1 >= options.reanchor_period) {
    commit_rows(st, delta);
    reanchor(st, options);
    st.last_cost = {};
    return;
  }

  const SlideBlocks blocks = materialize_blocks(st, delta);
  const MeanUpdate means = update_means(st, blocks);
  const CenteredUpdate centered = update_centered(st, blocks, means);
  StddevUpdate stddevs = update_stddevs(st, blocks, means, centered, options);
  SlideCost cost;
  SymmetricMatrix r = update_correlation(st, blocks, means, centered, stddevs, options, &cost);

  st.n = means.n;
  st.col_sum = means.col_sum;
  st.col_sumsq = means.col_sumsq;
  st.b = means.b;
  st.sigma = std::move(stddevs.sigma);
  st.active = std::move(stddevs.active);
  st.sigma_clamps += stddevs.clamps;
  st.r = std::move(r);
  st.max_count = std::max(st.max_count, blocks.max_new_count);
  st.last_cost = cost;
  ++st.slides_since_anchor;
  commit_rows(st, delta);
}

DenseMatrix materialize_centered(const CorrelationState& st) {
  std::vector<RowKey> keys;
  keys.reserve(st.x_raw.size());
  for (const auto& [k, _] : st.x_raw) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  DenseMatrix x(keys.size(), st.m);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = 0; j < st.m; ++j) x(i, j) = -st.b[j];
    for (const auto& [k, v] : st.x_raw.at(keys[i])) {
      auto it = st.column_index.find(k);
      if (it != st.column_index.end()) x(i, it->second) += static_cast<double>(v);
    }
  }
  return x;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("truncated snapshot");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

}  // namespace

void write_snapshot(const CorrelationState& st, std::ostream& out) {
  put_u64(out, st.n);
  put_u64(out, st.m);
  for (double v : st.b) put_u64(out, std::bit_cast<std::uint64_t>(v));
  for (double v : st.sigma) put_u64(out, std::bit_cast<std::uint64_t>(v));
  for (std::size_t i = 0; i < st.m; ++i)
    for (std::size_t j = 0; j < st.m; ++j) put_u64(out, std::bit_cast<std::uint64_t>(st.r(i, j)));
}

Snapshot read_snapshot(std::istream& in) {
  Snapshot s;
  s.n = get_u64(in);
  s.m = get_u64(in);
  s.b.resize(s.m);
  s.sigma.resize(s.m);
  for (auto& v : s.b) v = std::bit_cast<double>(get_u64(in));
  for (auto& v : s.sigma) v = std::bit_cast<double>(get_u64(in));
  s.r = DenseMatrix(s.m, s.m);
  for (std::size_t i = 0; i < s.m; ++i)
    for (std::size_t j = 0; j < s.m; ++j) s.r(i, j) = std::bit_cast<double>(get_u64(in));
  return s;
}

}  // namespace botscope::corr
