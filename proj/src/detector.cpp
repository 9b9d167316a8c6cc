#include "botscope/detector.hpp"

#include <algorithm>
#include <cmath>

#include "botscope/eigen_oracle.hpp"

namespace botscope::detect {

std::vector<HostScore> host_scores(const lanczos::PrincipalEstimate& estimate,
                                   const std::vector<std::string>& host_ids,
                                   const std::vector<char>& active) {
  const double scale = std::sqrt(std::max(estimate.lambda_raw, 0.0));
  std::vector<HostScore> out;
  out.reserve(host_ids.size());
  for (std::size_t j = 0; j < host_ids.size(); ++j) {
    const double rho = active[j] ? estimate.eigvec[j] * scale : 0.0;
    out.push_back({host_ids[j], rho});
  }
  std::sort(out.begin(), out.end(), [](const HostScore& a, const HostScore& b) {
    return a.rho != b.rho ? a.rho > b.rho : a.id < b.id;
  });
  return out;
}

std::size_t knee_index(const std::vector<double>& rho, double theta) {
  for (std::size_t i = 0; i + 1 < rho.size(); ++i)
    if ((rho[i] - rho[i + 1]) / std::max(rho[i], 1e-12) >= theta) return i + 1;
  return rho.size();
}

std::vector<HostScore> knee_cutoff(const std::vector<HostScore>& sorted, double omega, double theta) {
  std::vector<double> rho;
  rho.reserve(sorted.size());
  for (const auto& s : sorted) rho.push_back(s.rho);
  const std::size_t keep = knee_index(rho, theta);
  std::vector<HostScore> out;
  for (std::size_t i = 0; i < keep; ++i)
    if (sorted[i].rho >= omega) out.push_back(sorted[i]);
  return out;
}

namespace {

std::size_t shared(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const auto& h : a) n += b.count(h);
  return n;
}

}  // namespace

std::uint64_t BotnetRegistry::merge(const std::set<std::string>& group) {
  std::set<std::string> hosts = group;
  std::vector<std::uint64_t> absorbed;
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& [id, net] : botnets_) {
      if (std::find(absorbed.begin(), absorbed.end(), id) != absorbed.end()) continue;
      if (shared(hosts, net.hosts) >= 2) {
        hosts.insert(net.hosts.begin(), net.hosts.end());
        absorbed.push_back(id);
        grew = true;
      }
    }
  }
  if (absorbed.empty()) {
    const std::uint64_t id = next_id_++;
    botnets_[id] = Botnet{id, std::move(hosts)};
    return id;
  }
  const std::uint64_t id = *std::min_element(absorbed.begin(), absorbed.end());
  for (auto other : absorbed)
    if (other != id) botnets_.erase(other);
  botnets_[id].hosts = std::move(hosts);
  return id;
}

std::optional<std::uint64_t> BotnetRegistry::find(const std::string& host) const {
  for (const auto& [id, net] : botnets_)
    if (net.hosts.count(host)) return id;
  return std::nullopt;
}

nlohmann::json to_json(const BotnetAlert& a) {
  nlohmann::json hosts = nlohmann::json::array();
  for (const auto& h : a.hosts) hosts.push_back({{"id", h.id}, {"rho", h.rho}});
  return {{"window_end", a.window_end},         {"window_len_secs", a.window_len_secs},
          {"principal_weight", a.principal_weight}, {"error_bound", a.error_bound},
          {"k_used", a.k_used},                 {"botnet_id", a.botnet_id},
          {"hosts", std::move(hosts)}};
}

nlohmann::json to_json(const DiagnosticRecord& r) {
  nlohmann::json j = {{"window_end", r.window_end},
                      {"window_len_secs", r.window_len_secs},
                      {"verdict", r.verdict},
                      {"lambda_norm", r.lambda_norm},
                      {"error_norm", r.error_norm},
                      {"k_used", r.k_used},
                      {"m", r.m},
                      {"m_active", r.m_active},
                      {"n", r.n},
                      {"correction_terms", r.correction_terms},
                      {"slide_flops", r.slide_flops},
                      {"estimate_flops", r.estimate_flops},
                      {"flagged", r.flagged}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

lanczos::PrincipalEstimate oracle_estimate(const SymmetricMatrix& r, const std::vector<char>& active,
                                           const DetectionParams& params) {
  lanczos::PrincipalEstimate est;
  const std::size_t m = r.size();
  est.eigvec.assign(m, 0.0);
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < m; ++j)
    if (active[j]) idx.push_back(j);
  est.m_active = idx.size();
  if (idx.size() < 2) return est;

  const auto top = oracle::jacobi_eigen(lanczos::compact_active(r, active));
  const double ma = static_cast<double>(idx.size());
  est.lambda_raw = top.eigenvalues.front();
  est.lambda_norm = est.lambda_raw / ma;
  est.k_used = idx.size();
  est.broke_down = true;
  est.flops = static_cast<std::uint64_t>(top.sweeps) * 8 * idx.size() * idx.size() * idx.size();
  double sum = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) sum += top.eigenvectors(a, 0);
  const double sign = sum < 0.0 ? -1.0 : 1.0;
  for (std::size_t a = 0; a < idx.size(); ++a) est.eigvec[idx[a]] = sign * top.eigenvectors(a, 0);
  est.verdict = est.lambda_norm >= params.omega ? lanczos::Verdict::warn : lanczos::Verdict::clear;
  return est;
}

std::uint64_t window_seed(std::uint64_t seed, std::int64_t window_end) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(window_end) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

WindowVerdict evaluate_window(const corr::CorrelationState& state,
                              const std::vector<std::string>& host_ids, std::int64_t window_end,
                              std::int64_t window_len, const DetectionParams& params,
                              std::uint64_t seed, Estimator estimator, BotnetRegistry& registry) {
  WindowVerdict out;
  out.estimate = estimator == Estimator::lanczos
                     ? lanczos::estimate_principal(state.r, params, seed, &state.active)
                     : oracle_estimate(state.r, state.active, params);
  if (out.estimate.verdict != lanczos::Verdict::warn) return out;

  out.flagged = knee_cutoff(host_scores(out.estimate, host_ids, state.active), params.omega,
                            params.knee_theta);
  if (out.flagged.empty()) return out;

  std::set<std::string> group;
  for (const auto& h : out.flagged) group.insert(h.id);
  BotnetAlert alert;
  alert.window_end = window_end;
  alert.window_len_secs = window_len;
  alert.principal_weight = out.estimate.lambda_norm;
  alert.error_bound = out.estimate.error_norm;
  alert.k_used = out.estimate.k_used;
  alert.botnet_id = registry.merge(group);
  alert.hosts = out.flagged;
  out.alert = std::move(alert);
  return out;
}

StreamDetector::StreamDetector(window::WindowConfig window, DetectionParams params,
                               corr::CorrelationOptions corr_options, std::uint64_t seed,
                               Estimator estimator)
    : engine_(window), params_(params), corr_options_(corr_options), seed_(seed), estimator_(estimator) {
  params_.validate();
}

window::PushResult StreamDetector::push(const LogEntry& entry) {
  const auto result = engine_.push_entry(entry);
  if (result == window::PushResult::accepted) {
    last_ts_ = std::max(last_ts_.value_or(entry.timestamp), entry.timestamp);
    process_until(*engine_.watermark());
  }
  return result;
}

void StreamDetector::finish() {
  if (last_ts_) process_until(*last_ts_ + 1);
}

std::vector<BotnetAlert> StreamDetector::take_alerts() { return std::exchange(alerts_, {}); }

std::vector<DiagnosticRecord> StreamDetector::take_diagnostics() {
  return std::exchange(diagnostics_, {});
}

void StreamDetector::process_until(std::int64_t now) {
  if (!engine_.primed()) {
    if (!engine_.try_prime(now)) return;
    evaluate(engine_.window_end(), 0, 0);
  }
  while (auto delta = engine_.advance_window(now)) slide(*delta);
}

void StreamDetector::slide(const window::WindowDelta& delta) {
  std::uint64_t terms = 0, flops = 0;
  if (estimator_ == Estimator::oracle) {
    state_.reset();
  } else if (state_) {
    try {
      corr::apply_slide(*state_, delta, corr_options_);
      terms = state_->last_cost.correction_terms;
      flops = state_->last_cost.flops;
    } catch (const corr::EmptyWindow&) {
      state_.reset();
    }
  }
  evaluate(delta.window_end, terms, flops);
}

void StreamDetector::evaluate(std::int64_t window_end, std::uint64_t terms, std::uint64_t flops) {
  ++counters_.windows;
  const auto& counts = engine_.counts();
  DiagnosticRecord diag;
  diag.window_end = window_end;
  diag.window_len_secs = engine_.config().window_len;
  diag.m = counts.m();
  diag.n = counts.n();
  diag.correction_terms = terms;
  diag.slide_flops = flops;

  if (counts.n() < 2) {
    ++counters_.empty_windows;
    state_.reset();
    diag.verdict = "skipped";
    diag.note = "fewer than 2 request rows";
    diagnostics_.push_back(std::move(diag));
    return;
  }
  if (!state_) {
    state_ = corr::init_state(counts, corr_options_);
    if (estimator_ == Estimator::lanczos && counters_.windows > 1) diag.note = "state re-initialized";
  }

  std::vector<std::string> ids;
  ids.reserve(state_->m);
  for (auto key : state_->columns) ids.push_back(counts.host_ids.at(key));

  auto verdict = evaluate_window(*state_, ids, window_end, engine_.config().window_len, params_,
                                 window_seed(seed_, window_end), estimator_, registry_);
  const auto& est = verdict.estimate;
  switch (est.verdict) {
    case lanczos::Verdict::warn: ++counters_.warn; break;
    case lanczos::Verdict::clear: ++counters_.clear; break;
    case lanczos::Verdict::inconclusive: ++counters_.inconclusive; break;
  }
  diag.verdict = lanczos::verdict_name(est.verdict);
  diag.lambda_norm = est.lambda_norm;
  diag.error_norm = est.error_norm;
  diag.k_used = est.k_used;
  diag.m_active = est.m_active;
  diag.estimate_flops = est.flops;
  diag.flagged = verdict.flagged.size();
  diagnostics_.push_back(std::move(diag));
  if (verdict.alert) {
    ++counters_.alerts;
    alerts_.push_back(std::move(*verdict.alert));
  }
}

}  // namespace botscope::detect
