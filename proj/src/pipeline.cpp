#include "botscope/pipeline.hpp"

#include <chrono>
#include <future>

namespace botscope::pipeline {

MultiMonitor::MultiMonitor(const std::vector<window::WindowConfig>& windows,
                           const DetectionParams& params,
                           const corr::CorrelationOptions& corr_options, std::uint64_t seed,
                           detect::Estimator estimator, bool parallel)
    : parallel_(parallel) {
  if (windows.empty()) throw std::invalid_argument("at least one window config is required");
  for (const auto& w : windows)
    detectors_.push_back(std::make_unique<detect::StreamDetector>(w, params, corr_options, seed, estimator));
}

void MultiMonitor::feed(const std::vector<LogEntry>& batch) {
  auto run = [&batch](detect::StreamDetector* d) {
    for (const auto& e : batch) d->push(e);
  };
  if (!parallel_ || detectors_.size() == 1) {
    for (auto& d : detectors_) run(d.get());
    return;
  }
  std::vector<std::future<void>> jobs;
  for (auto& d : detectors_) jobs.push_back(std::async(std::launch::async, run, d.get()));
  for (auto& j : jobs) j.get();
}

void MultiMonitor::finish() {
  for (auto& d : detectors_) d->finish();
}

std::vector<detect::BotnetAlert> MultiMonitor::take_alerts() {
  std::vector<detect::BotnetAlert> out;
  for (auto& d : detectors_)
    for (auto& a : d->take_alerts()) out.push_back(std::move(a));
  return out;
}

std::vector<detect::DiagnosticRecord> MultiMonitor::take_diagnostics() {
  std::vector<detect::DiagnosticRecord> out;
  for (auto& d : detectors_)
    for (auto& r : d->take_diagnostics()) out.push_back(std::move(r));
  return out;
}

std::uint64_t MultiMonitor::stale() const {
  std::uint64_t n = 0;
  for (const auto& d : detectors_) n += d->engine().counters().stale;
  return n;
}

RunResult run_stream(const std::vector<LogEntry>& entries, const window::WindowConfig& window,
                     const DetectionParams& params, std::uint64_t seed, detect::Estimator estimator,
                     const corr::CorrelationOptions& corr_options) {
  const auto t0 = std::chrono::steady_clock::now();
  detect::StreamDetector det(window, params, corr_options, seed, estimator);
  for (const auto& e : entries) det.push(e);
  det.finish();
  RunResult out;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.alerts = det.take_alerts();
  out.diagnostics = det.take_diagnostics();
  out.counters = det.counters();
  for (const auto& d : out.diagnostics) {
    out.estimate_flops += d.estimate_flops;
    out.slide_flops += d.slide_flops;
  }
  return out;
}

std::map<std::uint64_t, std::optional<std::int64_t>> detection_latency(
    const std::vector<detect::BotnetAlert>& alerts, const std::vector<sim::GoldLabel>& labels) {
  std::map<std::string, std::uint64_t> botnet_of;
  std::map<std::uint64_t, std::int64_t> first;
  for (const auto& l : labels) {
    if (!l.is_bot || !l.botnet_id) continue;
    botnet_of[l.host_id] = *l.botnet_id;
    auto [it, inserted] = first.emplace(*l.botnet_id, l.first_request_ts);
    if (!inserted) it->second = std::min(it->second, l.first_request_ts);
  }
  std::map<std::uint64_t, std::optional<std::int64_t>> out;
  for (const auto& [id, _] : first) out[id] = std::nullopt;
  for (const auto& a : alerts) {
    for (const auto& h : a.hosts) {
      auto it = botnet_of.find(h.id);
      if (it == botnet_of.end()) continue;
      auto& slot = out[it->second];
      const std::int64_t latency = a.window_end - first[it->second];
      if (!slot || latency < *slot) slot = latency;
    }
  }
  return out;
}

std::map<std::int64_t, std::set<std::string>> flagged_by_window(const RunResult& run) {
  std::map<std::int64_t, std::set<std::string>> out;
  for (const auto& d : run.diagnostics) out[d.window_end];
  for (const auto& a : run.alerts)
    for (const auto& h : a.hosts) out[a.window_end].insert(h.id);
  return out;
}

double flag_agreement(const RunResult& a, const RunResult& b) {
  const auto fa = flagged_by_window(a);
  const auto fb = flagged_by_window(b);
  std::size_t both = 0, equal = 0;
  for (const auto& [end, set] : fa) {
    auto it = fb.find(end);
    if (it == fb.end()) continue;
    ++both;
    equal += set == it->second;
  }
  return both == 0 ? 1.0 : static_cast<double>(equal) / static_cast<double>(both);
}

Scenario sparse_scenario(std::size_t hosts, std::uint64_t seed) {
  Scenario s;
  s.background.hosts = hosts;
  s.background.duration = 86400;
  s.background.sessions_per_host = 1.0;
  s.background.mean_session_requests = 12.0;
  s.background.seed = seed;
  s.bot_start = 40000;
  s.bot_duration = 3600;
  s.seed = seed;
  return s;
}

Scenario dense_scenario(std::size_t hosts, std::int64_t duration, std::uint64_t seed) {
  Scenario s;
  s.background.hosts = hosts;
  s.background.duration = duration;
  // One session per ~40 min of stream, each lasting ~26 min at 39 s spacing.
  s.background.sessions_per_host = static_cast<double>(duration) / 2400.0;
  s.background.mean_session_requests = 40.0;
  s.background.seed = seed;
  s.bot_start = duration / 2;
  s.bot_duration = 3600;
  s.seed = seed;
  return s;
}

sim::LabeledStream build_scenario(const Scenario& s) {
  auto background = sim::generate_background(s.background);
  if (s.botnet_hosts < 2) return background;
  sim::SimConfig bot;
  bot.mode = s.mode;
  for (std::size_t i = 0; i < s.links; ++i) bot.link_list.push_back("/r" + std::to_string(i));
  bot.start = s.bot_start;
  bot.duration = s.bot_duration;
  bot.rate_multiplier = s.bot_rate_multiplier;
  bot.seed = s.seed * 7919 + 17;
  sim::SiteGraph graph;
  if (s.mode == sim::BotMode::random_walk) graph = sim::random_site_graph(s.links, 4, bot.seed);
  auto stream = sim::simulate_bot(bot, s.mode == sim::BotMode::random_walk ? &graph : nullptr);
  return sim::inject_traffic(background, {stream}, s.botnet_hosts - 1, s.seed, s.jitter);
}

}  // namespace botscope::pipeline
