#include "botscope/bot_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace botscope::sim {

namespace {

bool by_time(const LogEntry& a, const LogEntry& b) { return a.timestamp < b.timestamp; }

double positive_gap(std::mt19937_64& rng, double mean, double stddev) {
  std::normal_distribution<double> g(mean, stddev);
  for (;;) {
    const double x = g(rng);
    if (x > 0.0) return x;
  }
}

std::string dotted(std::uint32_t ip) {
  return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xFF) + "." +
         std::to_string((ip >> 8) & 0xFF) + "." + std::to_string(ip & 0xFF);
}

std::string fresh_ip(std::mt19937_64& rng, std::uint32_t base, int prefix, std::set<std::string>& taken) {
  std::uniform_int_distribution<std::uint32_t> host(1, (1u << (32 - prefix)) - 2);
  for (;;) {
    std::string ip = dotted(base | host(rng));
    if (taken.insert(ip).second) return ip;
  }
}

}  // namespace

BotMode parse_bot_mode(const std::string& name) {
  if (name == "single_request") return BotMode::single_request;
  if (name == "random_list") return BotMode::random_list;
  if (name == "fixed_list") return BotMode::fixed_list;
  if (name == "random_walk") return BotMode::random_walk;
  throw std::invalid_argument("unknown bot mode: " + name);
}

const char* bot_mode_name(BotMode mode) {
  switch (mode) {
    case BotMode::single_request: return "single_request";
    case BotMode::random_list: return "random_list";
    case BotMode::fixed_list: return "fixed_list";
    case BotMode::random_walk: return "random_walk";
  }
  return "?";
}

SiteGraph random_site_graph(std::size_t nodes, std::size_t out_degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, nodes - 1);
  SiteGraph g;
  for (std::size_t i = 0; i < nodes; ++i) {
    auto& links = g["/p" + std::to_string(i)];
    for (std::size_t e = 0; e < out_degree; ++e) links.push_back("/p" + std::to_string(pick(rng)));
  }
  return g;
}

void SimConfig::validate() const {
  if (!(mean_interval > 0.0)) throw std::invalid_argument("mean_interval must be positive");
  if (!(rate_multiplier > 0.0)) throw std::invalid_argument("rate_multiplier must be positive");
  if (interval_stddev < 0.0) throw std::invalid_argument("interval_stddev must be >= 0");
  if (duration <= 0) throw std::invalid_argument("duration must be positive");
  if (mode != BotMode::random_walk && link_list.empty())
    throw std::invalid_argument("link_list must be non-empty for list modes");
}

BotStream simulate_bot(const SimConfig& cfg, const SiteGraph* graph) {
  cfg.validate();
  if (cfg.mode == BotMode::random_walk && (!graph || graph->empty()))
    throw std::invalid_argument("random_walk mode needs a site graph");

  std::mt19937_64 rng(cfg.seed);
  const double mean = cfg.mean_interval / cfg.rate_multiplier;
  const double sd = cfg.interval_stddev / cfg.rate_multiplier;

  std::vector<std::string> nodes;
  if (graph)
    for (const auto& [node, _] : *graph) nodes.push_back(node);
  auto random_node = [&] {
    return nodes[std::uniform_int_distribution<std::size_t>(0, nodes.size() - 1)(rng)];
  };
  auto random_link = [&] {
    return cfg.link_list[std::uniform_int_distribution<std::size_t>(0, cfg.link_list.size() - 1)(rng)];
  };

  BotStream out;
  out.label = {cfg.host_id, true, std::nullopt, cfg.start};
  std::string current;
  std::int64_t block = -1;
  std::size_t visit = 0;
  const std::int64_t end = cfg.start + cfg.duration;
  for (double t = static_cast<double>(cfg.start); t < static_cast<double>(end); t += positive_gap(rng, mean, sd)) {
    const auto ts = static_cast<std::int64_t>(std::floor(t));
    switch (cfg.mode) {
      case BotMode::single_request: {
        const std::int64_t b = (ts - cfg.start) / cfg.rechoose_every;
        if (b != block) {
          block = b;
          current = random_link();
        }
        break;
      }
      case BotMode::random_list: current = random_link(); break;
      case BotMode::fixed_list: current = cfg.link_list[visit % cfg.link_list.size()]; break;
      case BotMode::random_walk: {
        if (current.empty()) {
          current = random_node();
          break;
        }
        auto it = graph->find(current);
        if (it == graph->end() || it->second.empty()) {
          current = random_node();
        } else {
          const auto& links = it->second;
          current = links[std::uniform_int_distribution<std::size_t>(0, links.size() - 1)(rng)];
        }
        break;
      }
    }
    out.entries.push_back({ts, cfg.host_id, current});
    ++visit;
  }
  if (!out.entries.empty()) out.label.first_request_ts = out.entries.front().timestamp;
  return out;
}

LabeledStream generate_background(const BackgroundConfig& cfg) {
  if (cfg.catalog == 0 || cfg.duration <= 0) throw std::invalid_argument("empty background config");
  std::mt19937_64 rng(cfg.seed);

  std::vector<double> weights(cfg.catalog);
  for (std::size_t r = 0; r < cfg.catalog; ++r)
    weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_shape);
  std::discrete_distribution<std::size_t> zipf(weights.begin(), weights.end());
  std::vector<std::size_t> shared_rank(cfg.catalog);
  std::iota(shared_rank.begin(), shared_rank.end(), 0);

  std::set<std::string> taken;
  LabeledStream out;
  std::uniform_real_distribution<double> when(static_cast<double>(cfg.start),
                                              static_cast<double>(cfg.start + cfg.duration));
  std::poisson_distribution<int> sessions(cfg.sessions_per_host);
  std::poisson_distribution<int> length(std::max(cfg.mean_session_requests - 1.0, 0.0));
  const std::int64_t end = cfg.start + cfg.duration;

  for (std::size_t h = 0; h < cfg.hosts; ++h) {
    const std::string id = fresh_ip(rng, 10u << 24, 8, taken);
    std::vector<std::size_t> rank = shared_rank;
    if (!cfg.shared_popularity) std::shuffle(rank.begin(), rank.end(), rng);

    GoldLabel label{id, false, std::nullopt, end};
    const int count = std::max(1, sessions(rng));
    for (int s = 0; s < count; ++s) {
      double t = when(rng);
      const int visits = 1 + length(rng);
      for (int v = 0; v < visits && t < static_cast<double>(end); ++v) {
        const auto ts = static_cast<std::int64_t>(std::floor(t));
        const std::string page = "/r" + std::to_string(rank[zipf(rng)]);
        out.entries.push_back({ts, id, page});
        for (std::size_t a = 0; a < cfg.asset_fanout; ++a)
          out.entries.push_back({ts, id, page + "/asset" + std::to_string(a)});
        label.first_request_ts = std::min(label.first_request_ts, ts);
        t += positive_gap(rng, cfg.mean_interval, cfg.interval_stddev);
      }
    }
    out.labels.push_back(std::move(label));
  }
  std::stable_sort(out.entries.begin(), out.entries.end(), by_time);
  return out;
}

LabeledStream inject_traffic(const LabeledStream& background, const std::vector<BotStream>& bots,
                             std::size_t duplication, std::uint64_t seed, std::int64_t jitter) {
  if (duplication == 0) return background;
  std::mt19937_64 rng(seed);
  std::set<std::string> taken;
  for (const auto& l : background.labels) taken.insert(l.host_id);
  for (const auto& e : background.entries) taken.insert(e.host_id);

  LabeledStream out = background;
  std::vector<LogEntry> injected;
  std::uniform_int_distribution<std::int64_t> shake(-jitter, jitter);
  for (std::size_t b = 0; b < bots.size(); ++b) {
    const auto& bot = bots[b];
    for (std::size_t copy = 0; copy <= duplication; ++copy) {
      std::string id = bot.label.host_id;
      if (copy > 0 || !taken.insert(id).second) id = fresh_ip(rng, (172u << 24) | (16u << 16), 12, taken);
      std::int64_t first = bot.entries.empty() ? bot.label.first_request_ts : INT64_MAX;
      for (const auto& e : bot.entries) {
        std::int64_t ts = e.timestamp;
        if (jitter > 0 && copy > 0) ts = std::max<std::int64_t>(0, ts + shake(rng));
        first = std::min(first, ts);
        injected.push_back({ts, id, e.request_id});
      }
      out.labels.push_back({id, true, b + 1, first});
    }
  }
  std::stable_sort(injected.begin(), injected.end(), by_time);
  std::vector<LogEntry> merged;
  merged.reserve(out.entries.size() + injected.size());
  std::merge(out.entries.begin(), out.entries.end(), injected.begin(), injected.end(),
             std::back_inserter(merged), by_time);
  out.entries = std::move(merged);
  return out;
}

void write_csv(const std::vector<LogEntry>& entries, std::ostream& out) {
  out << "timestamp,host,request\n";
  for (const auto& e : entries) out << e.timestamp << ',' << e.host_id << ',' << e.request_id << '\n';
}

void write_labels(const std::vector<GoldLabel>& labels, std::ostream& out) {
  out << "host_id,is_bot,botnet_id,first_request_ts\n";
  for (const auto& l : labels) {
    out << l.host_id << ',' << (l.is_bot ? 1 : 0) << ',';
    if (l.botnet_id) out << *l.botnet_id;
    out << ',' << l.first_request_ts << '\n';
  }
}

}  // namespace botscope::sim
