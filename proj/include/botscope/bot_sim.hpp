#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "botscope/types.hpp"

// Labeled synthetic traffic: human-like background plus bots in four modes,
// duplicated under fresh host ids to form botnets.
namespace botscope::sim {

enum class BotMode { single_request, random_list, fixed_list, random_walk };

BotMode parse_bot_mode(const std::string& name);
const char* bot_mode_name(BotMode mode);

/// Request graph for random-walk bots: request -> linked requests.
using SiteGraph = std::map<std::string, std::vector<std::string>>;

/// Pages "/p0".."/p{nodes-1}", each linking to `out_degree` random others.
SiteGraph random_site_graph(std::size_t nodes, std::size_t out_degree, std::uint64_t seed);

struct SimConfig {
  BotMode mode = BotMode::random_list;
  std::vector<std::string> link_list;
  double mean_interval = 39.0;  // seconds between visits at rate_multiplier 1
  double interval_stddev = 13.0;
  std::int64_t start = 0;
  std::int64_t duration = 3600;
  double rate_multiplier = 1.0;
  std::int64_t rechoose_every = 7200;  // single_request picks a new link this often
  std::string host_id = "bot";
  std::uint64_t seed = 1;

  void validate() const;
};

struct GoldLabel {
  std::string host_id;
  bool is_bot = false;
  std::optional<std::uint64_t> botnet_id;
  std::int64_t first_request_ts = 0;

  friend bool operator==(const GoldLabel&, const GoldLabel&) = default;
};

struct BotStream {
  std::vector<LogEntry> entries;  // time-sorted
  GoldLabel label;
};

/// One bot host. Inter-arrival gaps are Gaussian (mean mean_interval /
/// rate_multiplier), redrawn while non-positive. random_walk needs a graph and
/// restarts from a random node at dead ends.
BotStream simulate_bot(const SimConfig& config, const SiteGraph* graph = nullptr);

struct LabeledStream {
  std::vector<LogEntry> entries;  // time-sorted
  std::vector<GoldLabel> labels;  // one per host
};

struct BackgroundConfig {
  std::size_t hosts = 200;
  std::size_t catalog = 2000;      // distinct request paths
  double zipf_shape = 1.2;
  bool shared_popularity = false;  // false: each host ranks the catalog in its own random order
  std::int64_t start = 0;
  std::int64_t duration = 86400;
  double sessions_per_host = 1.0;  // expected sessions over the whole duration
  double mean_session_requests = 12.0;
  double mean_interval = 39.0;
  double interval_stddev = 13.0;
  std::size_t asset_fanout = 0;  // extra entries per visit
  std::uint64_t seed = 1;
};

/// Independent human-like hosts: Poisson session starts, Poisson request
/// counts per session, Zipf request popularity.
LabeledStream generate_background(const BackgroundConfig& config);

/// Adds each bot stream plus `duplication` copies under fresh 172.16.0.0/12
/// ids (re-drawn on collision), all labeled with the bot stream's botnet id
/// (its 1-based index). Copies keep the original timing unless jitter > 0,
/// in which case each entry moves by a uniform integer in [-jitter, jitter].
/// duplication == 0 leaves the background untouched.
LabeledStream inject_traffic(const LabeledStream& background, const std::vector<BotStream>& bots,
                             std::size_t duplication, std::uint64_t seed, std::int64_t jitter = 0);

/// triple-csv with a header line.
void write_csv(const std::vector<LogEntry>& entries, std::ostream& out);
/// host_id,is_bot,botnet_id,first_request_ts
void write_labels(const std::vector<GoldLabel>& labels, std::ostream& out);

}  // namespace botscope::sim
