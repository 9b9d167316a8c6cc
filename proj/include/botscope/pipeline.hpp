#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "botscope/bot_sim.hpp"
#include "botscope/detector.hpp"

// Whole-stream drivers shared by the CLI, the benches and the acceptance suite.
namespace botscope::pipeline {

/// Several detectors (one per window config) fed from one stream. Batches are
/// processed concurrently across detectors; output order is fixed by detector
/// index, so results do not depend on scheduling.
class MultiMonitor {
 public:
  MultiMonitor(const std::vector<window::WindowConfig>& windows, const DetectionParams& params,
               const corr::CorrelationOptions& corr_options, std::uint64_t seed,
               detect::Estimator estimator = detect::Estimator::lanczos, bool parallel = true);

  void feed(const std::vector<LogEntry>& batch);
  void finish();

  std::vector<detect::BotnetAlert> take_alerts();
  std::vector<detect::DiagnosticRecord> take_diagnostics();

  std::uint64_t stale() const;
  std::size_t size() const { return detectors_.size(); }

 private:
  std::vector<std::unique_ptr<detect::StreamDetector>> detectors_;
  bool parallel_;
};

struct RunResult {
  std::vector<detect::BotnetAlert> alerts;
  std::vector<detect::DiagnosticRecord> diagnostics;
  detect::DetectorCounters counters;
  std::uint64_t estimate_flops = 0;
  std::uint64_t slide_flops = 0;
  double wall_seconds = 0.0;
};

RunResult run_stream(const std::vector<LogEntry>& entries, const window::WindowConfig& window,
                     const DetectionParams& params, std::uint64_t seed,
                     detect::Estimator estimator = detect::Estimator::lanczos,
                     const corr::CorrelationOptions& corr_options = {});

/// Seconds from a botnet's first request to the first alert naming one of its
/// hosts; nullopt when it was never detected. Keyed by gold botnet id.
std::map<std::uint64_t, std::optional<std::int64_t>> detection_latency(
    const std::vector<detect::BotnetAlert>& alerts, const std::vector<sim::GoldLabel>& labels);

/// Flagged host set per evaluated window (empty when no alert).
std::map<std::int64_t, std::set<std::string>> flagged_by_window(const RunResult& run);

/// Fraction of windows evaluated by both runs whose flagged sets are equal.
double flag_agreement(const RunResult& a, const RunResult& b);

/// Labeled stream with one injected botnet over a background.
struct Scenario {
  sim::BackgroundConfig background;
  std::size_t botnet_hosts = 20;  // original plus duplicates; below 2 means no botnet
  sim::BotMode mode = sim::BotMode::random_list;
  std::size_t links = 50;
  std::int64_t bot_start = 0;
  std::int64_t bot_duration = 3600;
  double bot_rate_multiplier = 1.0;
  std::int64_t jitter = 0;
  std::uint64_t seed = 1;
};

/// Background of `hosts` human-like hosts, each with one short session over a day.
Scenario sparse_scenario(std::size_t hosts, std::uint64_t seed);
/// Background where every host stays active through the stream.
Scenario dense_scenario(std::size_t hosts, std::int64_t duration, std::uint64_t seed);

sim::LabeledStream build_scenario(const Scenario& scenario);

}  // namespace botscope::pipeline
