#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "botscope/corr_stream.hpp"
#include "botscope/lanczos.hpp"
#include "botscope/params.hpp"
#include "botscope/window_engine.hpp"

namespace botscope::detect {

struct HostScore {
  std::string id;
  double rho = 0.0;

  friend bool operator==(const HostScore&, const HostScore&) = default;
};

/// Loadings rho_j = mu(j) * sqrt(lambda_raw), sorted descending (ties by id).
/// Columns with active[j] == 0 score 0.
std::vector<HostScore> host_scores(const lanczos::PrincipalEstimate& estimate,
                                   const std::vector<std::string>& host_ids,
                                   const std::vector<char>& active);

/// Number of leading entries kept by the knee rule: up to and including the
/// first i with (rho_i - rho_{i+1}) / max(rho_i, 1e-12) >= theta, or all of them.
std::size_t knee_index(const std::vector<double>& sorted_rho, double theta);

/// Knee rule followed by the rho >= omega filter.
std::vector<HostScore> knee_cutoff(const std::vector<HostScore>& sorted, double omega, double theta);

struct Botnet {
  std::uint64_t id = 0;
  std::set<std::string> hosts;
};

/// Cross-window grouping: a group sharing two or more hosts with a known
/// botnet joins it; groups bridging several botnets collapse them into the
/// smallest id.
class BotnetRegistry {
 public:
  std::uint64_t merge(const std::set<std::string>& group);
  const std::map<std::uint64_t, Botnet>& botnets() const { return botnets_; }
  std::optional<std::uint64_t> find(const std::string& host) const;

 private:
  std::map<std::uint64_t, Botnet> botnets_;
  std::uint64_t next_id_ = 1;
};

struct BotnetAlert {
  std::int64_t window_end = 0;
  std::int64_t window_len_secs = 0;
  double principal_weight = 0.0;
  double error_bound = 0.0;
  std::size_t k_used = 0;
  std::uint64_t botnet_id = 0;
  std::vector<HostScore> hosts;
};

struct DiagnosticRecord {
  std::int64_t window_end = 0;
  std::int64_t window_len_secs = 0;
  std::string verdict;  // warn | clear | inconclusive | skipped
  double lambda_norm = 0.0;
  double error_norm = 0.0;
  std::size_t k_used = 0;
  std::size_t m = 0;
  std::size_t m_active = 0;
  std::size_t n = 0;
  std::uint64_t correction_terms = 0;
  std::uint64_t slide_flops = 0;
  std::uint64_t estimate_flops = 0;
  std::size_t flagged = 0;
  std::string note;
};

nlohmann::json to_json(const BotnetAlert& alert);
nlohmann::json to_json(const DiagnosticRecord& record);

enum class Estimator { lanczos, oracle };

/// Top eigenpair from the dense Jacobi solver, packaged like a Lanczos
/// estimate (d = 0, verdict from the exact normalized weight vs omega).
lanczos::PrincipalEstimate oracle_estimate(const SymmetricMatrix& r, const std::vector<char>& active,
                                           const DetectionParams& params);

/// Per-window seed so identical windows get identical estimates.
std::uint64_t window_seed(std::uint64_t seed, std::int64_t window_end);

struct WindowVerdict {
  lanczos::PrincipalEstimate estimate;
  std::vector<HostScore> flagged;
  std::optional<BotnetAlert> alert;
};

/// Detection on one window's statistics: estimate, scores, knee cut, merge.
WindowVerdict evaluate_window(const corr::CorrelationState& state,
                              const std::vector<std::string>& host_ids, std::int64_t window_end,
                              std::int64_t window_len, const DetectionParams& params,
                              std::uint64_t seed, Estimator estimator, BotnetRegistry& registry);

struct DetectorCounters {
  std::uint64_t windows = 0;
  std::uint64_t empty_windows = 0;
  std::uint64_t alerts = 0;
  std::uint64_t warn = 0, clear = 0, inconclusive = 0;
};

/// One detector per window length: window engine, correlation state and
/// estimator. Single-threaded; call push() in stream order, then finish().
class StreamDetector {
 public:
  StreamDetector(window::WindowConfig window, DetectionParams params,
                 corr::CorrelationOptions corr_options = {}, std::uint64_t seed = 0,
                 Estimator estimator = Estimator::lanczos);

  window::PushResult push(const LogEntry& entry);

  /// Closes every window that ends by the last seen timestamp + 1.
  void finish();

  std::vector<BotnetAlert> take_alerts();
  std::vector<DiagnosticRecord> take_diagnostics();

  const DetectorCounters& counters() const { return counters_; }
  const window::WindowEngine& engine() const { return engine_; }
  const BotnetRegistry& registry() const { return registry_; }

 private:
  void process_until(std::int64_t now);
  void evaluate(std::int64_t window_end, std::uint64_t correction_terms, std::uint64_t slide_flops);
  void slide(const window::WindowDelta& delta);

  window::WindowEngine engine_;
  DetectionParams params_;
  corr::CorrelationOptions corr_options_;
  std::uint64_t seed_;
  Estimator estimator_;
  std::optional<corr::CorrelationState> state_;
  BotnetRegistry registry_;
  std::optional<std::int64_t> last_ts_;
  std::vector<BotnetAlert> alerts_;
  std::vector<DiagnosticRecord> diagnostics_;
  DetectorCounters counters_;
};

}  // namespace botscope::detect
