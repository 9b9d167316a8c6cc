// botscope: streaming botnet detector command-line front end.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "botscope/bot_sim.hpp"
#include "botscope/detector.hpp"
#include "botscope/log_ingest.hpp"
#include "botscope/pipeline.hpp"
#include "botscope/verify_suites.hpp"

namespace {

using namespace botscope;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitVerify = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string format = "triple-csv";
  std::string alerts;  // empty: stdout
  std::string diag;    // empty: discarded

  // Window and detection keys double as config-file keys.
  std::vector<std::int64_t> window_len_secs{600};
  std::int64_t step_secs = 0;  // 0: 10% of the window length (or the length in fixed mode)
  std::int64_t reorder_slack_secs = 5;
  std::string mode = "sliding";
  double sigma_tol = 1e-12;
  std::size_t reanchor_period = 128;
  DetectionParams params;
};

/// Output sink that is either stdout or a file; empty path and "-" mean stdout.
class Sink {
 public:
  explicit Sink(const std::string& path, bool discard_when_empty = false) {
    if (path.empty() && discard_when_empty) return;
    if (path.empty() || path == "-") {
      out_ = &std::cout;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw IoError("cannot open " + path + " for writing");
    out_ = file_.get();
  }
  std::ostream* get() { return out_; }
  void line(const std::string& s) {
    if (out_) *out_ << s << '\n';
  }
  void flush() {
    if (out_) out_->flush();
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
};

std::vector<window::WindowConfig> window_configs(const GlobalOptions& g) {
  std::vector<window::WindowConfig> out;
  const auto mode = window::parse_mode(g.mode);
  for (auto len : g.window_len_secs) {
    window::WindowConfig w = mode == window::WindowMode::fixed ? window::WindowConfig::fixed(len, g.reorder_slack_secs)
                                                               : window::WindowConfig::sliding(len, g.reorder_slack_secs);
    if (g.step_secs > 0) w.step = g.step_secs;
    w.validate();
    out.push_back(w);
  }
  return out;
}

corr::CorrelationOptions corr_options(const GlobalOptions& g) {
  corr::CorrelationOptions c;
  c.sigma_tol = g.sigma_tol;
  c.reanchor_period = g.reanchor_period;
  return c;
}

void add_global_options(CLI::App& app, GlobalOptions& g) {
  app.set_config("--config", "", "flat key=value config file; command-line flags win");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--format", g.format, "apache-common | apache-combined | triple-csv");
  app.add_option("--alerts", g.alerts, "alert stream path (default stdout)");
  app.add_option("--diag", g.diag, "diagnostics stream path (default off)");
  app.add_option("--window_len_secs", g.window_len_secs, "window length(s); one detector per value");
  app.add_option("--step_secs", g.step_secs, "slide step (default 10% of the window length)");
  app.add_option("--reorder_slack_secs", g.reorder_slack_secs, "tolerated out-of-order lateness");
  app.add_option("--mode", g.mode, "sliding | fixed");
  app.add_option("--sigma_tol", g.sigma_tol, "relative stddev floor for active columns");
  app.add_option("--reanchor_period", g.reanchor_period, "slides between from-scratch recomputes (0 = never)");
  app.add_option("--omega", g.params.omega, "principal-weight threshold");
  app.add_option("--eps1", g.params.eps1, "bisection tolerance");
  app.add_option("--eps2", g.params.eps2, "error-bound target after a warning");
  app.add_option("--k_l_frac", g.params.k_l_frac, "initial Krylov size, fraction of active hosts");
  app.add_option("--k_u_frac", g.params.k_u_frac, "maximum Krylov size, fraction of active hosts");
  app.add_option("--k_s_frac", g.params.k_s_frac, "Krylov size increment, fraction of active hosts");
  app.add_option("--c", g.params.c, "size increments below 0.5 before clearing");
  app.add_option("--knee_theta", g.params.knee_theta, "relative drop marking the knee");
}

// ---- monitor ----

struct MonitorOptions {
  std::string input = "-";
  bool follow = false;
  double idle_exit = 0.0;
  std::string salt;
  bool keep_query = false;
  std::size_t batch = 4096;
  bool serial = false;
};

int cmd_monitor(const GlobalOptions& g, const MonitorOptions& m) {
  const auto format = ingest::parse_format(g.format);
  const auto windows = window_configs(g);
  g.params.validate();

  std::ifstream file;
  std::istream* in = &std::cin;
  if (m.input != "-") {
    file.open(m.input);
    if (!file) throw IoError("cannot open input " + m.input);
    in = &file;
  }
  Sink alerts(g.alerts);
  Sink diag(g.diag, true);

  ingest::LineParser parser(format, ingest::ParseOptions{!m.keep_query}, m.salt);
  pipeline::MultiMonitor monitor(windows, g.params, corr_options(g), g.seed, detect::Estimator::lanczos,
                                 !m.serial);
  std::size_t alert_count = 0;
  auto drain = [&] {
    for (const auto& a : monitor.take_alerts()) {
      alerts.line(detect::to_json(a).dump());
      ++alert_count;
    }
    for (const auto& d : monitor.take_diagnostics()) diag.line(detect::to_json(d).dump());
    alerts.flush();
    diag.flush();
  };

  std::vector<LogEntry> batch;
  std::string line;
  auto idle_since = std::chrono::steady_clock::now();
  for (;;) {
    if (std::getline(*in, line)) {
      if (auto e = parser.feed(line)) batch.push_back(std::move(*e));
      if (batch.size() >= m.batch) {
        monitor.feed(batch);
        batch.clear();
        drain();
      }
      idle_since = std::chrono::steady_clock::now();
      continue;
    }
    if (in->bad()) throw IoError("read error on " + m.input);
    if (!m.follow || m.input == "-") break;
    if (!batch.empty()) {
      monitor.feed(batch);
      batch.clear();
      drain();
    }
    const double idle = std::chrono::duration<double>(std::chrono::steady_clock::now() - idle_since).count();
    if (m.idle_exit > 0.0 && idle >= m.idle_exit) break;
    in->clear();
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  monitor.feed(batch);
  monitor.finish();
  drain();

  const auto& c = parser.counters();
  std::cerr << "lines=" << c.lines << " parsed=" << c.parsed << " malformed=" << c.malformed
            << " stale=" << monitor.stale() << " alerts=" << alert_count << '\n';
  return kExitOk;
}

// ---- simulate ----

struct SimulateOptions {
  std::string mode = "random_list";
  std::vector<std::string> links;
  std::size_t link_count = 50;
  std::size_t bots = 1;
  std::size_t duplication = 0;
  std::size_t background_hosts = 200;
  double background_sessions = 1.0;
  std::int64_t duration = 86400;
  std::int64_t bot_start = 40000;
  std::int64_t bot_duration = 3600;
  double mean_interval = 39.0;
  double rate = 1.0;
  std::int64_t jitter = 0;
  std::size_t fanout = 0;
  double zipf_shape = 1.2;
  std::string out = "-";
  std::string labels;
};

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& s) {
  const auto mode = sim::parse_bot_mode(s.mode);
  sim::BackgroundConfig bg;
  bg.hosts = s.background_hosts;
  bg.duration = s.duration;
  bg.sessions_per_host = s.background_sessions;
  bg.asset_fanout = s.fanout;
  bg.zipf_shape = s.zipf_shape;
  bg.seed = g.seed;
  const auto background = sim::generate_background(bg);

  std::vector<std::string> links = s.links;
  if (links.empty())
    for (std::size_t i = 0; i < s.link_count; ++i) links.push_back("/r" + std::to_string(i));
  const auto graph = sim::random_site_graph(std::max<std::size_t>(s.link_count, 2), 4, g.seed + 99);

  std::vector<sim::BotStream> bots;
  for (std::size_t b = 0; b < s.bots; ++b) {
    sim::SimConfig c;
    c.mode = mode;
    c.link_list = links;
    c.mean_interval = s.mean_interval;
    c.interval_stddev = s.mean_interval / 3.0;
    c.start = s.bot_start;
    c.duration = s.bot_duration;
    c.rate_multiplier = s.rate;
    c.host_id = "bot" + std::to_string(b + 1);
    c.seed = g.seed * 1000003 + b;
    bots.push_back(sim::simulate_bot(c, mode == sim::BotMode::random_walk ? &graph : nullptr));
  }
  const auto merged = sim::inject_traffic(background, bots, s.duplication, g.seed, s.jitter);

  Sink out(s.out);
  sim::write_csv(merged.entries, *out.get());
  out.flush();
  if (!s.labels.empty()) {
    Sink labels(s.labels);
    sim::write_labels(merged.labels, *labels.get());
    labels.flush();
  }
  return kExitOk;
}

// ---- verify ----

int cmd_verify(const GlobalOptions& g, verify::VerifyOptions v) {
  v.seed = g.seed;
  const auto results = verify::run_all(v);
  verify::print_report(results, std::cout);
  const bool ok = verify::all_passed(results);
  std::cout << (ok ? "verify: all suites within tolerance" : "verify: FAILED") << '\n';
  return ok ? kExitOk : kExitVerify;
}

// ---- bench / sweep ----

struct BenchOptions {
  std::vector<std::size_t> hosts{40, 80};
  std::vector<std::int64_t> windows{600};
  std::size_t botnet = 20;
  double bot_rate = 3.0;
  std::string out = "-";
  bool parallel = false;
};

pipeline::Scenario bench_scenario(std::size_t hosts, std::int64_t window_len, std::size_t botnet,
                                  double rate, std::uint64_t seed) {
  auto s = pipeline::dense_scenario(hosts, 4 * window_len, seed);
  // Keep every background host active for the whole stream.
  s.background.sessions_per_host = static_cast<double>(s.background.duration) / 900.0;
  s.botnet_hosts = botnet;
  s.bot_start = window_len + window_len / 3;
  s.bot_duration = 2 * window_len;
  s.bot_rate_multiplier = rate;
  return s;
}

std::string first_latency(const std::map<std::uint64_t, std::optional<std::int64_t>>& lat) {
  for (const auto& [_, v] : lat)
    if (v) return std::to_string(*v);
  return "";
}

int cmd_bench(const GlobalOptions& g, const BenchOptions& b) {
  g.params.validate();
  struct Point {
    std::size_t hosts;
    std::int64_t window;
  };
  std::vector<Point> grid;
  for (auto h : b.hosts)
    for (auto w : b.windows) grid.push_back({h, w});
  std::vector<std::string> rows(grid.size());

  auto run_point = [&](std::size_t idx) {
    const auto [hosts, wlen] = grid[idx];
    const auto stream = pipeline::build_scenario(bench_scenario(hosts, wlen, b.botnet, b.bot_rate, g.seed));
    const auto sliding = window::WindowConfig::sliding(wlen, g.reorder_slack_secs);
    const auto fixed = window::WindowConfig::fixed(wlen, g.reorder_slack_secs);
    const auto fast = pipeline::run_stream(stream.entries, sliding, g.params, g.seed, detect::Estimator::lanczos, corr_options(g));
    const auto exact = pipeline::run_stream(stream.entries, sliding, g.params, g.seed, detect::Estimator::oracle, corr_options(g));
    const auto fixed_run = pipeline::run_stream(stream.entries, fixed, g.params, g.seed, detect::Estimator::lanczos, corr_options(g));
    std::size_t max_active = 0;
    for (const auto& d : fast.diagnostics) max_active = std::max(max_active, d.m_active);
    std::ostringstream row;
    row << hosts << ',' << wlen << ',' << b.botnet << ',' << max_active << ',' << fast.counters.windows << ','
        << fast.wall_seconds << ',' << exact.wall_seconds << ',' << fast.estimate_flops << ','
        << exact.estimate_flops << ',' << fast.slide_flops << ','
        << first_latency(pipeline::detection_latency(fast.alerts, stream.labels)) << ','
        << first_latency(pipeline::detection_latency(fixed_run.alerts, stream.labels)) << ','
        << pipeline::flag_agreement(fast, exact);
    rows[idx] = row.str();
  };
  if (b.parallel) {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < grid.size(); ++i) pool.emplace_back(run_point, i);
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) run_point(i);
  }

  Sink out(b.out);
  *out.get() << "hosts,window_len_secs,botnet_hosts,max_active,windows,lanczos_wall_s,oracle_wall_s,"
                "lanczos_estimate_flops,oracle_estimate_flops,slide_flops,latency_sliding_s,"
                "latency_fixed_s,flag_agreement\n";
  for (const auto& r : rows) *out.get() << r << '\n';
  out.flush();
  return kExitOk;
}

struct SweepOptions {
  std::vector<double> eps2{0.1, 0.05, 0.01, 0.005};
  std::vector<std::size_t> c{5, 10, 25, 50};
  std::size_t hosts = 60;
  std::int64_t window = 600;
  std::size_t botnet = 12;
  std::string out = "-";
};

int cmd_sweep(const GlobalOptions& g, const SweepOptions& s) {
  const auto stream = pipeline::build_scenario(bench_scenario(s.hosts, s.window, s.botnet, 3.0, g.seed));
  const auto wc = window::WindowConfig::sliding(s.window, g.reorder_slack_secs);
  const auto exact = pipeline::run_stream(stream.entries, wc, g.params, g.seed, detect::Estimator::oracle, corr_options(g));
  Sink out(s.out);
  *out.get() << "eps2,c,estimate_flops,wall_s,flag_agreement,warn,clear,inconclusive\n";
  for (double e2 : s.eps2) {
    for (auto c : s.c) {
      DetectionParams p = g.params;
      p.eps2 = e2;
      p.c = c;
      p.validate();
      const auto run = pipeline::run_stream(stream.entries, wc, p, g.seed, detect::Estimator::lanczos, corr_options(g));
      *out.get() << e2 << ',' << c << ',' << run.estimate_flops << ',' << run.wall_seconds << ','
                 << pipeline::flag_agreement(run, exact) << ',' << run.counters.warn << ','
                 << run.counters.clear << ',' << run.counters.inconclusive << '\n';
    }
  }
  out.flush();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"botscope: streaming botnet detection over web access logs"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  GlobalOptions g;
  add_global_options(app, g);

  MonitorOptions mon;
  auto* monitor = app.add_subcommand("monitor", "detect correlated host groups in a log stream");
  monitor->add_option("--input", mon.input, "log file, or - for stdin");
  monitor->add_flag("--follow", mon.follow, "keep reading as the file grows");
  monitor->add_option("--idle-exit", mon.idle_exit, "with --follow, stop after this many idle seconds");
  monitor->add_option("--salt", mon.salt, "anonymize identifiers with this key");
  monitor->add_flag("--keep-query", mon.keep_query, "keep URL query strings in request ids");
  monitor->add_option("--batch", mon.batch, "entries per processing batch")->check(CLI::PositiveNumber);
  monitor->add_flag("--serial", mon.serial, "run window detectors one after another");

  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "write a labeled synthetic stream as triple-csv");
  simulate->add_option("--bot-mode", so.mode, "single_request | random_list | fixed_list | random_walk");
  simulate->add_option("--links", so.links, "request ids for list modes")->delimiter(',');
  simulate->add_option("--link-count", so.link_count, "generated link list size when --links is absent");
  simulate->add_option("--bots", so.bots, "independent bot streams");
  simulate->add_option("--duplication", so.duplication, "copies per bot stream (0 = no injection)");
  simulate->add_option("--background-hosts", so.background_hosts, "human-like hosts");
  simulate->add_option("--background-sessions", so.background_sessions, "expected sessions per background host");
  simulate->add_option("--duration", so.duration, "stream length in seconds");
  simulate->add_option("--bot-start", so.bot_start, "first bot request time");
  simulate->add_option("--bot-duration", so.bot_duration, "bot activity length in seconds");
  simulate->add_option("--mean-interval", so.mean_interval, "mean seconds between visits");
  simulate->add_option("--rate", so.rate, "bot rate multiplier");
  simulate->add_option("--jitter", so.jitter, "uniform +-seconds applied to duplicated bots");
  simulate->add_option("--fanout", so.fanout, "asset entries per background visit");
  simulate->add_option("--zipf-shape", so.zipf_shape, "request popularity exponent");
  simulate->add_option("--out", so.out, "stream output path (default stdout)");
  simulate->add_option("--labels", so.labels, "labels CSV output path");

  verify::VerifyOptions vo;
  auto* verify_cmd = app.add_subcommand("verify", "run the oracle-equivalence suites");
  verify_cmd->add_option("--m", vo.m, "host / matrix order bound");
  verify_cmd->add_option("--slides", vo.slides, "chained slides in drift suites");
  verify_cmd->add_option("--matrices", vo.matrices, "random matrices per Lanczos suite");
  verify_cmd->add_option("--tridiagonals", vo.tridiagonals, "random tridiagonals in the Sturm suite");
  verify_cmd->add_flag("--inject-fault", vo.inject_fault, "negative control: corrupt the correlation update");

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "compare the Lanczos and dense-oracle pipelines");
  bench->add_option("--hosts", bo.hosts, "background host counts")->delimiter(',');
  bench->add_option("--windows", bo.windows, "window lengths in seconds")->delimiter(',');
  bench->add_option("--botnet", bo.botnet, "injected botnet size");
  bench->add_option("--bot-rate", bo.bot_rate, "bot rate multiplier");
  bench->add_option("--out", bo.out, "CSV output path (default stdout)");
  bench->add_flag("--parallel", bo.parallel, "run grid points concurrently");

  SweepOptions sw;
  auto* sweep = app.add_subcommand("sweep", "vary eps2 and c, report cost and oracle agreement");
  sweep->add_option("--eps2-values", sw.eps2, "eps2 grid")->delimiter(',');
  sweep->add_option("--c-values", sw.c, "c grid")->delimiter(',');
  sweep->add_option("--hosts", sw.hosts, "background hosts");
  sweep->add_option("--window", sw.window, "window length in seconds");
  sweep->add_option("--botnet", sw.botnet, "injected botnet size");
  sweep->add_option("--out", sw.out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*monitor) return cmd_monitor(g, mon);
    if (*simulate) return cmd_simulate(g, so);
    if (*verify_cmd) return cmd_verify(g, vo);
    if (*bench) return cmd_bench(g, bo);
    if (*sweep) return cmd_sweep(g, sw);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
