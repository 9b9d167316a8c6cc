#include "botscope/verify_suites.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <set>

#include "botscope/corr_stream.hpp"
#include "botscope/detector.hpp"
#include "botscope/eigen_oracle.hpp"
#include "botscope/lanczos.hpp"
#include "botscope/pipeline.hpp"
#include "botscope/window_engine.hpp"

namespace botscope::verify {

namespace {

SuiteResult degenerate(std::string name, double tol) {
  SuiteResult r;
  r.name = std::move(name);
  r.tolerance = tol;
  r.skipped = true;
  r.note = "degenerate: m < 2, nothing to correlate";
  return r;
}

// Entries over `hosts` hosts with limited lifetimes, a few per step.
std::vector<LogEntry> churn_stream(std::mt19937_64& rng, std::size_t hosts, std::size_t requests,
                                   std::int64_t duration, std::int64_t step) {
  std::uniform_int_distribution<std::int64_t> when(0, duration - 1);
  std::uniform_int_distribution<std::size_t> host(0, hosts - 1), req(0, requests - 1);
  std::vector<std::int64_t> born(hosts), dies(hosts);
  for (std::size_t h = 0; h < hosts; ++h) {
    const auto a = when(rng), b = when(rng);
    born[h] = std::min(a, b) / 2;
    dies[h] = std::max(a, b) + duration / 4;
  }
  std::vector<LogEntry> out;
  const std::size_t target = static_cast<std::size_t>(3 * duration / step);
  while (out.size() < target) {
    const auto t = when(rng);
    const auto h = host(rng);
    if (t < born[h] || t >= dies[h]) continue;
    out.push_back({t, "h" + std::to_string(h), "/r" + std::to_string(req(rng))});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LogEntry& a, const LogEntry& b) { return a.timestamp < b.timestamp; });
  return out;
}

SymmetricMatrix random_symmetric(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SymmetricMatrix r(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) r(i, j) = u(rng);
  return r;
}

}  // namespace

SuiteResult corr_drift_suite(const VerifyOptions& opt, std::size_t reanchor_period, double tol) {
  const std::string name = reanchor_period == 0 ? "corr_drift" : "corr_reanchor";
  if (opt.m < 2) return degenerate(name, tol);
  SuiteResult res;
  res.name = name;
  res.tolerance = tol;

  std::mt19937_64 rng(opt.seed);
  const window::WindowConfig wc{400, 20, 0, window::WindowMode::sliding};
  const std::int64_t duration = wc.window_len + static_cast<std::int64_t>(opt.slides + 1) * wc.step;
  const auto entries = churn_stream(rng, opt.m, std::max<std::size_t>(8, 3 * opt.m), duration, wc.step);

  corr::CorrelationOptions co;
  co.reanchor_period = reanchor_period;
  co.inject_fault = opt.inject_fault;
  window::WindowEngine engine(wc);
  std::optional<corr::CorrelationState> state;
  std::size_t slides = 0, i = 0;
  for (std::int64_t now = 0; now <= duration; ++now) {
    while (i < entries.size() && entries[i].timestamp <= now) engine.push_entry(entries[i++]);
    if (!engine.primed()) {
      if (engine.try_prime(now) && engine.counts().n() >= 2) state = corr::init_state(engine.counts(), co);
      continue;
    }
    while (auto delta = engine.advance_window(now)) {
      if (!state || delta->n_after < 2) {
        state.reset();
        if (engine.counts().n() >= 2) state = corr::init_state(engine.counts(), co);
        continue;
      }
      corr::apply_slide(*state, *delta, co);
      ++slides;
      const auto ref = oracle::recompute_correlation(engine.counts(), co.sigma_tol);
      for (std::size_t a = 0; a < ref.size(); ++a)
        for (std::size_t b = a; b < ref.size(); ++b)
          res.max_deviation = std::max(res.max_deviation, std::abs(ref(a, b) - state->r(a, b)));
    }
  }
  res.passed = res.max_deviation <= tol;
  res.note = std::to_string(slides) + " slides";
  return res;
}

SuiteResult theorem1_suite(const VerifyOptions& opt) {
  if (opt.m < 2) return degenerate("theorem1", 1e-9);
  SuiteResult res{"theorem1", 0.0, 1e-9, true, false, {}};
  std::mt19937_64 rng(opt.seed + 1);
  std::size_t checks = 0;
  for (std::size_t t = 0; t < opt.matrices; ++t) {
    const std::size_t m = 2 + rng() % (opt.m - 1);
    const auto r = random_symmetric(rng, m);
    const auto eig = oracle::jacobi_eigen(r).eigenvalues;
    lanczos::LanczosState st;
    while (!st.broke_down) {
      lanczos::lanczos_extend(r, st, 1, t);
      const double lam = lanczos::bisect_largest(st.alpha, st.beta, 1e-10);
      const auto ritz = lanczos::recover_eigenvector(st, lam, t);
      const double d = lanczos::error_bound(st.residual_norm, ritz.mu_tilde);
      double nearest = INFINITY;
      for (double e : eig) nearest = std::min(nearest, std::abs(e - lam));
      res.max_deviation = std::max(res.max_deviation, nearest - d);
      ++checks;
    }
  }
  res.passed = res.max_deviation <= res.tolerance;
  res.note = "excess over d across " + std::to_string(checks) + " (R, k) pairs";
  return res;
}

SuiteResult theorem2_suite(const VerifyOptions& opt) {
  if (opt.m < 2) return degenerate("theorem2", 0.0);
  SuiteResult res{"theorem2", 0.0, 0.0, true, false, {}};
  std::mt19937_64 rng(opt.seed + 2);
  const double eps1 = 1e-10;
  for (std::size_t t = 0; t < opt.matrices; ++t) {
    const std::size_t m = 2 + rng() % (opt.m - 1);
    const auto r = random_symmetric(rng, m);
    lanczos::LanczosState st;
    double prev = -INFINITY;
    while (!st.broke_down) {
      lanczos::lanczos_extend(r, st, 1, t);
      const double lam = lanczos::bisect_largest(st.alpha, st.beta, eps1);
      const double slack = 2.0 * eps1 * std::abs(lanczos::eig_bounds(st.alpha, st.beta).second);
      res.max_deviation = std::max(res.max_deviation, prev - lam - slack);
      prev = lam;
    }
  }
  res.passed = res.max_deviation <= 0.0;
  res.note = "largest drop beyond 2*eps1*|lambda_u|";
  return res;
}

SuiteResult sturm_suite(const VerifyOptions& opt) {
  if (opt.m < 2) return degenerate("sturm", 0.0);
  SuiteResult res{"sturm", 0.0, 0.0, true, false, {}};
  std::mt19937_64 rng(opt.seed + 3);
  std::uniform_real_distribution<double> a(-2.0, 4.0), b(0.05, 1.5);
  std::size_t probes = 0, mismatches = 0;
  for (std::size_t t = 0; t < opt.tridiagonals; ++t) {
    const std::size_t k = 1 + rng() % opt.m;
    std::vector<double> alpha(k), beta(k - 1);
    for (auto& x : alpha) x = a(rng);
    for (auto& x : beta) x = b(rng);
    DenseMatrix dense(k, k);
    for (std::size_t i = 0; i < k; ++i) dense(i, i) = alpha[i];
    for (std::size_t i = 0; i + 1 < k; ++i) dense(i, i + 1) = dense(i + 1, i) = beta[i];
    const auto eig = oracle::jacobi_eigen(dense).eigenvalues;
    std::uniform_real_distribution<double> probe(eig.back() - 1.0, eig.front() + 1.0);
    for (int p = 0; p < 20; ++p) {
      double x = probe(rng);
      while (std::any_of(eig.begin(), eig.end(), [&](double e) { return std::abs(e - x) <= 1e-9; }))
        x = probe(rng);
      const auto expected = static_cast<std::size_t>(std::count_if(eig.begin(), eig.end(), [&](double e) { return e < x; }));
      mismatches += lanczos::sturm_count(alpha, beta, x) != expected;
      ++probes;
    }
  }
  res.max_deviation = static_cast<double>(mismatches);
  res.passed = mismatches == 0;
  res.note = std::to_string(mismatches) + " mismatches in " + std::to_string(probes) + " probes";
  return res;
}

SuiteResult convergence_suite(const VerifyOptions& opt) {
  if (opt.m < 2) return degenerate("full_convergence", 1e-8);
  SuiteResult res{"full_convergence", 0.0, 1e-8, true, false, {}};
  std::mt19937_64 rng(opt.seed + 4);
  for (std::size_t t = 0; t < opt.matrices; ++t) {
    const std::size_t m = 2 + rng() % (opt.m - 1);
    const auto r = random_symmetric(rng, m);
    lanczos::LanczosState st;
    lanczos::lanczos_extend(r, st, m, t);
    const double lam = lanczos::bisect_largest(st.alpha, st.beta, 1e-10);
    res.max_deviation = std::max(res.max_deviation, std::abs(lam - oracle::jacobi_eigen(r).eigenvalues.front()));
  }
  res.passed = res.max_deviation <= res.tolerance;
  return res;
}

SuiteResult agreement_suite(const VerifyOptions& opt) {
  if (opt.m < 2) return degenerate("pipeline_agreement", 0.0);
  SuiteResult res{"pipeline_agreement", 0.0, 0.0, true, false, {}};
  auto scenario = pipeline::dense_scenario(opt.m, 3 * 3600, opt.seed);
  scenario.botnet_hosts = std::max<std::size_t>(2, opt.m / 3);
  scenario.bot_start = 3600;
  const auto stream = pipeline::build_scenario(scenario);

  const DetectionParams params;
  const auto wc = window::WindowConfig::sliding(1800);
  window::WindowEngine engine(wc);
  std::size_t windows = 0, unexcused = 0, excused = 0;
  auto check = [&](std::int64_t window_end) {
    const auto& counts = engine.counts();
    if (counts.n() < 2) return;
    ++windows;
    const auto state = corr::init_state(counts);
    std::vector<std::string> ids;
    for (auto key : state.columns) ids.push_back(counts.host_ids.at(key));
    detect::BotnetRegistry r1, r2;
    const auto fast = detect::evaluate_window(state, ids, window_end, wc.window_len, params,
                                              detect::window_seed(opt.seed, window_end),
                                              detect::Estimator::lanczos, r1);
    const auto exact = detect::evaluate_window(state, ids, window_end, wc.window_len, params, 0,
                                               detect::Estimator::oracle, r2);
    std::set<std::string> a, b;
    for (const auto& h : fast.flagged) a.insert(h.id);
    for (const auto& h : exact.flagged) b.insert(h.id);
    if (a == b) return;
    const double band = std::max(fast.estimate.error_norm, 1e-9);
    bool ok = std::abs(exact.estimate.lambda_norm - params.omega) <= band;
    if (!ok && fast.estimate.verdict == lanczos::Verdict::warn && exact.estimate.verdict == lanczos::Verdict::warn) {
      // Only boundary hosts may differ.
      const auto scores = detect::host_scores(exact.estimate, ids, state.active);
      ok = true;
      for (const auto& s : scores) {
        if (a.count(s.id) == b.count(s.id)) continue;
        if (std::abs(s.rho - params.omega) > band) ok = false;
      }
      if (!ok) {
        std::vector<double> rho;
        for (const auto& s : scores) rho.push_back(s.rho);
        for (std::size_t i = 0; i + 1 < rho.size(); ++i)
          if (std::abs((rho[i] - rho[i + 1]) / std::max(rho[i], 1e-12) - params.knee_theta) <= band) ok = true;
      }
    }
    (ok ? excused : unexcused) += 1;
  };

  std::size_t i = 0;
  const auto& entries = stream.entries;
  const std::int64_t last = entries.empty() ? 0 : entries.back().timestamp;
  for (std::int64_t now = 0; now <= last + 1; now += wc.step) {
    while (i < entries.size() && entries[i].timestamp < now) engine.push_entry(entries[i++]);
    if (!engine.primed()) {
      if (engine.try_prime(now)) check(engine.window_end());
      continue;
    }
    while (auto delta = engine.advance_window(now)) check(delta->window_end);
  }
  res.max_deviation = static_cast<double>(unexcused);
  res.passed = unexcused == 0;
  res.note = std::to_string(windows) + " windows, " + std::to_string(excused) + " boundary differences";
  return res;
}

std::vector<SuiteResult> run_all(const VerifyOptions& opt) {
  return {corr_drift_suite(opt, 0, 1e-7), corr_drift_suite(opt, 1, 1e-12), theorem1_suite(opt),
          theorem2_suite(opt),           sturm_suite(opt),                 convergence_suite(opt),
          agreement_suite(opt)};
}

void print_report(const std::vector<SuiteResult>& results, std::ostream& out) {
  for (const auto& r : results) {
    out << std::left << std::setw(20) << r.name << ' '
        << (r.skipped ? "SKIP" : r.passed ? "PASS" : "FAIL") << "  max_dev=" << std::setprecision(3)
        << std::scientific << r.max_deviation << " tol=" << r.tolerance << std::defaultfloat;
    if (!r.note.empty()) out << "  (" << r.note << ')';
    out << '\n';
  }
}

bool all_passed(const std::vector<SuiteResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const SuiteResult& r) { return r.skipped || r.passed; });
}

}  // namespace botscope::verify
