#include "botscope/lanczos.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <random>

namespace botscope::lanczos {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

std::vector<double> random_unit(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(m);
  double nrm = 0.0;
  while (nrm == 0.0) {
    for (auto& x : v) x = g(rng);
    nrm = norm2(v);
  }
  for (auto& x : v) x /= nrm;
  return v;
}

// Two passes of classical Gram-Schmidt against every stored basis vector.
void reorthogonalize(const std::vector<std::vector<double>>& basis, std::vector<double>& w,
                     std::uint64_t& flops) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) {
      const double h = dot(q, w);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= h * q[i];
    }
    flops += 2 * basis.size() * w.size();
  }
}

std::pair<double, double> gershgorin(const std::vector<double>& alpha, const std::vector<double>& beta) {
  const std::size_t k = alpha.size();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < k; ++i) {
    double radius = 0.0;
    if (i > 0) radius += std::abs(beta[i - 1]);
    if (i + 1 < k) radius += std::abs(beta[i]);
    lo = std::min(lo, alpha[i] - radius);
    hi = std::max(hi, alpha[i] + radius);
  }
  return {lo, hi};
}

}  // namespace

void lanczos_extend(const SymmetricMatrix& r, LanczosState& st, std::size_t steps, std::uint64_t seed) {
  const std::size_t m = r.size();
  if (m == 0) throw std::invalid_argument("lanczos_extend: empty matrix");
  if (!st.start.empty() && st.start.size() != m)
    throw std::invalid_argument("lanczos_extend: start vector has wrong dimension");
  const double tol = 1e-12 * r.max_abs() * static_cast<double>(m);

  std::vector<double> w(m);
  for (std::size_t s = 0; s < steps && !st.broke_down; ++s) {
    const std::size_t k = st.k();
    std::vector<double> v;
    if (k == 0) {
      v = st.start.empty() ? random_unit(m, seed) : st.start;
      const double nrm = norm2(v);
      for (auto& x : v) x /= nrm;
    } else {
      v = st.residual;
      for (auto& x : v) x /= st.residual_norm;
      st.beta.push_back(st.residual_norm);
    }

    r.multiply(v, w);
    st.flops += 2 * m * m;
    if (k > 0) {
      const auto& prev = st.v.back();
      for (std::size_t i = 0; i < m; ++i) w[i] -= st.beta.back() * prev[i];
    }
    const double a = dot(w, v);
    for (std::size_t i = 0; i < m; ++i) w[i] -= a * v[i];
    st.flops += 6 * m;
    st.alpha.push_back(a);
    st.v.push_back(std::move(v));
    reorthogonalize(st.v, w, st.flops);

    st.residual = w;
    st.residual_norm = norm2(w);
    if (st.k() == m || st.residual_norm <= tol) {
      st.broke_down = true;
      st.residual_norm = 0.0;
    }
  }
}

std::pair<double, double> eig_bounds(const std::vector<double>& alpha, const std::vector<double>& beta) {
  auto [lo, hi] = gershgorin(alpha, beta);
  double trace = 0.0;
  for (double a : alpha) trace += a;
  return {std::max(lo, 0.0), std::min(hi, trace)};
}

std::size_t sturm_count(const std::vector<double>& alpha, const std::vector<double>& beta,
                        double lambda) {
  std::size_t count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    q = (alpha[i] - lambda) - (i > 0 ? beta[i - 1] * beta[i - 1] / q : 0.0);
    if (q == 0.0) q = -kTiny;
    if (q < 0.0) ++count;
  }
  return count;
}

double bisect_largest(const std::vector<double>& alpha, const std::vector<double>& beta, double eps1,
                      std::uint64_t* iterations) {
  const std::size_t k = alpha.size();
  if (k == 0) throw std::invalid_argument("bisect_largest: empty tridiagonal");
  auto [lo, hi] = eig_bounds(alpha, beta);
  // Valid bracket: the top eigenvalue is >= lo and nothing lies above hi.
  if (!(lo <= hi) || sturm_count(alpha, beta, lo) >= k || sturm_count(alpha, beta, hi) < k) {
    std::tie(lo, hi) = gershgorin(alpha, beta);
  }
  std::uint64_t it = 0;
  if (lo == hi) {
    if (iterations) *iterations = 0;
    return lo;
  }
  while (it < 400) {
    if (std::abs(hi - lo) <= eps1 * (std::abs(lo) + std::abs(hi))) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    ++it;
    if (sturm_count(alpha, beta, mid) == k)
      hi = mid;
    else
      lo = mid;
  }
  if (iterations) *iterations = it;
  return 0.5 * (lo + hi);
}

std::vector<double> tridiagonal_eigenvector(const std::vector<double>& alpha,
                                            const std::vector<double>& beta, double lambda_hat,
                                            std::uint64_t seed) {
  const std::size_t k = alpha.size();
  if (k == 1) return {1.0};

  double shift = lambda_hat;
  const double bump = 1e3 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lambda_hat), 1.0);
  for (int attempt = 0;; ++attempt) {
    // LU with partial pivoting of T - shift I: L unit lower bidiagonal with
    // multipliers l, U upper triangular with up to two superdiagonals.
    std::vector<double> d(k), du(k, 0.0), du2(k, 0.0), l(k, 0.0);
    std::vector<char> swapped(k, 0);
    for (std::size_t i = 0; i < k; ++i) d[i] = alpha[i] - shift;
    for (std::size_t i = 0; i + 1 < k; ++i) du[i] = beta[i];
    std::vector<double> dl(beta.begin(), beta.end());
    for (std::size_t i = 0; i + 1 < k; ++i) {
      if (std::abs(d[i]) >= std::abs(dl[i])) {
        l[i] = d[i] == 0.0 ? 0.0 : dl[i] / d[i];
        d[i + 1] -= l[i] * du[i];
      } else {
        swapped[i] = 1;
        l[i] = d[i] / dl[i];
        d[i] = dl[i];
        const double tmp = du[i];
        du[i] = d[i + 1];
        d[i + 1] = tmp - l[i] * d[i + 1];
        if (i + 2 < k) {
          du2[i] = du[i + 1];
          du[i + 1] = -l[i] * du2[i];
        }
      }
    }
    bool singular = false;
    for (double p : d) singular = singular || p == 0.0;
    if (singular && attempt < 8) {
      shift += bump * static_cast<double>(1 << attempt);
      continue;
    }
    if (singular)
      for (auto& p : d)
        if (p == 0.0) p = kTiny;

    std::vector<double> x = random_unit(k, seed);
    for (int solve = 0; solve < 2; ++solve) {
      for (std::size_t i = 0; i + 1 < k; ++i) {
        if (swapped[i]) {
          const double tmp = x[i];
          x[i] = x[i + 1];
          x[i + 1] = tmp - l[i] * x[i];
        } else {
          x[i + 1] -= l[i] * x[i];
        }
      }
      for (std::size_t ii = k; ii-- > 0;) {
        double s = x[ii];
        if (ii + 1 < k) s -= du[ii] * x[ii + 1];
        if (ii + 2 < k) s -= du2[ii] * x[ii + 2];
        x[ii] = s / d[ii];
      }
      double nrm = 0.0;
      for (double v : x) nrm = std::max(nrm, std::abs(v));
      if (!std::isfinite(nrm) || nrm == 0.0) break;
      for (auto& v : x) v /= nrm;
    }
    const double nrm = norm2(x);
    for (auto& v : x) v /= nrm;
    return x;
  }
}

RitzVector recover_eigenvector(const LanczosState& st, double lambda_hat, std::uint64_t seed) {
  RitzVector out;
  out.mu_tilde = tridiagonal_eigenvector(st.alpha, st.beta, lambda_hat, seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t m = st.v.front().size();
  out.mu_hat.assign(m, 0.0);
  for (std::size_t c = 0; c < st.k(); ++c)
    for (std::size_t i = 0; i < m; ++i) out.mu_hat[i] += out.mu_tilde[c] * st.v[c][i];
  const double nrm = norm2(out.mu_hat);
  double sum = 0.0;
  for (auto& x : out.mu_hat) {
    x /= nrm;
    sum += x;
  }
  if (sum < 0.0) {
    for (auto& x : out.mu_hat) x = -x;
    for (auto& x : out.mu_tilde) x = -x;
  }
  return out;
}

double error_bound(double residual_norm, const std::vector<double>& mu_tilde) {
  if (residual_norm == 0.0 || mu_tilde.empty()) return 0.0;
  return residual_norm * std::abs(mu_tilde.back()) / norm2(mu_tilde);
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::warn: return "warn";
    case Verdict::clear: return "clear";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

SymmetricMatrix compact_active(const SymmetricMatrix& r, const std::vector<char>& active) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < r.size(); ++j)
    if (active[j]) idx.push_back(j);
  SymmetricMatrix out(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a; b < idx.size(); ++b) out(a, b) = r(idx[a], idx[b]);
  return out;
}

PrincipalEstimate estimate_principal(const SymmetricMatrix& r, const DetectionParams& params,
                                     std::uint64_t seed, const std::vector<char>* active) {
  const std::size_t m = r.size();
  std::vector<char> mask = active ? *active : std::vector<char>(m, 1);
  if (mask.size() != m) throw std::invalid_argument("estimate_principal: mask size mismatch");
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < m; ++j)
    if (mask[j]) idx.push_back(j);

  PrincipalEstimate est;
  est.m_active = idx.size();
  est.eigvec.assign(m, 0.0);
  if (idx.size() < 2) {
    est.verdict = Verdict::clear;
    return est;
  }
  const SymmetricMatrix sub = idx.size() == m ? r : compact_active(r, mask);
  const std::size_t ma = idx.size();
  const auto md = static_cast<double>(ma);
  auto frac = [&](double f) { return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(f * md - 1e-9))); };
  const std::size_t k_u = std::min(frac(params.k_u_frac), ma);
  const std::size_t k_l = std::min(frac(params.k_l_frac), k_u);
  const std::size_t k_s = frac(params.k_s_frac);

  LanczosState st;
  std::size_t target = k_l;
  std::size_t below = 0;
  bool warned = false;
  PrincipalEstimate best_warn;
  [[maybe_unused]] double previous = -std::numeric_limits<double>::infinity();

  auto finish = [&](PrincipalEstimate e, Verdict v) {
    e.verdict = v;
    e.flops = st.flops;
    return e;
  };

  for (;;) {
    lanczos_extend(sub, st, target - st.k(), seed);
    std::uint64_t steps = 0;
    const double lambda = bisect_largest(st.alpha, st.beta, params.eps1, &steps);
    est.bisection_steps += steps;
    st.flops += steps * 4 * st.k();
    assert(lambda >= previous - 2.0 * params.eps1 * std::abs(eig_bounds(st.alpha, st.beta).second) - 1e-12);
    previous = lambda;

    const RitzVector ritz = recover_eigenvector(st, lambda, seed);
    st.flops += 2 * st.k() * ma + 16 * st.k();
    const double d = error_bound(st.residual_norm, ritz.mu_tilde);

    ++est.rounds;
    est.lambda_raw = lambda;
    est.error_raw = d;
    est.lambda_norm = lambda / md;
    est.error_norm = d / md;
    est.k_used = st.k();
    est.broke_down = st.broke_down;
    std::fill(est.eigvec.begin(), est.eigvec.end(), 0.0);
    for (std::size_t a = 0; a < ma; ++a) est.eigvec[idx[a]] = ritz.mu_hat[a];

    const double lo = est.lambda_norm - est.error_norm;
    const double hi = est.lambda_norm + est.error_norm;
    const bool exhausted = st.broke_down || st.k() >= k_u;

    if (lo >= params.omega) {
      warned = true;
      best_warn = est;
    }
    if (warned) {
      if (best_warn.error_norm <= params.eps2 || exhausted) {
        best_warn.bisection_steps = est.bisection_steps;
        best_warn.rounds = est.rounds;
        return finish(best_warn, Verdict::warn);
      }
    } else if (lo >= 0.5 && hi < params.omega) {
      return finish(est, Verdict::clear);
    } else if (hi < 0.5) {
      if (++below > params.c || st.broke_down) return finish(est, Verdict::clear);
    } else {
      below = 0;
    }
    if (exhausted) return finish(est, Verdict::inconclusive);
    target = std::min(st.k() + k_s, ma);
  }
}

}  // namespace botscope::lanczos
