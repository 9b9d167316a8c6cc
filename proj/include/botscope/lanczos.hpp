#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "botscope/matrix.hpp"
#include "botscope/params.hpp"

// Largest eigenpair of a correlation matrix by Lanczos iteration with full
// reorthogonalization, Sturm-count bisection on the tridiagonal T_k and an
// a-posteriori error bound, plus the early-terminating detection loop.
namespace botscope::lanczos {

struct LanczosState {
  std::vector<std::vector<double>> v;  // orthonormal basis columns v_1..v_k
  std::vector<double> alpha;           // diag(T_k)
  std::vector<double> beta;            // offdiag(T_k), length k - 1
  std::vector<double> residual;        // unnormalized v~_{k+1}
  double residual_norm = 0.0;
  bool broke_down = false;
  std::vector<double> start;  // optional v_1; a seeded random unit vector when empty
  std::uint64_t flops = 0;

  std::size_t k() const { return alpha.size(); }
};

/// Runs up to `steps` more Lanczos steps. Stops early on breakdown
/// (||v~_{k+1}|| <= 1e-12 * ||R||_max * m) or when k reaches m, which also
/// counts as breakdown with a zero residual.
void lanczos_extend(const SymmetricMatrix& r, LanczosState& state, std::size_t steps,
                    std::uint64_t seed);

/// Gershgorin interval of T_k: lower end clamped at 0, upper end capped at trace(T_k).
std::pair<double, double> eig_bounds(const std::vector<double>& alpha, const std::vector<double>& beta);

/// Number of eigenvalues of T_k strictly below lambda (negative pivots of the LDL^T recurrence).
std::size_t sturm_count(const std::vector<double>& alpha, const std::vector<double>& beta,
                        double lambda);

/// Largest eigenvalue of T_k by bisection, stopping at |u - l| <= eps1 (|l| + |u|).
/// Starts from eig_bounds when they bracket the top eigenvalue, else from the
/// plain Gershgorin interval.
double bisect_largest(const std::vector<double>& alpha, const std::vector<double>& beta, double eps1,
                      std::uint64_t* iterations = nullptr);

struct RitzVector {
  std::vector<double> mu_tilde;  // unit eigenvector of T_k
  std::vector<double> mu_hat;    // V mu~ / ||V mu~||, sign chosen so components sum to >= 0
};

/// Eigenvector of T_k for lambda_hat by two inverse-iteration solves.
std::vector<double> tridiagonal_eigenvector(const std::vector<double>& alpha,
                                            const std::vector<double>& beta, double lambda_hat,
                                            std::uint64_t seed);

RitzVector recover_eigenvector(const LanczosState& state, double lambda_hat, std::uint64_t seed);

/// d = residual_norm * |last component of mu~| / ||mu~||.
double error_bound(double residual_norm, const std::vector<double>& mu_tilde);

enum class Verdict { warn, clear, inconclusive };
const char* verdict_name(Verdict v);

struct PrincipalEstimate {
  double lambda_norm = 0.0;  // lambda_raw / m_active
  double error_norm = 0.0;   // d / m_active
  double lambda_raw = 0.0;
  double error_raw = 0.0;
  std::vector<double> eigvec;  // unit, length m; zero on inactive columns
  std::size_t k_used = 0;
  std::size_t m_active = 0;
  Verdict verdict = Verdict::clear;
  bool broke_down = false;
  std::uint64_t flops = 0;
  std::uint64_t bisection_steps = 0;
  std::size_t rounds = 0;  // sizes evaluated

  friend bool operator==(const PrincipalEstimate&, const PrincipalEstimate&) = default;
};

/// Early-terminating estimate of the normalized principal weight. Columns with
/// active[j] == 0 are dropped first; without a mask every column is used.
PrincipalEstimate estimate_principal(const SymmetricMatrix& r, const DetectionParams& params,
                                     std::uint64_t seed, const std::vector<char>* active = nullptr);

/// Principal submatrix on the columns with active[j] != 0.
SymmetricMatrix compact_active(const SymmetricMatrix& r, const std::vector<char>& active);

}  // namespace botscope::lanczos
