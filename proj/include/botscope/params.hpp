#pragma once

#include <cstddef>
#include <stdexcept>

namespace botscope {

/// Detection knobs shared by the estimator and the detector.
struct DetectionParams {
  double omega = 0.65;  // principal-weight threshold, > 0.5
  double eps1 = 1e-10;  // bisection relative tolerance
  double eps2 = 0.01;   // normalized error-bound target once a warning is raised
  double k_l_frac = 0.10;
  double k_u_frac = 0.80;
  double k_s_frac = 0.01;
  std::size_t c = 25;  // size increments tolerated below 0.5 before clearing
  double knee_theta = 0.5;

  void validate() const {
    if (!(omega > 0.5 && omega <= 1.0)) throw std::invalid_argument("omega must be in (0.5, 1]");
    if (!(eps1 > 0.0 && eps1 < eps2 && eps2 < 1.0))
      throw std::invalid_argument("need 0 < eps1 < eps2 < 1");
    if (!(k_l_frac > 0.0 && k_l_frac <= k_u_frac && k_u_frac <= 1.0))
      throw std::invalid_argument("need 0 < k_l_frac <= k_u_frac <= 1");
    if (!(k_s_frac > 0.0 && k_s_frac <= 1.0)) throw std::invalid_argument("k_s_frac must be in (0, 1]");
    if (!(knee_theta > 0.0 && knee_theta < 1.0))
      throw std::invalid_argument("knee_theta must be in (0, 1)");
  }
};

}  // namespace botscope
