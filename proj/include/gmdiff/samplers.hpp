#pragma once

#include <Eigen/Dense>

#include "gmdiff/rng.hpp"
#include "gmdiff/score_model.hpp"
#include "gmdiff/sde.hpp"

namespace gmdiff {

struct SamplerOpts {
  int steps = 1000;
  bool corrector = false;  // one Langevin correction per predictor step
  double snr = 0.16;       // corrector signal-to-noise ratio
  double t_start = -1.0;   // defaults to T
  double t_end = -1.0;     // defaults to eps
};

// Euler-Maruyama integration of the reverse SDE
//   dx = [f(x,t) - g^2(t) s_theta(x,t)] dt + g(t) dw (backward in t)
// from t_start down to t_end on a uniform grid, started at the terminal
// reference distribution. With opts.corrector each grid time also runs one
// Langevin step x += step * s + sqrt(2 step) z with the shared step size
// step = 2 (snr m_z / m_s)^2, where m_z and m_s are the batch means of the
// row norms of z and of the score; a vanishing mean score norm skips the
// correction. Predictor noise comes from independent per-index RNG streams,
// so predictor-only output does not depend on the batch size; the corrector
// couples samples through the shared step. Rows of the result are samples
// at t_end.
Eigen::MatrixXd reverse_sde_sample(const ScoreFn& net, const SdeSpec& sde, int n,
                                   const SamplerOpts& opts, Rng& rng);

// Predictor-corrector sampling: reverse_sde_sample with the corrector on.
Eigen::MatrixXd pc_sample(const ScoreFn& net, const SdeSpec& sde, int n,
                          SamplerOpts opts, Rng& rng);

// Draws n prior points and transports them to eps along the probability flow.
Eigen::MatrixXd ode_sample(const ScoreFn& net, const SdeSpec& sde, int n, int steps,
                           Rng& rng);

// Probability-flow ODE dx/dt = f - 0.5 g^2 s_theta integrated with fixed-step
// RK4 from t_from to t_to (either direction) for every row of x.
Eigen::MatrixXd ode_flow(const ScoreFn& net, const SdeSpec& sde, Eigen::MatrixXd x,
                         double t_from, double t_to, int steps);

// Perturbs each data row to time tau and transports it back to eps along the
// probability-flow ODE; reconstruction quality degrades as tau grows.
Eigen::MatrixXd regenerate_from_tau(const ScoreFn& net, const SdeSpec& sde,
                                    const Eigen::MatrixXd& x0, double tau, int steps,
                                    Rng& rng);

}  // namespace gmdiff
