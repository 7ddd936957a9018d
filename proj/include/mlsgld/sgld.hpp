#pragma once

// Euler transition of the Langevin SDE and single-path simulation.

#include <cmath>
#include <cstdint>

#include "mlsgld/gradient.hpp"
#include "mlsgld/rng.hpp"

namespace mlsgld {

/// Paths whose sup-norm exceeds this are flagged diverged.
inline constexpr double kDivergenceBound = 1e8;

struct PathState {
  ParamVector theta;
  std::int64_t step_count = 0;
  ItemCount item_evals = 0;
  bool diverged = false;

  static PathState start(ParamVector theta) { return {std::move(theta), 0, 0, false}; }
};

/// theta <- theta + h drift + sqrt(2h) xi, in place.
inline void euler_step_inplace(PathState& state, double h, const DriftEstimate& drift,
                               const ParamVector& xi) {
  if (!(h >= 0)) throw std::invalid_argument("euler_step: step size must be >= 0");
  require_same_dim(state.theta, drift.drift, "euler_step");
  require_same_dim(state.theta, xi, "euler_step");
  state.theta.noalias() += h * drift.drift;
  state.theta.noalias() += std::sqrt(2.0 * h) * xi;
  ++state.step_count;
  state.item_evals += drift.cost;
  if (!state.diverged) {
    state.diverged =
        !state.theta.allFinite() || state.theta.cwiseAbs().maxCoeff() > kDivergenceBound;
  }
}

inline PathState euler_step(PathState state, double h, const DriftEstimate& drift,
                            const ParamVector& xi) {
  euler_step_inplace(state, h, drift, xi);
  return state;
}

/// Noise and batch sources feeding one path.
struct PathStreams {
  RngStream noise;
  RngStream batch;
};

/// One estimator-driven Euler step drawing its batch and noise from `streams`.
/// Scratch buffers are caller-owned so long loops do not allocate.
template <PosteriorModel M>
void sgld_step(PathState& state, double h, const DriftEstimator<M>& est, PathStreams& streams,
               BatchIndices& tau, ParamVector& xi) {
  if (est.uses_batches()) sample_batch_into(streams.batch, est.item_count(), tau);
  fill_gaussian(streams.noise, xi);
  euler_step_inplace(state, h, est(state.theta, tau), xi);
}

/// Composition of `steps` SGLD transitions. `observe(state)` is called on the
/// initial state and after every step. A diverged path keeps running and
/// stays flagged.
template <PosteriorModel M, typename Observer>
PathState run_path(const ParamVector& theta_init, std::int64_t steps, double h,
                   const DriftEstimator<M>& est, PathStreams& streams, Observer&& observe) {
  require(steps >= 0, "run_path: steps must be >= 0");
  PathState state = PathState::start(theta_init);
  BatchIndices tau(est.uses_batches() ? est.batch_size() : 0);
  ParamVector xi(theta_init.size());
  observe(std::as_const(state));
  for (std::int64_t k = 0; k < steps; ++k) {
    sgld_step(state, h, est, streams, tau, xi);
    observe(std::as_const(state));
  }
  return state;
}

template <PosteriorModel M>
PathState run_path(const ParamVector& theta_init, std::int64_t steps, double h,
                   const DriftEstimator<M>& est, PathStreams& streams) {
  return run_path(theta_init, steps, h, est, streams, [](const PathState&) {});
}

}  // namespace mlsgld
