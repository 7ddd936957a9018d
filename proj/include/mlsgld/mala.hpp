#pragma once

// Metropolis-adjusted Langevin baseline: Euler-step proposal with an
// accept/reject correction, Robbins-Monro step tuning, repeated experiments.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mlsgld/model.hpp"
#include "mlsgld/parallel.hpp"
#include "mlsgld/rng.hpp"
#include "mlsgld/stats.hpp"

namespace mlsgld {

struct MalaChain {
  ParamVector theta;
  double h = 0.0;
  std::int64_t accept_count = 0;
  std::int64_t step_count = 0;
  ItemCount item_evals = 0;

  double acceptance_rate() const {
    return step_count ? static_cast<double>(accept_count) / static_cast<double>(step_count) : 0.0;
  }
};

namespace detail {

struct LangevinPoint {
  double log_density;
  ParamVector grad;
};

/// Log posterior and its gradient at theta; touches every item once.
template <PosteriorModel M>
LangevinPoint langevin_point(const M& model, const ParamVector& theta) {
  return {log_posterior(model, theta), log_posterior_grad_full(model, theta)};
}

/// log q(from -> to) up to a constant, q the density of one Euler step.
inline double log_proposal(const ParamVector& from, const LangevinPoint& at_from,
                           const ParamVector& to, double h) {
  return -(to - from - h * at_from.grad).squaredNorm() / (4.0 * h);
}

inline double log_accept(const ParamVector& theta, const LangevinPoint& cur,
                         const ParamVector& prop, const LangevinPoint& next, double h) {
  return next.log_density + log_proposal(prop, next, theta, h) - cur.log_density -
         log_proposal(theta, cur, prop, h);
}

}  // namespace detail

/// log[pi(prop) q(prop -> theta)] - log[pi(theta) q(theta -> prop)].
/// Costs 2N item evaluations.
template <PosteriorModel M>
double mala_log_accept(const M& model, const ParamVector& theta, const ParamVector& prop,
                       double h) {
  require(h > 0, "mala_log_accept: h must be > 0");
  const auto cur = detail::langevin_point(model, theta);
  const auto next = detail::langevin_point(model, prop);
  const double la = detail::log_accept(theta, cur, prop, next, h);
  if (std::isnan(la)) throw NumericalError("mala_log_accept: non-finite density");
  return la;
}

/// One MALA transition. Returns the acceptance probability of the proposal
/// (0 for a non-finite proposal, which is rejected).
template <PosteriorModel M>
double mala_step_inplace(MalaChain& chain, RngStream& rng, const M& model) {
  const auto N = static_cast<ItemCount>(model.item_count());
  const auto cur = detail::langevin_point(model, chain.theta);
  ParamVector prop = chain.theta + chain.h * cur.grad;
  for (Eigen::Index j = 0; j < prop.size(); ++j) prop[j] += std::sqrt(2.0 * chain.h) * rng.normal();
  const double u = rng.uniform();
  ++chain.step_count;
  chain.item_evals += 2 * N;
  if (!prop.allFinite()) return 0.0;
  const auto next = detail::langevin_point(model, prop);
  const double la = detail::log_accept(chain.theta, cur, prop, next, chain.h);
  if (!std::isfinite(la) && la != std::numeric_limits<double>::infinity()) return 0.0;
  if (std::log(u) < la) {
    chain.theta = std::move(prop);
    ++chain.accept_count;
  }
  return la >= 0 ? 1.0 : std::exp(la);
}

template <PosteriorModel M>
MalaChain mala_step(MalaChain chain, RngStream& rng, const M& model) {
  mala_step_inplace(chain, rng, model);
  return chain;
}

struct TuneOptions {
  double h_init = 0.0;  // 0: 1 / (N + 1)
  std::int64_t phase_steps = 2000;
  std::int64_t check_window = 500;
  double tolerance = 0.05;
  int max_rounds = 10;
};

struct TuneResult {
  double h = 0.0;
  double trailing_acceptance = 0.0;
  ItemCount item_evals = 0;
  int rounds = 0;
  ParamVector theta;  // chain state after tuning
};

class TuningError : public NumericalError {
 public:
  TuningError(const std::string& what, double best_h)
      : NumericalError(what), best_h_(best_h) {}
  double best_h() const { return best_h_; }

 private:
  double best_h_;
};

/// Robbins-Monro on log h with gain 1/sqrt(t) over tuning phases of
/// `phase_steps`, each followed by `check_window` steps at the Polyak-averaged
/// step size. Stops once the window's acceptance rate is within tolerance.
template <PosteriorModel M>
TuneResult tune_step(const M& model, const ParamVector& theta_init, double target_accept,
                     RngStream& rng, const TuneOptions& opts = {}) {
  require(target_accept > 0 && target_accept < 1, "tune_step: target must lie in (0, 1)");
  double log_h = std::log(opts.h_init > 0 ? opts.h_init
                                          : 1.0 / static_cast<double>(model.item_count() + 1));
  MalaChain chain{theta_init, 0.0, 0, 0, 0};
  TuneResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  std::int64_t t = 0;
  for (int round = 1; round <= opts.max_rounds; ++round) {
    double log_h_sum = 0.0;
    std::int64_t log_h_count = 0;
    for (std::int64_t k = 0; k < opts.phase_steps; ++k) {
      chain.h = std::exp(log_h);
      const double a = mala_step_inplace(chain, rng, model);
      ++t;
      log_h += (a - target_accept) / std::sqrt(static_cast<double>(t));
      if (2 * k >= opts.phase_steps) {
        log_h_sum += log_h;
        ++log_h_count;
      }
    }
    log_h = log_h_sum / static_cast<double>(log_h_count);
    chain.h = std::exp(log_h);
    const std::int64_t before = chain.accept_count;
    for (std::int64_t k = 0; k < opts.check_window; ++k) mala_step_inplace(chain, rng, model);
    const double rate =
        static_cast<double>(chain.accept_count - before) / static_cast<double>(opts.check_window);
    const double gap = std::abs(rate - target_accept);
    if (gap < best_gap) {
      best_gap = gap;
      best = {chain.h, rate, 0, round, chain.theta};
    }
    if (gap <= opts.tolerance) {
      best.item_evals = chain.item_evals;
      return best;
    }
  }
  throw TuningError("tune_step: acceptance did not reach target within " +
                        std::to_string(opts.max_rounds) + " rounds",
                    best.h);
}

struct MalaExperimentOptions {
  std::int64_t steps = 10'000;
  std::int64_t burnin = 1'000;
  int reps = 50;
  double target_accept = 0.574;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Replicate index offset, so distinct experiments on one seed do not share streams.
  std::uint64_t stream_offset = 0;
  std::optional<double> reference;
};

struct MalaRun {
  double estimate = 0.0;  // mean of g after burn-in
  double h = 0.0;
  double acceptance = 0.0;
  double mean_se = 0.0;  // batch-means standard error of `estimate`
  ItemCount item_evals = 0;
  ItemCount tuning_item_evals = 0;
  std::vector<double> trace;  // g along the post-burn-in states
};

/// Tune, then run `steps` transitions from theta0 and average g over the
/// states after `burnin`.
template <PosteriorModel M, typename G>
MalaRun run_mala_chain(const M& model, const G& g, const ParamVector& theta0,
                       const MalaExperimentOptions& opts, std::uint64_t rep, bool keep_trace = false) {
  require(opts.steps > opts.burnin && opts.burnin >= 0, "run_mala: need steps > burnin >= 0");
  RngStream tune_rng(opts.seed, {0, opts.stream_offset + rep, Phase::mala_tune, 0});
  RngStream rng(opts.seed, {0, opts.stream_offset + rep, Phase::mala_noise, 0});
  const TuneResult tuned = tune_step(model, theta0, opts.target_accept, tune_rng);
  MalaChain chain{theta0, tuned.h, 0, 0, 0};
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(opts.steps - opts.burnin));
  for (std::int64_t k = 0; k < opts.steps; ++k) {
    mala_step_inplace(chain, rng, model);
    if (k >= opts.burnin) values.push_back(g(chain.theta));
  }
  MalaRun run;
  run.estimate = stats::mean(values);
  run.h = tuned.h;
  run.acceptance = chain.acceptance_rate();
  run.item_evals = chain.item_evals;
  run.tuning_item_evals = tuned.item_evals;
  if (values.size() >= 100) run.mean_se = stats::batch_means_se(values);
  if (keep_trace) run.trace = std::move(values);
  return run;
}

struct MalaExperimentResult {
  std::vector<MalaRun> runs;  // in replicate order
  std::vector<double> estimates;
  double mean = 0.0;
  double spread = 0.0;  // standard deviation across reps
  std::optional<double> mse;
  std::optional<double> relative_mse;
  double epochs_per_rep = 0.0;
  ItemCount total_item_evals = 0;  // sampling runs only
  ItemCount tuning_item_evals = 0;
  double mean_acceptance = 0.0;
};

template <PosteriorModel M, typename G>
MalaExperimentResult run_mala_experiment(const M& model, const G& g, const ParamVector& theta0,
                                         const MalaExperimentOptions& opts) {
  require(opts.reps >= 1, "run_mala_experiment: reps must be >= 1");
  std::vector<MalaRun> runs(static_cast<std::size_t>(opts.reps));
  parallel_for(0, runs.size(), opts.threads,
               [&](std::size_t r) { runs[r] = run_mala_chain(model, g, theta0, opts, r); });
  MalaExperimentResult res;
  for (const auto& r : runs) {
    res.estimates.push_back(r.estimate);
    res.total_item_evals += r.item_evals;
    res.tuning_item_evals += r.tuning_item_evals;
    res.mean_acceptance += r.acceptance / static_cast<double>(runs.size());
  }
  res.mean = stats::mean(res.estimates);
  res.spread = res.estimates.size() >= 2 ? std::sqrt(stats::variance(res.estimates)) : 0.0;
  res.epochs_per_rep = static_cast<double>(runs.front().item_evals) /
                       static_cast<double>(model.item_count());
  res.runs = std::move(runs);
  if (opts.reference) {
    double se = 0.0;
    for (double e : res.estimates) se += (e - *opts.reference) * (e - *opts.reference);
    res.mse = se / static_cast<double>(res.estimates.size());
    res.relative_mse = *res.mse / (*opts.reference * *opts.reference);
  }
  return res;
}

/// Item evaluations a MALA chain needs for relative RMSE eps_rel, extrapolated
/// from one pilot chain: 2N (burnin + sigma_as^2 / (eps_rel g_hat)^2), where
/// sigma_as^2 is the batch-means asymptotic variance. Tuning is not counted.
template <PosteriorModel M, typename G>
double mala_cost_to_accuracy(const M& model, const G& g, const ParamVector& theta0,
                             double eps_rel, const MalaExperimentOptions& opts, std::uint64_t rep) {
  const MalaRun run = run_mala_chain(model, g, theta0, opts, rep);
  const double kept = static_cast<double>(opts.steps - opts.burnin);
  const double asym_var = run.mean_se * run.mean_se * kept;
  const double needed = asym_var / ((eps_rel * run.estimate) * (eps_rel * run.estimate));
  return 2.0 * static_cast<double>(model.item_count()) *
         (static_cast<double>(opts.burnin) + needed);
}

}  // namespace mlsgld
