#pragma once

// Per-level increment samplers: shifted fine/coarse coupling, its antithetic
// version with two coarse paths, and trajectory-averaged variants.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "mlsgld/gradient.hpp"
#include "mlsgld/rng.hpp"
#include "mlsgld/sgld.hpp"

namespace mlsgld {

/// Level l runs the fine path at h_l = h0 2^-l for s_l = m (l+1) 2^l steps
/// (horizon T_l = m (l+1) h0). The fine path first evolves alone for
/// burnin_steps = m 2^l steps, then is coupled to the coarse path for
/// coupled_coarse_steps = m l 2^(l-1) coarse steps (two fine steps each).
struct LevelConfig {
  int level = 0;
  double h_fine = 0.0;
  double h_coarse = 0.0;  // 0 on level 0
  double T_fine = 0.0;
  double T_coarse = 0.0;
  std::int64_t fine_steps = 0;  // s_l
  std::int64_t coarse_steps = 0;  // s_{l-1}, 0 on level 0
  std::int64_t burnin_steps = 0;
  std::int64_t coupled_coarse_steps = 0;
};

inline std::int64_t schedule_steps(int l, int m) {
  return static_cast<std::int64_t>(m) * (l + 1) * (std::int64_t{1} << l);
}

inline LevelConfig level_schedule(int l, int m, double h0) {
  require(l >= 0 && l < 40, "level_schedule: level out of range");
  require(m >= 1, "level_schedule: m must be >= 1");
  require(h0 > 0, "level_schedule: h0 must be > 0");
  LevelConfig c;
  c.level = l;
  c.h_fine = std::ldexp(h0, -l);
  c.T_fine = static_cast<double>(m) * (l + 1) * h0;
  c.fine_steps = schedule_steps(l, m);
  if (l == 0) return c;
  c.h_coarse = std::ldexp(h0, -(l - 1));
  c.T_coarse = static_cast<double>(m) * l * h0;
  c.coarse_steps = schedule_steps(l - 1, m);
  c.burnin_steps = static_cast<std::int64_t>(m) << l;
  c.coupled_coarse_steps = c.coarse_steps;
  return c;
}

enum class Coupling { plain, antithetic };

struct CouplingVariant {
  Coupling coupling = Coupling::antithetic;
  bool averaged = false;
};

inline CouplingVariant parse_variant(std::string_view s) {
  if (s == "plain") return {Coupling::plain, false};
  if (s == "antithetic") return {Coupling::antithetic, false};
  if (s == "plain-avg") return {Coupling::plain, true};
  if (s == "antithetic-avg") return {Coupling::antithetic, true};
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

inline std::string to_string(const CouplingVariant& v) {
  std::string s = v.coupling == Coupling::plain ? "plain" : "antithetic";
  return v.averaged ? s + "-avg" : s;
}

/// Averaging window p for a path of s steps: the last p+1 states are averaged.
inline std::int64_t averaging_window(std::int64_t s, bool averaged) { return averaged ? s / 2 : 0; }

struct DeltaSample {
  double value = 0.0;  // g(fine) - g(coarse); meaningless if diverged
  ItemCount cost = 0;
  bool diverged = false;
  double fine_g = 0.0;    // fine-path term
  double coarse_g = 0.0;  // coarse-path term (averaged over c+/c- when antithetic)
};

/// Running mean of g over the states with index >= first_index.
class WindowMean {
 public:
  WindowMean(std::int64_t total_steps, std::int64_t window)
      : first_index_(total_steps - window) {}

  template <typename G>
  void observe(const PathState& s, const G& g) {
    if (s.step_count >= first_index_) {
      sum_ += g(s.theta);
      ++count_;
    }
  }

  double mean() const { return sum_ / static_cast<double>(count_); }
  std::int64_t count() const { return count_; }

 private:
  std::int64_t first_index_;
  double sum_ = 0.0;
  std::int64_t count_ = 0;
};

struct NoFineObserver {
  void operator()(const PathState&) const {}
};

/// One coupled iteration of the plain scheme: two fine steps with (tau1, xi1),
/// (tau2, xi2) and one coarse step with batch tau_c and noise (xi1+xi2)/sqrt2.
/// `on_fine` sees the fine state after each of its two substeps.
template <PosteriorModel M, typename OnFine = NoFineObserver>
void plain_coupled_step(const DriftEstimator<M>& est, const LevelConfig& cfg, PathState& fine,
                        PathState& coarse, std::span<const std::size_t> tau1,
                        std::span<const std::size_t> tau2, std::span<const std::size_t> tau_c,
                        const ParamVector& xi1, const ParamVector& xi2, OnFine&& on_fine = {}) {
  euler_step_inplace(fine, cfg.h_fine, est(fine.theta, tau1), xi1);
  on_fine(std::as_const(fine));
  euler_step_inplace(fine, cfg.h_fine, est(fine.theta, tau2), xi2);
  on_fine(std::as_const(fine));
  euler_step_inplace(coarse, cfg.h_coarse, est(coarse.theta, tau_c), coarse_noise(xi1, xi2));
}

/// One coupled iteration of the antithetic scheme. Both coarse paths share the
/// coarse noise; c+ uses the first fine batch, c- the second, and each
/// advances from its own previous state.
template <PosteriorModel M, typename OnFine = NoFineObserver>
void antithetic_coupled_step(const DriftEstimator<M>& est, const LevelConfig& cfg,
                             PathState& fine, PathState& coarse_plus, PathState& coarse_minus,
                             std::span<const std::size_t> tau1, std::span<const std::size_t> tau2,
                             const ParamVector& xi1, const ParamVector& xi2,
                             OnFine&& on_fine = {}) {
  euler_step_inplace(fine, cfg.h_fine, est(fine.theta, tau1), xi1);
  on_fine(std::as_const(fine));
  euler_step_inplace(fine, cfg.h_fine, est(fine.theta, tau2), xi2);
  on_fine(std::as_const(fine));
  const ParamVector xi_c = coarse_noise(xi1, xi2);
  euler_step_inplace(coarse_plus, cfg.h_coarse, est(coarse_plus.theta, tau1), xi_c);
  euler_step_inplace(coarse_minus, cfg.h_coarse, est(coarse_minus.theta, tau2), xi_c);
}

/// Observer passed to traced samples after each coupled iteration. For the
/// plain scheme both coarse references point at the single coarse path.
struct CoupledView {
  std::int64_t iteration;
  const PathState& fine;
  const PathState& coarse_plus;
  const PathState& coarse_minus;
};

/// Draws independent Delta samples for any level. Every sample is a pure
/// function of (seed, level, replicate, attempt).
template <PosteriorModel M, typename G>
class LevelSampler {
 public:
  LevelSampler(const DriftEstimator<M>& est, G g, ParamVector theta0, int m, double h0,
               CouplingVariant variant, std::uint64_t seed)
      : est_(&est), g_(std::move(g)), theta0_(std::move(theta0)), m_(m), h0_(h0),
        variant_(variant), seed_(seed) {
    require(static_cast<std::size_t>(theta0_.size()) == est.dimension(),
            "LevelSampler: start point has wrong dimension");
    require(m_ >= 1 && h0_ > 0, "LevelSampler: need m >= 1 and h0 > 0");
  }

  LevelConfig config(int l) const { return level_schedule(l, m_, h0_); }
  const DriftEstimator<M>& estimator() const { return *est_; }
  const G& quantity() const { return g_; }
  const ParamVector& start() const { return theta0_; }
  CouplingVariant variant() const { return variant_; }
  std::uint64_t seed() const { return seed_; }
  int m() const { return m_; }
  double h0() const { return h0_; }

  DeltaSample sample(int l, std::uint64_t replicate, std::uint32_t attempt = 0) const {
    return sample(l, replicate, attempt, [](const CoupledView&) {});
  }

  template <typename Tracer>
  DeltaSample sample(int l, std::uint64_t replicate, std::uint32_t attempt, Tracer&& trace) const {
    const LevelConfig cfg = config(l);
    return l == 0 ? sample_level0(cfg, replicate, attempt) : sample_coupled(cfg, replicate, attempt, trace);
  }

 private:
  RngStream stream(const LevelConfig& cfg, std::uint64_t rep, Phase phase,
                   std::uint32_t attempt) const {
    return RngStream(seed_, {static_cast<std::uint64_t>(cfg.level), rep, phase, attempt});
  }

  DeltaSample sample_level0(const LevelConfig& cfg, std::uint64_t rep,
                            std::uint32_t attempt) const {
    PathStreams streams{stream(cfg, rep, Phase::coupled_noise, attempt),
                        stream(cfg, rep, Phase::fine_batch, attempt)};
    WindowMean window(cfg.fine_steps, averaging_window(cfg.fine_steps, variant_.averaged));
    const PathState end = run_path(theta0_, cfg.fine_steps, cfg.h_fine, *est_, streams,
                                   [&](const PathState& s) { window.observe(s, g_); });
    DeltaSample out;
    out.cost = end.item_evals;
    out.diverged = end.diverged;
    out.fine_g = window.mean();
    out.value = out.fine_g;
    return out;
  }

  template <typename Tracer>
  DeltaSample sample_coupled(const LevelConfig& cfg, std::uint64_t rep, std::uint32_t attempt,
                             Tracer& trace) const {
    const auto& est = *est_;
    const bool antithetic = variant_.coupling == Coupling::antithetic;
    WindowMean fine_win(cfg.fine_steps, averaging_window(cfg.fine_steps, variant_.averaged));
    WindowMean plus_win(cfg.coarse_steps, averaging_window(cfg.coarse_steps, variant_.averaged));
    WindowMean minus_win = plus_win;

    // Uncoupled fine segment.
    PathStreams burnin{stream(cfg, rep, Phase::burnin_noise, attempt),
                       stream(cfg, rep, Phase::burnin_batch, attempt)};
    PathState fine = run_path(theta0_, cfg.burnin_steps, cfg.h_fine, est, burnin,
                              [&](const PathState& s) { fine_win.observe(s, g_); });

    PathState plus = PathState::start(theta0_);
    PathState minus = PathState::start(theta0_);
    plus_win.observe(plus, g_);
    if (antithetic) minus_win.observe(minus, g_);

    RngStream noise = stream(cfg, rep, Phase::coupled_noise, attempt);
    RngStream batches = stream(cfg, rep, Phase::fine_batch, attempt);
    RngStream select = stream(cfg, rep, Phase::coarse_select, attempt);
    const std::size_t n = est.uses_batches() ? est.batch_size() : 0;
    BatchIndices tau1(n), tau2(n), tau_c;
    ParamVector xi1(theta0_.size()), xi2(theta0_.size());

    for (std::int64_t k = 0; k < cfg.coupled_coarse_steps; ++k) {
      if (n > 0) {
        sample_batch_into(batches, est.item_count(), tau1);
        sample_batch_into(batches, est.item_count(), tau2);
      }
      fill_gaussian(noise, xi1);
      fill_gaussian(noise, xi2);

      const auto on_fine = [&](const PathState& f) { fine_win.observe(f, g_); };
      if (antithetic) {
        antithetic_coupled_step(est, cfg, fine, plus, minus, tau1, tau2, xi1, xi2, on_fine);
        minus_win.observe(minus, g_);
      } else {
        if (n > 0) tau_c = coarse_batch(select, tau1, tau2);
        plain_coupled_step(est, cfg, fine, plus, tau1, tau2, tau_c, xi1, xi2, on_fine);
      }
      plus_win.observe(plus, g_);
      trace(CoupledView{k, fine, plus, antithetic ? minus : plus});
    }

    DeltaSample out;
    out.cost = fine.item_evals + plus.item_evals + (antithetic ? minus.item_evals : 0);
    out.diverged = fine.diverged || plus.diverged || (antithetic && minus.diverged);
    out.fine_g = fine_win.mean();
    out.coarse_g = antithetic ? 0.5 * (plus_win.mean() + minus_win.mean()) : plus_win.mean();
    out.value = out.fine_g - out.coarse_g;
    return out;
  }

  const DriftEstimator<M>* est_;
  G g_;
  ParamVector theta0_;
  int m_;
  double h0_;
  CouplingVariant variant_;
  std::uint64_t seed_;
};

}  // namespace mlsgld
