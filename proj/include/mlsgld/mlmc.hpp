#pragma once

// Multilevel estimator driver: level statistics, sample allocation, adaptive
// choice of the finest level and cost accounting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "mlsgld/coupling.hpp"
#include "mlsgld/parallel.hpp"
#include "mlsgld/stats.hpp"
#include "mlsgld/types.hpp"

namespace mlsgld {

/// Streaming statistics of the accepted Delta samples of one level,
/// accumulated in replicate order.
struct LevelStats {
  int level = 0;
  std::uint64_t samples = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations
  ItemCount cost = 0;           // all item evaluations spent on this level
  ItemCount accepted_cost = 0;  // part of `cost` spent on accepted samples
  std::uint64_t rejected = 0;

  void add(double value, ItemCount sample_cost) {
    ++samples;
    const double delta = value - mean;
    mean += delta / static_cast<double>(samples);
    m2 += delta * (value - mean);
    cost += sample_cost;
    accepted_cost += sample_cost;
  }

  double variance() const {
    return samples >= 2 ? m2 / static_cast<double>(samples - 1) : 0.0;
  }

  double cost_per_sample() const {
    return samples ? static_cast<double>(accepted_cost) / static_cast<double>(samples) : 0.0;
  }
};

struct LevelVarianceCost {
  double variance = 0.0;
  double cost = 0.0;
};

/// N_l = ceil(2 eps^-2 sqrt(V_l / C_l) sum_j sqrt(V_j C_j)), which keeps
/// sum_l V_l / N_l <= eps^2 / 2 at minimal total cost. Levels with zero
/// variance get `min_samples`.
inline std::vector<std::uint64_t> optimal_allocation(std::span<const LevelVarianceCost> levels,
                                                     double eps, std::uint64_t min_samples = 2) {
  require(eps > 0, "optimal_allocation: eps must be > 0");
  double sum = 0.0;
  for (const auto& lv : levels) {
    require(lv.variance >= 0 && lv.cost > 0, "optimal_allocation: need V >= 0 and C > 0");
    sum += std::sqrt(lv.variance * lv.cost);
  }
  std::vector<std::uint64_t> out;
  out.reserve(levels.size());
  for (const auto& lv : levels) {
    if (lv.variance == 0.0) {
      out.push_back(min_samples);
      continue;
    }
    const double n = std::ceil(2.0 / (eps * eps) * std::sqrt(lv.variance / lv.cost) * sum);
    const double capped = std::min(n, 1e18);
    out.push_back(std::max(min_samples, static_cast<std::uint64_t>(capped)));
  }
  return out;
}

struct MlmcOptions {
  double target_eps_rel = 0.1;
  std::uint64_t pilot_samples = 100;
  int initial_levels = 3;
  int max_level = 12;
  /// When set, levels 0..L are used and no bias test is made.
  std::optional<int> fixed_max_level;
  std::uint64_t max_total_samples = 50'000'000;
  std::uint64_t min_new_level_samples = 10;
  double alpha = 1.0;
  int max_attempts = 20;
  int max_iterations = 200;
  unsigned threads = 1;
};

struct MlmcResult {
  double estimate = 0.0;
  std::vector<LevelStats> levels;
  ItemCount total_cost = 0;
  ItemCount setup_cost = 0;
  double epochs = 0.0;
  double statistical_error_bound = 0.0;
  double bias_bound = 0.0;
  double target_eps = 0.0;
  double target_eps_rel = 0.0;
  bool converged = false;
};

/// epochs = total item evaluations / N.
inline double cost_report(const MlmcResult& result, std::size_t N) {
  require(N >= 1, "cost_report: N must be >= 1");
  return static_cast<double>(result.total_cost) / static_cast<double>(N);
}

inline nlohmann::json to_json(const MlmcResult& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& s : r.levels) {
    levels.push_back({{"l", s.level},
                      {"N_l", s.samples},
                      {"mean", s.mean},
                      {"var", s.variance()},
                      {"cost_per_sample", s.cost_per_sample()},
                      {"rejected", s.rejected}});
  }
  return {{"estimate", r.estimate},
          {"eps_target", r.target_eps},
          {"eps_target_rel", r.target_eps_rel},
          {"eps_achieved_bound", r.statistical_error_bound},
          {"bias_bound", r.bias_bound},
          {"levels", levels},
          {"total_item_evals", r.total_cost},
          {"setup_item_evals", r.setup_cost},
          {"epochs", r.epochs},
          {"converged", r.converged}};
}

/// Multilevel driver over any sampler exposing
/// `DeltaSample sample(int level, uint64 replicate, uint32 attempt) const`.
template <typename Sampler>
class MlmcDriver {
 public:
  MlmcDriver(const Sampler& sampler, MlmcOptions opts, ItemCount setup_cost = 0)
      : sampler_(&sampler), opts_(opts), setup_cost_(setup_cost) {
    require(opts_.target_eps_rel > 0, "run_mlmc: target_eps_rel must be > 0");
    require(opts_.pilot_samples >= 2, "run_mlmc: pilot must have >= 2 samples");
    require(opts_.initial_levels >= 1, "run_mlmc: need at least one initial level");
  }

  /// Brings level l to `target` accepted samples. Returns false if the
  /// global sample cap prevented it.
  bool extend(std::vector<LevelStats>& levels, int l, std::uint64_t target) {
    while (static_cast<int>(levels.size()) <= l) {
      levels.push_back(LevelStats{});
      levels.back().level = static_cast<int>(levels.size()) - 1;
    }
    LevelStats& st = levels[static_cast<std::size_t>(l)];
    if (target <= st.samples) return true;
    bool capped = false;
    if (total_samples_ + (target - st.samples) > opts_.max_total_samples) {
      target = st.samples + (opts_.max_total_samples - std::min(total_samples_, opts_.max_total_samples));
      capped = true;
    }
    const std::size_t first = st.samples;
    const std::size_t count = target - st.samples;
    std::vector<Outcome> out(count);
    parallel_for(0, count, opts_.threads, [&](std::size_t k) {
      Outcome& o = out[k];
      for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
        const DeltaSample s = sampler_->sample(l, first + k, static_cast<std::uint32_t>(attempt));
        if (s.diverged) {
          o.rejected_cost += s.cost;
          ++o.rejected;
          continue;
        }
        o.value = s.value;
        o.cost = s.cost;
        o.ok = true;
        return;
      }
    });
    for (const Outcome& o : out) {
      if (!o.ok) {
        throw NumericalError("run_mlmc: every attempt diverged on level " + std::to_string(l));
      }
      st.rejected += o.rejected;
      st.cost += o.rejected_cost;
      st.add(o.value, o.cost);
    }
    total_samples_ += count;
    return !capped;
  }

  MlmcResult run() {
    std::vector<LevelStats> levels;
    bool within_caps = true;
    int L = opts_.fixed_max_level ? *opts_.fixed_max_level : opts_.initial_levels - 1;
    L = std::min(L, opts_.max_level);
    require(L >= 0, "run_mlmc: negative level count");
    for (int l = 0; l <= L; ++l) within_caps &= extend(levels, l, opts_.pilot_samples);

    MlmcResult res;
    res.target_eps_rel = opts_.target_eps_rel;
    const double sqrt_half = 1.0 / std::numbers::sqrt2;
    const double bias_den = std::pow(2.0, opts_.alpha) - 1.0;

    for (int iter = 0; iter < opts_.max_iterations && within_caps; ++iter) {
      const auto vc = working_estimates(levels);
      const double eps = absolute_eps(levels);
      const auto alloc = optimal_allocation(vc, eps);
      for (int l = 0; l <= L; ++l) {
        within_caps &= extend(levels, l, alloc[static_cast<std::size_t>(l)]);
      }

      const double eps_now = absolute_eps(levels);
      const double stat = statistical_bound(levels);
      const double satisfied = eps_now * sqrt_half;
      if (opts_.fixed_max_level) {
        if (stat <= satisfied) {
          res.converged = true;
          break;
        }
        continue;
      }
      const double bias = bias_estimate(levels, L, bias_den);
      if (bias <= satisfied) {
        if (stat <= satisfied) {
          res.converged = true;
          break;
        }
        continue;
      }
      if (L >= opts_.max_level) break;

      // Add a level: seed its allocation from extrapolated variance and cost.
      ++L;
      auto ext = working_estimates(levels);
      ext.push_back(extrapolate(ext));
      const auto alloc_new = optimal_allocation(ext, eps_now);
      within_caps &= extend(levels, L,
                            std::max(opts_.min_new_level_samples, alloc_new.back()));
    }

    res.levels = levels;
    res.estimate = 0.0;
    for (const auto& s : levels) res.estimate += s.mean;
    res.setup_cost = setup_cost_;
    res.total_cost = setup_cost_;
    for (const auto& s : levels) res.total_cost += s.cost;
    res.statistical_error_bound = statistical_bound(levels);
    res.bias_bound = opts_.fixed_max_level ? 0.0 : bias_estimate(levels, L, bias_den);
    res.target_eps = absolute_eps(levels);
    if constexpr (requires { sampler_->estimator().item_count(); }) {
      const auto N = sampler_->estimator().item_count();
      if (N > 0) res.epochs = cost_report(res, N);
    }
    if (!within_caps) res.converged = false;
    return res;
  }

 private:
  struct Outcome {
    double value = 0.0;
    ItemCount cost = 0;
    ItemCount rejected_cost = 0;
    std::uint64_t rejected = 0;
    bool ok = false;
  };

  double absolute_eps(const std::vector<LevelStats>& levels) const {
    double est = 0.0;
    for (const auto& s : levels) est += s.mean;
    const double eps = opts_.target_eps_rel * std::abs(est);
    return eps > 0 ? eps : opts_.target_eps_rel;
  }

  static double statistical_bound(const std::vector<LevelStats>& levels) {
    double v = 0.0;
    for (const auto& s : levels) v += s.variance() / static_cast<double>(s.samples);
    return std::sqrt(v);
  }

  static double bias_estimate(const std::vector<LevelStats>& levels, int L, double den) {
    if (L < 1) return std::numeric_limits<double>::infinity();
    double top = std::abs(levels[static_cast<std::size_t>(L)].mean);
    if (L >= 2) {
      top = std::max(top, std::abs(levels[static_cast<std::size_t>(L - 1)].mean) / (den + 1.0));
    }
    return top / den;
  }

  /// Variance and cost used for allocation. Levels added beyond the pilot
  /// set are floored by the extrapolation from the level below, which keeps
  /// a handful of samples from underestimating them.
  std::vector<LevelVarianceCost> working_estimates(const std::vector<LevelStats>& levels) const {
    std::vector<LevelVarianceCost> vc;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      LevelVarianceCost e{levels[l].variance(), std::max(levels[l].cost_per_sample(), 1.0)};
      if (static_cast<int>(l) >= opts_.initial_levels && l >= 1) {
        std::vector<LevelVarianceCost> below(vc.begin(), vc.end());
        e.variance = std::max(e.variance, 0.5 * extrapolate(below).variance);
      }
      vc.push_back(e);
    }
    return vc;
  }

  /// V_{L+1} = V_L 2^-beta, C_{L+1} = C_L 2^gamma with beta, gamma fitted on
  /// levels >= 1.
  static LevelVarianceCost extrapolate(const std::vector<LevelVarianceCost>& vc) {
    std::vector<double> x, lv, lc;
    for (std::size_t l = 1; l < vc.size(); ++l) {
      if (vc[l].variance <= 0) continue;
      x.push_back(static_cast<double>(l));
      lv.push_back(std::log2(vc[l].variance));
      lc.push_back(std::log2(vc[l].cost));
    }
    double beta = 1.0, gamma = 1.0;
    if (x.size() >= 2) {
      beta = std::clamp(-stats::ls_slope(x, lv), 0.5, 4.0);
      gamma = std::clamp(stats::ls_slope(x, lc), 0.0, 4.0);
    }
    const LevelVarianceCost& last = vc.back();
    return {last.variance * std::pow(2.0, -beta), last.cost * std::pow(2.0, gamma)};
  }

  const Sampler* sampler_;
  MlmcOptions opts_;
  ItemCount setup_cost_;
  std::uint64_t total_samples_ = 0;
};

template <typename Sampler>
MlmcResult run_mlmc(const Sampler& sampler, const MlmcOptions& opts, ItemCount setup_cost = 0) {
  return MlmcDriver<Sampler>(sampler, opts, setup_cost).run();
}

}  // namespace mlsgld
