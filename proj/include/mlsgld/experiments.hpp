#pragma once

// Experiment suite behind the command-line tool: decay diagnostics, MSE
// against cost, cost against dataset size, coupled-path traces and MALA
// runs. Every command is a deterministic function of its config.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "mlsgld/coupling.hpp"
#include "mlsgld/dataset.hpp"
#include "mlsgld/gradient.hpp"
#include "mlsgld/mala.hpp"
#include "mlsgld/mlmc.hpp"
#include "mlsgld/model.hpp"
#include "mlsgld/parallel.hpp"
#include "mlsgld/stats.hpp"

#ifndef MLSGLD_VERSION
#define MLSGLD_VERSION "unknown"
#endif

namespace mlsgld {

inline const char* version_string() { return MLSGLD_VERSION; }

/// Seed purposes, so streams of different experiment parts never overlap.
namespace purpose {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t decay = 2;
inline constexpr std::uint64_t mlmc_rep = 3;
inline constexpr std::uint64_t mala_rep = 4;
inline constexpr std::uint64_t reference = 5;
inline constexpr std::uint64_t paths = 6;
}  // namespace purpose

/// Smallest n with n^3 >= N.
inline std::size_t default_batch_size(std::size_t N) {
  std::size_t n = 1;
  while (n * n * n < N) ++n;
  return n;
}

/// Relative accuracies 2^{-k/2} for k = k_lo..k_hi.
inline std::vector<double> eps_grid(int k_lo, int k_hi) {
  std::vector<double> out;
  for (int k = k_lo; k <= k_hi; ++k) out.push_back(std::pow(2.0, -0.5 * k));
  return out;
}

struct ExperimentConfig {
  DataKind model = DataKind::logistic;
  std::size_t N = 100;
  std::size_t d = 3;
  std::optional<std::size_t> batch_size;  // default ceil(N^{1/3})
  int m = 5;
  std::optional<double> h0;  // default 1/N
  CouplingVariant variant{Coupling::antithetic, false};
  EstimatorConfig estimator{EstimatorKind::taylor};
  std::uint64_t seed = 1;
  std::vector<double> eps;  // relative targets; empty picks the command default
  int max_level = 6;        // decay/paths levels, level cap for the driver
  std::uint64_t samples = 1000;
  std::optional<int> reps;
  // Small pilots keep the fixed pilot cost from dominating coarse targets.
  std::uint64_t pilot = 5;
  unsigned threads = 1;
  std::optional<std::string> data_path;
  std::vector<std::size_t> n_list{100, 316, 1000};
  bool include_mala = true;
  std::optional<double> reference;
  std::int64_t mala_steps = 10'000;
  std::int64_t mala_burnin = 1'000;
  double target_accept = 0.574;

  std::size_t batch() const { return batch_size.value_or(default_batch_size(N)); }
  double step0() const { return h0.value_or(1.0 / static_cast<double>(N)); }
};

/// Config echo for JSON sidecars. The thread count is left out so the
/// sidecar does not depend on it.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json eps = nlohmann::json::array();
  for (double e : c.eps) eps.push_back(e);
  nlohmann::json j{{"model", to_string(c.model)},
                   {"N", c.N},
                   {"d", c.d},
                   {"n", c.batch()},
                   {"m", c.m},
                   {"h0", c.step0()},
                   {"variant", to_string(c.variant)},
                   {"estimator", to_string(c.estimator)},
                   {"seed", c.seed},
                   {"eps", eps},
                   {"max_level", c.max_level},
                   {"samples", c.samples},
                   {"pilot", c.pilot}};
  if (c.reps) j["reps"] = *c.reps;
  if (c.data_path) j["data"] = *c.data_path;
  if (c.reference) j["reference"] = *c.reference;
  return j;
}

inline Dataset load_or_generate(const ExperimentConfig& cfg) {
  if (cfg.data_path) {
    std::ifstream in(*cfg.data_path);
    if (!in) throw std::runtime_error("cannot open data file '" + *cfg.data_path + "'");
    return read_dataset_csv(in, cfg.model);
  }
  return generate_dataset(cfg.model, cfg.N, cfg.d, derive_seed(cfg.seed, purpose::data));
}

/// Everything a command needs about one posterior. The estimator refers to
/// `model`, which must outlive it.
template <PosteriorModel M>
struct Problem {
  const M& model;
  ParamVector theta0;  // MAP: start point, Taylor centre and centre of g
  DriftEstimator<M> estimator;
  QuadraticDistance g;

  LevelSampler<M, QuadraticDistance> sampler(const ExperimentConfig& cfg,
                                             std::uint64_t seed) const {
    return {estimator, g, theta0, cfg.m, cfg.step0(), cfg.variant, seed};
  }
};

template <PosteriorModel M, typename Fn>
decltype(auto) with_model(const M& model, const ExperimentConfig& cfg, Fn&& fn) {
  const MapEstimate map = map_newton(model, ParamVector::Zero(static_cast<Eigen::Index>(model.dimension())));
  std::optional<TaylorCenter> center;
  if (cfg.estimator.needs_center()) center = taylor_center(model, map.theta0);
  const Problem<M> problem{model, map.theta0,
                           DriftEstimator<M>(model, cfg.estimator, cfg.batch(), std::move(center)),
                           QuadraticDistance{map.theta0}};
  return fn(problem);
}

/// Builds the configured posterior and calls fn(const Problem<M>&).
template <typename Fn>
decltype(auto) with_problem(const ExperimentConfig& cfg, Fn&& fn) {
  Dataset data = load_or_generate(cfg);
  if (cfg.model == DataKind::logistic) {
    const LogisticModel model(std::move(data));
    return with_model(model, cfg, fn);
  }
  const GaussianModel model(data);
  return with_model(model, cfg, fn);
}

// ---------------------------------------------------------------------------
// Rows and their CSV form. Doubles are written in shortest round-trip form.

struct DecayRow {
  int level = 0;
  double mean_delta = 0.0;
  double var_delta = 0.0;
  double cost_per_sample = 0.0;
  std::uint64_t samples = 0;
  bool operator==(const DecayRow&) const = default;
};

struct MseRow {
  std::string method;
  std::size_t N = 0;
  double epochs = 0.0;
  double relative_mse = 0.0;
  bool operator==(const MseRow&) const = default;
};

struct ComplexityRow {
  std::string method;
  std::size_t N = 0;
  double total_item_evals = 0.0;  // mean over replicates
  double epochs = 0.0;
  double eps = 0.0;
  bool operator==(const ComplexityRow&) const = default;
};

struct PathRow {
  int level = 0;
  std::int64_t step = 0;
  double distance = 0.0;
  bool operator==(const PathRow&) const = default;
};

struct MalaRow {
  int rep = 0;
  double estimate = 0.0;
  double h = 0.0;
  double acceptance = 0.0;
  double epochs = 0.0;
  bool operator==(const MalaRow&) const = default;
};

namespace detail {

template <typename T>
std::string csv_field(const T& v) {
  if constexpr (std::is_same_v<T, double>) {
    return format_double(v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (v.find_first_of(",\n\"") != std::string::npos)
      throw std::invalid_argument("csv: field '" + v + "' needs quoting");
    return v;
  } else {
    return std::to_string(v);
  }
}

template <typename T>
T parse_field(std::string_view s) {
  if constexpr (std::is_same_v<T, double>) {
    return parse_double(s);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return std::string(s);
  } else {
    T v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw std::invalid_argument("csv: bad integer '" + std::string(s) + "'");
    return v;
  }
}

template <typename... T>
void write_record(std::ostream& os, const T&... fields) {
  bool first = true;
  ((os << (first ? "" : ",") << csv_field(fields), first = false), ...);
  os << '\n';
}

/// Reads data lines after checking the header; calls fn(fields) per line.
template <typename Fn>
void read_records(std::istream& is, std::string_view header, std::size_t width, Fn&& fn) {
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw std::invalid_argument("csv: expected header '" + std::string(header) + "'");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != width) throw std::invalid_argument("csv: wrong field count in '" + line + "'");
    fn(f);
  }
}

}  // namespace detail

inline constexpr std::string_view kDecayHeader = "level,mean_delta,var_delta,cost_per_sample,samples";
inline constexpr std::string_view kMseHeader = "method,N,epochs,relative_mse";
inline constexpr std::string_view kComplexityHeader = "method,N,total_item_evals,epochs,eps";
inline constexpr std::string_view kPathHeader = "level,step,distance";
inline constexpr std::string_view kMalaHeader = "rep,estimate,h,acceptance,epochs";

inline void write_csv(std::ostream& os, const std::vector<DecayRow>& rows) {
  os << kDecayHeader << '\n';
  for (const auto& r : rows)
    detail::write_record(os, r.level, r.mean_delta, r.var_delta, r.cost_per_sample, r.samples);
}

inline void write_csv(std::ostream& os, const std::vector<MseRow>& rows) {
  os << kMseHeader << '\n';
  for (const auto& r : rows) detail::write_record(os, r.method, r.N, r.epochs, r.relative_mse);
}

inline void write_csv(std::ostream& os, const std::vector<ComplexityRow>& rows) {
  os << kComplexityHeader << '\n';
  for (const auto& r : rows)
    detail::write_record(os, r.method, r.N, r.total_item_evals, r.epochs, r.eps);
}

inline void write_csv(std::ostream& os, const std::vector<PathRow>& rows) {
  os << kPathHeader << '\n';
  for (const auto& r : rows) detail::write_record(os, r.level, r.step, r.distance);
}

inline void write_csv(std::ostream& os, const std::vector<MalaRow>& rows) {
  os << kMalaHeader << '\n';
  for (const auto& r : rows) detail::write_record(os, r.rep, r.estimate, r.h, r.acceptance, r.epochs);
}

inline std::vector<DecayRow> read_decay_csv(std::istream& is) {
  using detail::parse_field;
  std::vector<DecayRow> rows;
  detail::read_records(is, kDecayHeader, 5, [&](const auto& f) {
    rows.push_back({parse_field<int>(f[0]), parse_field<double>(f[1]), parse_field<double>(f[2]),
                    parse_field<double>(f[3]), parse_field<std::uint64_t>(f[4])});
  });
  return rows;
}

inline std::vector<MseRow> read_mse_csv(std::istream& is) {
  using detail::parse_field;
  std::vector<MseRow> rows;
  detail::read_records(is, kMseHeader, 4, [&](const auto& f) {
    rows.push_back({parse_field<std::string>(f[0]), parse_field<std::size_t>(f[1]),
                    parse_field<double>(f[2]), parse_field<double>(f[3])});
  });
  return rows;
}

inline std::vector<ComplexityRow> read_complexity_csv(std::istream& is) {
  using detail::parse_field;
  std::vector<ComplexityRow> rows;
  detail::read_records(is, kComplexityHeader, 5, [&](const auto& f) {
    rows.push_back({parse_field<std::string>(f[0]), parse_field<std::size_t>(f[1]),
                    parse_field<double>(f[2]), parse_field<double>(f[3]),
                    parse_field<double>(f[4])});
  });
  return rows;
}

inline std::vector<PathRow> read_paths_csv(std::istream& is) {
  using detail::parse_field;
  std::vector<PathRow> rows;
  detail::read_records(is, kPathHeader, 3, [&](const auto& f) {
    rows.push_back({parse_field<int>(f[0]), parse_field<std::int64_t>(f[1]),
                    parse_field<double>(f[2])});
  });
  return rows;
}

inline std::vector<MalaRow> read_mala_csv(std::istream& is) {
  using detail::parse_field;
  std::vector<MalaRow> rows;
  detail::read_records(is, kMalaHeader, 5, [&](const auto& f) {
    rows.push_back({parse_field<int>(f[0]), parse_field<double>(f[1]), parse_field<double>(f[2]),
                    parse_field<double>(f[3]), parse_field<double>(f[4])});
  });
  return rows;
}

/// Result of a command: rows for the CSV, a JSON sidecar, and whether every
/// run it made converged.
template <typename Row>
struct CommandOutput {
  std::vector<Row> rows;
  nlohmann::json summary;
  bool all_converged = true;
};

inline nlohmann::json sidecar_header(const std::string& command, const ExperimentConfig& cfg) {
  return {{"command", command}, {"version", version_string()}, {"config", to_json(cfg)}};
}

inline std::string method_name(const ExperimentConfig& cfg) {
  return "mlsgld-" + to_string(cfg.variant) + "-" + to_string(cfg.estimator);
}

// ---------------------------------------------------------------------------

/// Least-squares slopes of log2 |mean| and log2 var against level, over
/// levels >= from_level with a positive value.
struct DecaySlopes {
  double mean_slope = 0.0;
  double var_slope = 0.0;
};

inline DecaySlopes fit_decay(const std::vector<DecayRow>& rows, int from_level = 2) {
  std::vector<double> xm, ym, xv, yv;
  for (const auto& r : rows) {
    if (r.level < from_level) continue;
    if (r.mean_delta != 0.0) {
      xm.push_back(r.level);
      ym.push_back(std::log2(std::abs(r.mean_delta)));
    }
    if (r.var_delta > 0.0) {
      xv.push_back(r.level);
      yv.push_back(std::log2(r.var_delta));
    }
  }
  return {xm.size() >= 2 ? stats::ls_slope(xm, ym) : 0.0,
          xv.size() >= 2 ? stats::ls_slope(xv, yv) : 0.0};
}

/// `samples` Delta samples on each of levels 0..max_level.
inline CommandOutput<DecayRow> cmd_decay(const ExperimentConfig& cfg) {
  require(cfg.max_level >= 0, "decay: max_level must be >= 0");
  require(cfg.samples >= 2, "decay: need at least 2 samples per level");
  return with_problem(cfg, [&](const auto& p) {
    const auto sampler = p.sampler(cfg, derive_seed(cfg.seed, purpose::decay));
    MlmcOptions opts;
    opts.threads = cfg.threads;
    opts.max_total_samples = std::numeric_limits<std::uint64_t>::max();
    MlmcDriver driver(sampler, opts);
    std::vector<LevelStats> levels;
    CommandOutput<DecayRow> out;
    std::uint64_t rejected = 0;
    for (int l = 0; l <= cfg.max_level; ++l) {
      driver.extend(levels, l, cfg.samples);
      const LevelStats& s = levels[static_cast<std::size_t>(l)];
      out.rows.push_back({l, s.mean, s.variance(), s.cost_per_sample(), s.samples});
      rejected += s.rejected;
    }
    const DecaySlopes slopes = fit_decay(out.rows);
    out.summary = sidecar_header("decay", cfg);
    out.summary["fit_from_level"] = 2;
    out.summary["mean_slope"] = slopes.mean_slope;
    out.summary["variance_slope"] = slopes.var_slope;
    out.summary["rejected"] = rejected;
    return out;
  });
}

inline MlmcOptions mlmc_options(const ExperimentConfig& cfg, double eps_rel) {
  MlmcOptions o;
  o.target_eps_rel = eps_rel;
  o.pilot_samples = cfg.pilot;
  o.max_level = cfg.max_level;
  o.threads = 1;  // callers parallelise over replicates
  return o;
}

inline MalaExperimentOptions mala_options(const ExperimentConfig& cfg, std::uint64_t seed,
                                          int reps) {
  MalaExperimentOptions o;
  o.steps = cfg.mala_steps;
  o.burnin = cfg.mala_burnin;
  o.reps = reps;
  o.target_accept = cfg.target_accept;
  o.seed = seed;
  o.threads = cfg.threads;
  return o;
}

/// Reference E[g]: closed form on the Gaussian toy, otherwise a MALA chain
/// ten times longer than the experiment runs.
template <PosteriorModel M>
double reference_value(const Problem<M>& p, const ExperimentConfig& cfg) {
  if (cfg.reference) return *cfg.reference;
  if constexpr (std::is_same_v<M, GaussianModel>) {
    return static_cast<double>(p.model.dimension()) * p.model.posterior_variance() +
           (p.model.posterior_mean() - p.theta0).squaredNorm();
  } else {
    auto o = mala_options(cfg, derive_seed(cfg.seed, purpose::reference), 1);
    o.steps = 10 * cfg.mala_steps;
    o.burnin = 10 * cfg.mala_burnin;
    return run_mala_chain(p.model, p.g, p.theta0, o, 0).estimate;
  }
}

/// For each relative target: `reps` multilevel runs, then a MALA experiment
/// whose per-chain budget matches their mean cost in epochs.
inline CommandOutput<MseRow> cmd_mse(const ExperimentConfig& cfg) {
  const std::vector<double> eps = cfg.eps.empty() ? eps_grid(2, 10) : cfg.eps;
  const int reps = cfg.reps.value_or(50);
  require(reps >= 1, "mse: reps must be >= 1");
  return with_problem(cfg, [&](const auto& p) {
    CommandOutput<MseRow> out;
    out.summary = sidecar_header("mse", cfg);
    const double ref = reference_value(p, cfg);
    require(ref != 0.0, "mse: reference value is zero");
    out.summary["reference"] = ref;
    nlohmann::json points = nlohmann::json::array();
    const std::size_t N = p.model.item_count();
    for (std::size_t e = 0; e < eps.size(); ++e) {
      std::vector<MlmcResult> runs(static_cast<std::size_t>(reps));
      parallel_for(0, runs.size(), cfg.threads, [&](std::size_t r) {
        const auto sampler = p.sampler(cfg, derive_seed(cfg.seed, purpose::mlmc_rep, r));
        runs[r] = run_mlmc(sampler, mlmc_options(cfg, eps[e]), p.estimator.setup_cost());
      });
      double se = 0.0, epochs = 0.0;
      int converged = 0;
      for (const auto& r : runs) {
        se += (r.estimate - ref) * (r.estimate - ref);
        epochs += r.epochs;
        converged += r.converged;
      }
      se /= reps;
      epochs /= reps;
      out.all_converged &= converged == reps;
      out.rows.push_back({method_name(cfg), N, epochs, se / (ref * ref)});
      nlohmann::json point{{"eps", eps[e]}, {"converged", converged}, {"mlsgld_epochs", epochs}};

      if (cfg.include_mala) {
        // One MALA step costs 2 epochs.
        const auto steps = std::max<std::int64_t>(20, std::llround(epochs / 2.0));
        auto o = mala_options(cfg, derive_seed(cfg.seed, purpose::mala_rep, e), reps);
        o.steps = steps;
        o.burnin = steps / 10;
        o.reference = ref;
        const auto mala = run_mala_experiment(p.model, p.g, p.theta0, o);
        out.rows.push_back({"mala", N, mala.epochs_per_rep, *mala.relative_mse});
        point["mala_steps"] = steps;
        point["mala_acceptance"] = mala.mean_acceptance;
      }
      points.push_back(point);
    }
    out.summary["points"] = points;
    return out;
  });
}

/// Mean total item evaluations to reach each relative target, per dataset
/// size in n_list. MALA cost is extrapolated from pilot chains.
inline CommandOutput<ComplexityRow> cmd_complexity(const ExperimentConfig& cfg) {
  const std::vector<double> eps = cfg.eps.empty() ? std::vector<double>{std::pow(2.0, -5)} : cfg.eps;
  const int reps = cfg.reps.value_or(10);
  require(reps >= 1, "complexity: reps must be >= 1");
  require(!cfg.n_list.empty(), "complexity: empty N list");
  CommandOutput<ComplexityRow> out;
  out.summary = sidecar_header("complexity", cfg);
  nlohmann::json nl = nlohmann::json::array();
  for (std::size_t N : cfg.n_list) nl.push_back(N);
  out.summary["n_list"] = nl;
  nlohmann::json unconverged = nlohmann::json::array();
  for (std::size_t N : cfg.n_list) {
    ExperimentConfig c = cfg;
    c.N = N;
    c.data_path.reset();
    if (cfg.N != N) {
      c.batch_size.reset();
      c.h0.reset();
    }
    with_problem(c, [&](const auto& p) {
      for (double e : eps) {
        std::vector<MlmcResult> runs(static_cast<std::size_t>(reps));
        parallel_for(0, runs.size(), c.threads, [&](std::size_t r) {
          const auto sampler = p.sampler(c, derive_seed(c.seed, purpose::mlmc_rep, r));
          runs[r] = run_mlmc(sampler, mlmc_options(c, e), p.estimator.setup_cost());
        });
        double cost = 0.0;
        for (const auto& r : runs) {
          cost += static_cast<double>(r.total_cost) / reps;
          if (!r.converged) {
            out.all_converged = false;
            unconverged.push_back({{"N", N}, {"eps", e}});
          }
        }
        out.rows.push_back({method_name(c), N, cost, cost / static_cast<double>(N), e});
      }
      if (c.include_mala) {
        for (double e : eps) {
          std::vector<double> costs(static_cast<std::size_t>(reps));
          const auto o = mala_options(c, derive_seed(c.seed, purpose::mala_rep), 1);
          parallel_for(0, costs.size(), c.threads, [&](std::size_t r) {
            costs[r] = mala_cost_to_accuracy(p.model, p.g, p.theta0, e, o, r);
          });
          const double cost = stats::mean(costs);
          out.rows.push_back({"mala", N, cost, cost / static_cast<double>(N), e});
        }
      }
      return 0;
    });
  }
  out.summary["unconverged"] = unconverged;
  return out;
}

/// One coupled trajectory per level 1..max_level: distance between the fine
/// path and the (first) coarse path after every coupled iteration.
inline CommandOutput<PathRow> cmd_paths(const ExperimentConfig& cfg) {
  require(cfg.max_level >= 1, "paths: max_level must be >= 1");
  return with_problem(cfg, [&](const auto& p) {
    const auto sampler = p.sampler(cfg, derive_seed(cfg.seed, purpose::paths));
    std::vector<std::vector<PathRow>> per_level(static_cast<std::size_t>(cfg.max_level));
    std::vector<char> diverged(per_level.size(), 0);
    parallel_for(0, per_level.size(), cfg.threads, [&](std::size_t i) {
      const int l = static_cast<int>(i) + 1;
      auto& rows = per_level[i];
      const DeltaSample s = sampler.sample(l, 0, 0, [&](const CoupledView& v) {
        rows.push_back({l, v.iteration + 1, (v.fine.theta - v.coarse_plus.theta).norm()});
      });
      diverged[i] = s.diverged;
    });
    CommandOutput<PathRow> out;
    out.summary = sidecar_header("paths", cfg);
    nlohmann::json plateau = nlohmann::json::array();
    for (std::size_t i = 0; i < per_level.size(); ++i) {
      const auto& rows = per_level[i];
      // Trailing half of the trace as the plateau level.
      double sum = 0.0;
      const std::size_t from = rows.size() / 2;
      for (std::size_t k = from; k < rows.size(); ++k) sum += rows[k].distance;
      plateau.push_back({{"level", i + 1},
                         {"trailing_mean_distance", sum / static_cast<double>(rows.size() - from)},
                         {"diverged", static_cast<bool>(diverged[i])}});
      out.rows.insert(out.rows.end(), rows.begin(), rows.end());
      out.all_converged &= !diverged[i];
    }
    out.summary["levels"] = plateau;
    return out;
  });
}

/// Tuned MALA replicates on the configured posterior.
inline CommandOutput<MalaRow> cmd_mala(const ExperimentConfig& cfg) {
  const int reps = cfg.reps.value_or(50);
  return with_problem(cfg, [&](const auto& p) {
    auto o = mala_options(cfg, derive_seed(cfg.seed, purpose::mala_rep), reps);
    if (cfg.reference || cfg.model == DataKind::gaussian) o.reference = reference_value(p, cfg);
    const auto res = run_mala_experiment(p.model, p.g, p.theta0, o);
    CommandOutput<MalaRow> out;
    for (std::size_t r = 0; r < res.runs.size(); ++r) {
      const auto& run = res.runs[r];
      out.rows.push_back({static_cast<int>(r), run.estimate, run.h, run.acceptance,
                          static_cast<double>(run.item_evals) /
                              static_cast<double>(p.model.item_count())});
    }
    out.summary = sidecar_header("mala", cfg);
    out.summary["mean"] = res.mean;
    out.summary["spread"] = res.spread;
    out.summary["mean_acceptance"] = res.mean_acceptance;
    out.summary["epochs_per_rep"] = res.epochs_per_rep;
    out.summary["tuning_item_evals"] = res.tuning_item_evals;
    if (res.mse) {
      out.summary["reference"] = *o.reference;
      out.summary["mse"] = *res.mse;
      out.summary["relative_mse"] = *res.relative_mse;
    }
    return out;
  });
}

/// Writes rows to `path` and the sidecar to `path + ".json"`.
template <typename Row>
void write_outputs(const CommandOutput<Row>& out, const std::string& path) {
  std::ofstream csv(path);
  if (!csv) throw std::runtime_error("cannot write '" + path + "'");
  write_csv(csv, out.rows);
  std::ofstream js(path + ".json");
  if (!js) throw std::runtime_error("cannot write '" + path + ".json'");
  js << out.summary.dump(2) << '\n';
}

}  // namespace mlsgld
