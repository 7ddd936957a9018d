// Acceptance checks. Each criterion prints one line, "PASS criterion k: ..."
// or "FAIL criterion k: ...". Run all with no arguments, or one with
// `--criterion k`.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "mlsgld/experiments.hpp"

#ifndef MLSGLD_CLI_PATH
#define MLSGLD_CLI_PATH "mlsgld"
#endif

using namespace mlsgld;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1: fitted log2-variance slopes over levels 2-6.
Verdict variance_decay() {
  ExperimentConfig cfg;  // logistic N=100, m=5, h0=1/N, 1000 samples
  cfg.threads = workers();
  cfg.max_level = 6;
  cfg.variant = parse_variant("antithetic");
  const auto anti = fit_decay(cmd_decay(cfg).rows);
  cfg.variant = parse_variant("plain");
  const auto plain = fit_decay(cmd_decay(cfg).rows);
  const bool ok = anti.var_slope <= -1.6 && plain.var_slope >= -1.5 && plain.var_slope <= -0.7;
  return {ok, fmt("antithetic+taylor slope %.3f (need <= -1.6), plain+taylor slope %.3f (need in [-1.5,-0.7])",
                  anti.var_slope, plain.var_slope)};
}

// 2: sum of level increments up to 2 against a single level-2 path estimate.
Verdict telescoping() {
  ExperimentConfig cfg;
  const std::uint64_t n = 10'000;
  return with_problem(cfg, [&](const auto& p) {
    const auto sampler = p.sampler(cfg, 101);
    const auto single = p.sampler(cfg, 202);
    double sum = 0.0, var = 0.0;
    for (int l = 0; l <= 2; ++l) {
      std::vector<double> v(n);
      parallel_for(0, n, workers(), [&](std::size_t r) { v[r] = sampler.sample(l, r).value; });
      sum += stats::mean(v);
      var += stats::variance(v) / static_cast<double>(n);
    }
    std::vector<double> s(n);
    parallel_for(0, n, workers(), [&](std::size_t r) { s[r] = single.sample(2, r).fine_g; });
    const double direct = stats::mean(s);
    const double se = std::sqrt(var + stats::variance(s) / static_cast<double>(n));
    const double z = std::abs(sum - direct) / se;
    return Verdict{z <= 3.0, fmt("telescoped %.6g vs direct %.6g, |diff| = %.2f combined SE", sum, direct, z)};
  });
}

// 3: exact coarse-batch marginal at N=4, n=1.
Verdict subsampling_law() {
  const std::size_t N = 4;
  std::map<std::size_t, long> counts;
  long total = 0;
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = 0; b < N; ++b)
      for (std::size_t pick = 0; pick < 2; ++pick) {
        const BatchIndices f1{a}, f2{b};
        const auto out = select_without_replacement(f1, f2, [&](std::size_t, std::size_t) { return pick; });
        ++counts[out.at(0)];
        ++total;
      }
  bool ok = counts.size() == N && total == 32;
  std::string detail = "counts";
  for (const auto& [i, c] : counts) {
    ok &= 4 * c == total;
    detail += fmt(" %zu:%ld/%ld", i, c, total);
  }
  return {ok, detail};
}

// 4: Gaussian oracle and Euler invariant variance.
Verdict gaussian_oracle() {
  const std::size_t N = 100, d = 3;
  const GaussianModel model(generate_dataset(DataKind::gaussian, N, d, 4));
  const ParamVector mu = model.posterior_mean();
  const DriftEstimator<GaussianModel> est(model, {EstimatorKind::taylor}, default_batch_size(N),
                                          taylor_center(model, mu));
  const double truth = static_cast<double>(d) * model.posterior_variance();
  const int runs = 50;
  std::vector<char> covered(runs, 0);
  parallel_for(0, runs, workers(), [&](std::size_t r) {
    const LevelSampler sampler(est, QuadraticDistance{mu}, mu, 5, 1.0 / N, parse_variant("antithetic"),
                               derive_seed(1, purpose::mlmc_rep, r));
    MlmcOptions o;
    o.target_eps_rel = 0.1;
    o.pilot_samples = 20;
    const MlmcResult res = run_mlmc(sampler, o, est.setup_cost());
    covered[r] = res.converged && std::abs(res.estimate - truth) <= 3 * res.statistical_error_bound;
  });
  const int hits = static_cast<int>(std::count(covered.begin(), covered.end(), 1));

  // Prior-only toy (lambda = 1); eight independent coordinates pooled.
  const double h = 0.1;
  const GaussianModel prior = GaussianModel::prior_only(8);
  const DriftEstimator<GaussianModel> full(prior, {EstimatorKind::full}, 0);
  PathStreams streams{RngStream(9, {0, 0, Phase::coupled_noise, 0}), RngStream(9, {0, 0, Phase::fine_batch, 0})};
  std::vector<double> trailing;
  run_path(ParamVector::Zero(8), 100'000, h, full, streams, [&](const PathState& s) {
    if (s.step_count > 50'000)
      for (double v : s.theta) trailing.push_back(v);
  });
  const double var = stats::variance(trailing);
  const double target = 1.0 / (1.0 - h / 2.0);
  const bool ok = hits >= 45 && std::abs(var - target) <= 0.03;
  return {ok, fmt("%d/50 runs within 3 bounds of %.6g; Euler variance %.5f vs %.5f", hits, truth, var, target)};
}

// 5: log total cost against log eps.
Verdict complexity_exponent() {
  ExperimentConfig cfg;
  cfg.threads = workers();
  cfg.n_list = {100};
  cfg.eps = eps_grid(2, 8);
  cfg.include_mala = false;
  cfg.max_level = 12;
  const auto out = cmd_complexity(cfg);
  std::vector<double> x, y;
  std::string pts;
  for (const auto& r : out.rows) {
    x.push_back(std::log(r.eps));
    y.push_back(std::log(r.total_item_evals));
    pts += fmt(" %.3g:%.3g", r.eps, r.total_item_evals);
  }
  const double slope = stats::ls_slope(x, y);
  return {slope >= -2.6 && slope <= -1.6 && out.all_converged,
          fmt("slope %.3f (need in [-2.6,-1.6]), converged=%d; cost by eps", slope, out.all_converged ? 1 : 0) + pts};
}

// 6: growth of cost from N=100 to N=1000 at relative accuracy 2^-5.
Verdict dataset_scaling() {
  ExperimentConfig cfg;
  cfg.threads = workers();
  cfg.n_list = {100, 1000};
  cfg.eps = {std::pow(2.0, -5)};
  cfg.reps = 10;
  cfg.max_level = 12;
  const auto out = cmd_complexity(cfg);
  std::map<std::pair<std::string, std::size_t>, double> cost;
  for (const auto& r : out.rows) cost[{r.method == "mala" ? "mala" : "ml", r.N}] = r.total_item_evals;
  const double ml = cost[{"ml", 1000}] / cost[{"ml", 100}];
  const double mala = cost[{"mala", 1000}] / cost[{"mala", 100}];
  return {ml < 10.0 && mala >= 8.0 && out.all_converged,
          fmt("multilevel growth %.2fx (need < 10), MALA growth %.2fx (need >= 8), converged=%d", ml, mala,
              out.all_converged ? 1 : 0)};
}

// 7: MALA tuning, detailed balance, Gaussian moments.
Verdict mala_correctness() {
  const LogisticModel model(generate_dataset(DataKind::logistic, 100, 3, derive_seed(1, purpose::data)));
  const ParamVector t0 = map_newton(model, ParamVector::Zero(3)).theta0;
  RngStream tune(1, {0, 0, Phase::mala_tune, 0});
  const TuneResult t = tune_step(model, t0, 0.574, tune);
  MalaChain chain{t.theta, t.h, 0, 0, 0};
  RngStream run(1, {0, 0, Phase::mala_noise, 0});
  for (int k = 0; k < 10'000; ++k) mala_step_inplace(chain, run, model);
  const double acc = chain.acceptance_rate();

  double worst_db = 0.0;
  RngStream rng(2, {});
  for (int k = 0; k < 200; ++k) {
    const ParamVector a = t0 + 0.3 * gaussian_vector(rng, 3);
    const ParamVector b = a + std::sqrt(2 * t.h) * gaussian_vector(rng, 3);
    const auto q = [&](const ParamVector& from, const ParamVector& to) {
      return -(to - from - t.h * log_posterior_grad_full(model, from)).squaredNorm() / (4 * t.h);
    };
    const double direct = log_posterior(model, b) + q(b, a) - log_posterior(model, a) - q(a, b);
    worst_db = std::max({worst_db, std::abs(mala_log_accept(model, a, b, t.h) - direct),
                         std::abs(mala_log_accept(model, a, b, t.h) + mala_log_accept(model, b, a, t.h))});
  }

  const std::size_t N = 100, d = 3;
  const GaussianModel gm(generate_dataset(DataKind::gaussian, N, d, 5));
  const ParamVector mu = gm.posterior_mean();
  RngStream gt(3, {}), gr(4, {});
  const TuneResult gtune = tune_step(gm, mu, 0.574, gt);
  MalaChain gc{gtune.theta, gtune.h, 0, 0, 0};
  std::vector<std::vector<double>> m1(d), m2(d);
  for (int k = 0; k < 60'000; ++k) {
    mala_step_inplace(gc, gr, gm);
    if (k < 1000) continue;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = gc.theta[static_cast<Eigen::Index>(j)] - mu[static_cast<Eigen::Index>(j)];
      m1[j].push_back(c);
      m2[j].push_back(c * c);
    }
  }
  double worst_z = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    worst_z = std::max(worst_z, std::abs(stats::mean(m1[j])) / stats::batch_means_se(m1[j]));
    worst_z = std::max(worst_z, std::abs(stats::mean(m2[j]) - gm.posterior_variance()) / stats::batch_means_se(m2[j]));
  }
  const bool ok = std::abs(t.trailing_acceptance - 0.574) <= 0.05 && std::abs(acc - 0.574) <= 0.05 &&
                  worst_db <= 1e-10 && worst_z <= 3.0;
  return {ok, fmt("tuned h %.3g, check-window acceptance %.3f, long-run acceptance %.3f; detailed-balance "
                  "error %.2g; worst moment z %.2f",
                  t.h, t.trailing_acceptance, acc, worst_db, worst_z)};
}

// 8: finite differences, Taylor exactness, unbiasedness by enumeration.
Verdict gradient_machinery() {
  const LogisticModel model(generate_dataset(DataKind::logistic, 50, 3, 3));
  RngStream rng(5, {});
  double worst_g = 0.0, worst_h = 0.0;
  const auto fd = [](const auto& f, const ParamVector& x) {
    ParamVector g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
      ParamVector a = x, b = x;
      a[j] += h;
      b[j] -= h;
      g[j] = (f(a) - f(b)) / (2 * h);
    }
    return g;
  };
  for (int k = 0; k < 20; ++k) {
    const ParamVector t = 0.7 * gaussian_vector(rng, 3);
    const std::size_t i = rng.uniform_index(0, 49);
    const ParamVector g = item_grad(model, i, t);
    const ParamVector fg = fd([&](const ParamVector& x) { return model.item_log_density(i, x); }, t);
    worst_g = std::max(worst_g, (g - fg).norm() / std::max(1.0, fg.norm()));
    const Matrix H = item_hessian(model, i, t);
    Matrix fH(3, 3);
    for (Eigen::Index j = 0; j < 3; ++j) {
      fH.row(j) = fd([&](const ParamVector& x) { return item_grad(model, i, x)[j]; }, t).transpose();
    }
    worst_h = std::max(worst_h, (H - fH).norm() / std::max(1.0, fH.norm()));
  }

  const ParamVector t0 = map_newton(model, ParamVector::Zero(3)).theta0;
  const TaylorCenter c = taylor_center(model, t0);
  bool exact_center = true;
  for (int k = 0; k < 50; ++k)
    exact_center &= drift_taylor(model, c, t0, sample_batch(rng, 50, 4)).drift == model.prior_grad(t0) + c.G0;

  const GaussianModel gm(generate_dataset(DataKind::gaussian, 40, 3, 6));
  const TaylorCenter gc = taylor_center(gm, ParamVector::Constant(3, -0.3));
  double worst_quad = 0.0;
  for (int k = 0; k < 50; ++k) {
    const ParamVector th = 2.0 * gaussian_vector(rng, 3);
    const ParamVector full = drift_full(gm, th).drift;
    worst_quad = std::max(worst_quad, (drift_taylor(gm, gc, th, sample_batch(rng, 40, 3)).drift - full).norm() /
                                          std::max(1.0, full.norm()));
  }

  double worst_bias = 0.0;
  for (std::size_t N = 1; N <= 4; ++N) {
    const LogisticModel small(generate_dataset(DataKind::logistic, N, 3, 10 + N));
    const ParamVector th = gaussian_vector(rng, 3);
    const TaylorCenter sc = taylor_center(small, 0.5 * gaussian_vector(rng, 3));
    const ParamVector full = drift_full(small, th).drift;
    for (std::size_t n = 1; n <= 2; ++n) {
      const std::size_t total = n == 1 ? N : N * N;
      ParamVector sub = ParamVector::Zero(3), tay = ParamVector::Zero(3);
      for (std::size_t code = 0; code < total; ++code) {
        BatchIndices tau(n);
        tau[0] = code % N;
        if (n == 2) tau[1] = code / N;
        sub += drift_subsampled(small, th, tau).drift / static_cast<double>(total);
        tay += drift_taylor(small, sc, th, tau).drift / static_cast<double>(total);
      }
      const double scale = full.cwiseAbs().maxCoeff();
      worst_bias = std::max({worst_bias, (sub - full).cwiseAbs().maxCoeff() / scale,
                             (tay - full).cwiseAbs().maxCoeff() / scale});
    }
  }
  const bool ok = worst_g < 1e-5 && worst_h < 1e-4 && exact_center && worst_quad < 1e-12 && worst_bias < 1e-12;
  return {ok, fmt("FD gradient %.2g, FD Hessian %.2g, exact at center %d, quadratic error %.2g, enumeration bias %.2g",
                  worst_g, worst_h, exact_center ? 1 : 0, worst_quad, worst_bias)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 9: every subcommand twice, with different --threads, byte-identical outputs.
Verdict reproducibility() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / fmt("mlsgld_repro_%d", static_cast<int>(::getpid()));
  fs::create_directories(dir);
  const std::string cli = MLSGLD_CLI_PATH;
  const std::map<std::string, std::string> commands{
      {"gen-data", "--n-data 60"},
      {"decay", "--n-data 60 --max-level 3 --samples 60"},
      {"mse", "--n-data 60 --eps 0.2 0.1 --reps 4 --steps 400 --burnin 40"},
      {"complexity", "--n-list 40 80 --eps 0.2 --reps 3 --steps 400 --burnin 40"},
      {"paths", "--n-data 60 --max-level 4"},
      {"mala", "--model gaussian --n-data 60 --reps 4 --steps 400 --burnin 40"},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [sub, args] : commands) {
    std::vector<std::string> outputs;
    bool ran = true;
    for (unsigned threads : {1u, 4u}) {
      const fs::path out = dir / fmt("%s_%u.csv", sub.c_str(), threads);
      const std::string cmd = cli + " " + sub + " " + args + " --seed 3 --threads " + std::to_string(threads) +
                              " --out " + out.string() + " > /dev/null 2>&1";
      const int rc = std::system(cmd.c_str());
      ran &= rc != -1 && WIFEXITED(rc) && (WEXITSTATUS(rc) == 0 || WEXITSTATUS(rc) == 2);
      std::string bytes = slurp(out);
      if (fs::exists(out.string() + ".json")) bytes += "\n--sidecar--\n" + slurp(out.string() + ".json");
      ran &= !bytes.empty();
      outputs.push_back(std::move(bytes));
    }
    const bool same = ran && outputs[0] == outputs[1];
    ok &= same;
    detail += " " + sub + (same ? ":identical" : ran ? ":DIFFER" : ":ERROR");
  }
  fs::remove_all(dir);
  return {ok, "threads 1 vs 4:" + detail};
}

const std::map<int, std::function<Verdict()>>& criteria() {
  static const std::map<int, std::function<Verdict()>> all{
      {1, variance_decay},   {2, telescoping},      {3, subsampling_law},
      {4, gaussian_oracle},  {5, complexity_exponent}, {6, dataset_scaling},
      {7, mala_correctness}, {8, gradient_machinery}, {9, reproducibility}};
  return all;
}

bool run_one(int k) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = criteria().at(k)();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << v.detail
            << fmt(" [%.1fs]", secs) << std::endl;
  return v.pass;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      which.push_back(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--criterion k]...\n";
      return 1;
    }
  }
  if (which.empty())
    for (const auto& [k, fn] : criteria()) which.push_back(k);
  bool all = true;
  for (int k : which) {
    if (!criteria().contains(k)) {
      std::cerr << "unknown criterion " << k << '\n';
      return 1;
    }
    all &= run_one(k);
  }
  return all ? 0 : 1;
}
