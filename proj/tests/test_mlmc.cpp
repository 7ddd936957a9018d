#include <gtest/gtest.h>

#include "mlsgld/mlmc.hpp"

using namespace mlsgld;

namespace {

/// Level l increments ~ N(a 2^-l, (b 2^-l)^2) at cost 2^l; level 0 has mean `base`.
struct SyntheticSampler {
  double base = 1.0;
  double a = 0.5;
  double b = 0.3;
  std::uint64_t seed = 1;
  bool diverge_first_attempt = false;
  bool always_diverge = false;

  DeltaSample sample(int l, std::uint64_t rep, std::uint32_t attempt) const {
    RngStream rng(seed, {static_cast<std::uint64_t>(l), rep, Phase::generic, attempt});
    DeltaSample s;
    const double scale = std::ldexp(1.0, -l);
    s.value = (l == 0 ? base : a * scale) + b * scale * rng.normal();
    s.cost = ItemCount{1} << l;
    s.diverged = always_diverge || (diverge_first_attempt && attempt == 0 && rep % 3 == 0);
    return s;
  }

  /// Exact mean of the level-L estimator.
  double truth(int L) const {
    double t = base;
    for (int l = 1; l <= L; ++l) t += a * std::ldexp(1.0, -l);
    return t;
  }
};

}  // namespace

TEST(Allocation, HandExample) {
  const std::vector<LevelVarianceCost> vc{{4, 1}, {1, 4}};
  EXPECT_EQ(optimal_allocation(vc, 1.0), (std::vector<std::uint64_t>{16, 4}));
  EXPECT_EQ(optimal_allocation(vc, 0.5), (std::vector<std::uint64_t>{64, 16}));
}

TEST(Allocation, ZeroVarianceGetsMinimum) {
  const std::vector<LevelVarianceCost> vc{{0, 1}, {1, 4}};
  const auto n = optimal_allocation(vc, 0.1, 2);
  EXPECT_EQ(n[0], 2u);
  EXPECT_GT(n[1], 2u);
  EXPECT_THROW(optimal_allocation(vc, 0.0), std::invalid_argument);
  EXPECT_THROW(optimal_allocation(std::vector<LevelVarianceCost>{{1, 0}}, 0.1), std::invalid_argument);
}

TEST(Allocation, MeetsVarianceTargetAtMinimalCost) {
  const std::vector<LevelVarianceCost> vc{{2.0, 1.0}, {0.5, 3.0}, {0.1, 9.0}, {0.02, 27.0}};
  const double eps = 0.01;
  const auto n = optimal_allocation(vc, eps);
  auto var_of = [&](const std::vector<double>& N) {
    double v = 0;
    for (std::size_t l = 0; l < vc.size(); ++l) v += vc[l].variance / N[l];
    return v;
  };
  auto cost_of = [&](const std::vector<double>& N) {
    double c = 0;
    for (std::size_t l = 0; l < vc.size(); ++l) c += vc[l].cost * N[l];
    return c;
  };
  std::vector<double> opt(n.begin(), n.end());
  EXPECT_LE(var_of(opt), eps * eps / 2);
  // Continuous optimum, then perturbed allocations rescaled onto the constraint.
  std::vector<double> cont(vc.size());
  double sum = 0;
  for (const auto& lv : vc) sum += std::sqrt(lv.variance * lv.cost);
  for (std::size_t l = 0; l < vc.size(); ++l)
    cont[l] = 2 / (eps * eps) * std::sqrt(vc[l].variance / vc[l].cost) * sum;
  RngStream rng(3, {});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p = cont;
    for (auto& x : p) x *= 1.0 + 0.25 * (2 * rng.uniform() - 1);
    const double scale = var_of(p) / (eps * eps / 2);
    for (auto& x : p) x *= scale;
    EXPECT_GE(cost_of(p), cost_of(cont) * (1 - 1e-12));
  }
}

TEST(Driver, RecoversSyntheticSum) {
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticSampler s;
    s.seed = seed;
    MlmcOptions o;
    o.target_eps_rel = 0.01;
    o.pilot_samples = 50;
    const MlmcResult r = run_mlmc(s, o);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.statistical_error_bound, r.target_eps / std::sqrt(2.0) * (1 + 1e-12));
    const int L = static_cast<int>(r.levels.size()) - 1;
    EXPECT_LE(s.a * std::ldexp(1.0, -L), r.target_eps);  // true remaining bias is small
    covered += std::abs(r.estimate - s.truth(L)) <= 3 * r.statistical_error_bound;
  }
  EXPECT_GE(covered, 18);
}

TEST(Driver, AddsLevelsAsAccuracyTightens) {
  SyntheticSampler s;
  MlmcOptions coarse, fine;
  coarse.target_eps_rel = 0.05;
  fine.target_eps_rel = 0.002;
  const MlmcResult a = run_mlmc(s, coarse), b = run_mlmc(s, fine);
  EXPECT_GT(b.levels.size(), a.levels.size());
  EXPECT_GT(b.total_cost, a.total_cost);
}

TEST(Driver, FixedLevelSkipsBiasTest) {
  SyntheticSampler s;
  MlmcOptions o;
  o.fixed_max_level = 1;
  o.target_eps_rel = 0.01;
  const MlmcResult r = run_mlmc(s, o);
  EXPECT_EQ(r.levels.size(), 2u);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.bias_bound, 0.0);
}

TEST(Driver, CostIncludesSetupAndRejections) {
  SyntheticSampler s;
  s.diverge_first_attempt = true;
  MlmcOptions o;
  o.fixed_max_level = 2;
  o.target_eps_rel = 0.05;
  const MlmcResult r = run_mlmc(s, o, 1000);
  ItemCount level_sum = 0;
  for (const auto& st : r.levels) {
    level_sum += st.cost;
    const ItemCount per = ItemCount{1} << st.level;
    EXPECT_EQ(st.accepted_cost, static_cast<ItemCount>(st.samples) * per);
    EXPECT_EQ(st.cost, st.accepted_cost + static_cast<ItemCount>(st.rejected) * per);
    EXPECT_EQ(st.rejected, (st.samples + 2) / 3);
  }
  EXPECT_EQ(r.setup_cost, 1000);
  EXPECT_EQ(r.total_cost, level_sum + 1000);
}

TEST(Driver, AllAttemptsDivergingThrows) {
  SyntheticSampler s;
  s.always_diverge = true;
  EXPECT_THROW(run_mlmc(s, MlmcOptions{}), NumericalError);
}

TEST(Driver, ResultDoesNotDependOnThreads) {
  SyntheticSampler s;
  MlmcOptions o;
  o.target_eps_rel = 0.005;
  o.threads = 1;
  const MlmcResult a = run_mlmc(s, o);
  o.threads = 4;
  const MlmcResult b = run_mlmc(s, o);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.total_cost, b.total_cost);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Driver, SampleCapStopsWithoutConvergence) {
  SyntheticSampler s;
  MlmcOptions o;
  o.target_eps_rel = 1e-4;
  o.max_total_samples = 2000;
  const MlmcResult r = run_mlmc(s, o);
  EXPECT_FALSE(r.converged);
  std::uint64_t total = 0;
  for (const auto& st : r.levels) total += st.samples;
  EXPECT_LE(total, 2000u);
}

TEST(Driver, RejectsBadOptions) {
  SyntheticSampler s;
  MlmcOptions o;
  o.target_eps_rel = 0;
  EXPECT_THROW(run_mlmc(s, o), std::invalid_argument);
  o = {};
  o.pilot_samples = 1;
  EXPECT_THROW(run_mlmc(s, o), std::invalid_argument);
}

TEST(Driver, GaussianOracle) {
  // Conjugate model: E[|theta - mu|^2] = d / (N + 1) under the posterior.
  const std::size_t N = 100, d = 2;
  const GaussianModel model(generate_dataset(DataKind::gaussian, N, d, 4));
  const ParamVector mu = model.posterior_mean();
  const TaylorCenter center = taylor_center(model, mu);
  const DriftEstimator<GaussianModel> est(model, {EstimatorKind::taylor}, 5, center);
  const double truth = static_cast<double>(d) * model.posterior_variance();
  int covered = 0;
  const int runs = 10;
  for (int r = 0; r < runs; ++r) {
    const LevelSampler sampler(est, QuadraticDistance{mu}, mu, 5, 1.0 / N,
                               parse_variant("antithetic"), derive_seed(7, 3, r));
    MlmcOptions o;
    o.target_eps_rel = 0.1;
    o.pilot_samples = 20;
    const MlmcResult res = run_mlmc(sampler, o, est.setup_cost());
    ASSERT_TRUE(res.converged);
    EXPECT_NEAR(res.epochs, static_cast<double>(res.total_cost) / N, 1e-9);
    covered += std::abs(res.estimate - truth) <= 3 * res.statistical_error_bound;
  }
  EXPECT_GE(covered, 8);
}
