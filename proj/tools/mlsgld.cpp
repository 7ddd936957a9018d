// Command-line front end: mlsgld <gen-data|decay|mse|complexity|paths|mala> [options]
//
// Options may appear before or after the subcommand, and may be read from a
// TOML file with --config. Exit status: 0 if every requested run converged,
// 2 if some run did not, 1 on error.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlsgld/experiments.hpp"

namespace {

using namespace mlsgld;

template <typename Row>
int finish(const CommandOutput<Row>& out, const std::string& path) {
  write_outputs(out, path);
  if (!out.all_converged) {
    std::cerr << "mlsgld: some runs did not converge, see " << path << ".json\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel SGLD experiments"};
  app.set_version_flag("--version", std::string(version_string()));
  app.set_config("--config", "", "TOML file with option values");
  app.fallthrough();
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string model = "logistic", variant = "antithetic", estimator = "taylor", out;
  std::optional<std::size_t> batch;
  std::optional<double> h0, reference;
  std::optional<int> reps;
  bool no_mala = false;

  app.add_option("--model", model, "logistic | gaussian")->capture_default_str();
  app.add_option("--n-data", cfg.N, "dataset size N")->capture_default_str();
  app.add_option("--dim", cfg.d, "parameter dimension for generated data")->capture_default_str();
  app.add_option("--data", cfg.data_path, "read the dataset from this CSV instead of generating it");
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--variant", variant, "plain | antithetic | plain-avg | antithetic-avg")
      ->capture_default_str();
  app.add_option("--estimator", estimator, "full | subsample | taylor | switched(r)")
      ->capture_default_str();
  app.add_option("--batch", batch, "minibatch size (default ceil(N^(1/3)))");
  app.add_option("--m", cfg.m, "level-0 step count")->capture_default_str();
  app.add_option("--h0", h0, "level-0 step size (default 1/N)");
  app.add_option("--eps", cfg.eps, "relative accuracy targets");
  app.add_option("--max-level", cfg.max_level, "finest level (decay, paths) or level cap")
      ->capture_default_str();
  app.add_option("--samples", cfg.samples, "samples per level (decay)")->capture_default_str();
  app.add_option("--reps", reps, "replicates");
  app.add_option("--pilot", cfg.pilot, "pilot samples per level")->capture_default_str();
  app.add_option("--n-list", cfg.n_list, "dataset sizes (complexity)")->capture_default_str();
  app.add_flag("--no-mala", no_mala, "skip the MALA baseline (mse, complexity)");
  app.add_option("--reference", reference, "reference value of E[g]");
  app.add_option("--steps", cfg.mala_steps, "MALA steps per chain")->capture_default_str();
  app.add_option("--burnin", cfg.mala_burnin, "MALA burn-in steps")->capture_default_str();
  app.add_option("--target-accept", cfg.target_accept, "MALA acceptance target")
      ->capture_default_str();
  app.add_option("--threads", cfg.threads, "worker threads")->capture_default_str();
  app.add_option("--out", out, "output file (CSV; sidecar at <out>.json)");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  auto* decay = app.add_subcommand("decay", "mean and variance of Delta per level");
  auto* mse = app.add_subcommand("mse", "relative MSE against cost");
  auto* complexity = app.add_subcommand("complexity", "cost to reach accuracy against N");
  auto* paths = app.add_subcommand("paths", "fine/coarse distance along coupled paths");
  auto* mala = app.add_subcommand("mala", "tuned MALA replicates");

  CLI11_PARSE(app, argc, argv);

  try {
    if (out.empty()) throw CLI::RequiredError("--out");
    cfg.model = parse_data_kind(model);
    cfg.variant = parse_variant(variant);
    cfg.estimator = parse_estimator(estimator);
    cfg.batch_size = batch;
    cfg.h0 = h0;
    cfg.reference = reference;
    cfg.reps = reps;
    cfg.include_mala = !no_mala;

    if (gen->parsed()) {
      const Dataset data =
          generate_dataset(cfg.model, cfg.N, cfg.d, derive_seed(cfg.seed, purpose::data));
      std::ofstream os(out);
      if (!os) throw std::runtime_error("cannot write '" + out + "'");
      write_dataset_csv(data, os);
      return 0;
    }
    if (decay->parsed()) return finish(cmd_decay(cfg), out);
    if (mse->parsed()) return finish(cmd_mse(cfg), out);
    if (complexity->parsed()) return finish(cmd_complexity(cfg), out);
    if (paths->parsed()) return finish(cmd_paths(cfg), out);
    if (mala->parsed()) return finish(cmd_mala(cfg), out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "mlsgld: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
