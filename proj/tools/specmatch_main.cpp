#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "specmatch/graph.hpp"
#include "specmatch/train.hpp"
#include "specmatch/verify.hpp"

namespace {

namespace fs = std::filesystem;

std::string join_out(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

// Shared switches that override fields of a training config after --config
// (if any) has been loaded.
struct TrainOverrides {
  std::string config_path;
  std::string dataset_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double beta = 0.0;
  bool beta_set = false;
  double percentile = 0.0;
  bool percentile_set = false;
  double tau = 0.0;
  bool tau_set = false;
  std::string adjacency;
  int epochs = 0;
  bool epochs_set = false;
};

void add_train_flags(CLI::App* cmd, TrainOverrides& ov, bool with_beta = true) {
  cmd->add_option("--config", ov.config_path, "training config JSON (defaults apply when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--dataset", ov.dataset_path, "dataset JSON (overrides the generator)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", ov.seed, "run seed (encoder init, shuffles, augmentations)")
      ->each([&ov](const std::string&) { ov.seed_set = true; });
  if (with_beta) {
    cmd->add_option("--beta", ov.beta, "spectral loss weight")
        ->each([&ov](const std::string&) { ov.beta_set = true; });
  }
  cmd->add_option("--p", ov.percentile, "similarity threshold percentile in (0, 100]")
      ->each([&ov](const std::string&) { ov.percentile_set = true; });
  cmd->add_option("--tau", ov.tau, "contrastive temperature")
      ->each([&ov](const std::string&) { ov.tau_set = true; });
  cmd->add_option("--adjacency", ov.adjacency, "view-graph weighting: binary or soft")
      ->check(CLI::IsMember({"binary", "soft"}));
  cmd->add_option("--epochs", ov.epochs, "number of training epochs")
      ->each([&ov](const std::string&) { ov.epochs_set = true; });
}

specmatch::TrainConfig resolve_train_config(const TrainOverrides& ov) {
  specmatch::TrainConfig config;
  if (!ov.config_path.empty()) config = specmatch::load_train_config(ov.config_path);
  if (!ov.dataset_path.empty()) config.dataset_path = ov.dataset_path;
  if (ov.seed_set) config.seed = ov.seed;
  if (ov.beta_set) config.loss.beta = ov.beta;
  if (ov.percentile_set) config.loss.percentile = ov.percentile;
  if (ov.tau_set) config.loss.tau = ov.tau;
  if (!ov.adjacency.empty()) {
    config.loss.adjacency_mode = specmatch::adjacency_mode_from_name(ov.adjacency);
  }
  if (ov.epochs_set) config.epochs = ov.epochs;
  config.validate();
  return config;
}

int cmd_gen(const specmatch::SbmParams& params, std::uint64_t seed, const std::string& out) {
  const specmatch::Dataset dataset = specmatch::generate_sbm(params, seed);
  specmatch::save_dataset(dataset, out);
  std::cout << "wrote " << out << " (" << dataset.graphs.size() << " graphs, feature_dim "
            << dataset.feature_dim() << ")\n";
  return 0;
}

int cmd_train(const TrainOverrides& ov, const std::string& out_dir) {
  const specmatch::TrainConfig config = resolve_train_config(ov);
  ensure_dir(out_dir);
  const specmatch::TrainResult result = specmatch::train(config, &std::cout);
  specmatch::write_runlog_csv(result.log, join_out(out_dir, "runlog.csv"));
  specmatch::save_checkpoint(result.params, join_out(out_dir, "checkpoint.json"));
  specmatch::save_train_config(config, join_out(out_dir, "config.json"));
  std::cout << "wrote " << join_out(out_dir, "runlog.csv") << ", "
            << join_out(out_dir, "checkpoint.json") << "\n";
  if (result.log.diverged) {
    std::cerr << "training diverged at epoch " << result.log.divergence_epoch
              << "; outputs hold the last finite state\n";
    return 2;
  }
  return 0;
}

int cmd_fig3(const TrainOverrides& ov, double beta, const std::string& out_dir) {
  const specmatch::TrainConfig config = resolve_train_config(ov);
  ensure_dir(out_dir);
  const specmatch::Fig3Result result = specmatch::run_fig3(config, beta, &std::cout);
  specmatch::write_fig3_csv(result, join_out(out_dir, "fig3.csv"));
  specmatch::write_fig3_svg(result, join_out(out_dir, "fig3.svg"));
  std::cout << "wrote " << join_out(out_dir, "fig3.csv") << ", " << join_out(out_dir, "fig3.svg")
            << "\n";
  if (result.base.log.diverged || result.spec.log.diverged) {
    std::cerr << "at least one arm diverged; trajectories are truncated\n";
    return 2;
  }
  return 0;
}

int cmd_sweep(const TrainOverrides& ov, const std::string& param,
              const std::vector<double>& values, const std::string& out_dir) {
  const specmatch::TrainConfig config = resolve_train_config(ov);
  ensure_dir(out_dir);
  const std::vector<specmatch::SweepRow> rows =
      specmatch::sweep(config, param, values, &std::cout);
  specmatch::write_sweep_csv(rows, join_out(out_dir, "sweep.csv"));
  std::cout << "wrote " << join_out(out_dir, "sweep.csv") << "\n";
  return 0;
}

int cmd_verify(specmatch::HarnessConfig config, const std::string& out, bool quick) {
  if (quick) {
    config.duhamel_pairs = 40;
    config.shift_batches = 20;
    config.ensemble_checks = 2;
    config.uniformity_checks = 5;
    config.m_draws = 24;
  }
  const std::vector<specmatch::BoundReport> reports = specmatch::run_default_harness(config);
  specmatch::print_reports(std::cout, reports);
  if (!out.empty()) {
    specmatch::save_reports(reports, out);
    std::cout << "wrote " << out << "\n";
  }
  if (!specmatch::all_passed(reports)) {
    std::cerr << "verification FAILED\n";
    return 1;
  }
  std::cout << "all bounds hold\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph contrastive learning lab with spectral view-graph matching"};
  app.require_subcommand(1);

  // gen
  specmatch::SbmParams sbm;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "dataset.json";
  CLI::App* gen = app.add_subcommand("gen", "generate a block-model graph classification dataset");
  gen->add_option("--out", gen_out, "output dataset JSON path");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--n-graphs", sbm.n_graphs, "number of graphs");
  gen->add_option("--min-nodes", sbm.min_nodes, "minimum nodes per graph");
  gen->add_option("--max-nodes", sbm.max_nodes, "maximum nodes per graph");
  gen->add_option("--p-in", sbm.p_in, "within-block edge probability");
  gen->add_option("--p-out", sbm.p_out, "between-block edge probability");
  gen->add_option("--classes", sbm.n_classes, "number of class labels");
  gen->add_option("--feature-dim", sbm.feature_dim, "node feature dimension");

  // train
  TrainOverrides train_ov;
  std::string train_out = "run";
  CLI::App* train = app.add_subcommand("train", "train an encoder and log per-epoch losses");
  add_train_flags(train, train_ov);
  train->add_option("--out", train_out, "output directory");

  // fig3
  TrainOverrides fig3_ov;
  std::string fig3_out = "fig3";
  double fig3_beta = 0.5;
  CLI::App* fig3 = app.add_subcommand(
      "fig3", "alignment/uniformity trajectories with and without spectral matching");
  add_train_flags(fig3, fig3_ov, /*with_beta=*/false);
  fig3->add_option("--out", fig3_out, "output directory");
  fig3->add_option("--beta", fig3_beta, "spectral weight for the matched arm");

  // sweep
  TrainOverrides sweep_ov;
  std::string sweep_out = "sweep";
  std::string sweep_param;
  std::vector<double> sweep_values;
  CLI::App* sweep = app.add_subcommand("sweep", "re-train across values of one hyperparameter");
  add_train_flags(sweep, sweep_ov);
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--param", sweep_param, "which knob to sweep: p, beta, or lr")
      ->required()
      ->check(CLI::IsMember({"p", "beta", "lr"}));
  sweep->add_option("--values", sweep_values, "comma-separated values")
      ->required()
      ->delimiter(',');

  // verify
  specmatch::HarnessConfig harness;
  std::string verify_out = "reports.json";
  bool verify_quick = false;
  CLI::App* verify = app.add_subcommand("verify", "check every implemented theoretical bound");
  verify->add_option("--seed", harness.seed, "harness seed");
  verify->add_option("--t-d", harness.t_d, "diffusion scale for the shift bound");
  verify->add_option("--p", harness.percentile, "similarity threshold percentile");
  verify->add_option("--unif-t", harness.unif_t, "uniformity temperature");
  verify->add_option("--draws", harness.m_draws, "augmentation draws per ensemble");
  verify->add_option("--out", verify_out, "report JSON path (empty to skip)");
  verify->add_flag("--quick", verify_quick, "smaller Monte-Carlo sizes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(sbm, gen_seed, gen_out);
    if (train->parsed()) return cmd_train(train_ov, train_out);
    if (fig3->parsed()) return cmd_fig3(fig3_ov, fig3_beta, fig3_out);
    if (sweep->parsed()) return cmd_sweep(sweep_ov, sweep_param, sweep_values, sweep_out);
    if (verify->parsed()) return cmd_verify(harness, verify_out, verify_quick);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
