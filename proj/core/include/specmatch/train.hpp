#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "specmatch/augment.hpp"
#include "specmatch/encoder.hpp"
#include "specmatch/graph.hpp"
#include "specmatch/loss.hpp"
#include "specmatch/metrics.hpp"

namespace specmatch {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const AdamConfig& config, Eigen::Index n);
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad);

 private:
  AdamConfig config_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct TrainConfig {
  std::string dataset_path;          // takes precedence when nonempty
  SbmParams sbm;                     // generator fallback
  std::uint64_t dataset_seed = 1;
  AugmentPolicy policy;              // default social-dense @ 0.2
  EncoderConfig encoder;
  LossConfig loss;
  AdamConfig optim;
  MetricConfig metrics;
  int batch_size = 64;
  int epochs = 40;
  int metric_cadence = 2;            // align/unif/probe every k epochs (and at the end)
  std::uint64_t seed = 1;
  bool keep_epoch_snapshots = false; // retain per-epoch parameter copies (tests)

  TrainConfig();
  void validate() const;
};

TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& config, const std::string& path);

struct EpochRow {
  int epoch = 0;
  double loss_c = 0.0, loss_g = 0.0, loss_total = 0.0;
  bool has_metrics = false;
  double align = 0.0, unif = 0.0, probe_acc = 0.0;
  double seconds = 0.0;  // measured wall time; the CSV column is a fixed
                         // 0.000 placeholder so logs stay byte-reproducible
};

struct RunLog {
  std::vector<EpochRow> rows;
  bool diverged = false;
  int divergence_epoch = -1;
};

struct TrainResult {
  EncoderParams params;  // final (or last good on divergence)
  RunLog log;
  Dataset dataset;
  std::vector<Eigen::VectorXd> epoch_snapshots;  // flat params per epoch when requested
};

// Deterministic training loop: seeded shuffles, two augmented views per
// graph, taped objective, Adam. Epoch rows hold a full-dataset evaluation
// with the epoch-end parameters (recomputable from a snapshot), so every
// logged loss is independent of batch ordering side effects.
TrainResult train(const TrainConfig& config, std::ostream* progress = nullptr);

// Recomputes the epoch-end evaluation row for a given parameter snapshot.
EpochRow evaluate_epoch(const TrainConfig& config, const Dataset& dataset,
                        const EncoderParams& params, int epoch, bool with_metrics);

void write_runlog_csv(const RunLog& log, const std::string& path);

struct Fig3Result {
  TrainResult base;  // beta = 0
  TrainResult spec;  // beta > 0
  double beta = 0.0;
};

// Two runs with identical seeds and data order, beta = 0 vs beta > 0;
// powers the alignment/uniformity trajectory outputs.
Fig3Result run_fig3(const TrainConfig& config, double beta, std::ostream* progress = nullptr);

void write_fig3_csv(const Fig3Result& result, const std::string& path);
void write_fig3_svg(const Fig3Result& result, const std::string& path);

struct SweepRow {
  std::string param;
  double value = 0.0;
  double loss_c = 0.0, loss_g = 0.0, loss_total = 0.0;
  double align = 0.0, unif = 0.0, probe_acc = 0.0;
};

// param is one of "p" (threshold percentile), "beta", "lr"; one full run per
// value with shared seeds.
std::vector<SweepRow> sweep(const TrainConfig& base, const std::string& param,
                            const std::vector<double>& values, std::ostream* progress = nullptr);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace specmatch
