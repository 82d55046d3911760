#include "specmatch/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "specmatch/rng.hpp"
#include "specmatch/tape.hpp"

namespace specmatch {

namespace {

using nlohmann::json;

// Seed-stream salts keeping the train, eval, and probe-split streams disjoint.
constexpr std::uint64_t kShuffleSalt = 0x5E0F;
constexpr std::uint64_t kEvalSalt = 0xEBA1;
constexpr std::uint64_t kProbeSplitSalt = 0x9E17;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Adam::Adam(const AdamConfig& config, Eigen::Index n) : config_(config) {
  if (n < 1) throw std::invalid_argument("Adam: need at least one parameter");
  if (!(config.lr > 0.0)) throw std::invalid_argument("Adam: lr must be > 0");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw std::invalid_argument("Adam: betas must lie in [0, 1)");
  }
  if (!(config.eps > 0.0)) throw std::invalid_argument("Adam: eps must be > 0");
  m_ = Eigen::VectorXd::Zero(n);
  v_ = Eigen::VectorXd::Zero(n);
}

void Adam::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("Adam::step: size mismatch");
  }
  ++t_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const Eigen::VectorXd m_hat = m_ / bc1;
  const Eigen::VectorXd v_hat = v_ / bc2;
  params -= config_.lr * (m_hat.array() / (v_hat.array().sqrt() + config_.eps)).matrix();
}

TrainConfig::TrainConfig() : policy(preset_policy("social-dense", 0.2)) {}

void TrainConfig::validate() const {
  policy.validate();
  loss.validate();
  if (encoder.layers < 1 || encoder.hidden < 1 || encoder.out_dim < 1) {
    throw std::invalid_argument("TrainConfig: encoder dimensions must be positive");
  }
  if (!(optim.lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) ||
      !(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: Adam betas must lie in [0, 1)");
  }
  if (!(optim.eps > 0.0)) throw std::invalid_argument("TrainConfig: Adam eps must be > 0");
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (metric_cadence < 1) throw std::invalid_argument("TrainConfig: metric_cadence must be >= 1");
  if (!(metrics.align_alpha > 0.0) || !(metrics.unif_t > 0.0)) {
    throw std::invalid_argument("TrainConfig: metric parameters must be positive");
  }
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("train config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("train config: top level must be an object");

  TrainConfig c;  // defaults
  c.dataset_path = j.value("dataset_path", c.dataset_path);
  c.dataset_seed = j.value("dataset_seed", c.dataset_seed);
  if (j.contains("sbm")) {
    const json& s = j.at("sbm");
    c.sbm.n_graphs = s.value("n_graphs", c.sbm.n_graphs);
    c.sbm.min_nodes = s.value("min_nodes", c.sbm.min_nodes);
    c.sbm.max_nodes = s.value("max_nodes", c.sbm.max_nodes);
    c.sbm.p_in = s.value("p_in", c.sbm.p_in);
    c.sbm.p_out = s.value("p_out", c.sbm.p_out);
    c.sbm.n_classes = s.value("n_classes", c.sbm.n_classes);
    c.sbm.feature_dim = s.value("feature_dim", c.sbm.feature_dim);
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    if (p.contains("preset")) {
      c.policy = preset_policy(p.at("preset").get<std::string>(),
                               p.value("strength", c.policy.strength));
    } else {
      if (p.contains("operators")) {
        c.policy.operators.clear();
        for (const auto& name : p.at("operators")) {
          c.policy.operators.push_back(augment_op_from_name(name.get<std::string>()));
        }
      }
      c.policy.strength = p.value("strength", c.policy.strength);
    }
  }
  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    c.encoder.layers = e.value("layers", c.encoder.layers);
    c.encoder.hidden = e.value("hidden", c.encoder.hidden);
    c.encoder.out_dim = e.value("out_dim", c.encoder.out_dim);
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    c.loss.tau = l.value("tau", c.loss.tau);
    c.loss.beta = l.value("beta", c.loss.beta);
    c.loss.percentile = l.value("percentile", c.loss.percentile);
    if (l.contains("adjacency_mode")) {
      c.loss.adjacency_mode = adjacency_mode_from_name(l.at("adjacency_mode").get<std::string>());
    }
  }
  if (j.contains("optim")) {
    const json& o = j.at("optim");
    c.optim.lr = o.value("lr", c.optim.lr);
    c.optim.beta1 = o.value("beta1", c.optim.beta1);
    c.optim.beta2 = o.value("beta2", c.optim.beta2);
    c.optim.eps = o.value("eps", c.optim.eps);
  }
  if (j.contains("metrics")) {
    const json& m = j.at("metrics");
    c.metrics.align_alpha = m.value("align_alpha", c.metrics.align_alpha);
    c.metrics.unif_t = m.value("unif_t", c.metrics.unif_t);
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.metric_cadence = j.value("metric_cadence", c.metric_cadence);
  c.seed = j.value("seed", c.seed);
  c.keep_epoch_snapshots = j.value("keep_epoch_snapshots", c.keep_epoch_snapshots);
  c.validate();
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["dataset_path"] = c.dataset_path;
  j["dataset_seed"] = c.dataset_seed;
  j["sbm"] = {{"n_graphs", c.sbm.n_graphs},     {"min_nodes", c.sbm.min_nodes},
              {"max_nodes", c.sbm.max_nodes},   {"p_in", c.sbm.p_in},
              {"p_out", c.sbm.p_out},           {"n_classes", c.sbm.n_classes},
              {"feature_dim", c.sbm.feature_dim}};
  json ops = json::array();
  for (AugmentOp op : c.policy.operators) ops.push_back(augment_op_name(op));
  j["policy"] = {{"operators", std::move(ops)}, {"strength", c.policy.strength}};
  j["encoder"] = {{"layers", c.encoder.layers},
                  {"hidden", c.encoder.hidden},
                  {"out_dim", c.encoder.out_dim}};
  j["loss"] = {{"tau", c.loss.tau},
               {"beta", c.loss.beta},
               {"percentile", c.loss.percentile},
               {"adjacency_mode", adjacency_mode_name(c.loss.adjacency_mode)}};
  j["optim"] = {{"lr", c.optim.lr},
                {"beta1", c.optim.beta1},
                {"beta2", c.optim.beta2},
                {"eps", c.optim.eps}};
  j["metrics"] = {{"align_alpha", c.metrics.align_alpha}, {"unif_t", c.metrics.unif_t}};
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["metric_cadence"] = c.metric_cadence;
  j["seed"] = c.seed;
  j["keep_epoch_snapshots"] = c.keep_epoch_snapshots;
  return j.dump(2);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_train_config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

void save_train_config(const TrainConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_train_config: cannot open " + path);
  out << train_config_to_json(config) << '\n';
}

namespace {

// Two augmented views of every graph in `indices`, with per-graph seed
// streams so a row is reproducible independently of batch composition.
std::pair<std::vector<Graph>, std::vector<Graph>> draw_views(
    const Dataset& dataset, const std::vector<int>& indices, const AugmentPolicy& policy,
    std::uint64_t stream_seed, int epoch) {
  std::vector<Graph> v1, v2;
  v1.reserve(indices.size());
  v2.reserve(indices.size());
  for (int idx : indices) {
    Rng rng(derive_seed(stream_seed, static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(idx)));
    auto [a, b] = sample_views(dataset.graphs[static_cast<std::size_t>(idx)], policy, rng);
    v1.push_back(std::move(a));
    v2.push_back(std::move(b));
  }
  return {std::move(v1), std::move(v2)};
}

struct BatchLoss {
  double total = 0.0;
  Eigen::VectorXd grad;
};

BatchLoss taped_batch_step(const EncoderParams& params, const std::vector<Graph>& v1,
                           const std::vector<Graph>& v2, const LossConfig& loss_config) {
  Tape tape;
  TapedEncoder enc(tape, params);
  std::vector<NodeId> rows1, rows2;
  rows1.reserve(v1.size());
  rows2.reserve(v2.size());
  for (const Graph& g : v1) rows1.push_back(enc.forward(g));
  for (const Graph& g : v2) rows2.push_back(enc.forward(g));
  const NodeId z1 = tape.vstack(rows1);
  const NodeId z2 = tape.vstack(rows2);
  const TapedLoss tl = taped_total_loss(tape, z1, z2, loss_config);
  tape.backward(tl.total);
  BatchLoss out;
  out.total = tape.value(tl.total)(0, 0);
  out.grad = enc.gradient();
  return out;
}

Dataset resolve_dataset(const TrainConfig& config) {
  Dataset dataset = config.dataset_path.empty()
                        ? generate_sbm(config.sbm, config.dataset_seed)
                        : load_dataset(config.dataset_path);
  dataset.validate();
  if (static_cast<int>(dataset.graphs.size()) < 2) {
    throw std::invalid_argument("train: dataset needs at least 2 graphs");
  }
  return dataset;
}

}  // namespace

EpochRow evaluate_epoch(const TrainConfig& config, const Dataset& dataset,
                        const EncoderParams& params, int epoch, bool with_metrics) {
  std::vector<int> all(dataset.graphs.size());
  std::iota(all.begin(), all.end(), 0);
  auto [v1, v2] = draw_views(dataset, all, config.policy, dataset.seed ^ kEvalSalt, epoch);
  const Eigen::MatrixXd z1 = normalize_rows(encode_batch(params, v1));
  const Eigen::MatrixXd z2 = normalize_rows(encode_batch(params, v2));
  const TotalLoss tl = total_loss(z1, z2, config.loss);

  EpochRow row;
  row.epoch = epoch;
  row.loss_c = tl.contrastive;
  row.loss_g = tl.spectral;
  row.loss_total = tl.total;
  if (!with_metrics) return row;

  row.has_metrics = true;
  row.align = alignment_loss(z1, z2, config.metrics.align_alpha);
  row.unif = uniformity_loss(z1, z2, config.metrics.unif_t);

  // Linear probe on the unaugmented embeddings with a fixed 80/20 split.
  for (const Graph& g : dataset.graphs) {
    if (!g.label.has_value()) {
      throw std::invalid_argument("evaluate_epoch: linear probe requires labeled graphs");
    }
  }
  const Eigen::MatrixXd zu = normalize_rows(encode_batch(params, dataset.graphs));
  std::vector<int> order(dataset.graphs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(dataset.seed, kProbeSplitSalt));
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        split_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::max<std::int64_t>(1, static_cast<std::int64_t>(order.size() * 8 / 10)));
  Eigen::MatrixXd train_z(static_cast<Eigen::Index>(n_train), zu.cols());
  Eigen::MatrixXd test_z(static_cast<Eigen::Index>(order.size() - n_train), zu.cols());
  std::vector<int> train_y, test_y;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int idx = order[i];
    const int label = *dataset.graphs[static_cast<std::size_t>(idx)].label;
    if (i < n_train) {
      train_z.row(static_cast<Eigen::Index>(i)) = zu.row(idx);
      train_y.push_back(label);
    } else {
      test_z.row(static_cast<Eigen::Index>(i - n_train)) = zu.row(idx);
      test_y.push_back(label);
    }
  }
  if (test_y.empty()) {
    throw std::invalid_argument("evaluate_epoch: dataset too small for a probe split");
  }
  row.probe_acc = linear_probe(train_z, train_y, test_z, test_y);
  return row;
}

TrainResult train(const TrainConfig& config, std::ostream* progress) {
  config.validate();
  Dataset dataset = resolve_dataset(config);

  TrainResult result;
  result.params = init_encoder(config.encoder, dataset.feature_dim(), config.seed);
  Adam adam(config.optim, param_count(result.params));
  Eigen::VectorXd flat = gather_params(result.params);
  Eigen::VectorXd last_good = flat;

  const int n = static_cast<int>(dataset.graphs.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, kShuffleSalt, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    bool exploded = false;
    for (int start = 0; start < n; start += config.batch_size) {
      const int stop = std::min(n, start + config.batch_size);
      if (stop - start < 2) continue;  // a singleton batch has no negatives
      const std::vector<int> batch(order.begin() + start, order.begin() + stop);
      auto [v1, v2] = draw_views(dataset, batch, config.policy, dataset.seed, epoch);
      const BatchLoss step = taped_batch_step(result.params, v1, v2, config.loss);
      if (!std::isfinite(step.total) || !step.grad.allFinite()) {
        exploded = true;
        break;
      }
      adam.step(flat, step.grad);
      scatter_params(result.params, flat);
    }

    if (exploded) {
      scatter_params(result.params, last_good);
      result.log.diverged = true;
      result.log.divergence_epoch = epoch;
      if (progress) {
        *progress << "epoch " << epoch << "/" << config.epochs
                  << " diverged; restored last finite parameters\n";
      }
      break;
    }

    const bool with_metrics = (epoch % config.metric_cadence == 0) || epoch == config.epochs;
    EpochRow row = evaluate_epoch(config, dataset, result.params, epoch, with_metrics);
    const auto t1 = std::chrono::steady_clock::now();
    row.seconds = std::chrono::duration<double>(t1 - t0).count();

    if (!std::isfinite(row.loss_total)) {
      scatter_params(result.params, last_good);
      result.log.diverged = true;
      result.log.divergence_epoch = epoch;
      if (progress) {
        *progress << "epoch " << epoch << "/" << config.epochs
                  << " produced a non-finite evaluation; restored last finite parameters\n";
      }
      break;
    }

    result.log.rows.push_back(row);
    last_good = flat;
    if (config.keep_epoch_snapshots) result.epoch_snapshots.push_back(flat);

    if (progress) {
      char buf[200];
      std::snprintf(buf, sizeof(buf),
                    "epoch %d/%d  loss_total=%.6f  loss_c=%.6f  loss_g=%.6f  [%.2fs]",
                    epoch, config.epochs, row.loss_total, row.loss_c, row.loss_g, row.seconds);
      *progress << buf;
      if (row.has_metrics) {
        std::snprintf(buf, sizeof(buf), "  align=%.4f unif=%.4f probe=%.3f", row.align, row.unif,
                      row.probe_acc);
        *progress << buf;
      }
      *progress << '\n';
    }
  }

  result.dataset = std::move(dataset);
  return result;
}

void write_runlog_csv(const RunLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_runlog_csv: cannot open " + path);
  out << "epoch,loss_c,loss_g,loss_total,align,unif,probe_acc,seconds\n";
  for (const EpochRow& row : log.rows) {
    out << row.epoch << ',' << fmt_double(row.loss_c) << ',' << fmt_double(row.loss_g) << ','
        << fmt_double(row.loss_total) << ',';
    if (row.has_metrics) {
      out << fmt_double(row.align) << ',' << fmt_double(row.unif) << ','
          << fmt_double(row.probe_acc);
    } else {
      out << ",,";
    }
    // Fixed placeholder keeps repeated runs byte-identical; real timings go
    // to the progress stream instead.
    out << ",0.000\n";
  }
}

Fig3Result run_fig3(const TrainConfig& config, double beta, std::ostream* progress) {
  if (!(beta > 0.0)) throw std::invalid_argument("run_fig3: beta must be > 0");
  Fig3Result result;
  result.beta = beta;

  TrainConfig base = config;
  base.metric_cadence = 1;  // trajectories need metrics at every epoch
  base.loss.beta = 0.0;
  TrainConfig spec = base;
  spec.loss.beta = beta;

  if (progress) *progress << "run 1/2: contrastive only (beta=0)\n";
  result.base = train(base, progress);
  if (progress) *progress << "run 2/2: with spectral matching (beta=" << beta << ")\n";
  result.spec = train(spec, progress);
  return result;
}

void write_fig3_csv(const Fig3Result& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_fig3_csv: cannot open " + path);
  out << "epoch,base_align,base_unif,spec_align,spec_unif\n";
  const std::size_t rows = std::min(result.base.log.rows.size(), result.spec.log.rows.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const EpochRow& b = result.base.log.rows[i];
    const EpochRow& s = result.spec.log.rows[i];
    out << b.epoch << ',' << fmt_double(b.align) << ',' << fmt_double(b.unif) << ','
        << fmt_double(s.align) << ',' << fmt_double(s.unif) << '\n';
  }
}

namespace {

struct Series {
  std::string label;
  std::string color;
  bool dashed = false;
  std::vector<double> xs, ys;
};

// One chart panel with axes, ticks, polylines and point markers.
std::string svg_panel(double x0, double y0, double w, double h, const std::string& title,
                      const std::vector<Series>& series) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series) {
    for (double x : s.xs) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    for (double y : s.ys) {
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmin > xmax) {
    xmin = 0.0;
    xmax = 1.0;
  }
  if (ymin > ymax) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  const double ypad = std::max(1e-12, 0.08 * (ymax - ymin));
  ymin -= ypad;
  ymax += ypad;

  const double ml = 52.0, mr = 14.0, mt = 28.0, mb = 34.0;
  const double px = x0 + ml, py = y0 + mt, pw = w - ml - mr, ph = h - mt - mb;
  auto sx = [&](double x) { return px + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return py + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                "stroke=\"#444\" stroke-width=\"1\"/>\n",
                px, py, pw, ph);
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\" "
                "fill=\"#222\">%s</text>\n",
                px + pw / 2, y0 + 16.0, title.c_str());
  out += buf;

  const int yticks = 5;
  for (int k = 0; k <= yticks; ++k) {
    const double v = ymin + (ymax - ymin) * k / yticks;
    const double yy = sy(v);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\" "
                  "stroke-width=\"0.7\"/>\n",
                  px, yy, px + pw, yy);
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"end\" "
                  "fill=\"#555\">%.3g</text>\n",
                  px - 5.0, yy + 3.5, v);
    out += buf;
  }
  const int xticks = std::min(8, static_cast<int>(xmax - xmin));
  for (int k = 0; k <= xticks; ++k) {
    const double v = xmin + (xmax - xmin) * k / std::max(1, xticks);
    const double xx = sx(v);
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"middle\" "
                  "fill=\"#555\">%.0f</text>\n",
                  xx, py + ph + 14.0, v);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\" "
                "fill=\"#333\">epoch</text>\n",
                px + pw / 2, py + ph + 28.0);
  out += buf;

  for (const Series& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(s.xs[i]), sy(s.ys[i]));
      pts += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"1.6\"%s/>\n",
                  pts.c_str(), s.color.c_str(),
                  s.dashed ? " stroke-dasharray=\"5,3\"" : "");
    out += buf;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      std::snprintf(buf, sizeof(buf),
                    "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.3\" fill=\"%s\"/>\n", sx(s.xs[i]),
                    sy(s.ys[i]), s.color.c_str());
      out += buf;
    }
  }

  double ly = py + 8.0;
  for (const Series& s : series) {
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" "
                  "stroke-width=\"1.6\"%s/>\n",
                  px + pw - 86.0, ly, px + pw - 64.0, ly, s.color.c_str(),
                  s.dashed ? " stroke-dasharray=\"5,3\"" : "");
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" fill=\"#333\">%s</text>\n",
                  px + pw - 60.0, ly + 3.5, s.label.c_str());
    out += buf;
    ly += 14.0;
  }
  return out;
}

}  // namespace

void write_fig3_svg(const Fig3Result& result, const std::string& path) {
  auto collect = [](const TrainResult& run, bool unif) {
    std::pair<std::vector<double>, std::vector<double>> xy;
    for (const EpochRow& row : run.log.rows) {
      if (!row.has_metrics) continue;
      xy.first.push_back(static_cast<double>(row.epoch));
      xy.second.push_back(unif ? row.unif : row.align);
    }
    return xy;
  };

  char beta_label[64];
  std::snprintf(beta_label, sizeof(beta_label), "beta=%g", result.beta);

  std::vector<Series> align_series(2), unif_series(2);
  auto [bax, bay] = collect(result.base, false);
  auto [sax, say] = collect(result.spec, false);
  auto [bux, buy] = collect(result.base, true);
  auto [sux, suy] = collect(result.spec, true);
  align_series[0] = {"beta=0", "#999999", true, bax, bay};
  align_series[1] = {beta_label, "#1f77b4", false, sax, say};
  unif_series[0] = {"beta=0", "#999999", true, bux, buy};
  unif_series[1] = {beta_label, "#d62728", false, sux, suy};

  const double pw = 380.0, ph = 300.0;
  std::string svg;
  char head[256];
  std::snprintf(head, sizeof(head),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\" font-family=\"sans-serif\">\n",
                2 * pw, ph, 2 * pw, ph);
  svg += head;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += svg_panel(0.0, 0.0, pw, ph, "alignment", align_series);
  svg += svg_panel(pw, 0.0, pw, ph, "uniformity", unif_series);
  svg += "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_fig3_svg: cannot open " + path);
  out << svg;
}

std::vector<SweepRow> sweep(const TrainConfig& base, const std::string& param,
                            const std::vector<double>& values, std::ostream* progress) {
  if (values.empty()) throw std::invalid_argument("sweep: need at least one value");
  std::vector<SweepRow> rows;
  for (double value : values) {
    TrainConfig config = base;
    if (param == "p") {
      config.loss.percentile = value;
    } else if (param == "beta") {
      config.loss.beta = value;
    } else if (param == "lr") {
      config.optim.lr = value;
    } else {
      throw std::invalid_argument("sweep: unknown parameter '" + param +
                                  "' (expected p, beta, or lr)");
    }
    config.validate();
    if (progress) *progress << "sweep " << param << "=" << value << "\n";
    const TrainResult result = train(config, progress);
    if (result.log.rows.empty()) {
      throw std::runtime_error("sweep: run for " + param + "=" + fmt_double(value) +
                               " produced no epochs");
    }
    const EpochRow& last = result.log.rows.back();
    SweepRow row;
    row.param = param;
    row.value = value;
    row.loss_c = last.loss_c;
    row.loss_g = last.loss_g;
    row.loss_total = last.loss_total;
    row.align = last.align;
    row.unif = last.unif;
    row.probe_acc = last.probe_acc;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_sweep_csv: cannot open " + path);
  out << "param,value,loss_c,loss_g,loss_total,align,unif,probe_acc\n";
  for (const SweepRow& row : rows) {
    out << row.param << ',' << fmt_double(row.value) << ',' << fmt_double(row.loss_c) << ','
        << fmt_double(row.loss_g) << ',' << fmt_double(row.loss_total) << ','
        << fmt_double(row.align) << ',' << fmt_double(row.unif) << ','
        << fmt_double(row.probe_acc) << '\n';
  }
}

}  // namespace specmatch
