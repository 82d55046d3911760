#include "specmatch/encoder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "specmatch/rng.hpp"

namespace specmatch {

namespace {

Eigen::MatrixXd uniform_fan_in(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  // fan_in is the input dimension of the linear map x -> x W, i.e. rows.
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    }
  }
  return w;
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& config, int in_dim, std::uint64_t seed) {
  if (config.layers < 1) throw std::invalid_argument("init_encoder: need at least one layer");
  if (config.hidden < 1 || config.out_dim < 1 || in_dim < 1) {
    throw std::invalid_argument("init_encoder: dimensions must be >= 1");
  }
  EncoderParams params;
  params.config = config;
  params.in_dim = in_dim;
  Rng rng(derive_seed(seed, 0xE2C0DE));
  for (int l = 0; l < config.layers; ++l) {
    GinLayer layer;
    const Eigen::Index fan_in = l == 0 ? in_dim : config.hidden;
    layer.w1 = uniform_fan_in(fan_in, config.hidden, rng);
    layer.b1 = Eigen::RowVectorXd::Zero(config.hidden);
    layer.w2 = uniform_fan_in(config.hidden, config.hidden, rng);
    layer.b2 = Eigen::RowVectorXd::Zero(config.hidden);
    layer.eps = 0.0;
    params.layers.push_back(std::move(layer));
  }
  params.proj_w1 = uniform_fan_in(config.hidden, config.hidden, rng);
  params.proj_b1 = Eigen::RowVectorXd::Zero(config.hidden);
  params.proj_w2 = uniform_fan_in(config.hidden, config.out_dim, rng);
  params.proj_b2 = Eigen::RowVectorXd::Zero(config.out_dim);
  return params;
}

std::vector<ParamView> param_views(EncoderParams& params) {
  std::vector<ParamView> views;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    GinLayer& layer = params.layers[l];
    const std::string prefix = "gin" + std::to_string(l) + ".";
    views.push_back({prefix + "w1", layer.w1.data(), layer.w1.rows(), layer.w1.cols()});
    views.push_back({prefix + "b1", layer.b1.data(), 1, layer.b1.cols()});
    views.push_back({prefix + "w2", layer.w2.data(), layer.w2.rows(), layer.w2.cols()});
    views.push_back({prefix + "b2", layer.b2.data(), 1, layer.b2.cols()});
    views.push_back({prefix + "eps", &layer.eps, 1, 1});
  }
  views.push_back({"proj.w1", params.proj_w1.data(), params.proj_w1.rows(), params.proj_w1.cols()});
  views.push_back({"proj.b1", params.proj_b1.data(), 1, params.proj_b1.cols()});
  views.push_back({"proj.w2", params.proj_w2.data(), params.proj_w2.rows(), params.proj_w2.cols()});
  views.push_back({"proj.b2", params.proj_b2.data(), 1, params.proj_b2.cols()});
  return views;
}

Eigen::Index param_count(const EncoderParams& params) {
  Eigen::Index n = 0;
  for (const auto& view : param_views(const_cast<EncoderParams&>(params))) n += view.size();
  return n;
}

Eigen::VectorXd gather_params(const EncoderParams& params) {
  auto views = param_views(const_cast<EncoderParams&>(params));
  Eigen::Index total = 0;
  for (const auto& v : views) total += v.size();
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  for (const auto& v : views) {
    flat.segment(at, v.size()) = Eigen::Map<const Eigen::VectorXd>(v.data, v.size());
    at += v.size();
  }
  return flat;
}

void scatter_params(EncoderParams& params, const Eigen::VectorXd& flat) {
  auto views = param_views(params);
  Eigen::Index total = 0;
  for (const auto& v : views) total += v.size();
  if (flat.size() != total) throw std::invalid_argument("scatter_params: size mismatch");
  Eigen::Index at = 0;
  for (auto& v : views) {
    Eigen::Map<Eigen::VectorXd>(v.data, v.size()) = flat.segment(at, v.size());
    at += v.size();
  }
}

Eigen::RowVectorXd encode(const EncoderParams& params, const Graph& g) {
  const Eigen::MatrixXd adj = g.adjacency_matrix();
  Eigen::MatrixXd h = g.features;
  if (h.cols() != params.in_dim) {
    throw std::invalid_argument("encode: feature dim " + std::to_string(h.cols()) +
                                " != encoder input dim " + std::to_string(params.in_dim));
  }
  for (const GinLayer& layer : params.layers) {
    const Eigen::MatrixXd agg = adj * h;                       // neighbor sum
    const Eigen::MatrixXd combined = (1.0 + layer.eps) * h + agg;
    const Eigen::MatrixXd hidden =
        ((combined * layer.w1).rowwise() + layer.b1).cwiseMax(0.0);
    h = ((hidden * layer.w2).rowwise() + layer.b2).cwiseMax(0.0);
  }
  const Eigen::RowVectorXd readout = h.colwise().sum();        // sum over nodes
  const Eigen::RowVectorXd hidden =
      ((readout * params.proj_w1) + params.proj_b1).cwiseMax(0.0);
  return (hidden * params.proj_w2) + params.proj_b2;
}

Eigen::MatrixXd encode_batch(const EncoderParams& params, const std::vector<Graph>& graphs) {
  if (graphs.empty()) throw std::invalid_argument("encode_batch: empty batch");
  Eigen::MatrixXd z(static_cast<Eigen::Index>(graphs.size()), params.config.out_dim);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    z.row(static_cast<Eigen::Index>(i)) = encode(params, graphs[i]);
  }
  return z;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& z, double min_norm) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (!(norm >= min_norm)) {
      throw std::runtime_error("normalize_rows: degenerate embedding (row " + std::to_string(i) +
                               " norm " + std::to_string(norm) + ")");
    }
    out.row(i) = z.row(i) / norm;
  }
  return out;
}

TapedEncoder::TapedEncoder(Tape& tape, const EncoderParams& params)
    : tape_(&tape), params_(&params) {
  auto views = param_views(const_cast<EncoderParams&>(params));
  std::size_t v = 0;
  auto next_leaf = [&](Eigen::Index rows, Eigen::Index cols) {
    const ParamView& view = views[v++];
    Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(view.data, rows, cols);
    const NodeId id = tape_->leaf(m, /*requires_grad=*/true);
    param_nodes_.push_back(id);
    return id;
  };
  for (const GinLayer& layer : params.layers) {
    LayerNodes nodes;
    nodes.w1 = next_leaf(layer.w1.rows(), layer.w1.cols());
    nodes.b1 = next_leaf(1, layer.b1.cols());
    nodes.w2 = next_leaf(layer.w2.rows(), layer.w2.cols());
    nodes.b2 = next_leaf(1, layer.b2.cols());
    nodes.eps = next_leaf(1, 1);
    layer_nodes_.push_back(nodes);
  }
  proj_w1_ = next_leaf(params.proj_w1.rows(), params.proj_w1.cols());
  proj_b1_ = next_leaf(1, params.proj_b1.cols());
  proj_w2_ = next_leaf(params.proj_w2.rows(), params.proj_w2.cols());
  proj_b2_ = next_leaf(1, params.proj_b2.cols());
}

NodeId TapedEncoder::forward(const Graph& g) const {
  Tape& t = *tape_;
  const NodeId adj = t.constant(g.adjacency_matrix());
  if (g.features.cols() != params_->in_dim) {
    throw std::invalid_argument("TapedEncoder::forward: feature dim mismatch");
  }
  NodeId h = t.constant(g.features);
  for (const LayerNodes& layer : layer_nodes_) {
    const NodeId agg = t.matmul(adj, h);
    const NodeId combined = t.gin_combine(h, agg, layer.eps);
    const NodeId hidden = t.relu(t.add_row_broadcast(t.matmul(combined, layer.w1), layer.b1));
    h = t.relu(t.add_row_broadcast(t.matmul(hidden, layer.w2), layer.b2));
  }
  const NodeId readout = t.sum_rows(h);
  const NodeId hidden = t.relu(t.add_row_broadcast(t.matmul(readout, proj_w1_), proj_b1_));
  return t.add_row_broadcast(t.matmul(hidden, proj_w2_), proj_b2_);
}

Eigen::VectorXd TapedEncoder::gradient() const {
  Eigen::Index total = 0;
  for (NodeId id : param_nodes_) {
    total += tape_->value(id).size();
  }
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  for (NodeId id : param_nodes_) {
    const Eigen::MatrixXd& g = tape_->grad(id);
    flat.segment(at, g.size()) = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    at += g.size();
  }
  return flat;
}

namespace {

using nlohmann::json;

json matrix_to_json(const double* data, Eigen::Index rows, Eigen::Index cols) {
  // Row-major flat array (data itself is column-major in Eigen).
  Eigen::Map<const Eigen::MatrixXd> m(data, rows, cols);
  json arr = json::array();
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) arr.push_back(m(i, j));
  }
  return arr;
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path) {
  json j;
  j["format"] = "specmatch-checkpoint";
  j["config"] = {{"layers", params.config.layers},
                 {"hidden", params.config.hidden},
                 {"out_dim", params.config.out_dim},
                 {"in_dim", params.in_dim}};
  json shapes = json::array();
  json data = json::object();
  auto views = param_views(const_cast<EncoderParams&>(params));
  for (const auto& view : views) {
    shapes.push_back({{"name", view.name}, {"rows", view.rows}, {"cols", view.cols}});
    data[view.name] = matrix_to_json(view.data, view.rows, view.cols);
  }
  j["shapes"] = std::move(shapes);
  j["data"] = std::move(data);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("load_checkpoint: parse error: " + std::string(e.what()));
  }
  if (j.value("format", std::string{}) != "specmatch-checkpoint") {
    throw std::invalid_argument("load_checkpoint: unrecognized format field");
  }
  EncoderConfig config;
  config.layers = j["config"]["layers"].get<int>();
  config.hidden = j["config"]["hidden"].get<int>();
  config.out_dim = j["config"]["out_dim"].get<int>();
  const int in_dim = j["config"]["in_dim"].get<int>();

  EncoderParams params = init_encoder(config, in_dim, /*seed=*/0);
  auto views = param_views(params);
  for (auto& view : views) {
    if (!j["data"].contains(view.name)) {
      throw std::invalid_argument("load_checkpoint: missing tensor " + view.name);
    }
    const auto& arr = j["data"][view.name];
    if (static_cast<Eigen::Index>(arr.size()) != view.size()) {
      throw std::invalid_argument("load_checkpoint: tensor " + view.name + " has " +
                                  std::to_string(arr.size()) + " values, expected " +
                                  std::to_string(view.size()));
    }
    Eigen::Map<Eigen::MatrixXd> m(view.data, view.rows, view.cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < view.rows; ++i) {
      for (Eigen::Index j2 = 0; j2 < view.cols; ++j2) m(i, j2) = arr[k++].get<double>();
    }
  }
  return params;
}

}  // namespace specmatch
