#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "specmatch/graph.hpp"
#include "specmatch/tape.hpp"

namespace specmatch {

struct EncoderConfig {
  int layers = 3;    // GIN layers
  int hidden = 32;   // hidden width
  int out_dim = 32;  // projection output dimension
};

// One GIN layer: h <- relu(MLP((1 + eps) h + sum-aggregated neighbors)),
// MLP = Linear -> ReLU -> Linear.
struct GinLayer {
  Eigen::MatrixXd w1;     // in x hidden
  Eigen::RowVectorXd b1;  // hidden
  Eigen::MatrixXd w2;     // hidden x hidden
  Eigen::RowVectorXd b2;  // hidden
  double eps = 0.0;       // trainable, init 0
};

struct EncoderParams {
  EncoderConfig config;
  int in_dim = 0;
  std::vector<GinLayer> layers;
  Eigen::MatrixXd proj_w1;     // hidden x hidden
  Eigen::RowVectorXd proj_b1;  // hidden
  Eigen::MatrixXd proj_w2;     // hidden x out_dim
  Eigen::RowVectorXd proj_b2;  // out_dim
};

// Weights uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero, eps zero.
EncoderParams init_encoder(const EncoderConfig& config, int in_dim, std::uint64_t seed);

// Named view of every parameter tensor in a fixed traversal order (layer 0
// w1,b1,w2,b2,eps; layer 1 ...; projection w1,b1,w2,b2). The order is the
// contract shared by the optimizer, the tape registration, gradient
// flattening, and the checkpoint format.
struct ParamView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

std::vector<ParamView> param_views(EncoderParams& params);
Eigen::Index param_count(const EncoderParams& params);
Eigen::VectorXd gather_params(const EncoderParams& params);
void scatter_params(EncoderParams& params, const Eigen::VectorXd& flat);

// Plain forward pass: sum aggregation, sum readout over final-layer node
// embeddings, two-layer projection head (no output activation). Returns the
// unnormalized 1 x out_dim embedding.
Eigen::RowVectorXd encode(const EncoderParams& params, const Graph& g);
Eigen::MatrixXd encode_batch(const EncoderParams& params, const std::vector<Graph>& graphs);

// Row normalization z / ||z||; throws std::runtime_error ("degenerate
// embedding") if any row norm is below min_norm.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& z, double min_norm = 1e-12);

// Taped forward pass sharing one set of parameter leaves across many graphs.
class TapedEncoder {
 public:
  TapedEncoder(Tape& tape, const EncoderParams& params);

  NodeId forward(const Graph& g) const;  // 1 x out_dim, unnormalized

  // Parameter leaf ids in param_views order.
  const std::vector<NodeId>& param_nodes() const { return param_nodes_; }

  // Flattened gradient in param_views order; call after Tape::backward.
  Eigen::VectorXd gradient() const;

 private:
  Tape* tape_;
  const EncoderParams* params_;
  std::vector<NodeId> param_nodes_;
  // per-layer node handles in registration order
  struct LayerNodes { NodeId w1, b1, w2, b2, eps; };
  std::vector<LayerNodes> layer_nodes_;
  NodeId proj_w1_, proj_b1_, proj_w2_, proj_b2_;
};

// Checkpoint JSON: shape header plus row-major weight arrays; doubles
// round-trip bit-exactly.
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace specmatch
