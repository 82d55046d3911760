#pragma once

#include <Eigen/Dense>
#include <string>

#include "specmatch/tape.hpp"

namespace specmatch {

enum class AdjacencyMode { Binary, Soft };

const char* adjacency_mode_name(AdjacencyMode mode);
AdjacencyMode adjacency_mode_from_name(const std::string& name);

struct LossConfig {
  double tau = 0.2;         // InfoNCE temperature, > 0
  double beta = 0.5;        // spectral term weight, >= 0
  double percentile = 80.0; // threshold percentile, in (0, 100]
  AdjacencyMode adjacency_mode = AdjacencyMode::Soft;

  void validate() const;
};

// S = Z Z^T for unit rows; symmetrized with the diagonal pinned to 1.
Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& z);

// Nearest-rank percentile over the strict upper triangle: values sorted
// ascending, theta = v[ceil(p * m / 100)] (1-based). Requires N >= 2.
double percentile_threshold(const Eigen::MatrixXd& s, double p);

// A_ij = 1 iff S_ij > theta (strict) and i != j.
Eigen::MatrixXd adjacency(const Eigen::MatrixXd& s, double theta);

// W = max(S, 0) .* A — the similarity-weighted adjacency used in soft mode.
Eigen::MatrixXd soft_weights(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a);

// L = I - D^{-1/2} M D^{-1/2} with d_i = sum_j M_ij and the zero-degree
// convention D^{-1/2}_ii = 0 (identity row). M may be binary or weighted;
// negative weights are rejected.
Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& m);

// ||L1 - L2||_F^2
double spectral_match_loss(const Eigen::MatrixXd& l1, const Eigen::MatrixXd& l2);

// Symmetric two-view InfoNCE with temperature tau: for each anchor the
// denominator ranges over both views and excludes only the anchor itself
// (the positive stays in). Sum over all 2N anchors, log-sum-exp stabilized.
double info_nce(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, double tau);

// Per-view graph-of-graphs built from a batch embedding matrix.
struct ViewGraph {
  Eigen::MatrixXd s;       // similarity
  double theta = 0.0;      // percentile threshold
  Eigen::MatrixXd a;       // binary adjacency
  Eigen::MatrixXd w;       // soft weights (empty in binary mode)
  Eigen::VectorXd degrees; // d_i = sum_j A_ij
  Eigen::MatrixXd lap;     // normalized Laplacian of A (binary) or W (soft)

  void validate() const;
};

ViewGraph build_view_graph(const Eigen::MatrixXd& z, const LossConfig& config);

std::string view_graph_to_json(const ViewGraph& vg);
void save_view_graph(const ViewGraph& vg, const std::string& path);

struct TotalLoss {
  double total = 0.0;
  double contrastive = 0.0;
  double spectral = 0.0;
  ViewGraph view1, view2;
};

// total = contrastive + beta * spectral on normalized view embeddings.
TotalLoss total_loss(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2,
                     const LossConfig& config);

// Taped objective from two *unnormalized* stacked view embeddings. The
// threshold masks are computed from current values and treated as constants;
// in soft mode gradients flow through the surviving similarity entries and
// the weighted-degree normalization.
struct TapedLoss {
  NodeId total;
  NodeId contrastive;
  NodeId spectral;
};

TapedLoss taped_total_loss(Tape& tape, NodeId z1_raw, NodeId z2_raw, const LossConfig& config);

}  // namespace specmatch
