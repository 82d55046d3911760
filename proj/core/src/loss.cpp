#include "specmatch/loss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "specmatch/encoder.hpp"

namespace specmatch {

const char* adjacency_mode_name(AdjacencyMode mode) {
  return mode == AdjacencyMode::Binary ? "binary" : "soft";
}

AdjacencyMode adjacency_mode_from_name(const std::string& name) {
  if (name == "binary") return AdjacencyMode::Binary;
  if (name == "soft") return AdjacencyMode::Soft;
  throw std::invalid_argument("adjacency_mode_from_name: unknown mode '" + name + "'");
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("LossConfig: tau must be > 0, got " + std::to_string(tau));
  if (!(beta >= 0.0)) throw std::invalid_argument("LossConfig: beta must be >= 0, got " + std::to_string(beta));
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("LossConfig: percentile must be in (0, 100], got " + std::to_string(percentile));
  }
}

Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd s = z * z.transpose();
  s = 0.5 * (s + s.transpose().eval());
  s.diagonal().setOnes();
  return s;
}

double percentile_threshold(const Eigen::MatrixXd& s, double p) {
  if (!(p > 0.0 && p <= 100.0)) {
    throw std::invalid_argument("percentile_threshold: p must be in (0, 100], got " + std::to_string(p));
  }
  const Eigen::Index n = s.rows();
  if (n < 2 || s.cols() != n) {
    throw std::invalid_argument("percentile_threshold: need a square matrix with N >= 2");
  }
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) upper.push_back(s(i, j));
  }
  const auto m = static_cast<long long>(upper.size());
  // Nearest-rank: 1-based rank ceil(p * m / 100); the epsilon guards exact
  // integer products against upward rounding.
  long long rank = static_cast<long long>(std::ceil(p * static_cast<double>(m) / 100.0 - 1e-9));
  rank = std::clamp(rank, 1LL, m);
  std::nth_element(upper.begin(), upper.begin() + (rank - 1), upper.end());
  return upper[static_cast<std::size_t>(rank - 1)];
}

Eigen::MatrixXd adjacency(const Eigen::MatrixXd& s, double theta) {
  const Eigen::Index n = s.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && s(i, j) > theta) a(i, j) = 1.0;
    }
  }
  return a;
}

Eigen::MatrixXd soft_weights(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) {
  if (s.rows() != a.rows() || s.cols() != a.cols()) {
    throw std::invalid_argument("soft_weights: shape mismatch");
  }
  return s.cwiseMax(0.0).cwiseProduct(a);
}

Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n) throw std::invalid_argument("normalized_laplacian: matrix must be square");
  if ((m.array() < 0.0).any()) {
    throw std::invalid_argument("normalized_laplacian: negative weights");
  }
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = m.row(i).sum();
    inv_sqrt(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;  // zero-degree rows become identity rows
  }
  Eigen::MatrixXd lap = -(inv_sqrt.asDiagonal() * m * inv_sqrt.asDiagonal());
  lap.diagonal().array() += 1.0;
  return lap;
}

double spectral_match_loss(const Eigen::MatrixXd& l1, const Eigen::MatrixXd& l2) {
  if (l1.rows() != l2.rows() || l1.cols() != l2.cols()) {
    throw std::invalid_argument("spectral_match_loss: shape mismatch");
  }
  return (l1 - l2).squaredNorm();
}

double info_nce(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("info_nce: tau must be > 0");
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw std::invalid_argument("info_nce: view shape mismatch");
  }
  const Eigen::Index n = z1.rows();
  if (n < 1) throw std::invalid_argument("info_nce: empty batch");

  Eigen::MatrixXd zcat(2 * n, z1.cols());
  zcat.topRows(n) = z1;
  zcat.bottomRows(n) = z2;
  const Eigen::MatrixXd s = zcat * zcat.transpose();

  double total = 0.0;
  for (Eigen::Index r = 0; r < 2 * n; ++r) {
    const Eigen::Index p = r < n ? r + n : r - n;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < 2 * n; ++c) {
      if (c != r) mx = std::max(mx, s(r, c) / tau);
    }
    double denom = 0.0;
    for (Eigen::Index c = 0; c < 2 * n; ++c) {
      if (c != r) denom += std::exp(s(r, c) / tau - mx);
    }
    total += -s(r, p) / tau + mx + std::log(denom);
  }
  return total;
}

void ViewGraph::validate() const {
  const Eigen::Index n = s.rows();
  if (s.cols() != n || a.rows() != n || a.cols() != n || lap.rows() != n || lap.cols() != n ||
      degrees.size() != n) {
    throw std::invalid_argument("ViewGraph: inconsistent shapes");
  }
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("ViewGraph: similarity not symmetric");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(s(i, i) - 1.0) > 1e-12) throw std::invalid_argument("ViewGraph: similarity diagonal must be 1");
    if (a(i, i) != 0.0) throw std::invalid_argument("ViewGraph: adjacency diagonal must be 0");
    double deg = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) != 0.0 && a(i, j) != 1.0) throw std::invalid_argument("ViewGraph: adjacency must be 0/1");
      if (a(i, j) != a(j, i)) throw std::invalid_argument("ViewGraph: adjacency not symmetric");
      deg += a(i, j);
    }
    if (deg != degrees(i)) throw std::invalid_argument("ViewGraph: degree vector mismatch");
  }
}

ViewGraph build_view_graph(const Eigen::MatrixXd& z, const LossConfig& config) {
  config.validate();
  ViewGraph vg;
  vg.s = similarity_matrix(z);
  vg.theta = percentile_threshold(vg.s, config.percentile);
  vg.a = adjacency(vg.s, vg.theta);
  vg.degrees = vg.a.rowwise().sum();
  if (config.adjacency_mode == AdjacencyMode::Soft) {
    vg.w = soft_weights(vg.s, vg.a);
    vg.lap = normalized_laplacian(vg.w);
  } else {
    vg.lap = normalized_laplacian(vg.a);
  }
  return vg;
}

namespace {

using nlohmann::json;

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string view_graph_to_json(const ViewGraph& vg) {
  json j;
  j["S"] = matrix_rows(vg.s);
  j["theta"] = vg.theta;
  j["A"] = matrix_rows(vg.a);
  if (vg.w.size() > 0) j["W"] = matrix_rows(vg.w);
  json d = json::array();
  for (Eigen::Index i = 0; i < vg.degrees.size(); ++i) d.push_back(vg.degrees(i));
  j["D"] = std::move(d);
  j["L"] = matrix_rows(vg.lap);
  return j.dump(2);
}

void save_view_graph(const ViewGraph& vg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_view_graph: cannot open " + path);
  out << view_graph_to_json(vg) << '\n';
}

TotalLoss total_loss(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2,
                     const LossConfig& config) {
  config.validate();
  TotalLoss out;
  out.view1 = build_view_graph(z1, config);
  out.view2 = build_view_graph(z2, config);
  out.contrastive = info_nce(z1, z2, config.tau);
  out.spectral = spectral_match_loss(out.view1.lap, out.view2.lap);
  out.total = out.contrastive + config.beta * out.spectral;
  return out;
}

TapedLoss taped_total_loss(Tape& tape, NodeId z1_raw, NodeId z2_raw, const LossConfig& config) {
  config.validate();
  const NodeId z1 = tape.normalize_rows(z1_raw);
  const NodeId z2 = tape.normalize_rows(z2_raw);

  // Contrastive term over the pooled gram matrix.
  const NodeId zcat = tape.vstack({z1, z2});
  const NodeId gram_all = tape.gram(zcat);
  const NodeId lc = tape.info_nce_from_gram(gram_all, config.tau);

  // Spectral term: per-view thresholded similarity Laplacians. Thresholds and
  // masks come from current values and are constants for the gradient. The
  // identity parts of the two Laplacians cancel inside the Frobenius
  // difference, so the loss compares the scaled weight matrices directly.
  auto scaled_weights = [&](NodeId z) {
    const NodeId s = tape.gram(z);
    const Eigen::MatrixXd s_val = similarity_matrix(tape.value(z));
    const double theta = percentile_threshold(s_val, config.percentile);
    const Eigen::MatrixXd mask = adjacency(s_val, theta);
    if (config.adjacency_mode == AdjacencyMode::Binary) {
      // Binary adjacency is piecewise constant: no gradient path at all.
      const Eigen::MatrixXd lap = normalized_laplacian(mask);
      Eigen::MatrixXd scaled = Eigen::MatrixXd::Identity(lap.rows(), lap.cols()) - lap;
      return tape.constant(scaled);
    }
    const NodeId w = tape.masked_clamp(s, mask);
    const NodeId deg = tape.row_sums(w);
    const NodeId inv_sqrt = tape.rsqrt_or_zero(deg);
    return tape.sym_scale(w, inv_sqrt);
  };
  const NodeId m1 = scaled_weights(z1);
  const NodeId m2 = scaled_weights(z2);
  const NodeId lg = tape.fro_sq_diff(m1, m2);

  TapedLoss out;
  out.contrastive = lc;
  out.spectral = lg;
  out.total = tape.axpy(config.beta, lg, lc);
  return out;
}

}  // namespace specmatch
