#include "specmatch/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "specmatch/rng.hpp"

namespace specmatch {

void canonicalize_edges(std::vector<std::pair<int, int>>& edges) {
  for (auto& [u, v] : edges) {
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

void Graph::validate() const {
  if (n_nodes < 1) throw std::invalid_argument("Graph: n_nodes must be >= 1, got " + std::to_string(n_nodes));
  if (features.rows() != n_nodes) {
    throw std::invalid_argument("Graph: feature rows (" + std::to_string(features.rows()) +
                                ") != n_nodes (" + std::to_string(n_nodes) + ")");
  }
  if (!features.allFinite()) throw std::invalid_argument("Graph: non-finite feature value");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [u, v] = edges[i];
    if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes) {
      throw std::invalid_argument("Graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                                  ") out of range for n_nodes=" + std::to_string(n_nodes));
    }
    if (u == v) throw std::invalid_argument("Graph: self loop at node " + std::to_string(u));
    if (u > v) throw std::invalid_argument("Graph: edge not oriented u < v");
    if (i > 0 && !(edges[i - 1] < edges[i])) {
      throw std::invalid_argument("Graph: edges not sorted/unique");
    }
  }
}

Eigen::MatrixXd Graph::adjacency_matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
  for (const auto& [u, v] : edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

std::vector<std::vector<int>> Graph::adjacency_list() const {
  std::vector<std::vector<int>> adj(n_nodes);
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

bool Graph::has_edge(int u, int v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(u, v));
}

void Dataset::validate() const {
  if (graphs.empty()) throw std::invalid_argument("Dataset: no graphs");
  const Eigen::Index dim = graphs.front().features.cols();
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    try {
      graphs[i].validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("Dataset: graph " + std::to_string(i) + ": " + e.what());
    }
    if (graphs[i].features.cols() != dim) {
      throw std::invalid_argument("Dataset: graph " + std::to_string(i) +
                                  " feature dim mismatch: " + std::to_string(graphs[i].features.cols()) +
                                  " vs " + std::to_string(dim));
    }
  }
}

int Dataset::feature_dim() const {
  return graphs.empty() ? 0 : static_cast<int>(graphs.front().features.cols());
}

namespace {

constexpr double kFeatureSigma = 0.5;
constexpr double kFeatureClamp = 3.0;

Graph generate_sbm_graph(const SbmParams& p, int label, Rng& rng) {
  Graph g;
  g.n_nodes = static_cast<int>(rng.uniform_int(p.min_nodes, p.max_nodes));
  g.label = label;

  // Class identity controls the block count: class c has c + 1 blocks.
  const int n_blocks = label + 1;
  std::vector<int> block(g.n_nodes);
  for (int i = 0; i < g.n_nodes; ++i) block[i] = i % n_blocks;

  for (int u = 0; u < g.n_nodes; ++u) {
    for (int v = u + 1; v < g.n_nodes; ++v) {
      const double prob = block[u] == block[v] ? p.p_in : p.p_out;
      if (rng.bernoulli(prob)) g.edges.emplace_back(u, v);
    }
  }

  // Class-conditioned Gaussian features centered on a coordinate axis.
  g.features = Eigen::MatrixXd::Zero(g.n_nodes, p.feature_dim);
  const int axis = label % p.feature_dim;
  for (int i = 0; i < g.n_nodes; ++i) {
    for (int j = 0; j < p.feature_dim; ++j) {
      const double mean = j == axis ? 1.0 : 0.0;
      const double x = rng.normal(mean, kFeatureSigma);
      g.features(i, j) = std::clamp(x, -kFeatureClamp, kFeatureClamp);
    }
  }
  return g;
}

}  // namespace

Dataset generate_sbm(const SbmParams& params, std::uint64_t seed) {
  if (params.n_graphs < 1) throw std::invalid_argument("generate_sbm: n_graphs must be >= 1");
  if (params.min_nodes < 1 || params.max_nodes < params.min_nodes) {
    throw std::invalid_argument("generate_sbm: invalid node range [" + std::to_string(params.min_nodes) +
                                ", " + std::to_string(params.max_nodes) + "]");
  }
  if (!(params.p_out >= 0.0 && params.p_out < params.p_in && params.p_in <= 1.0)) {
    throw std::invalid_argument("generate_sbm: need 0 <= p_out < p_in <= 1");
  }
  if (params.n_classes < 1) throw std::invalid_argument("generate_sbm: n_classes must be >= 1");
  if (params.feature_dim < 1) throw std::invalid_argument("generate_sbm: feature_dim must be >= 1");

  Dataset ds;
  ds.name = "sbm";
  ds.seed = seed;
  ds.graphs.reserve(params.n_graphs);
  for (int i = 0; i < params.n_graphs; ++i) {
    // Balanced labels; independent stream per graph so edits stay local.
    const int label = i % params.n_classes;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i), 0xA6));
    ds.graphs.push_back(generate_sbm_graph(params, label, rng));
  }
  ds.validate();
  return ds;
}

}  // namespace specmatch
