#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace specmatch {

// Undirected attributed graph. Edges are canonical: u < v, sorted
// lexicographically, no duplicates, no self loops.
struct Graph {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  Eigen::MatrixXd features;  // n_nodes x feature_dim
  std::optional<int> label;

  int n_edges() const { return static_cast<int>(edges.size()); }

  // Throws std::invalid_argument on any structural violation.
  void validate() const;

  Eigen::MatrixXd adjacency_matrix() const;             // dense n x n, symmetric, zero diagonal
  std::vector<std::vector<int>> adjacency_list() const;  // sorted neighbor lists
  bool has_edge(int u, int v) const;
};

// Sorts, orients (u < v), and deduplicates an edge list in place.
void canonicalize_edges(std::vector<std::pair<int, int>>& edges);

struct Dataset {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<Graph> graphs;

  void validate() const;   // all graphs valid, nonempty, equal feature dims
  int feature_dim() const;
};

// Stochastic block model generator. Class identity controls block count
// (class c => c+1 blocks); node features are class-conditioned Gaussians
// centered on coordinate axes (sigma 0.5, clamped to [-3, 3]).
struct SbmParams {
  int n_graphs = 200;
  int min_nodes = 20;
  int max_nodes = 30;
  double p_in = 0.35;
  double p_out = 0.10;
  int n_classes = 2;
  int feature_dim = 8;
};

Dataset generate_sbm(const SbmParams& params, std::uint64_t seed);

// JSON round trip. Doubles survive bit-exactly (shortest round-trip encoding).
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const std::string& text);

}  // namespace specmatch
