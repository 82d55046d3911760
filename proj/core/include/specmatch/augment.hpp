#pragma once

#include <string>
#include <utility>
#include <vector>

#include "specmatch/graph.hpp"
#include "specmatch/rng.hpp"

namespace specmatch {

enum class AugmentOp { NodeDrop, EdgePerturb, AttrMask, SubgraphSample };

const char* augment_op_name(AugmentOp op);
AugmentOp augment_op_from_name(const std::string& name);

struct AugmentPolicy {
  std::vector<AugmentOp> operators;  // nonempty, unique, order fixed
  double strength = 0.2;             // [0, 1)

  void validate() const;
};

// Named operator sets: "biochem" (node drop + subgraph), "social-dense"
// (all four), "social-sparse" (all except attribute masking).
AugmentPolicy preset_policy(const std::string& name, double strength = 0.2);

// Removes floor(strength * n_nodes) uniformly chosen nodes (capped at
// n_nodes - 1), keeps the induced subgraph, reindexes preserving order.
Graph node_drop(const Graph& g, double strength, Rng& rng);

// Applies k = floor(strength * n_edges) sequential edge operations, each
// independently a deletion of a uniform existing edge or an addition of a
// uniform absent non-self-loop pair (50/50); an impossible choice falls back
// to the other operation.
Graph edge_perturb(const Graph& g, double strength, Rng& rng);

// Zeroes the feature rows of floor(strength * n_nodes) uniform nodes.
Graph attr_mask(const Graph& g, double strength, Rng& rng);

// Random walk from a uniform start, collecting distinct visited nodes until
// ceil((1 - strength) * n_nodes) are found or the walk makes 10 * n_nodes
// consecutive steps without discovering a new node; returns the induced
// subgraph, reindexed in ascending original order.
Graph subgraph_sample(const Graph& g, double strength, Rng& rng);

Graph apply_augment(AugmentOp op, const Graph& g, double strength, Rng& rng);

// One augmented view: picks an operator uniformly from the policy and
// applies it at the policy strength.
Graph sample_view(const Graph& g, const AugmentPolicy& policy, Rng& rng);

// Two independent augmented views (two sample_view draws on child streams).
std::pair<Graph, Graph> sample_views(const Graph& g, const AugmentPolicy& policy, Rng& rng);

}  // namespace specmatch
