#include "specmatch/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace specmatch {

const char* augment_op_name(AugmentOp op) {
  switch (op) {
    case AugmentOp::NodeDrop: return "node_drop";
    case AugmentOp::EdgePerturb: return "edge_perturb";
    case AugmentOp::AttrMask: return "attr_mask";
    case AugmentOp::SubgraphSample: return "subgraph_sample";
  }
  throw std::invalid_argument("augment_op_name: unknown operator");
}

AugmentOp augment_op_from_name(const std::string& name) {
  if (name == "node_drop") return AugmentOp::NodeDrop;
  if (name == "edge_perturb") return AugmentOp::EdgePerturb;
  if (name == "attr_mask") return AugmentOp::AttrMask;
  if (name == "subgraph_sample") return AugmentOp::SubgraphSample;
  throw std::invalid_argument("augment_op_from_name: unknown operator '" + name + "'");
}

void AugmentPolicy::validate() const {
  if (operators.empty()) throw std::invalid_argument("AugmentPolicy: empty operator set");
  if (!(strength >= 0.0 && strength < 1.0)) {
    throw std::invalid_argument("AugmentPolicy: strength must be in [0, 1), got " + std::to_string(strength));
  }
  std::set<AugmentOp> seen(operators.begin(), operators.end());
  if (seen.size() != operators.size()) throw std::invalid_argument("AugmentPolicy: duplicate operator");
}

AugmentPolicy preset_policy(const std::string& name, double strength) {
  AugmentPolicy policy;
  policy.strength = strength;
  if (name == "biochem") {
    policy.operators = {AugmentOp::NodeDrop, AugmentOp::SubgraphSample};
  } else if (name == "social-dense") {
    policy.operators = {AugmentOp::NodeDrop, AugmentOp::EdgePerturb, AugmentOp::AttrMask,
                        AugmentOp::SubgraphSample};
  } else if (name == "social-sparse") {
    policy.operators = {AugmentOp::NodeDrop, AugmentOp::EdgePerturb, AugmentOp::SubgraphSample};
  } else {
    throw std::invalid_argument("preset_policy: unknown preset '" + name + "'");
  }
  policy.validate();
  return policy;
}

namespace {

void check_strength(const char* op, double strength) {
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw std::invalid_argument(std::string(op) + ": strength must be in [0, 1], got " +
                                std::to_string(strength));
  }
}

// Sample k distinct indices from [0, n) via partial Fisher-Yates; returned sorted.
std::vector<int> sample_distinct(int n, int k, Rng& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = static_cast<int>(rng.uniform_int(i, n - 1));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  std::vector<int> chosen(pool.begin(), pool.begin() + k);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Induced subgraph on `keep` (sorted original indices), reindexed in order.
Graph induced_subgraph(const Graph& g, const std::vector<int>& keep) {
  std::vector<int> remap(static_cast<std::size_t>(g.n_nodes), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) remap[static_cast<std::size_t>(keep[i])] = static_cast<int>(i);

  Graph out;
  out.n_nodes = static_cast<int>(keep.size());
  out.label = g.label;
  out.features = Eigen::MatrixXd(out.n_nodes, g.features.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = g.features.row(keep[i]);
  }
  for (const auto& [u, v] : g.edges) {
    const int nu = remap[static_cast<std::size_t>(u)];
    const int nv = remap[static_cast<std::size_t>(v)];
    if (nu >= 0 && nv >= 0) out.edges.emplace_back(std::min(nu, nv), std::max(nu, nv));
  }
  canonicalize_edges(out.edges);
  return out;
}

}  // namespace

Graph node_drop(const Graph& g, double strength, Rng& rng) {
  check_strength("node_drop", strength);
  g.validate();
  const int k = std::min(static_cast<int>(std::floor(strength * g.n_nodes)), g.n_nodes - 1);
  if (k <= 0) return g;
  const std::vector<int> dropped = sample_distinct(g.n_nodes, k, rng);
  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(g.n_nodes - k));
  std::size_t d = 0;
  for (int i = 0; i < g.n_nodes; ++i) {
    if (d < dropped.size() && dropped[d] == i) {
      ++d;
    } else {
      keep.push_back(i);
    }
  }
  return induced_subgraph(g, keep);
}

Graph edge_perturb(const Graph& g, double strength, Rng& rng) {
  check_strength("edge_perturb", strength);
  g.validate();
  const int k = static_cast<int>(std::floor(strength * static_cast<double>(g.edges.size())));
  Graph out = g;
  if (k <= 0) return out;

  std::set<std::pair<int, int>> edge_set(out.edges.begin(), out.edges.end());
  const long long all_pairs = static_cast<long long>(out.n_nodes) * (out.n_nodes - 1) / 2;

  for (int op = 0; op < k; ++op) {
    const bool has_absent = static_cast<long long>(edge_set.size()) < all_pairs;
    const bool has_edges = !edge_set.empty();
    if (!has_absent && !has_edges) break;

    bool do_add = rng.bernoulli(0.5);
    if (do_add && !has_absent) do_add = false;    // complete graph: fall back to deletion
    if (!do_add && !has_edges) do_add = true;     // empty graph: fall back to addition

    if (do_add) {
      // Uniform absent non-self-loop pair by enumeration rank.
      const long long absent = all_pairs - static_cast<long long>(edge_set.size());
      long long rank = rng.uniform_int(0, absent - 1);
      std::pair<int, int> pick{-1, -1};
      for (int u = 0; u < out.n_nodes && pick.first < 0; ++u) {
        for (int v = u + 1; v < out.n_nodes; ++v) {
          if (edge_set.count({u, v})) continue;
          if (rank == 0) {
            pick = {u, v};
            break;
          }
          --rank;
        }
      }
      edge_set.insert(pick);
    } else {
      const long long idx = rng.uniform_int(0, static_cast<long long>(edge_set.size()) - 1);
      auto it = edge_set.begin();
      std::advance(it, idx);
      edge_set.erase(it);
    }
  }

  out.edges.assign(edge_set.begin(), edge_set.end());
  return out;
}

Graph attr_mask(const Graph& g, double strength, Rng& rng) {
  check_strength("attr_mask", strength);
  g.validate();
  const int k = static_cast<int>(std::floor(strength * g.n_nodes));
  Graph out = g;
  if (k <= 0) return out;
  for (int i : sample_distinct(g.n_nodes, std::min(k, g.n_nodes), rng)) {
    out.features.row(i).setZero();
  }
  return out;
}

Graph subgraph_sample(const Graph& g, double strength, Rng& rng) {
  check_strength("subgraph_sample", strength);
  g.validate();
  const int target = static_cast<int>(std::ceil((1.0 - strength) * g.n_nodes));
  const auto adj = g.adjacency_list();

  int current = static_cast<int>(rng.uniform_int(0, g.n_nodes - 1));
  std::set<int> collected{current};
  const int stall_limit = 10 * g.n_nodes;
  int stalled = 0;  // consecutive steps without a new node

  while (static_cast<int>(collected.size()) < target && stalled < stall_limit) {
    const auto& nbrs = adj[static_cast<std::size_t>(current)];
    if (nbrs.empty()) break;  // walk can never leave; same outcome as stalling out
    current = nbrs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(nbrs.size()) - 1))];
    if (collected.insert(current).second) {
      stalled = 0;
    } else {
      ++stalled;
    }
  }

  const std::vector<int> keep(collected.begin(), collected.end());
  return induced_subgraph(g, keep);
}

Graph apply_augment(AugmentOp op, const Graph& g, double strength, Rng& rng) {
  switch (op) {
    case AugmentOp::NodeDrop: return node_drop(g, strength, rng);
    case AugmentOp::EdgePerturb: return edge_perturb(g, strength, rng);
    case AugmentOp::AttrMask: return attr_mask(g, strength, rng);
    case AugmentOp::SubgraphSample: return subgraph_sample(g, strength, rng);
  }
  throw std::invalid_argument("apply_augment: unknown operator");
}

Graph sample_view(const Graph& g, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  const auto idx = rng.uniform_int(0, static_cast<long long>(policy.operators.size()) - 1);
  return apply_augment(policy.operators[static_cast<std::size_t>(idx)], g, policy.strength, rng);
}

std::pair<Graph, Graph> sample_views(const Graph& g, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  // Independent child streams so each view's draw is self-contained.
  Rng rng1(rng.next_u64());
  Rng rng2(rng.next_u64());
  Graph v1 = sample_view(g, policy, rng1);
  Graph v2 = sample_view(g, policy, rng2);
  return {std::move(v1), std::move(v2)};
}

}  // namespace specmatch
