#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "specmatch/encoder.hpp"
#include "specmatch/graph.hpp"
#include "specmatch/rng.hpp"
#include "specmatch/tape.hpp"

using namespace specmatch;

namespace {

Graph path3_distinct() {
  Graph g;
  g.n_nodes = 3;
  g.edges = {{0, 1}, {1, 2}};
  g.features = Eigen::MatrixXd::Zero(3, 4);
  g.features << 1.0, 0.2, -0.3, 0.5,
                -0.7, 0.9, 0.1, -0.2,
                0.4, -0.6, 0.8, 1.1;
  return g;
}

Graph triangle_distinct() {
  Graph g = path3_distinct();
  g.edges = {{0, 1}, {0, 2}, {1, 2}};
  return g;
}

// Relabel nodes by a permutation: node i becomes perm[i].
Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
  Graph out;
  out.n_nodes = g.n_nodes;
  out.label = g.label;
  out.features = Eigen::MatrixXd::Zero(g.features.rows(), g.features.cols());
  for (int i = 0; i < g.n_nodes; ++i) out.features.row(perm[static_cast<size_t>(i)]) = g.features.row(i);
  for (auto [u, v] : g.edges) out.edges.push_back({perm[static_cast<size_t>(u)], perm[static_cast<size_t>(v)]});
  canonicalize_edges(out.edges);
  return out;
}

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 4;
  cfg.out_dim = 3;
  return cfg;
}

} // namespace

TEST_SUITE("encoder") {

TEST_CASE("init_encoder produces the configured shapes with bounded weights") {
  EncoderConfig cfg;
  cfg.layers = 3;
  cfg.hidden = 32;
  cfg.out_dim = 16;
  const int in_dim = 8;
  EncoderParams params = init_encoder(cfg, in_dim, 42);

  REQUIRE(params.layers.size() == 3);
  CHECK(params.layers[0].w1.rows() == in_dim);
  CHECK(params.layers[0].w1.cols() == 32);
  CHECK(params.layers[1].w1.rows() == 32);
  CHECK(params.layers[2].w2.cols() == 32);
  for (const auto& layer : params.layers) {
    CHECK(layer.b1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(layer.b2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(layer.eps == 0.0);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(layer.w1.rows()));
    CHECK(layer.w1.cwiseAbs().maxCoeff() <= bound1);
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(layer.w2.rows()));
    CHECK(layer.w2.cwiseAbs().maxCoeff() <= bound2);
  }
  CHECK(params.proj_w1.rows() == 32);
  CHECK(params.proj_w2.cols() == 16);

  // Deterministic in the seed.
  EncoderParams again = init_encoder(cfg, in_dim, 42);
  CHECK((gather_params(params).array() == gather_params(again).array()).all());
  EncoderParams other = init_encoder(cfg, in_dim, 43);
  CHECK_FALSE((gather_params(params).array() == gather_params(other).array()).all());
}

TEST_CASE("param views cover every tensor exactly once") {
  EncoderParams params = init_encoder(tiny_config(), 4, 7);
  auto views = param_views(params);
  // Per layer: w1, b1, w2, b2, eps. Projection head: w1, b1, w2, b2.
  CHECK(views.size() == 2 * 5 + 4);
  std::set<std::string> names;
  std::size_t total = 0;
  for (const auto& v : views) {
    names.insert(v.name);
    total += static_cast<std::size_t>(v.rows * v.cols);
  }
  CHECK(names.size() == views.size());
  CHECK(static_cast<Eigen::Index>(total) == param_count(params));

  // gather -> perturb -> scatter -> gather round trip.
  Eigen::VectorXd flat = gather_params(params);
  flat(3) += 1.5;
  flat(flat.size() - 1) -= 2.5;
  EncoderParams modified = params;
  scatter_params(modified, flat);
  CHECK((gather_params(modified).array() == flat.array()).all());
}

TEST_CASE("encode is invariant to node relabeling") {
  Rng rng(11);
  EncoderParams params = init_encoder(tiny_config(), 4, 3);
  const Graph g = path3_distinct();
  const Eigen::MatrixXd base = encode(params, g);
  CHECK(base.rows() == 1);
  CHECK(base.cols() == 3);

  std::vector<int> perm = {2, 0, 1};
  const Graph permuted = permute_graph(g, perm);
  const Eigen::MatrixXd out = encode(params, permuted);
  CHECK((out - base).cwiseAbs().maxCoeff() < 1e-12);

  // All 6 permutations of 3 nodes give the same embedding.
  std::vector<int> p = {0, 1, 2};
  do {
    const Eigen::MatrixXd e = encode(params, permute_graph(g, p));
    CHECK((e - base).cwiseAbs().maxCoeff() < 1e-12);
  } while (std::next_permutation(p.begin(), p.end()));
}

TEST_CASE("encode distinguishes structures with distinct features") {
  EncoderParams params = init_encoder(tiny_config(), 4, 5);
  const Eigen::MatrixXd path_out = encode(params, path3_distinct());
  const Eigen::MatrixXd tri_out = encode(params, triangle_distinct());
  CHECK((path_out - tri_out).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("encode_batch stacks per-graph embeddings in order") {
  SbmParams sbm;
  sbm.n_graphs = 5;
  sbm.min_nodes = 6;
  sbm.max_nodes = 9;
  const Dataset ds = generate_sbm(sbm, 4);
  EncoderParams params = init_encoder(tiny_config(), ds.feature_dim(), 9);
  const Eigen::MatrixXd batch = encode_batch(params, ds.graphs);
  REQUIRE(batch.rows() == 5);
  for (int i = 0; i < 5; ++i) {
    const Eigen::MatrixXd single = encode(params, ds.graphs[static_cast<size_t>(i)]);
    CHECK((batch.row(i) - single.row(0)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("normalize_rows returns unit rows and rejects degenerate input") {
  Eigen::MatrixXd z(2, 3);
  z << 3.0, 4.0, 0.0,
       0.0, 0.0, 2.0;
  const Eigen::MatrixXd out = normalize_rows(z);
  CHECK(out.row(0).norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(out.row(1).norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(out(0, 0) == doctest::Approx(0.6).epsilon(1e-15));

  // Already-unit rows come back unchanged up to rounding.
  const Eigen::MatrixXd twice = normalize_rows(out);
  CHECK((twice - out).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd bad = z;
  bad.row(1).setZero();
  CHECK_THROWS_WITH_AS(normalize_rows(bad), doctest::Contains("degenerate"),
                       std::runtime_error);
}

TEST_CASE("taped forward matches the eager encoder") {
  SbmParams sbm;
  sbm.n_graphs = 3;
  sbm.min_nodes = 5;
  sbm.max_nodes = 8;
  const Dataset ds = generate_sbm(sbm, 6);
  EncoderParams params = init_encoder(tiny_config(), ds.feature_dim(), 13);

  Tape tape;
  TapedEncoder taped(tape, params);
  for (const auto& g : ds.graphs) {
    const NodeId out = taped.forward(g);
    const Eigen::MatrixXd eager = encode(params, g);
    CHECK((tape.value(out) - eager).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("taped encoder gradients match finite differences through the batch") {
  SbmParams sbm;
  sbm.n_graphs = 4;
  sbm.min_nodes = 4;
  sbm.max_nodes = 6;
  const Dataset ds = generate_sbm(sbm, 8);
  EncoderConfig cfg = tiny_config();
  EncoderParams params = init_encoder(cfg, ds.feature_dim(), 21);

  // Scalar head: squared Frobenius norm of the stacked embeddings.
  auto eval = [&](const EncoderParams& p) {
    return encode_batch(p, ds.graphs).squaredNorm();
  };

  Tape tape;
  TapedEncoder taped(tape, params);
  std::vector<NodeId> outs;
  for (const auto& g : ds.graphs) outs.push_back(taped.forward(g));
  const NodeId stacked = tape.vstack(outs);
  const NodeId loss = tape.fro_sq_diff(
      stacked, tape.constant(Eigen::MatrixXd::Zero(4, cfg.out_dim)));
  tape.backward(loss);
  const Eigen::VectorXd grad = taped.gradient();
  REQUIRE(grad.size() == static_cast<Eigen::Index>(param_count(params)));

  const Eigen::VectorXd flat = gather_params(params);
  Rng pick(31);
  const double h = 1e-5;
  for (int trial = 0; trial < 40; ++trial) {
    const int idx = pick.uniform_int(0, static_cast<int>(flat.size()) - 1);
    Eigen::VectorXd up = flat, down = flat;
    up(idx) += h;
    down(idx) -= h;
    EncoderParams pu = params, pd = params;
    scatter_params(pu, up);
    scatter_params(pd, down);
    const double fd = (eval(pu) - eval(pd)) / (2.0 * h);
    CHECK(std::abs(fd - grad(idx)) <= 1e-4 * (1.0 + std::abs(grad(idx))));
  }
}

TEST_CASE("checkpoints round trip bit-exactly") {
  EncoderConfig cfg = tiny_config();
  EncoderParams params = init_encoder(cfg, 5, 17);
  // Make the values less structured than the init draw.
  Eigen::VectorXd flat = gather_params(params);
  Rng rng(19);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = rng.normal() * 0.1234567890123;
  scatter_params(params, flat);

  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "specmatch_test_checkpoint.json";
  save_checkpoint(params, path.string());
  const EncoderParams loaded = load_checkpoint(path.string());
  std::filesystem::remove(path);

  REQUIRE(loaded.layers.size() == params.layers.size());
  CHECK(loaded.proj_w1.rows() == params.proj_w1.rows());
  CHECK((gather_params(loaded).array() == flat.array()).all());

  CHECK_THROWS(load_checkpoint("/nonexistent/checkpoint.json"));
}

} // TEST_SUITE
