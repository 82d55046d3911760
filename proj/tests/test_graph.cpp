#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "specmatch/graph.hpp"

using namespace specmatch;

namespace {

Graph path3() {
  Graph g;
  g.n_nodes = 3;
  g.edges = {{0, 1}, {1, 2}};
  g.features = Eigen::MatrixXd::Identity(3, 3);
  g.label = 0;
  return g;
}

} // namespace

TEST_SUITE("graph") {

TEST_CASE("validate accepts a well-formed graph") {
  CHECK_NOTHROW(path3().validate());
}

TEST_CASE("validate rejects malformed graphs") {
  SUBCASE("zero nodes") {
    Graph g;
    g.n_nodes = 0;
    g.features = Eigen::MatrixXd(0, 2);
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("n_nodes"), std::invalid_argument);
  }
  SUBCASE("edge endpoint out of range") {
    Graph g = path3();
    g.edges = {{0, 1}, {2, 5}};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  }
  SUBCASE("self loop") {
    Graph g = path3();
    g.edges = {{0, 1}, {2, 2}};
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("self loop"), std::invalid_argument);
  }
  SUBCASE("reversed orientation") {
    Graph g = path3();
    g.edges = {{1, 0}, {1, 2}};
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("u < v"), std::invalid_argument);
  }
  SUBCASE("unsorted edge list") {
    Graph g = path3();
    g.edges = {{1, 2}, {0, 1}};
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("sorted"), std::invalid_argument);
  }
  SUBCASE("duplicate edge") {
    Graph g = path3();
    g.edges = {{0, 1}, {0, 1}, {1, 2}};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  }
  SUBCASE("feature row count mismatch") {
    Graph g = path3();
    g.features = Eigen::MatrixXd::Zero(2, 3);
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("feature rows"), std::invalid_argument);
  }
  SUBCASE("non-finite feature") {
    Graph g = path3();
    g.features(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("non-finite"), std::invalid_argument);
  }
}

TEST_CASE("canonicalize_edges orients, sorts, and dedupes") {
  std::vector<std::pair<int, int>> edges = {{2, 1}, {0, 1}, {1, 2}, {0, 1}};
  canonicalize_edges(edges);
  REQUIRE(edges.size() == 2);
  CHECK(edges[0] == std::pair<int, int>{0, 1});
  CHECK(edges[1] == std::pair<int, int>{1, 2});
}

TEST_CASE("adjacency views agree with the edge list") {
  Graph g = path3();
  const Eigen::MatrixXd a = g.adjacency_matrix();
  CHECK(a.rows() == 3);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(a(0, 1) == 1.0);
  CHECK(a(1, 2) == 1.0);
  CHECK(a(0, 2) == 0.0);
  CHECK(a.sum() == doctest::Approx(4.0));

  const auto adj = g.adjacency_list();
  REQUIRE(adj.size() == 3);
  CHECK(adj[0] == std::vector<int>{1});
  CHECK(adj[1] == std::vector<int>{0, 2});
  CHECK(adj[2] == std::vector<int>{1});

  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK_FALSE(g.has_edge(0, 2));
  CHECK(g.n_edges() == 2);
}

TEST_CASE("generate_sbm produces a balanced two-class corpus in the node range") {
  SbmParams params; // 200 graphs, 20-30 nodes, 2 classes, dim 8
  Dataset ds = generate_sbm(params, 1);
  CHECK(ds.graphs.size() == 200);
  CHECK(ds.seed == 1);
  CHECK(ds.feature_dim() == 8);
  CHECK_NOTHROW(ds.validate());

  std::map<int, int> class_counts;
  for (const auto& g : ds.graphs) {
    REQUIRE(g.label.has_value());
    ++class_counts[*g.label];
    CHECK(g.n_nodes >= 20);
    CHECK(g.n_nodes <= 30);
    CHECK(g.features.cols() == 8);
    CHECK(g.features.cwiseAbs().maxCoeff() <= 3.0);
  }
  REQUIRE(class_counts.size() == 2);
  CHECK(class_counts[0] == 100);
  CHECK(class_counts[1] == 100);
}

TEST_CASE("generate_sbm respects edge probabilities at the extremes") {
  SbmParams params;
  params.n_graphs = 4;
  params.min_nodes = 6;
  params.max_nodes = 8;
  params.p_in = 1.0;
  params.p_out = 0.0;
  params.n_classes = 1;
  Dataset ds = generate_sbm(params, 5);
  for (const auto& g : ds.graphs) {
    // One block with p_in = 1 means a complete graph.
    CHECK(g.n_edges() == static_cast<size_t>(g.n_nodes * (g.n_nodes - 1) / 2));
  }
}

TEST_CASE("generate_sbm is deterministic in the seed") {
  SbmParams params;
  params.n_graphs = 12;
  params.min_nodes = 8;
  params.max_nodes = 12;
  const Dataset a = generate_sbm(params, 7);
  const Dataset b = generate_sbm(params, 7);
  CHECK(dataset_to_json(a) == dataset_to_json(b));
  const Dataset c = generate_sbm(params, 8);
  CHECK(dataset_to_json(a) != dataset_to_json(c));
}

TEST_CASE("generate_sbm rejects bad probabilities") {
  SbmParams params;
  params.p_in = 0.1;
  params.p_out = 0.5;
  CHECK_THROWS_WITH_AS(generate_sbm(params, 1), doctest::Contains("p_out < p_in"),
                       std::invalid_argument);
}

TEST_CASE("dataset validate rejects empty and inconsistent collections") {
  Dataset ds;
  ds.name = "empty";
  CHECK_THROWS_WITH_AS(ds.validate(), doctest::Contains("no graphs"), std::invalid_argument);

  ds.graphs.push_back(path3());
  Graph other = path3();
  other.features = Eigen::MatrixXd::Zero(3, 5); // different feature dim
  ds.graphs.push_back(other);
  CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
}

TEST_CASE("dataset json round trip is exact") {
  SbmParams params;
  params.n_graphs = 10;
  params.min_nodes = 6;
  params.max_nodes = 9;
  Dataset ds = generate_sbm(params, 3);
  ds.name = "roundtrip";

  const Dataset back = dataset_from_json(dataset_to_json(ds));
  CHECK(back.name == ds.name);
  CHECK(back.seed == ds.seed);
  REQUIRE(back.graphs.size() == ds.graphs.size());
  for (size_t i = 0; i < ds.graphs.size(); ++i) {
    const Graph& g = ds.graphs[i];
    const Graph& h = back.graphs[i];
    CHECK(h.n_nodes == g.n_nodes);
    CHECK(h.edges == g.edges);
    CHECK(h.label == g.label);
    REQUIRE(h.features.rows() == g.features.rows());
    REQUIRE(h.features.cols() == g.features.cols());
    // Bit-exact feature recovery.
    CHECK((h.features.array() == g.features.array()).all());
  }
}

TEST_CASE("dataset file round trip preserves content and missing labels") {
  Dataset ds;
  ds.name = "filecheck";
  ds.seed = 9;
  Graph g = path3();
  g.label.reset();
  g.features(0, 0) = 0.1234567890123456789; // not exactly representable
  ds.graphs = {g};

  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "specmatch_test_dataset.json";
  save_dataset(ds, path.string());
  const Dataset back = load_dataset(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.graphs.size() == 1);
  CHECK_FALSE(back.graphs[0].label.has_value());
  CHECK(back.graphs[0].features(0, 0) == g.features(0, 0));
}

TEST_CASE("loading malformed input fails loudly") {
  CHECK_THROWS(dataset_from_json("this is not json"));
  CHECK_THROWS(dataset_from_json("{\"name\": \"x\"}"));
  // Structurally valid JSON but an invalid graph: edge endpoint out of range.
  Dataset ds;
  ds.name = "bad";
  ds.seed = 1;
  Graph g = path3();
  ds.graphs = {g};
  std::string text = dataset_to_json(ds);
  // Corrupt the edge list: (5,2) on a 3-node graph, kept oriented after canonicalization.
  const size_t pos = text.find("[[0,1]");
  if (pos != std::string::npos) {
    text.replace(pos, 6, "[[2,5]");
    CHECK_THROWS(dataset_from_json(text));
  } else {
    Graph bad = path3();
    bad.edges = {{2, 5}};
    Dataset ds_bad;
    ds_bad.name = "bad";
    ds_bad.graphs = {bad};
    CHECK_THROWS(ds_bad.validate());
  }
  CHECK_THROWS(load_dataset("/nonexistent/path/dataset.json"));
}

} // TEST_SUITE
