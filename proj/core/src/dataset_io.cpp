#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "specmatch/graph.hpp"

namespace specmatch {

namespace {

using nlohmann::json;

// Byte offset -> 1-based line number, for parse diagnostics.
int line_of_offset(const std::string& text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

json graph_to_json(const Graph& g) {
  json jg;
  jg["n_nodes"] = g.n_nodes;
  json edges = json::array();
  for (const auto& [u, v] : g.edges) edges.push_back(json::array({u, v}));
  jg["edges"] = std::move(edges);
  json feats = json::array();
  for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < g.features.cols(); ++j) row.push_back(g.features(i, j));
    feats.push_back(std::move(row));
  }
  jg["features"] = std::move(feats);
  if (g.label.has_value()) {
    jg["label"] = *g.label;
  } else {
    jg["label"] = nullptr;
  }
  return jg;
}

Graph graph_from_json(const json& jg, std::size_t index) {
  const std::string where = "graph " + std::to_string(index);
  Graph g;
  if (!jg.contains("n_nodes") || !jg["n_nodes"].is_number_integer()) {
    throw std::invalid_argument("dataset: " + where + ": missing integer n_nodes");
  }
  g.n_nodes = jg["n_nodes"].get<int>();

  if (!jg.contains("edges") || !jg["edges"].is_array()) {
    throw std::invalid_argument("dataset: " + where + ": missing edges array");
  }
  for (const auto& je : jg["edges"]) {
    if (!je.is_array() || je.size() != 2) {
      throw std::invalid_argument("dataset: " + where + ": edge entries must be [u, v] pairs");
    }
    g.edges.emplace_back(je[0].get<int>(), je[1].get<int>());
  }

  if (!jg.contains("features") || !jg["features"].is_array()) {
    throw std::invalid_argument("dataset: " + where + ": missing features array");
  }
  const auto& feats = jg["features"];
  if (static_cast<int>(feats.size()) != g.n_nodes) {
    throw std::invalid_argument("dataset: " + where + ": feature rows (" +
                                std::to_string(feats.size()) + ") != n_nodes (" +
                                std::to_string(g.n_nodes) + ")");
  }
  const std::size_t dim = feats.empty() ? 0 : feats[0].size();
  g.features = Eigen::MatrixXd::Zero(g.n_nodes, static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (!feats[i].is_array() || feats[i].size() != dim) {
      throw std::invalid_argument("dataset: " + where + ": ragged feature row " + std::to_string(i));
    }
    for (std::size_t j = 0; j < dim; ++j) g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feats[i][j].get<double>();
  }

  if (jg.contains("label") && !jg["label"].is_null()) g.label = jg["label"].get<int>();

  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("dataset: " + where + ": " + e.what());
  }
  return g;
}

}  // namespace

std::string dataset_to_json(const Dataset& dataset) {
  json j;
  j["name"] = dataset.name;
  j["seed"] = dataset.seed;
  json graphs = json::array();
  for (const auto& g : dataset.graphs) graphs.push_back(graph_to_json(g));
  j["graphs"] = std::move(graphs);
  return j.dump(2);
}

Dataset dataset_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("dataset: parse error at line " +
                                std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }
  Dataset ds;
  ds.name = j.value("name", std::string{});
  ds.seed = j.value("seed", std::uint64_t{0});
  if (!j.contains("graphs") || !j["graphs"].is_array() || j["graphs"].empty()) {
    throw std::invalid_argument("dataset: missing or empty graphs array");
  }
  for (std::size_t i = 0; i < j["graphs"].size(); ++i) {
    ds.graphs.push_back(graph_from_json(j["graphs"][i], i));
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out << dataset_to_json(dataset) << '\n';
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_json(buf.str());
}

}  // namespace specmatch
