#include "delaynet/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <fmt/format.h>
#include <json.hpp>

#include "delaynet/errors.hpp"

namespace delaynet {

namespace {

using nlohmann::json;

bool finite_nonnegative(double v) { return std::isfinite(v) && v >= 0.0; }

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw InputError(fmt::format("missing field '{}' in {}", key, where));
  return obj.at(key);
}

double require_number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw InputError(fmt::format("field '{}' in {} must be a number", key, where));
  return v.get<double>();
}

long long require_integer(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) throw InputError(fmt::format("field '{}' in {} must be an integer", key, where));
  return v.get<long long>();
}

}  // namespace

EpidemicNetwork::EpidemicNetwork(std::size_t node_count, std::vector<Edge> edges, double beta,
                                 std::vector<double> delta, double tau, std::vector<double> sigma)
    : edges_(std::move(edges)), beta_(beta), delta_(std::move(delta)), tau_(tau), sigma_(std::move(sigma)) {
  if (node_count == 0) throw InputError("network needs at least one node");
  if (delta_.size() != node_count) throw InputError("delta must have one entry per node");
  if (sigma_.size() != node_count) throw InputError("sigma must have one entry per node");
  if (!(std::isfinite(beta_) && beta_ > 0.0)) throw InputError("beta must be finite and positive");
  if (!finite_nonnegative(tau_)) throw InputError("tau must be finite and nonnegative");
  for (std::size_t i = 0; i < node_count; ++i) {
    if (!(std::isfinite(delta_[i]) && delta_[i] > 0.0))
      throw InputError(fmt::format("delta of node {} must be finite and positive", i + 1));
    if (!finite_nonnegative(sigma_[i]))
      throw InputError(fmt::format("sigma of node {} must be finite and nonnegative", i + 1));
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (Edge& e : edges_) {
    if (e.i >= node_count || e.j >= node_count)
      throw InputError(fmt::format("edge ({}, {}) references a node outside 1..{}", e.i + 1, e.j + 1, node_count));
    if (e.i == e.j) throw InputError(fmt::format("self-loop at node {}", e.i + 1));
    if (e.i > e.j) std::swap(e.i, e.j);
    if (!finite_nonnegative(e.weight))
      throw InputError(fmt::format("edge ({}, {}) has a negative or non-finite weight", e.i + 1, e.j + 1));
    if (!seen.emplace(e.i, e.j).second)
      throw InputError(fmt::format("duplicate edge ({}, {})", e.i + 1, e.j + 1));
  }
}

std::vector<double> EpidemicNetwork::weights() const {
  std::vector<double> w;
  w.reserve(edges_.size());
  for (const Edge& e : edges_) w.push_back(e.weight);
  return w;
}

double EpidemicNetwork::total_weight() const {
  double s = 0.0;
  for (const Edge& e : edges_) s += e.weight;
  return s;
}

Matrix EpidemicNetwork::adjacency() const {
  Matrix a(node_count(), node_count());
  for (const Edge& e : edges_) {
    a(e.i, e.j) += e.weight;
    a(e.j, e.i) += e.weight;
  }
  return a;
}

EpidemicNetwork EpidemicNetwork::with_weights(std::span<const double> weights) const {
  if (weights.size() != edges_.size()) throw InputError("weight vector length does not match edge count");
  std::vector<Edge> edges = edges_;
  for (std::size_t k = 0; k < edges.size(); ++k) edges[k].weight = weights[k];
  return EpidemicNetwork(node_count(), std::move(edges), beta_, delta_, tau_, sigma_);
}

EpidemicNetwork EpidemicNetwork::with_tau(double tau) const {
  return EpidemicNetwork(node_count(), edges_, beta_, delta_, tau, sigma_);
}

EpidemicNetwork EpidemicNetwork::with_sigma(std::vector<double> sigma) const {
  return EpidemicNetwork(node_count(), edges_, beta_, delta_, tau_, std::move(sigma));
}

EpidemicNetwork load_network(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("network document is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw InputError("network document must be a JSON object");

  const double beta = require_number(doc, "beta", "network");
  const double tau = require_number(doc, "tau", "network");
  const json& nodes = require(doc, "nodes", "network");
  const json& edges = require(doc, "edges", "network");
  if (!nodes.is_array() || !edges.is_array()) throw InputError("'nodes' and 'edges' must be arrays");

  const std::size_t n = nodes.size();
  std::vector<double> delta(n), sigma(n);
  std::vector<bool> present(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::string where = fmt::format("nodes[{}]", k);
    const long long id = require_integer(nodes[k], "id", where);
    if (id < 1 || static_cast<std::size_t>(id) > n)
      throw InputError(fmt::format("node id {} outside 1..{}", id, n));
    if (present[id - 1]) throw InputError(fmt::format("duplicate node id {}", id));
    present[id - 1] = true;
    delta[id - 1] = require_number(nodes[k], "delta", where);
    sigma[id - 1] = require_number(nodes[k], "sigma", where);
  }

  std::vector<Edge> parsed;
  parsed.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const std::string where = fmt::format("edges[{}]", k);
    const long long i = require_integer(edges[k], "i", where);
    const long long j = require_integer(edges[k], "j", where);
    const double w = require_number(edges[k], "w", where);
    if (i < 1 || j < 1 || static_cast<std::size_t>(i) > n || static_cast<std::size_t>(j) > n)
      throw InputError(fmt::format("edge ({}, {}) references a node outside 1..{}", i, j, n));
    parsed.push_back(Edge{static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1), w});
  }
  return EpidemicNetwork(n, std::move(parsed), beta, std::move(delta), tau, std::move(sigma));
}

EpidemicNetwork load_network_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open network file '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_network(buf.str());
}

std::string network_to_json(const EpidemicNetwork& net) {
  json doc;
  doc["beta"] = net.beta();
  doc["tau"] = net.tau();
  json nodes = json::array();
  for (std::size_t i = 0; i < net.node_count(); ++i)
    nodes.push_back({{"id", i + 1}, {"delta", net.delta()[i]}, {"sigma", net.sigma()[i]}});
  json edges = json::array();
  for (const Edge& e : net.edges()) edges.push_back({{"i", e.i + 1}, {"j", e.j + 1}, {"w", e.weight}});
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  return doc.dump(2) + "\n";
}

void save_network_file(const EpidemicNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  out << network_to_json(net);
}

Matrix edge_indicator(std::size_t node_count, const Edge& e) {
  Matrix a(node_count, node_count);
  a(e.i, e.j) = 1.0;
  a(e.j, e.i) = 1.0;
  return a;
}

std::vector<Matrix> edge_basis(const EpidemicNetwork& net) {
  std::vector<Matrix> basis;
  basis.reserve(net.edge_count());
  for (const Edge& e : net.edges()) basis.push_back(edge_indicator(net.node_count(), e));
  return basis;
}

Matrix system_matrix_entries(const EpidemicNetwork& net) {
  const std::size_t n = net.node_count();
  Matrix m(n, n);
  for (const Edge& e : net.edges()) {
    m(e.i, e.j) = net.beta() * e.weight;
    m(e.j, e.i) = net.beta() * e.weight;
  }
  for (std::size_t i = 0; i < n; ++i) m(i, i) = -net.delta()[i];
  return m;
}

SystemMatrix assemble_system_matrix(const EpidemicNetwork& net) {
  return SystemMatrix::from_matrix(system_matrix_entries(net));
}

EpidemicNetwork build_three_star_fixture(const ThreeStarSpec& spec) {
  std::size_t n = 3;
  for (std::size_t c : spec.leaf_counts) n += c;
  std::set<std::size_t> hubs;
  for (std::size_t h : spec.hub_ids) {
    if (h < 1 || h > n) throw InputError(fmt::format("hub id {} outside 1..{}", h, n));
    hubs.insert(h - 1);
  }
  if (hubs.size() != 3) throw InputError("hub ids must be distinct");

  std::vector<std::size_t> leaves;
  for (std::size_t v = 0; v < n; ++v)
    if (!hubs.contains(v)) leaves.push_back(v);

  std::vector<Edge> edges;
  const auto h = [&](int k) { return spec.hub_ids[k] - 1; };
  edges.push_back(Edge{h(0), h(1), spec.hub_weight});
  edges.push_back(Edge{h(1), h(2), spec.hub_weight});
  std::size_t next = 0;
  for (int k = 0; k < 3; ++k)
    for (std::size_t c = 0; c < spec.leaf_counts[k]; ++c) edges.push_back(Edge{h(k), leaves[next++], spec.leaf_weight});

  return EpidemicNetwork(n, std::move(edges), spec.beta, std::vector<double>(n, spec.delta), spec.tau,
                         std::vector<double>(n, spec.sigma));
}

}  // namespace delaynet
