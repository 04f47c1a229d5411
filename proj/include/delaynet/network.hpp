#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "delaynet/linalg.hpp"
#include "delaynet/spectral.hpp"

namespace delaynet {

// Undirected edge between 0-based nodes i < j. Files use 1-based ids.
struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

// Weighted undirected meta-population graph with per-node recovery rates,
// a uniform infection rate, the delay, and per-node noise intensities.
// The constructor validates every invariant and throws InputError.
class EpidemicNetwork {
 public:
  EpidemicNetwork(std::size_t node_count, std::vector<Edge> edges, double beta, std::vector<double> delta,
                  double tau, std::vector<double> sigma);

  std::size_t node_count() const { return delta_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  double beta() const { return beta_; }
  std::span<const double> delta() const { return delta_; }
  double tau() const { return tau_; }
  std::span<const double> sigma() const { return sigma_; }

  std::vector<double> weights() const;
  double total_weight() const;
  // Weighted adjacency A with a_ij = a_ji = w_e.
  Matrix adjacency() const;

  // Same topology and rates with new edge weights (same order as edges()).
  EpidemicNetwork with_weights(std::span<const double> weights) const;
  EpidemicNetwork with_tau(double tau) const;
  EpidemicNetwork with_sigma(std::vector<double> sigma) const;

 private:
  std::vector<Edge> edges_;
  double beta_;
  std::vector<double> delta_;
  double tau_;
  std::vector<double> sigma_;
};

// Parses the network JSON document:
//   {"beta": b, "tau": t,
//    "nodes": [{"id": 1, "delta": d, "sigma": s}, ...],
//    "edges": [{"i": 1, "j": 2, "w": w}, ...]}
// Node ids are 1-based and must cover 1..n exactly once. Edges may be given
// in either orientation; they are stored with i < j.
EpidemicNetwork load_network(std::string_view document);
EpidemicNetwork load_network_file(const std::filesystem::path& path);

std::string network_to_json(const EpidemicNetwork& net);
void save_network_file(const EpidemicNetwork& net, const std::filesystem::path& path);

// A_e: ones at (i, j) and (j, i).
Matrix edge_indicator(std::size_t node_count, const Edge& e);
std::vector<Matrix> edge_basis(const EpidemicNetwork& net);

// beta * A - Delta as a plain matrix.
Matrix system_matrix_entries(const EpidemicNetwork& net);
SystemMatrix assemble_system_matrix(const EpidemicNetwork& net);

// Three star graphs whose hubs are joined in a line (hub 0 - hub 1 - hub 2).
// Leaves take the remaining ids in ascending order, first hub first.
struct ThreeStarSpec {
  std::array<std::size_t, 3> hub_ids{1, 2, 15};  // 1-based
  std::array<std::size_t, 3> leaf_counts{6, 7, 4};
  double hub_weight = 3.0;
  double leaf_weight = 1.0;
  double beta = 0.18;
  double delta = 1.0;
  double tau = 0.3;
  double sigma = 1.0;
};

EpidemicNetwork build_three_star_fixture(const ThreeStarSpec& spec = {});

}  // namespace delaynet
