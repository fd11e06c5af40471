#pragma once

// Generated graphs for verification runs and end-to-end experiments.

#include <cstdint>
#include <random>

#include "hetrel/graph.hpp"

namespace hetrel {

// Undirected two-type graph (types A, B; relations aa, ab, bb) on `num_nodes`
// nodes where each unordered pair is joined with probability `edge_prob`.
HeteroGraph random_hetero_graph(std::size_t num_nodes, double edge_prob, std::mt19937_64& rng);

// Four node types around a hub type: authors -writes-> papers, papers -about->
// subjects, papers -published_in-> venues and papers -cites-> papers, stored
// undirected. The citations keep the graph from being bipartite. Every node
// belongs to one of two communities and is labeled with it. A pair of nodes
// whose types are related is joined with probability `intra` inside a
// community and `intra * inter_ratio` across communities.
struct PlantedToyOptions {
  std::size_t papers = 80;
  std::size_t authors = 60;
  std::size_t subjects = 30;
  std::size_t venues = 30;
  double intra_writes = 0.24;
  double intra_about = 0.30;
  double intra_published = 0.30;
  double intra_cites = 0.15;
  double inter_ratio = 0.04;
  std::uint64_t seed = 0;
};

HeteroGraph planted_toy(const PlantedToyOptions& options);

}  // namespace hetrel
