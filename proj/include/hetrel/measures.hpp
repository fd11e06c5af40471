#pragma once

// Classic relevance measures and the brute-force oracles used to check the
// learned measure: uniform random-walk visit distributions, pair-wise random
// walk (PRW), the one-hot/identity GNN whose inner products reproduce PRW,
// HeteSim and SimRank.

#include <Eigen/Dense>
#include <cstddef>

#include "hetrel/graph.hpp"
#include "hetrel/relevance.hpp"

namespace hetrel {

// Walk enumeration refuses to materialize more walks than this.
inline constexpr std::size_t kMaxEnumeratedWalks = 1'000'000;
// prw_brute enumerates walks up to this many nodes and falls back to
// distribution inner products above it.
inline constexpr std::size_t kBruteForceNodeLimit = 15;

struct VisitDistribution {
  NodeIndex source = 0;
  int length = 0;
  Eigen::VectorXd probabilities;  // indexed by NodeIndex

  double total() const { return probabilities.sum(); }
};

// Exact k-step uniform random-walk distribution. Mass reaching a node with no
// out-edges is dropped, so totals can fall below 1.
VisitDistribution rw_visit_prob(const HeteroGraph& g, NodeIndex v, int k);

// Row-stochastic transition matrix D^-1 A over all relations (zero rows for
// dangling nodes). Parallel edges count with multiplicity.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> transition_matrix(const HeteroGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> p =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto adj = g.out_edges(static_cast<NodeIndex>(i));
    if (adj.empty()) continue;
    const Scalar w = Scalar(1) / static_cast<Scalar>(adj.size());
    for (const auto& a : adj) p(i, a.node) += w;
  }
  return p;
}

// PRW by explicit walk enumeration: every k-step walk from vi is paired with
// every k-step walk from vj ending on the same node (k = two_k / 2).
// Throws DataError when more than kMaxEnumeratedWalks walks would be needed.
double prw_enumerate(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, int two_k);

// PRW as the inner product of the two k-step visit distributions.
double prw_distribution(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, int two_k);

// Enumeration for graphs with at most kBruteForceNodeLimit nodes, distribution
// inner product otherwise. two_k must be even and non-negative.
double prw_brute(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, int two_k);

// k-layer GNN with one-hot inputs, the random-walk Laplacian D^-1 A, identity
// weights and identity activation. Row i is node i's representation h_i^k.
Eigen::MatrixXd gnn_identity_embeddings(const HeteroGraph& g, int k);

// <h_i^k, h_j^k> of the identity-configured GNN.
double gnn_identity_relevance(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, int k);

// Meta-path constrained meeting probability. Each endpoint walks half of the
// path (the right half reversed), stepping uniformly over neighbors along the
// step's relation. Odd-length paths meet on the edges of the middle relation,
// equivalent to meeting at an intermediate node inserted on each edge.
// Normalized scores divide by the norms of the two meeting distributions, so
// a node scores 1 against itself on a symmetric path.
double hetesim(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, const MetaPath& p, bool normalized = true);

// All-pairs HeteSim between the nodes of the path's source and target types.
RelevanceMatrix hetesim_matrix(const HeteroGraph& g, const MetaPath& p, bool normalized = true);

// Type-blind SimRank over in-neighbors: s(a,a) = 1 and
// s(a,b) = decay / (|I(a)||I(b)|) * sum_{u in I(a), w in I(b)} s(u,w).
RelevanceMatrix simrank(const HeteroGraph& g, double decay = 0.8, int iterations = 10);

}  // namespace hetrel
