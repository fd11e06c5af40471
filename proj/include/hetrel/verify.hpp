#pragma once

// Randomized checks of the equivalences the relevance measures rest on.
//   1: the identity-configured GNN inner product equals the pair-wise walk score
//   2: splitting every edge with an intermediate node and doubling the depth
//      leaves relevance between original nodes unchanged
//   3: sum-extractor relation messages on one-hot embeddings are distinct

#include <cstdint>
#include <optional>
#include <string>

#include "hetrel/graph.hpp"

namespace hetrel {

inline constexpr double kVerifyTolerance = 1e-10;
inline constexpr std::size_t kVerifyMaxNodes = 12;

struct VerifyOptions {
  int trials = 50;
  std::size_t max_nodes = kVerifyMaxNodes;  // 1 and 2; theorem 3 uses it as the node count
  std::uint64_t seed = 0;
  int max_walk = 3;  // k in 1..max_walk
};

struct VerifyReport {
  int theorem = 0;
  int checks = 0;
  double max_deviation = 0.0;
  bool passed = true;
  std::optional<HeteroGraph> failing_graph;
  std::string detail;
};

// Max |gnn_identity_relevance(g, i, j, k) - prw_brute(g, i, j, 2k)| over all pairs.
double theorem1_deviation(const HeteroGraph& g, int k);
// Max relevance gap between g at depth k and its augmentation at depth 2k.
double theorem2_deviation(const HeteroGraph& g, int k);

VerifyReport verify_theorem(int theorem, const VerifyOptions& options);

}  // namespace hetrel
