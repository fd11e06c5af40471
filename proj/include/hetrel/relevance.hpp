#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hetrel/graph.hpp"

namespace hetrel {

// Dense symmetric matrix of relevance scores over an ordered node subset.
struct RelevanceMatrix {
  std::vector<NodeIndex> nodes;
  Eigen::MatrixXd scores;

  std::size_t size() const { return nodes.size(); }
  // Position of `v` in `nodes`, or -1.
  Eigen::Index position(NodeIndex v) const;
};

}  // namespace hetrel
