#include "hetrel/measures.hpp"

#include <cmath>
#include <string>

#include "hetrel/error.hpp"
#include "hetrel/parallel.hpp"

namespace hetrel {

Eigen::Index RelevanceMatrix::position(NodeIndex v) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i] == v) return static_cast<Eigen::Index>(i);
  return -1;
}

namespace {

void check_node(const HeteroGraph& g, NodeIndex v) { g.node_id(v); }

void check_even_length(int two_k) {
  if (two_k < 0 || two_k % 2 != 0)
    throw DataError("pair-wise random walk length must be even and non-negative, got " + std::to_string(two_k));
}

struct WalkEnd {
  NodeIndex node;
  double probability;
};

// Enumerates every k-step walk from `start`; walks entering a dangling node
// before step k end there and are discarded.
std::vector<WalkEnd> enumerate_walks(const HeteroGraph& g, NodeIndex start, int k) {
  std::vector<WalkEnd> frontier{{start, 1.0}};
  for (int step = 0; step < k; ++step) {
    std::vector<WalkEnd> next;
    for (const auto& w : frontier) {
      const auto adj = g.out_edges(w.node);
      if (next.size() + adj.size() > kMaxEnumeratedWalks)
        throw DataError("walk enumeration exceeds " + std::to_string(kMaxEnumeratedWalks) + " walks");
      const double p = w.probability / static_cast<double>(adj.size());
      for (const auto& a : adj) next.push_back({a.node, p});
    }
    frontier = std::move(next);
  }
  return frontier;
}

// One uniform step along a meta-path step, from a distribution over nodes.
Eigen::VectorXd meta_step(const HeteroGraph& g, const Eigen::VectorXd& dist, const MetaPath::Step& s) {
  Eigen::VectorXd next = Eigen::VectorXd::Zero(dist.size());
  for (Eigen::Index u = 0; u < dist.size(); ++u) {
    if (dist[u] == 0.0) continue;
    const auto node = static_cast<NodeIndex>(u);
    const auto adj = s.reversed ? g.in_edges(node) : g.out_edges(node);
    std::size_t count = 0;
    for (const auto& a : adj) count += a.relation == s.relation;
    if (count == 0) continue;
    const double p = dist[u] / static_cast<double>(count);
    for (const auto& a : adj)
      if (a.relation == s.relation) next[a.node] += p;
  }
  return next;
}

Eigen::VectorXd walk_steps(const HeteroGraph& g, NodeIndex start, std::span<const MetaPath::Step> steps) {
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_nodes()));
  dist[start] = 1.0;
  for (const auto& s : steps) dist = meta_step(g, dist, s);
  return dist;
}

// Meeting vector of one half of a meta-path. The left half walks forward from
// vi; the right half walks the reversed tail from vj. For odd lengths the two
// halves meet on the edges of the middle step, one slot per stored edge.
enum class Half { Left, Right };

Eigen::VectorXd meeting_vector(const HeteroGraph& g, NodeIndex v, const MetaPath& p, Half side) {
  const auto k = p.length();
  const auto half = k / 2;
  std::span<const MetaPath::Step> steps(p.steps);
  Eigen::VectorXd dist;
  if (side == Half::Left) {
    dist = walk_steps(g, v, steps.first(half));
  } else {
    const auto tail = MetaPath{{}, {steps.begin() + static_cast<std::ptrdiff_t>(k - half), steps.end()}}.reversed();
    dist = walk_steps(g, v, tail.steps);
  }
  if (k % 2 == 0) return dist;

  const auto& middle = p.steps[half];
  const auto edges = g.edges();
  Eigen::VectorXd on_edges = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].relation != middle.relation) continue;
    // Walking forward along the middle step goes from `from` to `to`.
    const auto from = middle.reversed ? edges[e].dst : edges[e].src;
    const auto to = middle.reversed ? edges[e].src : edges[e].dst;
    if (side == Half::Left) {
      const auto count = middle.reversed ? g.in_degree(from, middle.relation) : g.out_degree(from, middle.relation);
      on_edges[static_cast<Eigen::Index>(e)] = dist[from] / static_cast<double>(count);
    } else {
      const auto count = middle.reversed ? g.out_degree(to, middle.relation) : g.in_degree(to, middle.relation);
      on_edges[static_cast<Eigen::Index>(e)] = dist[to] / static_cast<double>(count);
    }
  }
  return on_edges;
}

double meeting_score(const Eigen::VectorXd& left, const Eigen::VectorXd& right, bool normalized) {
  const double raw = left.dot(right);
  if (!normalized) return raw;
  const double norm = left.norm() * right.norm();
  return norm > 0.0 ? raw / norm : 0.0;
}

void check_endpoints(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, const MetaPath& p) {
  if (p.steps.empty() || p.node_types.size() != p.steps.size() + 1) throw DataError("malformed meta-path");
  if (g.node_type(vi) != p.node_types.front())
    throw DataError("node '" + g.node_id(vi) + "' has type " + g.type_name(g.node_type(vi)) +
                    " but the meta-path starts at " + g.type_name(p.node_types.front()));
  if (g.node_type(vj) != p.node_types.back())
    throw DataError("node '" + g.node_id(vj) + "' has type " + g.type_name(g.node_type(vj)) +
                    " but the meta-path ends at " + g.type_name(p.node_types.back()));
}

}  // namespace

VisitDistribution rw_visit_prob(const HeteroGraph& g, NodeIndex v, int k) {
  check_node(g, v);
  if (k < 0) throw DataError("walk length must be non-negative, got " + std::to_string(k));
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(n);
  dist[v] = 1.0;
  for (int step = 0; step < k; ++step) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(n);
    for (Eigen::Index u = 0; u < n; ++u) {
      if (dist[u] == 0.0) continue;
      const auto adj = g.out_edges(static_cast<NodeIndex>(u));
      if (adj.empty()) continue;
      const double p = dist[u] / static_cast<double>(adj.size());
      for (const auto& a : adj) next[a.node] += p;
    }
    dist = std::move(next);
  }
  return {v, k, std::move(dist)};
}

double prw_enumerate(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, int two_k) {
  check_even_length(two_k);
  check_node(g, vi);
  check_node(g, vj);
  const auto walks_i = enumerate_walks(g, vi, two_k / 2);
  const auto walks_j = enumerate_walks(g, vj, two_k / 2);
  double total = 0.0;
  for (const auto& a : walks_i)
    for (const auto& b : walks_j)
      if (a.node == b.node) total += a.probability * b.probability;
  return total;
}

double prw_distribution(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, int two_k) {
  check_even_length(two_k);
  const auto a = rw_visit_prob(g, vi, two_k / 2);
  const auto b = rw_visit_prob(g, vj, two_k / 2);
  return a.probabilities.dot(b.probabilities);
}

double prw_brute(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, int two_k) {
  if (g.num_nodes() <= kBruteForceNodeLimit) return prw_enumerate(g, vi, vj, two_k);
  return prw_distribution(g, vi, vj, two_k);
}

Eigen::MatrixXd gnn_identity_embeddings(const HeteroGraph& g, int k) {
  if (k < 1) throw DataError("the identity GNN needs at least one layer, got " + std::to_string(k));
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const Eigen::MatrixXd laplacian = transition_matrix(g);
  const Eigen::MatrixXd weight = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);  // one-hot Z
  for (int layer = 0; layer < k; ++layer) h = laplacian * h * weight;  // identity activation
  return h;
}

double gnn_identity_relevance(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, int k) {
  check_node(g, vi);
  check_node(g, vj);
  const auto h = gnn_identity_embeddings(g, k);
  return h.row(vi).dot(h.row(vj));
}

double hetesim(const HeteroGraph& g, NodeIndex vi, NodeIndex vj, const MetaPath& p, bool normalized) {
  check_endpoints(g, vi, vj, p);
  return meeting_score(meeting_vector(g, vi, p, Half::Left), meeting_vector(g, vj, p, Half::Right), normalized);
}

RelevanceMatrix hetesim_matrix(const HeteroGraph& g, const MetaPath& p, bool normalized) {
  if (p.steps.empty() || p.node_types.size() != p.steps.size() + 1) throw DataError("malformed meta-path");
  const auto source_type = p.node_types.front();
  const auto target_type = p.node_types.back();
  RelevanceMatrix m;
  const auto sources = g.nodes_of_type(source_type);
  m.nodes.assign(sources.begin(), sources.end());
  if (source_type != target_type) {
    const auto targets = g.nodes_of_type(target_type);
    m.nodes.insert(m.nodes.end(), targets.begin(), targets.end());
  }
  const auto n = m.nodes.size();
  m.scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  std::vector<Eigen::VectorXd> left(n), right(n);
  parallel_for(n, [&](std::size_t i) {
    const auto t = g.node_type(m.nodes[i]);
    if (t == source_type) left[i] = meeting_vector(g, m.nodes[i], p, Half::Left);
    if (t == target_type) right[i] = meeting_vector(g, m.nodes[i], p, Half::Right);
  });
  // Pairs the path does not connect directly are filled from the mirrored
  // pair, keeping the matrix symmetric when source and target types differ.
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      if (left[i].size() > 0 && right[j].size() > 0)
        s = meeting_score(left[i], right[j], normalized);
      else if (left[j].size() > 0 && right[i].size() > 0)
        s = meeting_score(left[j], right[i], normalized);
      m.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
    }
  });
  return m;
}

RelevanceMatrix simrank(const HeteroGraph& g, double decay, int iterations) {
  if (!(decay > 0.0 && decay < 1.0)) throw DataError("SimRank decay must lie in (0, 1)");
  if (iterations < 1) throw DataError("SimRank needs at least one iteration");
  const auto n = static_cast<Eigen::Index>(g.num_nodes());

  // Column a of `in` spreads 1/|I(a)| over a's in-neighbors.
  Eigen::MatrixXd in = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto adj = g.in_edges(static_cast<NodeIndex>(a));
    for (const auto& u : adj) in(u.node, a) += 1.0 / static_cast<double>(adj.size());
  }

  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < iterations; ++it) {
    s = decay * in.transpose() * s * in;
    s.diagonal().setOnes();
  }
  RelevanceMatrix m;
  m.nodes.resize(g.num_nodes());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) m.nodes[v] = static_cast<NodeIndex>(v);
  m.scores = (s + s.transpose()) / 2.0;
  return m;
}

}  // namespace hetrel
