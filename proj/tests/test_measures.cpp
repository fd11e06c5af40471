#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <map>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "hetrel/error.hpp"
#include "hetrel/measures.hpp"
#include "hetrel/synthetic.hpp"

using namespace hetrel;
using doctest::Approx;

namespace {

// Visit probabilities by listing every k-step walk and multiplying 1/out-degree.
std::map<NodeIndex, double> walk_listing(const HeteroGraph& g, NodeIndex v, int k) {
  std::map<NodeIndex, double> out;
  std::function<void(NodeIndex, int, double)> go = [&](NodeIndex at, int left, double p) {
    if (left == 0) {
      out[at] += p;
      return;
    }
    const auto adj = g.out_edges(at);
    for (const auto& a : adj) go(a.node, left - 1, p / static_cast<double>(adj.size()));
  };
  go(v, k, 1.0);
  return out;
}

// Meeting mass along one half of a meta-path: walk from `v` over `steps`,
// each step choosing uniformly among neighbors under that step's relation.
std::map<NodeIndex, double> half_walk(const HeteroGraph& g, NodeIndex v, const std::vector<MetaPath::Step>& steps) {
  std::map<NodeIndex, double> out;
  std::function<void(NodeIndex, std::size_t, double)> go = [&](NodeIndex at, std::size_t i, double p) {
    if (i == steps.size()) {
      out[at] += p;
      return;
    }
    std::vector<NodeIndex> next;
    const auto edges = steps[i].reversed ? g.in_edges(at) : g.out_edges(at);
    for (const auto& a : edges)
      if (a.relation == steps[i].relation) next.push_back(a.node);
    for (const auto n : next) go(n, i + 1, p / static_cast<double>(next.size()));
  };
  go(v, 0, 1.0);
  return out;
}

// HeteSim of an even-length path by enumerating both halves' instances.
double hetesim_instances(const HeteroGraph& g, NodeIndex a, NodeIndex b, const MetaPath& p, bool normalized) {
  const auto half = p.length() / 2;
  std::vector<MetaPath::Step> left(p.steps.begin(), p.steps.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<MetaPath::Step> right;
  for (auto i = p.length(); i > half; --i) right.push_back({p.steps[i - 1].relation, !p.steps[i - 1].reversed});
  const auto la = half_walk(g, a, left);
  const auto rb = half_walk(g, b, right);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [m, x] : la) {
    na += x * x;
    if (auto it = rb.find(m); it != rb.end()) dot += x * it->second;
  }
  for (const auto& [m, y] : rb) nb += y * y;
  if (!normalized) return dot;
  return na > 0 && nb > 0 ? dot / std::sqrt(na * nb) : 0.0;
}

}  // namespace

TEST_CASE("visit distributions") {
  const auto path = fixtures::path3();
  const auto b1 = rw_visit_prob(path, 1, 1);
  CHECK(b1.probabilities[0] == Approx(0.5));
  CHECK(b1.probabilities[2] == Approx(0.5));
  CHECK(b1.probabilities[1] == 0.0);

  const auto a2 = rw_visit_prob(path, 0, 2);
  CHECK(a2.probabilities[0] == Approx(0.5));
  CHECK(a2.probabilities[2] == Approx(0.5));

  const auto zero = rw_visit_prob(path, 2, 0);
  CHECK(zero.probabilities[2] == 1.0);
  CHECK(zero.total() == 1.0);
  CHECK_THROWS(rw_visit_prob(path, 0, -1));
  CHECK_THROWS_AS(rw_visit_prob(path, 7, 1), DataError);
}

TEST_CASE("visit distributions match walk listing") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    const auto g = random_hetero_graph(8, 0.35, rng);
    for (NodeIndex v = 0; v < static_cast<NodeIndex>(g.num_nodes()); ++v)
      for (int k = 0; k <= 4; ++k) {
        const auto d = rw_visit_prob(g, v, k);
        const auto listed = walk_listing(g, v, k);
        for (NodeIndex m = 0; m < static_cast<NodeIndex>(g.num_nodes()); ++m) {
          const auto it = listed.find(m);
          CHECK(d.probabilities[m] == Approx(it == listed.end() ? 0.0 : it->second).epsilon(1e-12));
        }
        bool dead_end = false;
        for (NodeIndex m = 0; m < static_cast<NodeIndex>(g.num_nodes()); ++m) dead_end |= g.out_degree(m) == 0;
        if (!dead_end) CHECK(d.total() == Approx(1.0).epsilon(1e-14));
      }
  }
}

TEST_CASE("pair-wise random walk examples") {
  const auto edge = fixtures::homogeneous(2, {{0, 1}});
  CHECK(prw_brute(edge, 0, 1, 2) == 0.0);
  const auto tri = fixtures::triangle();
  CHECK(prw_brute(tri, 0, 1, 2) == Approx(0.25).epsilon(1e-15));
  CHECK(prw_brute(tri, 2, 2, 0) == 1.0);
  CHECK_THROWS(prw_brute(tri, 0, 1, 3));
}

TEST_CASE("enumeration and distribution forms agree") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_hetero_graph(9, 0.4, rng);
    for (int two_k = 0; two_k <= 6; two_k += 2)
      for (NodeIndex i = 0; i < 9; ++i)
        for (NodeIndex j = i; j < 9; ++j)
          CHECK(std::abs(prw_enumerate(g, i, j, two_k) - prw_distribution(g, i, j, two_k)) <= 1e-12);
  }
}

TEST_CASE("identity GNN examples") {
  CHECK(gnn_identity_relevance(fixtures::triangle(), 0, 1, 1) == Approx(0.25).epsilon(1e-15));
  CHECK(gnn_identity_relevance(fixtures::homogeneous(2, {{0, 1}}), 0, 0, 1) == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("identity GNN inner products equal pair-wise walks") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size(2, 12);
  for (int trial = 0; trial < 25; ++trial) {
    const auto g = random_hetero_graph(static_cast<std::size_t>(size(rng)), 0.3, rng);
    const auto n = static_cast<NodeIndex>(g.num_nodes());
    for (int k = 1; k <= 3; ++k)
      for (NodeIndex i = 0; i < n; ++i)
        for (NodeIndex j = 0; j < n; ++j) {
          const double gnn = gnn_identity_relevance(g, i, j, k);
          CHECK(gnn >= 0.0);
          CHECK(std::abs(gnn - prw_brute(g, i, j, 2 * k)) <= 1e-10);
        }
  }
}

TEST_CASE("intermediate nodes leave relevance unchanged at double depth") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 15; ++trial) {
    const auto g = random_hetero_graph(8, 0.35, rng);
    const auto aug = augment_with_intermediates(g);
    for (int k = 1; k <= 3; ++k) {
      const auto h = gnn_identity_embeddings(g, k);
      const auto h2 = gnn_identity_embeddings(aug, 2 * k);
      for (NodeIndex i = 0; i < 8; ++i)
        for (NodeIndex j = 0; j < 8; ++j)
          CHECK(std::abs(h.row(i).dot(h.row(j)) - h2.row(i).dot(h2.row(j))) <= 1e-10);
    }
  }
}

TEST_CASE("HeteSim two-author example") {
  const auto g = fixtures::two_authors();
  const auto apa = parse_metapath(g, "A-writes-P-writes^-1-A");
  const auto a1 = g.node_index("a1"), a2 = g.node_index("a2");
  CHECK(hetesim(g, a1, a2, apa, false) == Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(hetesim(g, a1, a2, apa, true) - 0.5 / std::sqrt(0.5)) <= 1e-12);
  CHECK(std::abs(hetesim(g, a1, a2, apa, true) - 0.7071) <= 1e-4);
  CHECK(hetesim(g, a1, a1, apa, true) == Approx(1.0).epsilon(1e-15));
  CHECK(hetesim(g, a2, a2, apa, true) == Approx(1.0).epsilon(1e-15));
  CHECK(hetesim(g, a1, a1, apa, false) == Approx(1.0));
  CHECK_THROWS_AS(hetesim(g, g.node_index("p1"), a1, apa, true), DataError);
}

TEST_CASE("single shared paper gives full relevance") {
  HeteroGraph::Builder b;
  const auto a = b.add_type("A");
  const auto p = b.add_type("P");
  const auto w = b.add_relation("writes", a, p);
  b.add_node("a1", "A");
  b.add_node("a2", "A");
  b.add_node("p1", "P");
  b.add_edge(0, w, 2);
  b.add_edge(1, w, 2);
  b.make_undirected();
  const auto g = std::move(b).build();
  const auto apa = parse_metapath(g, "A-writes-P-writes^-1-A");
  CHECK(hetesim(g, 0, 1, apa, false) == Approx(1.0));
  CHECK(hetesim(g, 0, 1, apa, true) == Approx(1.0));
}

TEST_CASE("HeteSim agrees with instance enumeration") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    PlantedToyOptions o;
    o.seed = seed;
    o.papers = 12;
    o.authors = 8;
    o.subjects = 4;
    o.venues = 4;
    const auto g = planted_toy(o);
    for (const char* text : {"A-writes-P-writes^-1-A", "P-about-S-about^-1-P", "A-writes-P-about-S-about^-1-P-writes^-1-A",
                             "P-cites-P-cites-P"}) {
      const auto p = parse_metapath(g, text);
      const auto from = g.nodes_of_type(p.node_types.front());
      const auto to = g.nodes_of_type(p.node_types.back());
      for (const auto i : from)
        for (const auto j : to) {
          CHECK(std::abs(hetesim(g, i, j, p, false) - hetesim_instances(g, i, j, p, false)) <= 1e-12);
          CHECK(std::abs(hetesim(g, i, j, p, true) - hetesim_instances(g, i, j, p, true)) <= 1e-12);
        }
    }
  }
}

TEST_CASE("odd-length HeteSim equals the even path through intermediate nodes") {
  PlantedToyOptions o;
  o.seed = 4;
  o.papers = 10;
  o.authors = 6;
  o.subjects = 4;
  o.venues = 4;
  const auto g = planted_toy(o);
  const auto aug = augment_with_intermediates(g);
  // Forward path over the augmented relations `<r>:in`, `<r>:out` for each original step.
  const auto through = [&](std::initializer_list<const char*> relations) {
    MetaPath p;
    for (const auto* r : relations) {
      for (const auto* side : {":in", ":out"}) {
        const auto idx = aug.relation_index(std::string(r) + side);
        if (p.node_types.empty()) p.node_types.push_back(aug.relation(idx).src_type);
        p.steps.push_back({idx, false});
        p.node_types.push_back(aug.relation(idx).dst_type);
      }
    }
    return p;
  };
  const std::vector<std::pair<MetaPath, MetaPath>> cases{
      {parse_metapath(g, "A-writes-P"), through({"writes"})},
      {parse_metapath(g, "A-writes-P-about-S-about^-1-P"), through({"writes", "about", "about^-1"})},
  };
  for (const auto& [odd, even] : cases) {
    REQUIRE(odd.length() % 2 == 1);
    for (const auto i : g.nodes_of_type(odd.node_types.front()))
      for (const auto j : g.nodes_of_type(odd.node_types.back()))
        for (const bool normalized : {false, true})
          CHECK(std::abs(hetesim(g, i, j, odd, normalized) - hetesim(aug, i, j, even, normalized)) <= 1e-12);
  }
}

TEST_CASE("normalized HeteSim is symmetric with unit diagonal") {
  PlantedToyOptions o;
  o.seed = 2;
  const auto g = planted_toy(o);
  const auto m = hetesim_matrix(g, parse_metapath(g, "P-about-S-about^-1-P"));
  for (Eigen::Index i = 0; i < m.scores.rows(); ++i) {
    CHECK(m.scores(i, i) == Approx(1.0).epsilon(1e-14));
    for (Eigen::Index j = 0; j < m.scores.cols(); ++j) CHECK(m.scores(i, j) == Approx(m.scores(j, i)).epsilon(1e-14));
  }
}

TEST_CASE("SimRank on the 4-cycle") {
  // s(a,c) = 0.8/4 * (2 + 2 s(b,d)) with s(b,d) = s(a,c) gives 2/3; adjacent pairs stay 0.
  const auto m = simrank(fixtures::square(), 0.8, 60);
  CHECK(m.scores(0, 2) == Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.scores(1, 3) == Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.scores(0, 1) == 0.0);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(m.scores(i, i) == 1.0);
}

TEST_CASE("SimRank matches a direct fixed-point iteration") {
  std::mt19937_64 rng(17);
  const auto g = random_hetero_graph(10, 0.3, rng);
  const auto n = static_cast<NodeIndex>(g.num_nodes());
  std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
  for (NodeIndex i = 0; i < n; ++i) s[i][i] = 1.0;
  for (double residual = 1.0; residual > 1e-13;) {
    auto next = s;
    residual = 0.0;
    for (NodeIndex a = 0; a < n; ++a)
      for (NodeIndex b = 0; b < n; ++b) {
        if (a == b) continue;
        const auto ia = g.in_edges(a), ib = g.in_edges(b);
        double total = 0.0;
        for (const auto& u : ia)
          for (const auto& w : ib) total += s[u.node][w.node];
        next[a][b] = ia.empty() || ib.empty() ? 0.0 : 0.8 * total / static_cast<double>(ia.size() * ib.size());
        residual = std::max(residual, std::abs(next[a][b] - s[a][b]));
      }
    s = next;
  }
  const auto m = simrank(g, 0.8, 200);
  for (NodeIndex a = 0; a < n; ++a)
    for (NodeIndex b = 0; b < n; ++b) {
      CHECK(std::abs(m.scores(a, b) - s[a][b]) <= 1e-10);
      CHECK(m.scores(a, b) == m.scores(b, a));
      CHECK(m.scores(a, b) >= 0.0);
      CHECK(m.scores(a, b) <= 1.0);
    }
}

TEST_CASE("SimRank without edges") {
  HeteroGraph::Builder b;
  const auto t = b.add_type("N");
  b.add_type("M");
  b.add_relation("e", t, t);
  b.add_node("x", "N");
  b.add_node("y", "N");
  const auto m = simrank(std::move(b).build());
  CHECK(m.scores(0, 1) == 0.0);
  CHECK(m.scores(0, 0) == 1.0);
}
