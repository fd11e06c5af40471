#include "hetrel/synthetic.hpp"

#include <string>
#include <vector>

namespace hetrel {

HeteroGraph random_hetero_graph(std::size_t num_nodes, double edge_prob, std::mt19937_64& rng) {
  HeteroGraph::Builder b;
  const auto a = b.add_type("A");
  const auto bt = b.add_type("B");
  const auto aa = b.add_relation("aa", a, a);
  const auto ab = b.add_relation("ab", a, bt);
  const auto bb = b.add_relation("bb", bt, bt);

  std::bernoulli_distribution coin(0.5), edge(edge_prob);
  for (std::size_t i = 0; i < num_nodes; ++i) b.add_node("n" + std::to_string(i), coin(rng) ? "A" : "B");
  for (std::size_t i = 0; i < num_nodes; ++i) {
    for (std::size_t j = i + 1; j < num_nodes; ++j) {
      if (!edge(rng)) continue;
      auto u = static_cast<NodeIndex>(i), v = static_cast<NodeIndex>(j);
      const auto tu = b.node_type(u), tv = b.node_type(v);
      if (tu == a && tv == a) {
        b.add_edge(u, aa, v);
      } else if (tu != tv) {
        if (tu != a) std::swap(u, v);
        b.add_edge(u, ab, v);
      } else {
        b.add_edge(u, bb, v);
      }
    }
  }
  b.make_undirected();
  return std::move(b).build();
}

HeteroGraph planted_toy(const PlantedToyOptions& o) {
  std::mt19937_64 rng(o.seed);
  HeteroGraph::Builder b;
  const auto paper = b.add_type("P");
  const auto author = b.add_type("A");
  const auto subject = b.add_type("S");
  const auto venue = b.add_type("V");
  const LabelIndex labels[2] = {b.add_label("c0"), b.add_label("c1")};

  struct Group {
    std::vector<NodeIndex> nodes;
    std::vector<int> community;
  };
  auto make = [&](const char* prefix, const char* type, std::size_t count) {
    Group g;
    for (std::size_t i = 0; i < count; ++i) {
      const int c = i < count / 2 ? 0 : 1;
      g.nodes.push_back(b.add_node(prefix + std::to_string(i), type, labels[c]));
      g.community.push_back(c);
    }
    return g;
  };
  const auto papers = make("p", "P", o.papers);
  const auto authors = make("a", "A", o.authors);
  const auto subjects = make("s", "S", o.subjects);
  const auto venues = make("v", "V", o.venues);

  std::vector<int> degree(o.papers + o.authors + o.subjects + o.venues, 0);
  auto connect = [&](const Group& from, const Group& to, RelationIndex r, double intra) {
    std::bernoulli_distribution same(intra), cross(intra * o.inter_ratio);
    const bool self = &from == &to;
    for (std::size_t i = 0; i < from.nodes.size(); ++i)
      for (std::size_t j = self ? i + 1 : 0; j < to.nodes.size(); ++j) {
        const bool hit = from.community[i] == to.community[j] ? same(rng) : cross(rng);
        if (!hit) continue;
        b.add_edge(from.nodes[i], r, to.nodes[j]);
        ++degree[static_cast<std::size_t>(from.nodes[i])];
        ++degree[static_cast<std::size_t>(to.nodes[j])];
      }
  };
  const auto writes = b.add_relation("writes", author, paper);
  const auto about = b.add_relation("about", paper, subject);
  const auto published = b.add_relation("published_in", paper, venue);
  const auto cites = b.add_relation("cites", paper, paper);
  connect(authors, papers, writes, o.intra_writes);
  connect(papers, subjects, about, o.intra_about);
  connect(papers, venues, published, o.intra_published);
  connect(papers, papers, cites, o.intra_cites);

  // No isolated nodes: attach each to a random same-community partner.
  auto partner = [&](const Group& g, int community) {
    std::vector<NodeIndex> pool;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      if (g.community[i] == community) pool.push_back(g.nodes[i]);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
  };
  auto attach = [&](const Group& g, auto&& link) {
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      if (degree[static_cast<std::size_t>(g.nodes[i])] == 0) link(g.nodes[i], g.community[i]);
  };
  attach(authors, [&](NodeIndex v, int c) { b.add_edge(v, writes, partner(papers, c)); });
  attach(subjects, [&](NodeIndex v, int c) { b.add_edge(partner(papers, c), about, v); });
  attach(venues, [&](NodeIndex v, int c) { b.add_edge(partner(papers, c), published, v); });
  attach(papers, [&](NodeIndex v, int c) {
    const auto a = partner(authors, c);
    b.add_edge(a, writes, v);
    ++degree[static_cast<std::size_t>(a)];
  });

  b.make_undirected();
  return std::move(b).build();
}

}  // namespace hetrel
