#include "hetrel/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hetrel/error.hpp"

namespace hetrel {

namespace {

constexpr std::string_view kInverseSuffix = "^-1";

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

bool skip_line(std::string_view line) { return line.empty() || line.front() == '#'; }

std::string location(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

}  // namespace

// ---------------------------------------------------------------------------
// HeteroGraph

void HeteroGraph::check_node(NodeIndex v) const {
  if (v < 0 || static_cast<std::size_t>(v) >= node_ids_.size())
    throw DataError("unknown node index " + std::to_string(v));
}

const std::string& HeteroGraph::node_id(NodeIndex v) const {
  check_node(v);
  return node_ids_[v];
}

std::optional<NodeIndex> HeteroGraph::find_node(std::string_view id) const {
  auto it = node_lookup_.find(std::string(id));
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

NodeIndex HeteroGraph::node_index(std::string_view id) const {
  if (auto v = find_node(id)) return *v;
  throw DataError("unknown node '" + std::string(id) + "'");
}

TypeIndex HeteroGraph::node_type(NodeIndex v) const {
  check_node(v);
  return node_type_[v];
}

const std::string& HeteroGraph::type_name(TypeIndex t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= type_names_.size())
    throw DataError("unknown type index " + std::to_string(t));
  return type_names_[t];
}

std::optional<TypeIndex> HeteroGraph::find_type(std::string_view name) const {
  auto it = std::find(type_names_.begin(), type_names_.end(), name);
  if (it == type_names_.end()) return std::nullopt;
  return static_cast<TypeIndex>(it - type_names_.begin());
}

TypeIndex HeteroGraph::type_index(std::string_view name) const {
  if (auto t = find_type(name)) return *t;
  throw DataError("unknown node type '" + std::string(name) + "'");
}

const RelationInfo& HeteroGraph::relation(RelationIndex r) const {
  if (r < 0 || static_cast<std::size_t>(r) >= relations_.size())
    throw DataError("unknown relation index " + std::to_string(r));
  return relations_[r];
}

std::optional<RelationIndex> HeteroGraph::find_relation(std::string_view name) const {
  for (std::size_t r = 0; r < relations_.size(); ++r)
    if (relations_[r].name == name) return static_cast<RelationIndex>(r);
  return std::nullopt;
}

RelationIndex HeteroGraph::relation_index(std::string_view name) const {
  if (auto r = find_relation(name)) return *r;
  throw DataError("unknown relation '" + std::string(name) + "'");
}

LabelIndex HeteroGraph::label(NodeIndex v) const {
  check_node(v);
  return node_label_[v];
}

const std::string& HeteroGraph::label_name(LabelIndex l) const {
  if (l < 0 || static_cast<std::size_t>(l) >= label_names_.size())
    throw DataError("unknown label index " + std::to_string(l));
  return label_names_[l];
}

std::span<const Adjacent> HeteroGraph::out_edges(NodeIndex v) const {
  check_node(v);
  return std::span<const Adjacent>(out_adj_).subspan(out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]);
}

std::span<const Adjacent> HeteroGraph::in_edges(NodeIndex v) const {
  check_node(v);
  return std::span<const Adjacent>(in_adj_).subspan(in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]);
}

std::size_t HeteroGraph::out_degree(NodeIndex v, RelationIndex r) const {
  relation(r);
  const auto adj = out_edges(v);
  return static_cast<std::size_t>(
      std::count_if(adj.begin(), adj.end(), [r](const Adjacent& a) { return a.relation == r; }));
}

std::size_t HeteroGraph::in_degree(NodeIndex v, RelationIndex r) const {
  relation(r);
  const auto adj = in_edges(v);
  return static_cast<std::size_t>(
      std::count_if(adj.begin(), adj.end(), [r](const Adjacent& a) { return a.relation == r; }));
}

std::vector<NodeIndex> HeteroGraph::neighbors(NodeIndex v, std::optional<RelationIndex> r) const {
  if (r) relation(*r);
  std::vector<NodeIndex> out;
  for (const auto& a : out_edges(v))
    if (!r || a.relation == *r) out.push_back(a.node);
  return out;
}

std::span<const NodeIndex> HeteroGraph::nodes_of_type(TypeIndex t) const {
  type_name(t);
  return type_members_[t];
}

// ---------------------------------------------------------------------------
// Builder

TypeIndex HeteroGraph::Builder::add_type(std::string_view name) {
  if (name.empty()) throw DataError("empty node type name");
  auto [it, inserted] = type_lookup_.try_emplace(std::string(name), static_cast<TypeIndex>(graph_.type_names_.size()));
  if (inserted) graph_.type_names_.emplace_back(name);
  return it->second;
}

LabelIndex HeteroGraph::Builder::add_label(std::string_view name) {
  auto [it, inserted] =
      label_lookup_.try_emplace(std::string(name), static_cast<LabelIndex>(graph_.label_names_.size()));
  if (inserted) graph_.label_names_.emplace_back(name);
  return it->second;
}

NodeIndex HeteroGraph::Builder::add_node(std::string_view id, std::string_view type, LabelIndex label) {
  if (id.empty()) throw DataError("empty node id");
  const auto t = add_type(type);
  const auto v = static_cast<NodeIndex>(graph_.node_ids_.size());
  if (!graph_.node_lookup_.try_emplace(std::string(id), v).second)
    throw DataError("duplicate node id '" + std::string(id) + "'");
  if (label != kUnlabeled && (label < 0 || static_cast<std::size_t>(label) >= graph_.label_names_.size()))
    throw DataError("unknown label index for node '" + std::string(id) + "'");
  graph_.node_ids_.emplace_back(id);
  graph_.node_type_.push_back(t);
  graph_.node_label_.push_back(label);
  return v;
}

RelationIndex HeteroGraph::Builder::add_relation(std::string_view name, TypeIndex src_type, TypeIndex dst_type) {
  if (name.empty()) throw DataError("empty relation name");
  auto it = relation_lookup_.find(std::string(name));
  if (it != relation_lookup_.end()) {
    const auto& info = graph_.relations_[it->second];
    if (info.src_type != src_type || info.dst_type != dst_type)
      throw DataError("relation '" + std::string(name) + "' used with signature (" +
                      graph_.type_names_.at(src_type) + ", " + graph_.type_names_.at(dst_type) +
                      ") but was declared (" + graph_.type_names_[info.src_type] + ", " +
                      graph_.type_names_[info.dst_type] + ")");
    return it->second;
  }
  const auto r = static_cast<RelationIndex>(graph_.relations_.size());
  graph_.relations_.push_back({std::string(name), src_type, dst_type, std::nullopt});
  relation_lookup_.emplace(std::string(name), r);
  return r;
}

void HeteroGraph::Builder::add_edge(NodeIndex src, RelationIndex r, NodeIndex dst) {
  const auto n = static_cast<NodeIndex>(graph_.node_ids_.size());
  if (src < 0 || src >= n || dst < 0 || dst >= n) throw DataError("edge endpoint out of range");
  const auto& info = graph_.relations_.at(r);
  if (graph_.node_type_[src] != info.src_type || graph_.node_type_[dst] != info.dst_type)
    throw DataError("edge (" + graph_.node_ids_[src] + ", " + info.name + ", " + graph_.node_ids_[dst] +
                    ") does not match the relation signature");
  graph_.edges_.push_back({src, r, dst});
}

void HeteroGraph::Builder::make_undirected() {
  const auto base_relations = graph_.relations_.size();
  std::vector<RelationIndex> inverse(base_relations);
  for (std::size_t r = 0; r < base_relations; ++r) {
    if (graph_.relations_[r].inverse_of) continue;
    const auto info = graph_.relations_[r];
    inverse[r] = add_relation(info.name + std::string(kInverseSuffix), info.dst_type, info.src_type);
    graph_.relations_[inverse[r]].inverse_of = static_cast<RelationIndex>(r);
  }
  const auto base_edges = graph_.edges_.size();
  for (std::size_t e = 0; e < base_edges; ++e) {
    const auto edge = graph_.edges_[e];
    add_edge(edge.dst, inverse[edge.relation], edge.src);
  }
  graph_.symmetric_ = true;
}

std::optional<NodeIndex> HeteroGraph::Builder::find_node(std::string_view id) const {
  return graph_.find_node(id);
}

HeteroGraph HeteroGraph::Builder::build() && {
  HeteroGraph g = std::move(graph_);
  if (g.type_names_.size() + g.relations_.size() <= 2)
    throw DataError("a heterogeneous graph needs |types| + |relations| > 2, got " +
                    std::to_string(g.type_names_.size()) + " + " + std::to_string(g.relations_.size()));

  const auto n = g.node_ids_.size();
  auto build_csr = [n](const std::vector<Edge>& edges, bool outgoing, std::vector<std::size_t>& offsets,
                       std::vector<Adjacent>& adj) {
    offsets.assign(n + 1, 0);
    for (const auto& e : edges) ++offsets[(outgoing ? e.src : e.dst) + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    adj.resize(edges.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& e : edges) {
      const auto from = outgoing ? e.src : e.dst;
      adj[cursor[from]++] = {outgoing ? e.dst : e.src, e.relation};
    }
  };
  build_csr(g.edges_, true, g.out_offsets_, g.out_adj_);
  build_csr(g.edges_, false, g.in_offsets_, g.in_adj_);

  g.type_members_.assign(g.type_names_.size(), {});
  for (std::size_t v = 0; v < n; ++v) g.type_members_[g.node_type_[v]].push_back(static_cast<NodeIndex>(v));
  return g;
}

// ---------------------------------------------------------------------------
// File IO

HeteroGraph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                       bool undirected) {
  HeteroGraph::Builder builder;

  std::ifstream nodes(nodes_path);
  if (!nodes) throw DataError("cannot open nodes file " + nodes_path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(nodes, line)) {
    ++line_no;
    const auto text = trim_cr(line);
    if (skip_line(text)) continue;
    const auto fields = split_tabs(text);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw DataError(location(nodes_path, line_no) + ": expected node_id<TAB>type<TAB>label");
    const auto label = fields[2] == "-" ? kUnlabeled : builder.add_label(fields[2]);
    try {
      builder.add_node(fields[0], fields[1], label);
    } catch (const DataError& e) {
      throw DataError(location(nodes_path, line_no) + ": " + e.what());
    }
  }

  std::ifstream edges(edges_path);
  if (!edges) throw DataError("cannot open edges file " + edges_path.string());
  line_no = 0;
  while (std::getline(edges, line)) {
    ++line_no;
    const auto text = trim_cr(line);
    if (skip_line(text)) continue;
    const auto fields = split_tabs(text);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw DataError(location(edges_path, line_no) + ": expected src_id<TAB>relation<TAB>dst_id");
    if (undirected && fields[1].ends_with(kInverseSuffix))
      throw DataError(location(edges_path, line_no) + ": relation names ending in ^-1 are reserved");
    const auto src = builder.find_node(fields[0]);
    const auto dst = builder.find_node(fields[2]);
    if (!src || !dst)
      throw DataError(location(edges_path, line_no) + ": edge references unknown node '" +
                      std::string(src ? fields[2] : fields[0]) + "'");
    try {
      const auto r = builder.add_relation(fields[1], builder.node_type(*src), builder.node_type(*dst));
      builder.add_edge(*src, r, *dst);
    } catch (const DataError& e) {
      throw DataError(location(edges_path, line_no) + ": " + e.what());
    }
  }

  if (undirected) builder.make_undirected();
  return std::move(builder).build();
}

void write_graph(const HeteroGraph& g, const std::filesystem::path& nodes_path,
                 const std::filesystem::path& edges_path) {
  std::ofstream nodes(nodes_path);
  std::ofstream edges(edges_path);
  if (!nodes || !edges) throw DataError("cannot write graph files");
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const auto node = static_cast<NodeIndex>(v);
    const auto l = g.label(node);
    nodes << g.node_id(node) << '\t' << g.type_name(g.node_type(node)) << '\t'
          << (l == kUnlabeled ? std::string("-") : g.label_name(l)) << '\n';
  }
  for (const auto& e : g.edges()) {
    if (g.relation(e.relation).inverse_of) continue;
    edges << g.node_id(e.src) << '\t' << g.relation(e.relation).name << '\t' << g.node_id(e.dst) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Meta-paths

MetaPath MetaPath::reversed() const {
  MetaPath out;
  out.node_types.assign(node_types.rbegin(), node_types.rend());
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) out.steps.push_back({it->relation, !it->reversed});
  return out;
}

TypeIndex step_source_type(const HeteroGraph& g, const MetaPath::Step& s) {
  const auto& info = g.relation(s.relation);
  return s.reversed ? info.dst_type : info.src_type;
}

TypeIndex step_target_type(const HeteroGraph& g, const MetaPath::Step& s) {
  const auto& info = g.relation(s.relation);
  return s.reversed ? info.src_type : info.dst_type;
}

MetaPath parse_metapath(const HeteroGraph& g, std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto dash = text.find('-', start);
    tokens.emplace_back(text.substr(start, dash == std::string_view::npos ? std::string_view::npos : dash - start));
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  // Re-join the "^-1" suffix that the dash split tore apart.
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].empty() && tokens[i].back() == '^' && i + 1 < tokens.size() && tokens[i + 1] == "1") {
      parts.push_back(tokens[i] + "-1");
      ++i;
    } else {
      parts.push_back(tokens[i]);
    }
  }
  if (parts.size() < 3 || parts.size() % 2 == 0)
    throw DataError("meta-path '" + std::string(text) + "' must alternate types and relations");

  MetaPath p;
  for (std::size_t i = 0; i < parts.size(); i += 2) {
    if (parts[i].empty()) throw DataError("meta-path '" + std::string(text) + "' has an empty type");
    p.node_types.push_back(g.type_index(parts[i]));
  }
  for (std::size_t i = 1; i < parts.size(); i += 2) {
    const std::string_view name = parts[i];
    MetaPath::Step step{};
    if (auto r = g.find_relation(name)) {
      step = {*r, false};
    } else if (name.ends_with(kInverseSuffix)) {
      step = {g.relation_index(name.substr(0, name.size() - kInverseSuffix.size())), true};
    } else {
      throw DataError("unknown relation '" + std::string(name) + "' in meta-path");
    }
    const auto k = i / 2;
    if (step_source_type(g, step) != p.node_types[k] || step_target_type(g, step) != p.node_types[k + 1])
      throw DataError("relation '" + std::string(name) + "' does not connect " + g.type_name(p.node_types[k]) +
                      " to " + g.type_name(p.node_types[k + 1]));
    p.steps.push_back(step);
  }
  return p;
}

std::string format_metapath(const HeteroGraph& g, const MetaPath& p) {
  std::string out = g.type_name(p.node_types.at(0));
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    out += '-';
    out += g.relation(p.steps[i].relation).name;
    if (p.steps[i].reversed) out += kInverseSuffix;
    out += '-';
    out += g.type_name(p.node_types.at(i + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels

std::vector<NodeIndex> LabelTable::nodes_in(Split s) const {
  std::vector<NodeIndex> out;
  for (std::size_t v = 0; v < split.size(); ++v)
    if (split[v] == s) out.push_back(static_cast<NodeIndex>(v));
  return out;
}

std::vector<NodeIndex> LabelTable::labeled_nodes() const {
  std::vector<NodeIndex> out;
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels[v] != kUnlabeled) out.push_back(static_cast<NodeIndex>(v));
  return out;
}

LabelTable split_labels(const HeteroGraph& g, std::uint64_t seed) {
  LabelTable table;
  table.labels.resize(g.num_nodes());
  table.split.assign(g.num_nodes(), Split::None);
  for (std::size_t v = 0; v < g.num_nodes(); ++v) table.labels[v] = g.label(static_cast<NodeIndex>(v));

  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    std::vector<std::vector<NodeIndex>> by_label(g.num_labels());
    std::size_t n = 0;
    for (const auto v : g.nodes_of_type(static_cast<TypeIndex>(t))) {
      if (table.labels[v] == kUnlabeled) continue;
      by_label[table.labels[v]].push_back(v);
      ++n;
    }
    if (n == 0) continue;
    if (n < 4)
      throw DataError("type '" + g.type_name(static_cast<TypeIndex>(t)) + "' has " + std::to_string(n) +
                      " labeled nodes; at least 4 are needed for a train/validation/test split");

    // Systematic stratification: element i of a label group of size m sits at
    // (i + 0.5) / m, so sorting by position interleaves labels proportionally.
    struct Slot {
      double position;
      LabelIndex label;
      NodeIndex node;
    };
    std::vector<Slot> order;
    for (std::size_t l = 0; l < by_label.size(); ++l) {
      auto& group = by_label[l];
      std::shuffle(group.begin(), group.end(), rng);
      for (std::size_t i = 0; i < group.size(); ++i)
        order.push_back({(static_cast<double>(i) + 0.5) / static_cast<double>(group.size()),
                         static_cast<LabelIndex>(l), group[i]});
    }
    std::sort(order.begin(), order.end(), [](const Slot& a, const Slot& b) {
      return a.position != b.position ? a.position < b.position : a.label < b.label;
    });

    const auto quarter = n / 4;
    for (std::size_t i = 0; i < order.size(); ++i)
      table.split[order[i].node] = i < quarter ? Split::Train : i < 2 * quarter ? Split::Validation : Split::Test;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Intermediate-node augmentation

HeteroGraph augment_with_intermediates(const HeteroGraph& g) {
  HeteroGraph::Builder builder;
  for (std::size_t t = 0; t < g.num_types(); ++t) builder.add_type(g.type_name(static_cast<TypeIndex>(t)));
  for (const auto& name : g.label_names()) builder.add_label(name);
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const auto node = static_cast<NodeIndex>(v);
    builder.add_node(g.node_id(node), g.type_name(g.node_type(node)), g.label(node));
  }

  std::vector<std::pair<RelationIndex, RelationIndex>> split_relation(g.num_relations());
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    const auto& info = g.relation(static_cast<RelationIndex>(r));
    const auto mid = builder.add_type("E_" + info.name);
    split_relation[r] = {builder.add_relation(info.name + ":in", info.src_type, mid),
                         builder.add_relation(info.name + ":out", mid, info.dst_type)};
  }

  const auto edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    const auto& info = g.relation(edge.relation);
    std::string id = "_e" + std::to_string(e);
    while (builder.find_node(id)) id.insert(0, "_");
    const auto mid = builder.add_node(id, "E_" + info.name);
    builder.add_edge(edge.src, split_relation[edge.relation].first, mid);
    builder.add_edge(mid, split_relation[edge.relation].second, edge.dst);
  }
  return std::move(builder).build();
}

}  // namespace hetrel
