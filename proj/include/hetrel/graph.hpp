#pragma once

// Typed graph data model: nodes with a type, directed edges with a relation,
// each relation bound to a fixed (source type, target type) signature.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hetrel {

using NodeIndex = std::int32_t;
using TypeIndex = std::int32_t;
using RelationIndex = std::int32_t;
using LabelIndex = std::int32_t;

inline constexpr LabelIndex kUnlabeled = -1;

struct Edge {
  NodeIndex src;
  RelationIndex relation;
  NodeIndex dst;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct RelationInfo {
  std::string name;
  TypeIndex src_type;
  TypeIndex dst_type;
  // Set for the `<name>^-1` relation synthesized by an undirected load.
  std::optional<RelationIndex> inverse_of;
};

// One entry of an adjacency list: the node on the other end and the edge's relation.
struct Adjacent {
  NodeIndex node;
  RelationIndex relation;
};

class HeteroGraph {
 public:
  class Builder;

  std::size_t num_nodes() const { return node_ids_.size(); }
  std::size_t num_types() const { return type_names_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_labels() const { return label_names_.size(); }

  const std::string& node_id(NodeIndex v) const;
  NodeIndex node_index(std::string_view id) const;  // throws DataError
  std::optional<NodeIndex> find_node(std::string_view id) const;

  TypeIndex node_type(NodeIndex v) const;
  const std::string& type_name(TypeIndex t) const;
  TypeIndex type_index(std::string_view name) const;  // throws DataError
  std::optional<TypeIndex> find_type(std::string_view name) const;

  const RelationInfo& relation(RelationIndex r) const;
  RelationIndex relation_index(std::string_view name) const;  // throws DataError
  std::optional<RelationIndex> find_relation(std::string_view name) const;

  LabelIndex label(NodeIndex v) const;
  const std::string& label_name(LabelIndex l) const;
  std::span<const std::string> label_names() const { return label_names_; }

  std::span<const Edge> edges() const { return edges_; }
  std::span<const Adjacent> out_edges(NodeIndex v) const;
  std::span<const Adjacent> in_edges(NodeIndex v) const;

  std::size_t out_degree(NodeIndex v) const { return out_edges(v).size(); }
  std::size_t in_degree(NodeIndex v) const { return in_edges(v).size(); }
  std::size_t out_degree(NodeIndex v, RelationIndex r) const;
  std::size_t in_degree(NodeIndex v, RelationIndex r) const;

  // Out-neighbors in insertion order, optionally restricted to one relation.
  std::vector<NodeIndex> neighbors(NodeIndex v, std::optional<RelationIndex> r = std::nullopt) const;

  std::span<const NodeIndex> nodes_of_type(TypeIndex t) const;

  // True when every edge has its reverse present (as produced by an undirected load).
  bool symmetric() const { return symmetric_; }

 private:
  void check_node(NodeIndex v) const;

  std::vector<std::string> node_ids_;
  std::unordered_map<std::string, NodeIndex> node_lookup_;
  std::vector<TypeIndex> node_type_;
  std::vector<LabelIndex> node_label_;
  std::vector<std::string> type_names_;
  std::vector<std::string> label_names_;
  std::vector<RelationInfo> relations_;
  std::vector<Edge> edges_;

  // CSR adjacency, offsets have num_nodes + 1 entries.
  std::vector<std::size_t> out_offsets_, in_offsets_;
  std::vector<Adjacent> out_adj_, in_adj_;
  std::vector<std::vector<NodeIndex>> type_members_;
  bool symmetric_ = false;
};

class HeteroGraph::Builder {
 public:
  TypeIndex add_type(std::string_view name);
  LabelIndex add_label(std::string_view name);
  NodeIndex add_node(std::string_view id, std::string_view type, LabelIndex label = kUnlabeled);
  // Registers a relation, or returns the existing one after checking its signature.
  RelationIndex add_relation(std::string_view name, TypeIndex src_type, TypeIndex dst_type);
  void add_edge(NodeIndex src, RelationIndex r, NodeIndex dst);

  // Adds `<name>^-1` relations and the reverse of every edge.
  void make_undirected();

  std::optional<NodeIndex> find_node(std::string_view id) const;
  TypeIndex node_type(NodeIndex v) const { return graph_.node_type_.at(v); }
  std::size_t num_nodes() const { return graph_.node_ids_.size(); }

  HeteroGraph build() &&;

 private:
  HeteroGraph graph_;
  std::unordered_map<std::string, TypeIndex> type_lookup_;
  std::unordered_map<std::string, LabelIndex> label_lookup_;
  std::unordered_map<std::string, RelationIndex> relation_lookup_;
};

// Reads the TSV node and edge files. Undirected loads store every listed edge
// in both directions, the reverse one under the relation `<name>^-1`.
HeteroGraph load_graph(const std::filesystem::path& nodes_path,
                       const std::filesystem::path& edges_path, bool undirected = true);

// Writes the graph back in the same format; synthesized reverse edges are omitted.
void write_graph(const HeteroGraph& g, const std::filesystem::path& nodes_path,
                 const std::filesystem::path& edges_path);

// ---------------------------------------------------------------------------

// A typed path template A_0 -R_1-> A_1 ... -R_k-> A_k.
struct MetaPath {
  struct Step {
    RelationIndex relation;
    bool reversed;  // traverse the relation from its target to its source
  };
  std::vector<TypeIndex> node_types;
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }
  MetaPath reversed() const;
};

// Parses `A-writes-P-writes^-1-A`. A `^-1` suffix selects the stored inverse
// relation when it exists, otherwise reverse traversal of the base relation.
MetaPath parse_metapath(const HeteroGraph& g, std::string_view text);
std::string format_metapath(const HeteroGraph& g, const MetaPath& p);

// Step endpoints as seen when walking forward along the path.
TypeIndex step_source_type(const HeteroGraph& g, const MetaPath::Step& s);
TypeIndex step_target_type(const HeteroGraph& g, const MetaPath::Step& s);

// ---------------------------------------------------------------------------

enum class Split : std::uint8_t { None, Train, Validation, Test };

struct LabelTable {
  std::vector<LabelIndex> labels;  // kUnlabeled for unlabeled nodes
  std::vector<Split> split;

  bool labeled(NodeIndex v) const { return labels.at(v) != kUnlabeled; }
  std::vector<NodeIndex> nodes_in(Split s) const;
  std::vector<NodeIndex> labeled_nodes() const;
};

// Stratified 25/25/50 split of the labeled nodes of every labeled type.
// Per type of n labeled nodes: train = floor(n/4), validation = floor(n/4),
// test gets the remainder. Nodes are interleaved across labels in proportion
// to label frequency before cutting, so each split sees every label.
LabelTable split_labels(const HeteroGraph& g, std::uint64_t seed);

// Every stored edge (u, r, w) becomes u -> e -> w through a fresh node e of
// type `E_<r>`, using relations `<r>:in` and `<r>:out`. Original nodes keep
// their indices; intermediate nodes follow in edge order.
HeteroGraph augment_with_intermediates(const HeteroGraph& g);

}  // namespace hetrel
