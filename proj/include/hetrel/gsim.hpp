#pragma once

// GSim: relevance from context-path GNN embeddings.
//
// Each layer summarizes every node type (mean over nodes that survive node
// dropout), scores source types against each target type with per-head
// query/key projections, aggregates relation messages W_r [c_i || c_j] from
// in-neighbors weighted by that attention, and feeds the result through a
// GRU carry. Layer k's output is the k-length context vector C^k; per-type
// scalars alpha_A^k mix C^1..C^K into the final embedding H, and relevance is
// sigmoid(<h_i, h_j>).

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hetrel/graph.hpp"
#include "hetrel/relevance.hpp"
#include "hetrel/tensor.hpp"

namespace hetrel {

// Form of the supervised term for a node i with same-label set I(i):
//   Separated:    -log mean_{j in I(i)} S(i,j) - log mean_{j not in I(i)} (1 - S(i,j))
//   LiteralRatio: -log( mean_{j in I(i)} S(i,j) / mean_{j not in I(i)} (1 - S(i,j)) )
// Separated is bounded below by 0 and rewards low relevance across labels;
// LiteralRatio rewards high relevance across labels and is kept for comparison.
enum class SupervisedLoss { Separated, LiteralRatio };

enum class Activation { Relu, Identity };
// How relation messages into a node are pooled: plain sum, or sum divided by
// the node's in-degree.
enum class Aggregation { Sum, Mean };

struct TrainConfig {
  int dim = 128;
  int max_length = 4;  // K
  int heads = 2;
  double node_dropout = 0.3;
  double lr = 0.05;
  int max_epochs = 200;
  std::uint64_t seed = 0;
  double weight_supervised = 1.0;
  double weight_self = 1.0;
  SupervisedLoss supervised_loss = SupervisedLoss::Separated;
  // Whether the initial node features Z are optimized or stay fixed random
  // features.
  bool learn_features = true;
  Aggregation aggregation = Aggregation::Mean;
  // The learning rate ramps linearly from lr / warmup_epochs to lr.
  int warmup_epochs = 20;
  // Stop after this many epochs without a better validation score; 0 never stops early.
  int patience = 0;

  void validate() const;  // throws ConfigError
};

std::string to_string(SupervisedLoss form);
SupervisedLoss parse_supervised_loss(std::string_view text);
std::string to_string(Aggregation aggregation);
Aggregation parse_aggregation(std::string_view text);

struct LayerWeights {
  // [head][type] projections of the type summaries, dim x dim.
  std::vector<std::vector<Parameter>> query;
  std::vector<std::vector<Parameter>> key;
  Parameter w1, b1;  // dim x dim, 1 x dim
  Parameter w2, b2;  // heads*dim x dim, 1 x dim
  GruCell gru;
};

struct GsimModel {
  TrainConfig config;
  std::vector<std::string> type_names;
  std::vector<RelationInfo> relations;
  std::size_t num_nodes = 0;

  Parameter z;                             // num_nodes x dim
  std::vector<Parameter> relation_weights;  // per relation, 2*dim x dim
  std::vector<LayerWeights> layers;         // K layers
  Parameter type_length;                    // num_types x K, alpha_A^k

  // Stable order; used by the optimizer, checkpoints and the model file.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;

  // Throws DataError unless `g` has the node count, types and relations the
  // model was built for.
  void check_graph(const HeteroGraph& g) const;
};

// Xavier-uniform weights from cfg.seed, zero biases, alpha_A^k = 1.
GsimModel init_model(const HeteroGraph& g, const TrainConfig& cfg);
GsimModel init_model(const TrainConfig& cfg, std::size_t num_nodes, std::vector<std::string> type_names,
                     std::vector<RelationInfo> relations);

// Constant sparse operators and node groupings derived once per graph.
class GraphOperators {
 public:
  explicit GraphOperators(const HeteroGraph& g);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_types() const { return members_.size(); }
  std::span<const NodeIndex> members(TypeIndex t) const { return members_[t]; }
  // Relations whose target type is t.
  std::span<const RelationIndex> relations_into(TypeIndex t) const { return relations_into_[t]; }
  // Distinct source types of those relations, ascending.
  std::span<const TypeIndex> source_types(TypeIndex t) const { return source_types_[t]; }
  TypeIndex relation_source(RelationIndex r) const { return relation_source_[r]; }
  TypeIndex relation_target(RelationIndex r) const { return relation_target_[r]; }
  std::size_t num_relations() const { return adjacency_.size(); }

  // Row i, column j counts edges j -> i under relation r.
  const SparseMatrix& adjacency(RelationIndex r) const { return adjacency_[r]; }
  // Diagonal of per-relation in-degrees.
  const SparseMatrix& in_degree(RelationIndex r) const { return in_degree_[r]; }
  // The same two operators restricted to rows of the relation's target type
  // (|members(target)| x num_nodes), and the num_nodes x |members(t)|
  // placement of a per-type block back into node order.
  const SparseMatrix& target_adjacency(RelationIndex r) const { return target_adjacency_[r]; }
  const SparseMatrix& target_in_degree(RelationIndex r) const { return target_in_degree_[r]; }
  const SparseMatrix& scatter(TypeIndex t) const { return scatter_[t]; }
  // num_nodes x 1: 1 where the node has at least one in-edge.
  const Matrix& has_in_edges() const { return has_in_edges_; }
  // num_nodes x 1: 1 / in-degree, 0 for nodes without in-edges.
  const Matrix& inverse_in_degree() const { return inverse_in_degree_; }
  // num_nodes x num_types one-hot of node types.
  const Matrix& type_indicator() const { return type_indicator_; }
  // Number of stored nonzeros across all operators (storage accounting).
  std::size_t stored_entries() const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<std::vector<NodeIndex>> members_;
  std::vector<std::vector<RelationIndex>> relations_into_;
  std::vector<std::vector<TypeIndex>> source_types_;
  std::vector<TypeIndex> relation_source_, relation_target_;
  std::vector<SparseMatrix> adjacency_, in_degree_;
  std::vector<SparseMatrix> target_adjacency_, target_in_degree_, scatter_;
  Matrix has_in_edges_, inverse_in_degree_, type_indicator_;
};

struct ForwardOptions {
  bool train = false;  // enables node dropout
  Activation activation = Activation::Relu;
  Aggregation aggregation = Aggregation::Sum;
  bool use_gru = true;
  // Replaces every relation attention weight with this constant.
  std::optional<double> fixed_attention;
};

// Attention of one layer: per head a num_types x num_types matrix, rows are
// source types, columns target types, zero where no relation connects them.
struct LayerAttention {
  std::vector<Matrix> heads;
};

struct LayerOutput {
  Tensor context;  // num_nodes x dim
  LayerAttention attention;
};

struct ForwardResult {
  std::vector<Tensor> contexts;  // C^1..C^K
  std::vector<LayerAttention> attention;
};

// Mean of the rows of `contexts` belonging to `members`, after dropping each
// member independently with probability `dropout` (falls back to all members
// when every one is dropped). No dropout when rng is null or dropout is 0.
Tensor graph_encoder(const Tensor& contexts, std::span<const NodeIndex> members, double dropout,
                     std::mt19937_64* rng);

// Softmax over `sources` of <Q_T^h(h_T), K_S^h(h_S)> / sqrt(dim); a 1 x |sources| tensor.
Tensor relation_attention(Tape& tape, std::span<const Tensor> summaries, TypeIndex target,
                          std::span<const TypeIndex> sources, LayerWeights& layer, int head, int dim);

// W_r applied to [c_i || c_j] for 1 x dim rows.
Tensor relation_message(Tape& tape, const Tensor& c_i, const Tensor& c_j, Parameter& w_r);

LayerOutput layer_forward(Tape& tape, const Tensor& previous, const GraphOperators& ops, GsimModel& model,
                          int layer, const ForwardOptions& options, std::mt19937_64* rng);

ForwardResult forward_all(Tape& tape, const GraphOperators& ops, GsimModel& model, const ForwardOptions& options,
                          std::mt19937_64* rng = nullptr);

// H_A = sum_k alpha_A^k C_A^k.
Tensor type_length_combine(Tape& tape, std::span<const Tensor> contexts, const GraphOperators& ops,
                           GsimModel& model);

// Forward options matching a configuration, with or without node dropout.
ForwardOptions training_options(const TrainConfig& cfg, bool train);

// Inference embedding H (no dropout).
Matrix embed(const GraphOperators& ops, GsimModel& model);

double relevance(const Matrix& embeddings, NodeIndex vi, NodeIndex vj);
RelevanceMatrix relevance_matrix(const Matrix& embeddings, std::span<const NodeIndex> nodes);

// Supervised contrast over `nodes` (pairs drawn within `nodes` only). Nodes
// whose positive or negative set is empty are skipped; returns a zero
// constant when none remain.
Tensor loss_supervised(Tape& tape, const Tensor& embeddings, const LabelTable& labels,
                       std::span<const NodeIndex> nodes, SupervisedLoss form = SupervisedLoss::Separated);

// Self-relevance deficit: mean_i (1 - sigmoid(<h_i, h_i>)).
Tensor loss_self(Tape& tape, const Tensor& embeddings);

struct EpochReport {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double loss_supervised = 0.0;
  double loss_self = 0.0;
  double validation = 0.0;         // weighted loss on the validation split
  double validation_recall = 0.0;  // mean recall@10 of the validation queries
  const ForwardResult* forward = nullptr;  // training-mode pass of this epoch
};

struct TrainResult {
  // Snapshot with the best validation recall@10, ties going to the lower
  // validation loss.
  GsimModel model;
  int best_epoch = 0;
  std::vector<EpochReport> history;  // `forward` is null in stored reports
};

TrainResult train(const HeteroGraph& g, const LabelTable& labels, const TrainConfig& cfg,
                  const std::function<void(const EpochReport&)>& on_epoch = {});

// Mean over `queries` of the fraction of each query's n highest-scoring nodes
// (itself included; ties go to the query, then the lower index) that share its label.
double mean_recall_at(const Matrix& embeddings, const LabelTable& labels, std::span<const NodeIndex> queries,
                      std::size_t n = 10);

// Versioned model file: text header then named little-endian float64 arrays.
inline constexpr int kModelFormatVersion = 1;

struct ModelExpectations {
  std::optional<int> dim;
  std::optional<int> max_length;
  std::optional<int> heads;
};

void save_model(const GsimModel& model, const std::filesystem::path& path);
// Throws DataError on a corrupt or foreign file, ConfigError when the stored
// configuration contradicts `expect`.
GsimModel load_model(const std::filesystem::path& path, const ModelExpectations& expect = {});

}  // namespace hetrel
