#include "hetrel/gsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>

#include "hetrel/error.hpp"

namespace hetrel {

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be positive");
  if (max_length < 1) throw ConfigError("max_length (K) must be at least 1");
  if (heads < 1) throw ConfigError("heads must be at least 1");
  if (!(node_dropout >= 0.0 && node_dropout < 1.0)) throw ConfigError("node_dropout must lie in [0, 1)");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(weight_supervised >= 0.0 && weight_self >= 0.0) || !std::isfinite(weight_supervised) ||
      !std::isfinite(weight_self) || weight_supervised + weight_self <= 0.0)
    throw ConfigError("loss balance weights must be non-negative and not both zero");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be non-negative");
  if (patience < 0) throw ConfigError("patience must be non-negative");
}

std::string to_string(SupervisedLoss form) {
  return form == SupervisedLoss::Separated ? "separated" : "literal";
}

SupervisedLoss parse_supervised_loss(std::string_view text) {
  if (text == "separated") return SupervisedLoss::Separated;
  if (text == "literal") return SupervisedLoss::LiteralRatio;
  throw ConfigError("unknown supervised loss '" + std::string(text) + "' (expected separated or literal)");
}

std::string to_string(Aggregation aggregation) { return aggregation == Aggregation::Sum ? "sum" : "mean"; }

Aggregation parse_aggregation(std::string_view text) {
  if (text == "sum") return Aggregation::Sum;
  if (text == "mean") return Aggregation::Mean;
  throw ConfigError("unknown aggregation '" + std::string(text) + "' (expected sum or mean)");
}

// ---------------------------------------------------------------------------
// Model

std::vector<Parameter*> GsimModel::parameters() {
  std::vector<Parameter*> out{&z};
  for (auto& w : relation_weights) out.push_back(&w);
  for (auto& layer : layers) {
    for (auto& head : layer.query)
      for (auto& p : head) out.push_back(&p);
    for (auto& head : layer.key)
      for (auto& p : head) out.push_back(&p);
    for (auto* p : {&layer.w1, &layer.b1, &layer.w2, &layer.b2}) out.push_back(p);
    for (auto* p : layer.gru.parameters()) out.push_back(p);
  }
  out.push_back(&type_length);
  return out;
}

std::vector<const Parameter*> GsimModel::parameters() const {
  auto mutable_params = const_cast<GsimModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t GsimModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void GsimModel::check_graph(const HeteroGraph& g) const {
  if (g.num_nodes() != num_nodes)
    throw DataError("model was built for " + std::to_string(num_nodes) + " nodes, graph has " +
                    std::to_string(g.num_nodes()));
  if (g.num_types() != type_names.size()) throw DataError("model and graph node types differ");
  for (std::size_t t = 0; t < type_names.size(); ++t)
    if (g.type_name(static_cast<TypeIndex>(t)) != type_names[t])
      throw DataError("model type '" + type_names[t] + "' does not match graph type '" +
                      g.type_name(static_cast<TypeIndex>(t)) + "'");
  if (g.num_relations() != relations.size()) throw DataError("model and graph relations differ");
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const auto& a = relations[r];
    const auto& b = g.relation(static_cast<RelationIndex>(r));
    if (a.name != b.name || a.src_type != b.src_type || a.dst_type != b.dst_type)
      throw DataError("model relation '" + a.name + "' does not match graph relation '" + b.name + "'");
  }
}

GsimModel init_model(const HeteroGraph& g, const TrainConfig& cfg) {
  std::vector<std::string> type_names;
  for (std::size_t t = 0; t < g.num_types(); ++t) type_names.push_back(g.type_name(static_cast<TypeIndex>(t)));
  std::vector<RelationInfo> relations;
  for (std::size_t r = 0; r < g.num_relations(); ++r) relations.push_back(g.relation(static_cast<RelationIndex>(r)));
  return init_model(cfg, g.num_nodes(), std::move(type_names), std::move(relations));
}

GsimModel init_model(const TrainConfig& cfg, std::size_t num_nodes, std::vector<std::string> type_names,
                     std::vector<RelationInfo> relations) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const Eigen::Index d = cfg.dim;
  const auto types = type_names.size();

  GsimModel m;
  m.config = cfg;
  m.num_nodes = num_nodes;
  m.type_names = std::move(type_names);
  m.relations = std::move(relations);

  m.z = Parameter("z", xavier_uniform(static_cast<Eigen::Index>(num_nodes), d, rng));
  for (std::size_t r = 0; r < m.relations.size(); ++r)
    m.relation_weights.emplace_back("relation." + std::to_string(r), xavier_uniform(2 * d, d, rng));

  m.layers.resize(static_cast<std::size_t>(cfg.max_length));
  for (int l = 0; l < cfg.max_length; ++l) {
    auto& layer = m.layers[static_cast<std::size_t>(l)];
    const auto prefix = "layer" + std::to_string(l) + ".";
    layer.query.resize(static_cast<std::size_t>(cfg.heads));
    layer.key.resize(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
      for (std::size_t t = 0; t < types; ++t) {
        const auto suffix = std::to_string(h) + "." + std::to_string(t);
        layer.query[h].emplace_back(prefix + "query." + suffix, xavier_uniform(d, d, rng));
        layer.key[h].emplace_back(prefix + "key." + suffix, xavier_uniform(d, d, rng));
      }
    }
    layer.w1 = Parameter(prefix + "w1", xavier_uniform(d, d, rng));
    layer.b1 = Parameter(prefix + "b1", Matrix::Zero(1, d));
    layer.w2 = Parameter(prefix + "w2", xavier_uniform(cfg.heads * d, d, rng));
    layer.b2 = Parameter(prefix + "b2", Matrix::Zero(1, d));
    layer.gru = GruCell(prefix + "gru", d, rng);
  }
  m.type_length = Parameter("type_length", Matrix::Ones(static_cast<Eigen::Index>(types), cfg.max_length));
  return m;
}

// ---------------------------------------------------------------------------
// Graph operators

namespace {

// |rows| x n with a single 1 per row at column rows[i].
SparseMatrix selection(std::span<const NodeIndex> rows, Eigen::Index n) {
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t i = 0; i < rows.size(); ++i) entries.emplace_back(static_cast<Eigen::Index>(i), rows[i], 1.0);
  SparseMatrix m(static_cast<Eigen::Index>(rows.size()), n);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

}  // namespace

GraphOperators::GraphOperators(const HeteroGraph& g) : num_nodes_(g.num_nodes()) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const auto types = g.num_types();
  const auto relations = g.num_relations();

  members_.resize(types);
  for (std::size_t t = 0; t < types; ++t) {
    const auto m = g.nodes_of_type(static_cast<TypeIndex>(t));
    members_[t].assign(m.begin(), m.end());
  }

  std::vector<std::vector<Eigen::Triplet<double>>> adjacency_entries(relations);
  Eigen::VectorXd in_counts = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::VectorXd> rel_counts(relations, Eigen::VectorXd::Zero(n));
  for (const auto& e : g.edges()) {
    adjacency_entries[e.relation].emplace_back(e.dst, e.src, 1.0);
    rel_counts[e.relation][e.dst] += 1.0;
    in_counts[e.dst] += 1.0;
  }

  relations_into_.resize(types);
  source_types_.resize(types);
  for (std::size_t r = 0; r < relations; ++r) {
    const auto& info = g.relation(static_cast<RelationIndex>(r));
    relation_source_.push_back(info.src_type);
    relation_target_.push_back(info.dst_type);

    SparseMatrix adj(n, n);
    adj.setFromTriplets(adjacency_entries[r].begin(), adjacency_entries[r].end());
    adjacency_.push_back(std::move(adj));
    SparseMatrix deg(n, n);
    std::vector<Eigen::Triplet<double>> diag;
    for (Eigen::Index i = 0; i < n; ++i)
      if (rel_counts[r][i] > 0.0) diag.emplace_back(i, i, rel_counts[r][i]);
    deg.setFromTriplets(diag.begin(), diag.end());
    in_degree_.push_back(std::move(deg));

    const auto& targets = members_[info.dst_type];
    SparseMatrix rows = selection(targets, n);
    target_adjacency_.push_back(rows * adjacency_.back());
    target_in_degree_.push_back(rows * in_degree_.back());

    // Relations without edges carry no messages and take no attention.
    if (adjacency_entries[r].empty()) continue;
    relations_into_[info.dst_type].push_back(static_cast<RelationIndex>(r));
    auto& sources = source_types_[info.dst_type];
    if (std::find(sources.begin(), sources.end(), info.src_type) == sources.end()) sources.push_back(info.src_type);
  }
  for (auto& s : source_types_) std::sort(s.begin(), s.end());
  for (const auto& m : members_) scatter_.push_back(SparseMatrix(selection(m, n).transpose()));

  has_in_edges_ = (in_counts.array() > 0.0).cast<double>().matrix();
  inverse_in_degree_ = in_counts.unaryExpr([](double c) { return c > 0.0 ? 1.0 / c : 0.0; });
  type_indicator_ = Matrix::Zero(n, static_cast<Eigen::Index>(types));
  for (Eigen::Index i = 0; i < n; ++i) type_indicator_(i, g.node_type(static_cast<NodeIndex>(i))) = 1.0;
}

std::size_t GraphOperators::stored_entries() const {
  std::size_t total = 0;
  for (const auto& a : adjacency_) total += static_cast<std::size_t>(a.nonZeros());
  for (const auto& a : in_degree_) total += static_cast<std::size_t>(a.nonZeros());
  for (const auto* group : {&target_adjacency_, &target_in_degree_, &scatter_})
    for (const auto& a : *group) total += static_cast<std::size_t>(a.nonZeros());
  total += static_cast<std::size_t>(has_in_edges_.size() + inverse_in_degree_.size() + type_indicator_.size());
  return total;
}

// ---------------------------------------------------------------------------
// Layers

Tensor graph_encoder(const Tensor& contexts, std::span<const NodeIndex> members, double dropout,
                     std::mt19937_64* rng) {
  if (members.empty()) throw DataError("graph encoder over a node type with no nodes");
  std::vector<double> weights(static_cast<std::size_t>(contexts.rows()), 0.0);
  std::size_t kept = 0;
  if (rng && dropout > 0.0) {
    std::bernoulli_distribution keep(1.0 - dropout);
    for (const auto v : members) {
      if (keep(*rng)) {
        weights[static_cast<std::size_t>(v)] = 1.0;
        ++kept;
      }
    }
  }
  if (kept == 0)
    for (const auto v : members) weights[static_cast<std::size_t>(v)] = 1.0;
  return masked_mean_rows(contexts, weights);
}

Tensor relation_attention(Tape& tape, std::span<const Tensor> summaries, TypeIndex target,
                          std::span<const TypeIndex> sources, LayerWeights& layer, int head, int dim) {
  if (sources.empty()) throw DataError("relation attention for a type without incoming relations");
  const auto query = matmul(summaries[target], tape.parameter(layer.query[head][target]));
  std::vector<Tensor> logits;
  logits.reserve(sources.size());
  for (const auto s : sources) {
    const auto key = matmul(summaries[s], tape.parameter(layer.key[head][s]));
    logits.push_back(inner_product(query, key));
  }
  return row_softmax(scale(concat_cols(logits), 1.0 / std::sqrt(static_cast<double>(dim))));
}

Tensor relation_message(Tape& tape, const Tensor& c_i, const Tensor& c_j, Parameter& w_r) {
  return matmul(concat_cols({c_i, c_j}), tape.parameter(w_r));
}

LayerOutput layer_forward(Tape& tape, const Tensor& previous, const GraphOperators& ops, GsimModel& model,
                          int layer_index, const ForwardOptions& options, std::mt19937_64* rng) {
  const auto& cfg = model.config;
  auto& layer = model.layers.at(static_cast<std::size_t>(layer_index));
  const auto n = static_cast<Eigen::Index>(ops.num_nodes());
  const auto types = ops.num_types();
  if (previous.rows() != n || previous.cols() != cfg.dim)
    throw ShapeError("layer_forward: context shape does not match the model");

  const bool need_summaries = !options.fixed_attention.has_value();
  std::vector<Tensor> summaries(types);
  if (need_summaries) {
    const double dropout = options.train ? cfg.node_dropout : 0.0;
    for (std::size_t t = 0; t < types; ++t)
      if (!ops.members(static_cast<TypeIndex>(t)).empty())
        summaries[t] = graph_encoder(previous, ops.members(static_cast<TypeIndex>(t)), dropout,
                                     options.train ? rng : nullptr);
  }

  // Sum over in-neighbors j (relation r) of W_r [c_i || c_j]
  //   = [deg_r(i) c_i || sum_j c_j] W_r,
  // computed only for rows of the relation's target type.
  std::vector<Tensor> messages(ops.num_relations());
  for (std::size_t r = 0; r < ops.num_relations(); ++r) {
    const auto rel = static_cast<RelationIndex>(r);
    if (ops.adjacency(rel).nonZeros() == 0) continue;
    const auto self = spmm(ops.target_in_degree(rel), previous);
    const auto neighbors = spmm(ops.target_adjacency(rel), previous);
    messages[r] = matmul(concat_cols({self, neighbors}), tape.parameter(model.relation_weights[r]));
  }

  LayerOutput out;
  const auto w1 = tape.parameter(layer.w1);
  const auto b1 = tape.parameter(layer.b1);
  std::vector<Tensor> head_outputs;
  for (int h = 0; h < cfg.heads; ++h) {
    Matrix attention = Matrix::Zero(static_cast<Eigen::Index>(types), static_cast<Eigen::Index>(types));
    Tensor aggregate;
    for (std::size_t t = 0; t < types; ++t) {
      const auto target = static_cast<TypeIndex>(t);
      const auto sources = ops.source_types(target);
      if (sources.empty() || ops.members(target).empty()) continue;

      Tensor weights;
      if (options.fixed_attention) {
        weights = tape.constant(Matrix::Constant(1, static_cast<Eigen::Index>(sources.size()), *options.fixed_attention));
      } else {
        weights = relation_attention(tape, summaries, target, sources, layer, h, cfg.dim);
      }
      for (std::size_t s = 0; s < sources.size(); ++s) attention(sources[s], target) = weights.value()(0, static_cast<Eigen::Index>(s));
      if (!weights.value().allFinite())
        throw NumericError("non-finite relation attention at layer " + std::to_string(layer_index + 1) + ", head " +
                           std::to_string(h + 1));

      Tensor block;
      for (const auto r : ops.relations_into(target)) {
        const auto position = std::lower_bound(sources.begin(), sources.end(), ops.relation_source(r)) - sources.begin();
        const auto term = scalar_mul(slice_col(weights, position), messages[static_cast<std::size_t>(r)]);
        block = block.valid() ? add(block, term) : term;
      }
      const auto placed = spmm(ops.scatter(target), block);
      aggregate = aggregate.valid() ? add(aggregate, placed) : placed;
    }
    out.attention.heads.push_back(std::move(attention));

    if (!aggregate.valid()) aggregate = tape.constant(Matrix::Zero(n, cfg.dim));
    if (options.aggregation == Aggregation::Mean)
      aggregate = row_scale(aggregate, tape.constant(ops.inverse_in_degree()));
    auto hidden = add(matmul(aggregate, w1), b1);
    if (options.activation == Activation::Relu) hidden = relu(hidden);
    head_outputs.push_back(hidden);
  }

  auto candidate = add(matmul(concat_cols(head_outputs), tape.parameter(layer.w2)), tape.parameter(layer.b2));
  // Nodes without in-edges receive no context: their candidate is zero.
  candidate = row_scale(candidate, tape.constant(ops.has_in_edges()));
  if (!candidate.value().allFinite())
    throw NumericError("non-finite context vectors at layer " + std::to_string(layer_index + 1));

  out.context = options.use_gru ? layer.gru.forward(tape, previous, candidate) : candidate;
  return out;
}

ForwardResult forward_all(Tape& tape, const GraphOperators& ops, GsimModel& model, const ForwardOptions& options,
                          std::mt19937_64* rng) {
  if (model.num_nodes != ops.num_nodes()) throw DataError("model and graph node counts differ");
  ForwardResult result;
  auto context = tape.parameter(model.z);
  for (int l = 0; l < model.config.max_length; ++l) {
    auto layer = layer_forward(tape, context, ops, model, l, options, rng);
    context = layer.context;
    result.contexts.push_back(layer.context);
    result.attention.push_back(std::move(layer.attention));
  }
  return result;
}

Tensor type_length_combine(Tape& tape, std::span<const Tensor> contexts, const GraphOperators& ops,
                           GsimModel& model) {
  if (contexts.empty() || static_cast<Eigen::Index>(contexts.size()) > model.type_length.value.cols())
    throw ShapeError("type_length_combine: expected between 1 and K context tensors");
  // Row i of `per_node` holds alpha_{type(i)}^1..K.
  const auto per_node = matmul(tape.constant(ops.type_indicator()), tape.parameter(model.type_length));
  Tensor combined;
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    const auto term = row_scale(contexts[k], slice_col(per_node, static_cast<Eigen::Index>(k)));
    combined = combined.valid() ? add(combined, term) : term;
  }
  return combined;
}

ForwardOptions training_options(const TrainConfig& cfg, bool train) {
  ForwardOptions options;
  options.train = train;
  options.aggregation = cfg.aggregation;
  return options;
}

Matrix embed(const GraphOperators& ops, GsimModel& model) {
  Tape tape;
  const auto forward = forward_all(tape, ops, model, training_options(model.config, false));
  return type_length_combine(tape, forward.contexts, ops, model).value();
}

double relevance(const Matrix& embeddings, NodeIndex vi, NodeIndex vj) {
  if (vi < 0 || vj < 0 || vi >= embeddings.rows() || vj >= embeddings.rows())
    throw DataError("relevance query for an unknown node");
  const double x = embeddings.row(vi).dot(embeddings.row(vj));
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

RelevanceMatrix relevance_matrix(const Matrix& embeddings, std::span<const NodeIndex> nodes) {
  RelevanceMatrix m;
  m.nodes.assign(nodes.begin(), nodes.end());
  const auto n = static_cast<Eigen::Index>(nodes.size());
  m.scores.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) m.scores(i, j) = m.scores(j, i) = relevance(embeddings, nodes[i], nodes[j]);
  return m;
}

// ---------------------------------------------------------------------------
// Losses

Tensor loss_supervised(Tape& tape, const Tensor& embeddings, const LabelTable& labels,
                       std::span<const NodeIndex> nodes, SupervisedLoss form) {
  std::vector<Eigen::Index> columns;
  for (const auto v : nodes)
    if (labels.labeled(v)) columns.push_back(v);

  std::vector<Eigen::Index> rows;
  std::vector<std::pair<std::size_t, std::size_t>> counts;  // (positives, negatives)
  for (std::size_t i = 0; i < columns.size(); ++i) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (i == j) continue;
      (labels.labels[columns[i]] == labels.labels[columns[j]] ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) continue;
    rows.push_back(static_cast<Eigen::Index>(i));
    counts.emplace_back(pos, neg);
  }
  if (rows.empty()) return tape.constant(Matrix::Zero(1, 1));

  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(columns.size());
  Matrix positive = Matrix::Zero(m, c), negative = Matrix::Zero(m, c);
  std::vector<Eigen::Index> row_nodes;
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto i = rows[a];
    row_nodes.push_back(columns[i]);
    for (Eigen::Index j = 0; j < c; ++j) {
      if (j == i) continue;
      if (labels.labels[columns[i]] == labels.labels[columns[j]])
        positive(a, j) = 1.0 / static_cast<double>(counts[a].first);
      else
        negative(a, j) = 1.0 / static_cast<double>(counts[a].second);
    }
  }

  const auto h_rows = gather_rows(embeddings, row_nodes);
  const auto h_cols = gather_rows(embeddings, columns);
  const auto logits = matmul(h_rows, transpose(h_cols));
  // log mean S over a set = weighted logsumexp of log sigmoid; 1 - S = sigmoid(-x).
  const auto log_positive = weighted_logsumexp_rows(log_sigmoid(logits), positive);
  const auto log_unrelated = weighted_logsumexp_rows(log_sigmoid(scale(logits, -1.0)), negative);
  if (form == SupervisedLoss::Separated) return scale(sum(add(log_positive, log_unrelated)), -1.0);
  return scale(sum(sub(log_positive, log_unrelated)), -1.0);
}

Tensor loss_self(Tape& tape, const Tensor& embeddings) {
  (void)tape;
  const auto self = row_sum(mul(embeddings, embeddings));
  return add_scalar(scale(mean(sigmoid(self)), -1.0), 1.0);
}

// ---------------------------------------------------------------------------
// Training

double mean_recall_at(const Matrix& embeddings, const LabelTable& labels, std::span<const NodeIndex> queries,
                      std::size_t n) {
  if (queries.empty() || n == 0) return 0.0;
  const auto rows = embeddings.rows();
  const auto take = std::min<std::size_t>(n, static_cast<std::size_t>(rows));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
  double total = 0.0;
  for (const auto q : queries) {
    const Eigen::VectorXd scores = embeddings * embeddings.row(q).transpose();
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        if ((a == q) != (b == q)) return a == q;
                        return a < b;
                      });
    std::size_t hits = 0;
    for (std::size_t i = 0; i < take; ++i)
      if (labels.labels[static_cast<std::size_t>(order[i])] == labels.labels[static_cast<std::size_t>(q)]) ++hits;
    total += static_cast<double>(hits) / static_cast<double>(n);
  }
  return total / static_cast<double>(queries.size());
}

namespace {

std::vector<Matrix> snapshot(GsimModel& model) {
  std::vector<Matrix> values;
  for (const auto* p : model.parameters()) values.push_back(p->value);
  return values;
}

void restore(GsimModel& model, const std::vector<Matrix>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

Tensor objective(Tape& tape, const Tensor& h, const LabelTable& labels, std::span<const NodeIndex> nodes,
                 const TrainConfig& cfg, double* supervised, double* self) {
  Tensor total;
  if (cfg.weight_supervised > 0.0) {
    const auto ls = loss_supervised(tape, h, labels, nodes, cfg.supervised_loss);
    if (supervised) *supervised = ls.item();
    total = scale(ls, cfg.weight_supervised);
  }
  if (cfg.weight_self > 0.0) {
    const auto lu = loss_self(tape, h);
    if (self) *self = lu.item();
    const auto term = scale(lu, cfg.weight_self);
    total = total.valid() ? add(total, term) : term;
  }
  return total;
}

}  // namespace

TrainResult train(const HeteroGraph& g, const LabelTable& labels, const TrainConfig& cfg,
                  const std::function<void(const EpochReport&)>& on_epoch) {
  cfg.validate();
  if (labels.labels.size() != g.num_nodes()) throw DataError("label table does not match the graph");
  std::vector<NodeIndex> train_nodes, val_nodes;
  for (const auto v : labels.nodes_in(Split::Train))
    if (labels.labeled(v)) train_nodes.push_back(v);
  for (const auto v : labels.nodes_in(Split::Validation))
    if (labels.labeled(v)) val_nodes.push_back(v);
  if (train_nodes.empty()) throw DataError("the training split has no labeled nodes");

  const GraphOperators ops(g);
  TrainResult result{init_model(g, cfg), 0, {}};
  auto& model = result.model;
  auto trainable = model.parameters();
  if (!cfg.learn_features) trainable.erase(trainable.begin());  // z comes first
  Adam optimizer(trainable, AdamOptions{cfg.lr});

  double best = std::numeric_limits<double>::infinity();
  double best_recall = -1.0;
  std::vector<Matrix> best_values = snapshot(model);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);

    if (cfg.warmup_epochs > 0)
      optimizer.set_lr(cfg.lr * std::min(1.0, static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs)));

    EpochReport report;
    report.epoch = epoch;
    {
      Tape tape;
      const auto forward = forward_all(tape, ops, model, training_options(cfg, true), &rng);
      const auto h = type_length_combine(tape, forward.contexts, ops, model);
      const auto loss = objective(tape, h, labels, train_nodes, cfg, &report.loss_supervised, &report.loss_self);
      report.loss = loss.item();
      if (!std::isfinite(report.loss)) throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      optimizer.step();
      optimizer.zero_grad();
      model.z.zero_grad();
      report.forward = &forward;

      Tape eval_tape;
      const auto eval_forward = forward_all(eval_tape, ops, model, training_options(cfg, false));
      const auto eval_h = type_length_combine(eval_tape, eval_forward.contexts, ops, model);
      const auto& selection_nodes = val_nodes.empty() ? train_nodes : val_nodes;
      report.validation = objective(eval_tape, eval_h, labels, selection_nodes, cfg, nullptr, nullptr).item();
      report.validation_recall = mean_recall_at(eval_h.value(), labels, selection_nodes);

      if (on_epoch) on_epoch(report);
      report.forward = nullptr;
    }
    const bool better = report.validation_recall > best_recall ||
                        (report.validation_recall == best_recall && report.validation < best);
    if (better) {
      best_recall = report.validation_recall;
      best = report.validation;
      best_values = snapshot(model);
      result.best_epoch = epoch;
    }
    result.history.push_back(report);
    if (cfg.patience > 0 && epoch - result.best_epoch >= cfg.patience) break;
  }
  restore(model, best_values);
  return result;
}

}  // namespace hetrel
