#include "hetrel/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "hetrel/error.hpp"
#include "hetrel/eval.hpp"
#include "hetrel/graph.hpp"
#include "hetrel/gsim.hpp"
#include "hetrel/measures.hpp"
#include "hetrel/verify.hpp"

namespace hetrel {

std::map<std::string, std::string> read_config(const std::filesystem::path& path,
                                               const std::vector<std::string>& allowed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, std::string> values;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    const auto where = path.string() + ":" + std::to_string(number);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected `key = value`");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
    if (!values.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return values;
}

namespace {

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T out{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    throw ConfigError("bad value '" + text + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad boolean '" + text + "' for " + key);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("missing " + what);
  if (!std::filesystem::is_regular_file(path)) throw DataError(what + " '" + path + "' does not exist");
}

struct GraphArgs {
  std::string nodes, edges;
  bool directed = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--nodes", nodes, "node TSV: id, type, label");
    cmd->add_option("--edges", edges, "edge TSV: src, relation, dst");
    cmd->add_flag("--directed", directed, "do not add reverse edges");
  }

  HeteroGraph load() const {
    if (nodes.empty()) throw ConfigError("--nodes is required");
    if (edges.empty()) throw ConfigError("--edges is required");
    require_file(nodes, "nodes file");
    require_file(edges, "edges file");
    return load_graph(nodes, edges, !directed);
  }
};

// Writes to `path`, or to `fallback` when path is empty or "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
    } else {
      file_.open(path);
      if (!file_) throw DataError("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::string fixed(double x, int digits = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

struct EmbeddedModel {
  GsimModel model;
  Matrix embeddings;
};

EmbeddedModel embed_model(const std::string& path, const HeteroGraph& g) {
  require_file(path, "model file");
  auto model = load_model(path);
  model.check_graph(g);
  const GraphOperators ops(g);
  auto h = embed(ops, model);
  return {std::move(model), std::move(h)};
}

std::vector<std::pair<NodeIndex, NodeIndex>> parse_pairs(const HeteroGraph& g, const std::string& text) {
  std::vector<std::pair<NodeIndex, NodeIndex>> pairs;
  std::stringstream all(text);
  for (std::string item; std::getline(all, item, ';');) {
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw ConfigError("pair '" + item + "' is not of the form src,dst");
    pairs.emplace_back(g.node_index(item.substr(0, comma)), g.node_index(item.substr(comma + 1)));
  }
  if (pairs.empty()) throw ConfigError("--pairs lists no pairs");
  return pairs;
}

// ---------------------------------------------------------------------------
// train

const std::vector<std::string> kTrainKeys = {
    "nodes",      "edges",        "directed",          "out",         "metrics",         "attention_dir",
    "dim",        "max_length",   "heads",             "node_dropout", "lr",             "max_epochs",
    "seed",       "weight_supervised", "weight_self",  "supervised_loss", "learn_features",  "aggregation",
    "warmup_epochs", "patience"};

struct TrainArgs {
  GraphArgs graph;
  std::string config, out, metrics, attention_dir;
  std::optional<int> dim, max_length, heads, max_epochs, warmup_epochs, patience;
  std::optional<double> node_dropout, lr, weight_supervised, weight_self;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> supervised_loss, aggregation, learn_features;
  bool quiet = false;

  void add(CLI::App* cmd) {
    graph.add(cmd);
    cmd->add_option("--config", config, "key = value file; flags override it");
    cmd->add_option("--out", out, "model file to write");
    cmd->add_option("--metrics", metrics, "per-epoch metrics log (default <out>.metrics.tsv)");
    cmd->add_option("--attention-dir", attention_dir, "export final relation attention CSVs here");
    cmd->add_option("--seed", seed);
    cmd->add_option("--dim", dim);
    cmd->add_option("--max-length,-K", max_length);
    cmd->add_option("--heads", heads);
    cmd->add_option("--dropout", node_dropout);
    cmd->add_option("--lr", lr);
    cmd->add_option("--epochs", max_epochs);
    cmd->add_option("--weight-supervised", weight_supervised);
    cmd->add_option("--weight-self", weight_self);
    cmd->add_option("--supervised-loss", supervised_loss, "separated | literal");
    cmd->add_option("--aggregation", aggregation, "sum | mean");
    cmd->add_option("--learn-features", learn_features, "true | false: optimize the initial features Z");
    cmd->add_option("--warmup", warmup_epochs, "epochs of linear learning-rate warmup");
    cmd->add_option("--patience", patience, "stop after this many epochs without improvement (0: never)");
    cmd->add_flag("--quiet", quiet, "do not echo per-epoch losses");
  }
};

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  if (!a.config.empty()) {
    const auto file = read_config(a.config, kTrainKeys);
    auto get = [&](const char* key) -> const std::string* {
      const auto it = file.find(key);
      return it == file.end() ? nullptr : &it->second;
    };
    // Paths in the file are relative to the file itself.
    const auto base = std::filesystem::path(a.config).parent_path();
    auto resolve = [&](const std::string& p) { return (base / p).lexically_normal().string(); };
    if (auto v = get("nodes"); v && a.graph.nodes.empty()) a.graph.nodes = resolve(*v);
    if (auto v = get("edges"); v && a.graph.edges.empty()) a.graph.edges = resolve(*v);
    if (auto v = get("directed"); v && !a.graph.directed) a.graph.directed = parse_bool("directed", *v);
    if (auto v = get("out"); v && a.out.empty()) a.out = resolve(*v);
    if (auto v = get("metrics"); v && a.metrics.empty()) a.metrics = resolve(*v);
    if (auto v = get("attention_dir"); v && a.attention_dir.empty()) a.attention_dir = resolve(*v);
    if (auto v = get("dim")) cfg.dim = parse_value<int>("dim", *v);
    if (auto v = get("max_length")) cfg.max_length = parse_value<int>("max_length", *v);
    if (auto v = get("heads")) cfg.heads = parse_value<int>("heads", *v);
    if (auto v = get("node_dropout")) cfg.node_dropout = parse_value<double>("node_dropout", *v);
    if (auto v = get("lr")) cfg.lr = parse_value<double>("lr", *v);
    if (auto v = get("max_epochs")) cfg.max_epochs = parse_value<int>("max_epochs", *v);
    if (auto v = get("seed")) cfg.seed = parse_value<std::uint64_t>("seed", *v);
    if (auto v = get("weight_supervised")) cfg.weight_supervised = parse_value<double>("weight_supervised", *v);
    if (auto v = get("weight_self")) cfg.weight_self = parse_value<double>("weight_self", *v);
    if (auto v = get("supervised_loss")) cfg.supervised_loss = parse_supervised_loss(*v);
    if (auto v = get("learn_features")) cfg.learn_features = parse_bool("learn_features", *v);
    if (auto v = get("aggregation")) cfg.aggregation = parse_aggregation(*v);
    if (auto v = get("warmup_epochs")) cfg.warmup_epochs = parse_value<int>("warmup_epochs", *v);
    if (auto v = get("patience")) cfg.patience = parse_value<int>("patience", *v);
  }
  if (a.dim) cfg.dim = *a.dim;
  if (a.max_length) cfg.max_length = *a.max_length;
  if (a.heads) cfg.heads = *a.heads;
  if (a.node_dropout) cfg.node_dropout = *a.node_dropout;
  if (a.lr) cfg.lr = *a.lr;
  if (a.max_epochs) cfg.max_epochs = *a.max_epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.weight_supervised) cfg.weight_supervised = *a.weight_supervised;
  if (a.weight_self) cfg.weight_self = *a.weight_self;
  if (a.supervised_loss) cfg.supervised_loss = parse_supervised_loss(*a.supervised_loss);
  if (a.learn_features) cfg.learn_features = parse_bool("learn-features", *a.learn_features);
  if (a.aggregation) cfg.aggregation = parse_aggregation(*a.aggregation);
  if (a.warmup_epochs) cfg.warmup_epochs = *a.warmup_epochs;
  if (a.patience) cfg.patience = *a.patience;
  cfg.validate();
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.metrics.empty()) a.metrics = a.out + ".metrics.tsv";

  const auto g = a.graph.load();
  const auto labels = split_labels(g, cfg.seed);

  std::ofstream log(a.metrics);
  if (!log) throw DataError("cannot write " + a.metrics);
  const std::string header = "epoch\tloss\tloss_supervised\tloss_self\tvalidation\tval_recall@10";
  log << header << '\n';
  if (!a.quiet) out << header << '\n';
  auto result = train(g, labels, cfg, [&](const EpochReport& r) {
    const auto row = std::to_string(r.epoch) + '\t' + fixed(r.loss, 10) + '\t' + fixed(r.loss_supervised, 10) + '\t' +
                     fixed(r.loss_self, 10) + '\t' + fixed(r.validation, 10) + '\t' + fixed(r.validation_recall);
    log << row << '\n';
    if (!a.quiet) out << row << '\n';
  });
  save_model(result.model, a.out);

  const GraphOperators ops(g);
  const auto forward_attention = [&] {
    Tape tape;
    return forward_all(tape, ops, result.model, training_options(result.model.config, false)).attention;
  }();
  const auto h = embed(ops, result.model);
  double recall = 0.0;
  std::size_t queries = 0;
  for (const auto q : labels.nodes_in(Split::Validation)) {
    if (!labels.labeled(q)) continue;
    const auto hits = top_k_search(g, [&](NodeIndex i, NodeIndex j) { return relevance(h, i, j); }, q, 10);
    recall += recall_at_n(hits, q, labels, 10);
    ++queries;
  }
  const std::string summary = "# best_epoch\t" + std::to_string(result.best_epoch) + "\n# val_recall@10\t" +
                              (queries ? fixed(recall / static_cast<double>(queries)) : std::string("nan")) + '\n';
  log << summary;
  out << summary;
  if (!a.attention_dir.empty()) {
    const auto files = export_attention(forward_attention, result.model.type_names, a.attention_dir);
    out << "# attention files\t" << files.size() << '\n';
  }
  if (!log) throw DataError("failed writing " + a.metrics);
  (void)err;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// measure

struct MeasureArgs {
  GraphArgs graph;
  std::string method, metapath, pairs, model, out;
  int k = 2;
  double decay = 0.8;
  int iterations = 10;
  bool unnormalized = false;

  void add(CLI::App* cmd) {
    graph.add(cmd);
    cmd->add_option("--method", method, "simrank | hetesim | prw | gsim")->required();
    cmd->add_option("--metapath", metapath, "e.g. A-writes-P-writes^-1-A (hetesim)");
    cmd->add_option("--pairs", pairs, "src,dst;src,dst");
    cmd->add_option("--k", k, "total walk length for prw (even)");
    cmd->add_option("--model", model, "model file (gsim)");
    cmd->add_option("--decay", decay, "SimRank decay");
    cmd->add_option("--iterations", iterations, "SimRank iterations");
    cmd->add_flag("--unnormalized", unnormalized, "raw HeteSim meeting probability");
    cmd->add_option("--out", out, "output file (default stdout)");
  }
};

int cmd_measure(const MeasureArgs& a, std::ostream& out) {
  if (a.method != "simrank" && a.method != "hetesim" && a.method != "prw" && a.method != "gsim")
    throw ConfigError("unknown method '" + a.method + "'");
  if (a.method == "hetesim" && a.metapath.empty()) throw ConfigError("--method hetesim requires --metapath");
  if (a.method == "gsim" && a.model.empty()) throw ConfigError("--method gsim requires --model");
  if (a.method == "prw" && (a.k < 0 || a.k % 2 != 0)) throw ConfigError("--k must be a non-negative even length");

  const auto g = a.graph.load();
  std::optional<MetaPath> path;
  if (a.method == "hetesim") path = parse_metapath(g, a.metapath);
  std::optional<EmbeddedModel> model;
  if (a.method == "gsim") model = embed_model(a.model, g);
  std::optional<RelevanceMatrix> sim;
  if (a.method == "simrank") sim = simrank(g, a.decay, a.iterations);

  auto score = [&](NodeIndex i, NodeIndex j) -> double {
    if (a.method == "hetesim") return hetesim(g, i, j, *path, !a.unnormalized);
    if (a.method == "prw") return prw_brute(g, i, j, a.k);
    if (a.method == "gsim") return relevance(model->embeddings, i, j);
    return sim->scores(i, j);
  };

  Output o(a.out, out);
  if (!a.pairs.empty()) {
    const auto pairs = parse_pairs(g, a.pairs);
    *o << "src\tdst\tscore\n";
    for (const auto& [i, j] : pairs) *o << g.node_id(i) << '\t' << g.node_id(j) << '\t' << fixed(score(i, j)) << '\n';
    return kExitOk;
  }

  RelevanceMatrix m;
  if (a.method == "simrank") {
    m = std::move(*sim);
  } else if (a.method == "hetesim") {
    m = hetesim_matrix(g, *path, !a.unnormalized);
  } else if (a.method == "gsim") {
    std::vector<NodeIndex> all(g.num_nodes());
    for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<NodeIndex>(v);
    m = relevance_matrix(model->embeddings, all);
  } else {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    Eigen::MatrixXd visits(n, n);
    for (Eigen::Index v = 0; v < n; ++v)
      visits.row(v) = rw_visit_prob(g, static_cast<NodeIndex>(v), a.k / 2).probabilities.transpose();
    m.nodes.resize(g.num_nodes());
    for (std::size_t v = 0; v < m.nodes.size(); ++v) m.nodes[v] = static_cast<NodeIndex>(v);
    m.scores = visits * visits.transpose();
  }
  write_relevance_csv(*o, m, g);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
  GraphArgs graph;
  std::string model, query, type, out;
  int top = 10;
  bool exclude_self = false;

  void add(CLI::App* cmd) {
    graph.add(cmd);
    cmd->add_option("--model", model, "model file")->required();
    cmd->add_option("--query", query, "query node id")->required();
    cmd->add_option("--top", top, "number of results");
    cmd->add_option("--type", type, "restrict results to one node type");
    cmd->add_flag("--exclude-self", exclude_self, "drop the query from the results");
    cmd->add_option("--out", out, "output file (default stdout)");
  }
};

int cmd_search(const SearchArgs& a, std::ostream& out, std::ostream& err) {
  if (a.top < 1) throw ConfigError("--top must be at least 1");
  const auto g = a.graph.load();
  const auto q = g.node_index(a.query);
  SearchOptions options;
  options.exclude_self = a.exclude_self;
  if (!a.type.empty()) options.type_filter = g.type_index(a.type);
  const auto model = embed_model(a.model, g);
  const auto n = static_cast<std::size_t>(a.top);
  const auto hits = top_k_search(g, [&](NodeIndex i, NodeIndex j) { return relevance(model.embeddings, i, j); }, q, n,
                                 options);
  Output o(a.out, out);
  write_search_tsv(*o, g, hits);
  if (hits.short_list) err << "warning: only " << hits.hits.size() << " candidates for " << n << " requested\n";
  if (g.label(q) != kUnlabeled) {
    LabelTable labels;
    for (std::size_t v = 0; v < g.num_nodes(); ++v) labels.labels.push_back(g.label(static_cast<NodeIndex>(v)));
    *o << "# recall@" << n << '\t' << fixed(recall_at_n(hits, q, labels, n)) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// cluster

struct ClusterArgs {
  GraphArgs graph;
  std::string model, matrix, out;
  int k = 0;
  std::uint64_t seed = 0;
  bool metrics = false;
  bool all = false;

  void add(CLI::App* cmd) {
    graph.add(cmd);
    cmd->add_option("--model", model, "model file");
    cmd->add_option("--matrix", matrix, "relevance matrix CSV");
    cmd->add_option("--k", k, "number of clusters")->required();
    cmd->add_option("--seed", seed, "k-means seed");
    cmd->add_flag("--metrics", metrics, "score the partition against node labels");
    cmd->add_flag("--all", all, "cluster every node instead of the test split");
    cmd->add_option("--out", out, "partition TSV (default stdout)");
  }
};

int cmd_cluster(const ClusterArgs& a, std::ostream& out, std::ostream& err) {
  if (a.model.empty() == a.matrix.empty()) throw ConfigError("give exactly one of --model and --matrix");
  if (a.k < 2) throw ConfigError("--k must be at least 2");
  const auto g = a.graph.load();

  RelevanceMatrix m;
  if (!a.matrix.empty()) {
    require_file(a.matrix, "matrix file");
    m = import_relevance_matrix(g, a.matrix);
  } else {
    const auto model = embed_model(a.model, g);
    std::vector<NodeIndex> nodes;
    if (!a.all) nodes = split_labels(g, model.model.config.seed).nodes_in(Split::Test);
    if (nodes.empty()) {
      if (!a.all) err << "warning: no test split (graph has no labels); clustering every node\n";
      for (std::size_t v = 0; v < g.num_nodes(); ++v) nodes.push_back(static_cast<NodeIndex>(v));
    }
    m = relevance_matrix(model.embeddings, nodes);
  }
  if (static_cast<std::size_t>(a.k) > m.size())
    throw ConfigError("--k " + std::to_string(a.k) + " exceeds the " + std::to_string(m.size()) + " nodes to cluster");

  const auto partition = spectral_clustering(m, a.k, a.seed);
  for (const auto v : partition.isolated)
    err << "warning: node '" << g.node_id(v) << "' has no affinity; assigned to the nearest centroid\n";
  {
    Output o(a.out, out);
    *o << "node_id\tcluster\n";
    for (std::size_t i = 0; i < partition.nodes.size(); ++i)
      *o << g.node_id(partition.nodes[i]) << '\t' << partition.assignment[i] << '\n';
  }
  if (a.metrics) {
    LabelTable labels;
    for (std::size_t v = 0; v < g.num_nodes(); ++v) labels.labels.push_back(g.label(static_cast<NodeIndex>(v)));
    bool any = false;
    for (const auto v : partition.nodes) any = any || labels.labeled(v);
    if (!any) {
      err << "warning: no labeled nodes to score; partition only\n";
    } else {
      const auto s = clustering_metrics(partition, labels);
      out << "# F\t" << fixed(s.f_score) << "\n# NMI\t" << fixed(s.nmi) << "\n# ARI\t" << fixed(s.ari)
          << "\n# Purity\t" << fixed(s.purity) << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  int theorem = 0;
  int trials = 50;
  std::optional<std::size_t> max_nodes;
  std::uint64_t seed = 0;
  int max_k = 3;
  std::string dump = "verify-failure";

  void add(CLI::App* cmd) {
    cmd->add_option("--theorem", theorem, "1, 2 or 3")->required();
    cmd->add_option("--trials", trials, "random graphs per run");
    cmd->add_option("--max-nodes", max_nodes, "largest graph (theorems 1-2, at most 12); node count for theorem 3 (default 50)");
    cmd->add_option("--seed", seed);
    cmd->add_option("--max-k", max_k, "walk lengths 1..max-k");
    cmd->add_option("--dump", dump, "directory for the failing graph");
  }
};

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  VerifyOptions options;
  options.trials = a.trials;
  options.seed = a.seed;
  options.max_walk = a.max_k;
  options.max_nodes = a.max_nodes.value_or(a.theorem == 3 ? 50 : kVerifyMaxNodes);
  const auto report = verify_theorem(a.theorem, options);
  out << "theorem " << report.theorem << ": " << (report.passed ? "PASS" : "FAIL") << "\tchecks " << report.checks;
  if (report.theorem != 3) {
    std::ostringstream dev;
    dev << std::scientific << std::setprecision(3) << report.max_deviation;
    out << "\tmax_deviation " << dev.str();
  }
  out << '\n';
  if (!report.detail.empty()) out << "# " << report.detail << '\n';
  if (report.passed) return kExitOk;
  if (report.failing_graph) {
    std::filesystem::create_directories(a.dump);
    const auto nodes = std::filesystem::path(a.dump) / "nodes.tsv";
    const auto edges = std::filesystem::path(a.dump) / "edges.tsv";
    write_graph(*report.failing_graph, nodes, edges);
    err << "failing graph written to " << nodes.string() << " and " << edges.string() << '\n';
  }
  return kExitVerification;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relevance measures for heterogeneous graphs", "hetrel"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  TrainArgs train_args;
  MeasureArgs measure_args;
  SearchArgs search_args;
  ClusterArgs cluster_args;
  VerifyArgs verify_args;
  auto* train_cmd = app.add_subcommand("train", "train a GSim model");
  train_args.add(train_cmd);
  auto* measure_cmd = app.add_subcommand("measure", "score node pairs with a relevance measure");
  measure_args.add(measure_cmd);
  auto* search_cmd = app.add_subcommand("search", "top-N relevance search with a trained model");
  search_args.add(search_cmd);
  auto* cluster_cmd = app.add_subcommand("cluster", "spectral clustering of a relevance matrix");
  cluster_args.add(cluster_cmd);
  auto* verify_cmd = app.add_subcommand("verify", "randomized checks of the walk/GNN equivalences");
  verify_args.add(verify_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out, err);
    if (*measure_cmd) return cmd_measure(measure_args, out);
    if (*search_cmd) return cmd_search(search_args, out, err);
    if (*cluster_cmd) return cmd_cluster(cluster_args, out, err);
    if (*verify_cmd) return cmd_verify(verify_args, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\nrun 'hetrel " << app.get_subcommands().front()->get_name()
        << " --help' for usage\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace hetrel
