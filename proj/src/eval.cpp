#include "hetrel/eval.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace hetrel {

namespace {

// Ties go to the query itself, then to the lower node index.
SearchResult rank_candidates(std::vector<SearchHit> candidates, NodeIndex q, std::size_t n) {
  std::sort(candidates.begin(), candidates.end(), [q](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    if ((a.node == q) != (b.node == q)) return a.node == q;
    return a.node < b.node;
  });
  SearchResult result;
  result.short_list = candidates.size() < n;
  if (candidates.size() > n) candidates.resize(n);
  result.hits = std::move(candidates);
  return result;
}

bool admitted(const HeteroGraph& g, NodeIndex v, NodeIndex q, const SearchOptions& options) {
  if (options.exclude_self && v == q) return false;
  return !options.type_filter || g.node_type(v) == *options.type_filter;
}

}  // namespace

SearchResult top_k_search(const HeteroGraph& g, const Scorer& score, NodeIndex q, std::size_t n,
                          const SearchOptions& options) {
  g.node_id(q);
  std::vector<SearchHit> candidates;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const auto node = static_cast<NodeIndex>(v);
    if (admitted(g, node, q, options)) candidates.push_back({node, score(q, node)});
  }
  return rank_candidates(std::move(candidates), q, n);
}

SearchResult top_k_search(const HeteroGraph& g, const RelevanceMatrix& m, NodeIndex q, std::size_t n,
                          const SearchOptions& options) {
  const auto row = m.position(q);
  if (row < 0) throw DataError("query node is not in the relevance matrix");
  std::vector<SearchHit> candidates;
  for (std::size_t j = 0; j < m.nodes.size(); ++j)
    if (admitted(g, m.nodes[j], q, options))
      candidates.push_back({m.nodes[j], m.scores(row, static_cast<Eigen::Index>(j))});
  return rank_candidates(std::move(candidates), q, n);
}

double recall_at_n(const SearchResult& result, NodeIndex q, const LabelTable& labels, std::size_t n) {
  if (n == 0) throw DataError("recall@N needs N >= 1");
  if (!labels.labeled(q)) throw DataError("recall@N needs a labeled query");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(n, result.hits.size()); ++i) {
    const auto v = result.hits[i].node;
    hits += labels.labeled(v) && labels.labels[v] == labels.labels[q];
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

void write_search_tsv(std::ostream& out, const HeteroGraph& g, const SearchResult& result) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "rank\tnode_id\tscore\tlabel\n";
  for (std::size_t i = 0; i < result.hits.size(); ++i) {
    const auto v = result.hits[i].node;
    const auto label = g.label(v);
    out << i + 1 << '\t' << g.node_id(v) << '\t' << std::fixed << std::setprecision(6) << result.hits[i].score
        << '\t' << (label == kUnlabeled ? std::string("-") : g.label_name(label)) << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

// ---------------------------------------------------------------------------

namespace {

struct LloydResult {
  std::vector<int> assignment;
  Eigen::MatrixXd centroids;
  double inertia;
};

LloydResult lloyd(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const auto n = x.rows();
  Eigen::MatrixXd c(k, x.cols());

  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  c.row(0) = x.row(first(rng));
  Eigen::VectorXd nearest = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    Eigen::Index pick = 0;
    const double total = nearest.sum();
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc >= target && nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    c.row(j) = x.row(pick);
    nearest = nearest.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  double inertia = 0.0;
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    inertia = 0.0;
    Eigen::VectorXd distance(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      const double d = (c.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      distance[i] = d;
      inertia += d;
      if (assignment[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += x.row(i);
      counts[assignment[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0.0) {
        c.row(j) = sums.row(j) / counts[j];
      } else {
        // Empty cluster: move it to the point farthest from its centroid.
        Eigen::Index far = 0;
        distance.maxCoeff(&far);
        c.row(j) = x.row(far);
        distance[far] = 0.0;
      }
    }
  }
  return {std::move(assignment), std::move(c), inertia};
}

// Cluster ids in order of first appearance, so equal partitions compare equal.
std::vector<int> canonical(const std::vector<int>& assignment) {
  std::map<int, int> relabel;
  std::vector<int> out;
  out.reserve(assignment.size());
  for (const auto a : assignment) out.push_back(relabel.try_emplace(a, static_cast<int>(relabel.size())).first->second);
  return out;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts) {
  if (k < 1 || k > points.rows()) throw DataError("k-means needs 1 <= k <= number of points");
  if (restarts < 1) throw DataError("k-means needs at least one restart");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    auto run = lloyd(points, k, rng);
    if (run.inertia < best.inertia) {
      best.assignment = std::move(run.assignment);
      best.centroids = std::move(run.centroids);
      best.inertia = run.inertia;
    }
  }
  return best;
}

Partition spectral_clustering(const RelevanceMatrix& m, int k, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(m.size());
  if (k < 2 || k > n) throw DataError("spectral clustering needs 2 <= k <= " + std::to_string(n));
  if (!m.scores.allFinite()) throw NumericError("relevance matrix holds non-finite values");

  Eigen::MatrixXd w = ((m.scores + m.scores.transpose()) / 2.0).cwiseMax(0.0);
  w.diagonal().setZero();
  const Eigen::VectorXd degree = w.rowwise().sum();

  std::vector<Eigen::Index> connected, isolated;
  for (Eigen::Index i = 0; i < n; ++i) (degree[i] > 0.0 ? connected : isolated).push_back(i);
  const auto c = static_cast<Eigen::Index>(connected.size());
  if (c < k) throw DataError("only " + std::to_string(c) + " nodes have non-zero affinity, fewer than k = " + std::to_string(k));

  Eigen::MatrixXd laplacian(c, c);
  for (Eigen::Index a = 0; a < c; ++a)
    for (Eigen::Index b = 0; b < c; ++b) {
      const auto i = connected[a], j = connected[b];
      laplacian(a, b) = (a == b ? 1.0 : 0.0) - w(i, j) / std::sqrt(degree[i] * degree[j]);
    }
  const auto eig = symmetric_eigs<double>(laplacian, k, EigenOrder::Smallest);
  Eigen::MatrixXd u = eig.vectors;
  for (Eigen::Index a = 0; a < c; ++a) {
    const double norm = u.row(a).norm();
    if (norm > 0.0) u.row(a) /= norm;
  }
  const auto clusters = kmeans(u, k, seed, 10);

  Partition p;
  p.k = k;
  p.nodes = m.nodes;
  p.assignment.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index a = 0; a < c; ++a) p.assignment[static_cast<std::size_t>(connected[a])] = clusters.assignment[static_cast<std::size_t>(a)];

  if (!isolated.empty()) {
    // Centroids of raw relevance rows per cluster.
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(k, n);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (const auto i : connected) {
      centroids.row(p.assignment[static_cast<std::size_t>(i)]) += m.scores.row(i);
      counts[p.assignment[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (int j = 0; j < k; ++j)
      if (counts[j] > 0.0) centroids.row(j) /= counts[j];
    for (const auto i : isolated) {
      Eigen::Index best = 0;
      (centroids.rowwise() - m.scores.row(i)).rowwise().squaredNorm().minCoeff(&best);
      p.assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
      p.isolated.push_back(m.nodes[static_cast<std::size_t>(i)]);
    }
  }
  p.assignment = canonical(p.assignment);
  return p;
}

// ---------------------------------------------------------------------------

ClusteringMetrics clustering_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("clustering_metrics: partitions differ in size");
  if (predicted.empty()) throw DataError("clustering_metrics: no nodes to score");
  const double n = static_cast<double>(predicted.size());

  std::map<int, int> row_id, col_id;
  for (const auto a : predicted) row_id.try_emplace(a, static_cast<int>(row_id.size()));
  for (const auto b : truth) col_id.try_emplace(b, static_cast<int>(col_id.size()));
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(row_id.size()), static_cast<Eigen::Index>(col_id.size()));
  for (std::size_t i = 0; i < predicted.size(); ++i) table(row_id[predicted[i]], col_id[truth[i]]) += 1.0;
  const Eigen::VectorXd rows = table.rowwise().sum();
  const Eigen::VectorXd cols = table.colwise().sum().transpose();

  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  const double index = table.unaryExpr(pairs).sum();
  const double row_pairs = rows.unaryExpr(pairs).sum();
  const double col_pairs = cols.unaryExpr(pairs).sum();
  const double all_pairs = pairs(n);

  ClusteringMetrics out;

  const double precision = row_pairs > 0.0 ? index / row_pairs : 1.0;
  const double recall = col_pairs > 0.0 ? index / col_pairs : 1.0;
  out.f_score = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;

  auto entropy = [n](const Eigen::VectorXd& counts) {
    double h = 0.0;
    for (const double c : counts)
      if (c > 0.0) h -= c / n * std::log(c / n);
    return h;
  };
  double mutual = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j)
      if (table(i, j) > 0.0) mutual += table(i, j) / n * std::log(n * table(i, j) / (rows[i] * cols[j]));
  const double hu = entropy(rows), hv = entropy(cols);
  if (hu + hv == 0.0)
    out.nmi = 1.0;  // both partitions are a single block
  else
    out.nmi = std::clamp(2.0 * mutual / (hu + hv), 0.0, 1.0);

  const double expected = all_pairs > 0.0 ? row_pairs * col_pairs / all_pairs : 0.0;
  const double maximum = (row_pairs + col_pairs) / 2.0;
  if (maximum - expected == 0.0)
    out.ari = canonical({predicted.begin(), predicted.end()}) == canonical({truth.begin(), truth.end()}) ? 1.0 : 0.0;
  else
    out.ari = (index - expected) / (maximum - expected);

  out.purity = table.rowwise().maxCoeff().sum() / n;
  return out;
}

ClusteringMetrics clustering_metrics(const Partition& predicted, const LabelTable& truth) {
  std::vector<int> pred, labels;
  for (std::size_t i = 0; i < predicted.nodes.size(); ++i) {
    const auto v = predicted.nodes[i];
    if (!truth.labeled(v)) continue;
    pred.push_back(predicted.assignment[i]);
    labels.push_back(truth.labels[v]);
  }
  if (pred.empty()) throw DataError("no labeled nodes among the clustered nodes");
  return clustering_metrics(pred, labels);
}

// ---------------------------------------------------------------------------

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::fixed << std::setprecision(6);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_relevance_csv(std::ostream& out, const RelevanceMatrix& m, const HeteroGraph& g) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::fixed << std::setprecision(6) << "node";
  for (const auto v : m.nodes) out << ',' << g.node_id(v);
  out << '\n';
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    out << g.node_id(m.nodes[i]);
    for (std::size_t j = 0; j < m.nodes.size(); ++j)
      out << ',' << m.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

void export_relevance_matrix(const RelevanceMatrix& m, const HeteroGraph& g, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  write_relevance_csv(out, m, g);
  if (!out) throw DataError("failed writing " + path.string());
}

RelevanceMatrix import_relevance_matrix(const HeteroGraph& g, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty matrix file");
  const auto header = split_csv(line);
  RelevanceMatrix m;
  for (std::size_t j = 1; j < header.size(); ++j) m.nodes.push_back(g.node_index(header[j]));
  const auto n = static_cast<Eigen::Index>(m.nodes.size());
  m.scores = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto where = path.string() + ":" + std::to_string(i + 2);
    if (!std::getline(in, line)) throw DataError(where + ": missing matrix row");
    const auto cells = split_csv(line);
    if (static_cast<Eigen::Index>(cells.size()) != n + 1) throw DataError(where + ": expected " + std::to_string(n + 1) + " cells");
    if (g.node_index(cells[0]) != m.nodes[static_cast<std::size_t>(i)]) throw DataError(where + ": row id does not match the header");
    for (Eigen::Index j = 0; j < n; ++j) {
      try {
        std::size_t used = 0;
        m.scores(i, j) = std::stod(cells[static_cast<std::size_t>(j + 1)], &used);
        if (used != cells[static_cast<std::size_t>(j + 1)].size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw DataError(where + ": bad value '" + cells[static_cast<std::size_t>(j + 1)] + "'");
      }
    }
  }
  return m;
}

std::vector<std::filesystem::path> export_attention(std::span<const LayerAttention> attention,
                                                    std::span<const std::string> type_names,
                                                    const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw DataError("cannot create " + directory.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (std::size_t l = 0; l < attention.size(); ++l) {
    for (std::size_t h = 0; h < attention[l].heads.size(); ++h) {
      const auto& a = attention[l].heads[h];
      if (a.rows() != static_cast<Eigen::Index>(type_names.size()) || a.cols() != a.rows())
        throw ShapeError("export_attention: matrix does not match the type vocabulary");
      const auto path = directory / ("attention_l" + std::to_string(l + 1) + "_h" + std::to_string(h + 1) + ".csv");
      auto out = open_for_write(path);
      out << "source\\target";
      for (const auto& t : type_names) out << ',' << t;
      out << '\n';
      for (Eigen::Index s = 0; s < a.rows(); ++s) {
        out << type_names[static_cast<std::size_t>(s)];
        for (Eigen::Index t = 0; t < a.cols(); ++t) out << ',' << a(s, t);
        out << '\n';
      }
      if (!out) throw DataError("failed writing " + path.string());
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace hetrel
