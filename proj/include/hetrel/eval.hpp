#pragma once

// Relevance search, spectral clustering and the metrics used to score them.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hetrel/error.hpp"
#include "hetrel/graph.hpp"
#include "hetrel/gsim.hpp"
#include "hetrel/relevance.hpp"

namespace hetrel {

struct SearchHit {
  NodeIndex node;
  double score;
};

struct SearchResult {
  std::vector<SearchHit> hits;
  bool short_list = false;  // fewer candidates than requested
};

struct SearchOptions {
  std::optional<TypeIndex> type_filter;
  bool exclude_self = false;
};

using Scorer = std::function<double(NodeIndex, NodeIndex)>;

// Highest S(q, .) first; ties go to the query, then to the lower node index.
// The query itself is a candidate unless exclude_self is set.
SearchResult top_k_search(const HeteroGraph& g, const Scorer& score, NodeIndex q, std::size_t n,
                          const SearchOptions& options = {});
// Candidates are the nodes of the matrix.
SearchResult top_k_search(const HeteroGraph& g, const RelevanceMatrix& m, NodeIndex q, std::size_t n,
                          const SearchOptions& options = {});

// |{hits among the first n sharing q's label}| / n.
double recall_at_n(const SearchResult& result, NodeIndex q, const LabelTable& labels, std::size_t n);

// Writes `rank<TAB>node_id<TAB>score<TAB>label` rows.
void write_search_tsv(std::ostream& out, const HeteroGraph& g, const SearchResult& result);

// ---------------------------------------------------------------------------

enum class EigenOrder { Smallest, Largest };

template <typename Scalar>
struct EigenPairs {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;                  // in the requested order
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;    // column i pairs with values[i]
  int sweeps = 0;
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// max(1e-12, n * machine epsilon), scaled by the norm of A when that exceeds 1.
template <typename Scalar>
EigenPairs<Scalar> symmetric_eigs(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a, Eigen::Index m,
                                  EigenOrder order = EigenOrder::Smallest) {
  using MatrixS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using std::abs;
  using std::sqrt;
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw ShapeError("symmetric_eigs: matrix is not square");
  if (m < 0 || m > n) throw ShapeError("symmetric_eigs: requested " + std::to_string(m) + " of " + std::to_string(n) + " eigenpairs");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10)) throw DataError("symmetric_eigs: matrix is not symmetric");

  MatrixS s = (a + a.transpose()) / Scalar(2);
  MatrixS v = MatrixS::Identity(n, n);
  const Scalar floor = std::max(Scalar(1e-12), static_cast<Scalar>(n) * std::numeric_limits<Scalar>::epsilon());
  const Scalar tolerance = floor * std::max(Scalar(1), s.norm());
  auto off_diagonal = [&] {
    Scalar total(0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) total += s(i, j) * s(i, j);
    return sqrt(total);
  };

  int sweeps = 0;
  constexpr int kMaxSweeps = 100;
  while (off_diagonal() >= tolerance) {
    if (++sweeps > kMaxSweeps) throw NumericError("symmetric_eigs: Jacobi iteration did not converge");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (s(p, q) == Scalar(0)) continue;
        const Scalar theta = (s(q, q) - s(p, p)) / (Scalar(2) * s(p, q));
        const Scalar t = (theta >= Scalar(0) ? Scalar(1) : Scalar(-1)) / (abs(theta) + sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order_idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order_idx[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order_idx.begin(), order_idx.end(), [&](Eigen::Index x, Eigen::Index y) {
    return order == EigenOrder::Smallest ? s(x, x) < s(y, y) : s(x, x) > s(y, y);
  });
  EigenPairs<Scalar> out;
  out.sweeps = sweeps;
  out.values.resize(m);
  out.vectors.resize(n, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto src = order_idx[static_cast<std::size_t>(i)];
    out.values[i] = s(src, src);
    out.vectors.col(i) = v.col(src);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Partition {
  std::vector<NodeIndex> nodes;
  std::vector<int> assignment;  // parallel to nodes, in [0, k)
  int k = 0;
  // Nodes with an all-zero affinity row, placed by nearest centroid.
  std::vector<NodeIndex> isolated;
};

struct KMeansResult {
  std::vector<int> assignment;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds; the best of `restarts` by inertia.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10);

// Normalized spectral clustering of the affinity clamp((M + M^T) / 2, >= 0)
// with a zeroed diagonal.
Partition spectral_clustering(const RelevanceMatrix& m, int k, std::uint64_t seed);

struct ClusteringMetrics {
  double f_score = 0.0;  // pairwise F1 over co-clustered pairs
  double nmi = 0.0;      // arithmetic-mean normalization
  double ari = 0.0;
  double purity = 0.0;
};

ClusteringMetrics clustering_metrics(std::span<const int> predicted, std::span<const int> truth);
// Scores the labeled nodes of the partition. Throws DataError when none are labeled.
ClusteringMetrics clustering_metrics(const Partition& predicted, const LabelTable& truth);

// ---------------------------------------------------------------------------

// CSV with a header row and column of node ids, values to 6 decimals.
void write_relevance_csv(std::ostream& out, const RelevanceMatrix& m, const HeteroGraph& g);
void export_relevance_matrix(const RelevanceMatrix& m, const HeteroGraph& g, const std::filesystem::path& path);
RelevanceMatrix import_relevance_matrix(const HeteroGraph& g, const std::filesystem::path& path);

// One CSV per (layer, head) named attention_l<layer>_h<head>.csv (1-based),
// rows are source types and columns target types. Returns the written paths.
std::vector<std::filesystem::path> export_attention(std::span<const LayerAttention> attention,
                                                    std::span<const std::string> type_names,
                                                    const std::filesystem::path& directory);

}  // namespace hetrel
