#include "hetrel/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "hetrel/error.hpp"
#include "hetrel/gsim.hpp"
#include "hetrel/measures.hpp"
#include "hetrel/synthetic.hpp"
#include "hetrel/tensor.hpp"

namespace hetrel {

double theorem1_deviation(const HeteroGraph& g, int k) {
  const auto h = gnn_identity_embeddings(g, k);
  double worst = 0.0;
  for (NodeIndex i = 0; i < static_cast<NodeIndex>(g.num_nodes()); ++i)
    for (NodeIndex j = i; j < static_cast<NodeIndex>(g.num_nodes()); ++j)
      worst = std::max(worst, std::abs(h.row(i).dot(h.row(j)) - prw_brute(g, i, j, 2 * k)));
  return worst;
}

double theorem2_deviation(const HeteroGraph& g, int k) {
  const auto h = gnn_identity_embeddings(g, k);
  const auto augmented = augment_with_intermediates(g);
  const auto ha = gnn_identity_embeddings(augmented, 2 * k);
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const Eigen::MatrixXd original = h * h.transpose();
  const Eigen::MatrixXd split = ha.topRows(n) * ha.topRows(n).transpose();
  return (original - split).cwiseAbs().maxCoeff();
}

namespace {

// Messages W [c_i || c_j] with W = [I; I] for every unordered pair i <= j.
VerifyReport injectivity(std::size_t n) {
  VerifyReport report;
  report.theorem = 3;
  const auto size = static_cast<Eigen::Index>(n);
  Tape tape;
  const auto z = tape.constant(Matrix::Identity(size, size));
  Matrix stacked(2 * size, size);
  stacked << Matrix::Identity(size, size), Matrix::Identity(size, size);
  Parameter w("sum_extractor", stacked);

  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = i; j < size; ++j) {
      const Eigen::Index row_i[] = {i}, row_j[] = {j};
      const auto m = relation_message(tape, gather_rows(z, row_i), gather_rows(z, row_j), w);
      std::vector<double> key(m.value().data(), m.value().data() + m.value().size());
      ++report.checks;
      if (!seen.insert(std::move(key)).second) {
        report.passed = false;
        report.detail = "messages for pair (" + std::to_string(i) + ", " + std::to_string(j) + ") collide";
        return report;
      }
    }
  }
  report.detail = std::to_string(report.checks) + " pair messages distinct";
  return report;
}

}  // namespace

VerifyReport verify_theorem(int theorem, const VerifyOptions& options) {
  if (theorem < 1 || theorem > 3) throw ConfigError("theorem must be 1, 2 or 3");
  if (options.trials < 1) throw ConfigError("trials must be at least 1");
  if (theorem == 3) {
    if (options.max_nodes < 1) throw ConfigError("max-nodes must be at least 1");
    return injectivity(options.max_nodes);
  }
  if (options.max_nodes < 2 || options.max_nodes > kVerifyMaxNodes)
    throw ConfigError("max-nodes must lie in [2, " + std::to_string(kVerifyMaxNodes) + "]");
  if (options.max_walk < 1) throw ConfigError("walk length must be at least 1");

  VerifyReport report;
  report.theorem = theorem;
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> size(2, options.max_nodes);
  std::uniform_real_distribution<double> density(0.15, 0.7);
  for (int t = 0; t < options.trials; ++t) {
    auto g = random_hetero_graph(size(rng), density(rng), rng);
    for (int k = 1; k <= options.max_walk; ++k) {
      const double deviation = theorem == 1 ? theorem1_deviation(g, k) : theorem2_deviation(g, k);
      ++report.checks;
      report.max_deviation = std::max(report.max_deviation, deviation);
      if (!(deviation <= kVerifyTolerance) && report.passed) {
        report.passed = false;
        report.detail = "trial " + std::to_string(t + 1) + ", k = " + std::to_string(k) + ": deviation " +
                        std::to_string(deviation);
        report.failing_graph = std::move(g);
        break;
      }
    }
    if (!report.passed) break;
  }
  return report;
}

}  // namespace hetrel
