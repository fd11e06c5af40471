#pragma once

// Small hand-built graphs and scratch directories shared by the unit tests.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>

#include "hetrel/graph.hpp"

namespace fixtures {

using hetrel::HeteroGraph;
using hetrel::NodeIndex;

// Homogeneous undirected graph on nodes n0..n{count-1} of type N joined by relation e.
inline HeteroGraph homogeneous(int count, std::initializer_list<std::pair<int, int>> edges) {
  HeteroGraph::Builder b;
  const auto t = b.add_type("N");
  const auto e = b.add_relation("e", t, t);
  for (int i = 0; i < count; ++i) b.add_node("n" + std::to_string(i), "N");
  for (const auto& [u, v] : edges) b.add_edge(u, e, v);
  b.make_undirected();
  return std::move(b).build();
}

inline HeteroGraph path3() { return homogeneous(3, {{0, 1}, {1, 2}}); }
inline HeteroGraph triangle() { return homogeneous(3, {{0, 1}, {1, 2}, {0, 2}}); }
inline HeteroGraph square() { return homogeneous(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}); }

// Authors a1, a2 and papers p1, p2: a1 writes p1, a2 writes p1 and p2.
inline HeteroGraph two_authors() {
  HeteroGraph::Builder b;
  const auto a = b.add_type("A");
  const auto p = b.add_type("P");
  const auto writes = b.add_relation("writes", a, p);
  const auto a1 = b.add_node("a1", "A");
  const auto a2 = b.add_node("a2", "A");
  const auto p1 = b.add_node("p1", "P");
  const auto p2 = b.add_node("p2", "P");
  b.add_edge(a1, writes, p1);
  b.add_edge(a2, writes, p1);
  b.add_edge(a2, writes, p2);
  b.make_undirected();
  return std::move(b).build();
}

// Two types, two relations, every node labeled by the parity of its index
// half; a ring inside each type plus cross edges.
inline HeteroGraph labeled_two_type(int per_type, std::uint64_t seed) {
  HeteroGraph::Builder b;
  const auto u = b.add_type("U");
  const auto w = b.add_type("W");
  const auto l0 = b.add_label("x");
  const auto l1 = b.add_label("y");
  const auto uu = b.add_relation("uu", u, u);
  const auto uw = b.add_relation("uw", u, w);
  for (int i = 0; i < per_type; ++i) b.add_node("u" + std::to_string(i), "U", i < per_type / 2 ? l0 : l1);
  for (int i = 0; i < per_type; ++i) b.add_node("w" + std::to_string(i), "W", i < per_type / 2 ? l0 : l1);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, per_type - 1);
  for (int i = 0; i < per_type; ++i) {
    b.add_edge(i, uu, (i + 1) % per_type);
    b.add_edge(i, uw, per_type + pick(rng));
  }
  b.make_undirected();
  return std::move(b).build();
}

// Fresh empty directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("hetrel-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixtures
