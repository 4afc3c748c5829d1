#pragma once

// Executable form of the clique reduction: graph -> (uniform truth, confusion
// matrix) instances whose expert-accuracy objective equals
//   (1/n) * sum_{y in S} 1 / Nhat_S(y),
// where Nhat_S(y) counts the vertices of S not adjacent to y (y included).

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "predset/core.hpp"

namespace predset {

using Rational = boost::rational<std::int64_t>;

// Simple undirected graph without self-loops.
class Graph {
 public:
  explicit Graph(std::size_t vertex_count = 0);

  std::size_t size() const noexcept { return n_; }
  bool adjacent(std::size_t u, std::size_t v) const { return adj_[u * n_ + v] != 0; }
  // Throws SelfLoopRejected / DuplicateEdgeRejected / LabelOutOfRange.
  void add_edge(std::size_t u, std::size_t v);
  std::size_t edge_count() const noexcept { return edges_; }
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  static Graph complete(std::size_t n);
  static Graph path(std::size_t n);
  static Graph petersen();
  static Graph erdos_renyi(std::size_t n, double p, RngStream& rng);

 private:
  std::size_t n_;
  std::size_t edges_ = 0;
  std::vector<char> adj_;
};

struct ReductionInstance {
  ProbVector p_true;
  ConfusionMatrix confusion;
};

ReductionInstance clique_to_instance(const Graph& g);

// Nhat_S(y): members of S that are not adjacent to y, y itself included.
std::size_t non_adjacent_count(const PredictionSet& s, LabelId y, const Graph& g);

Rational graph_objective(const PredictionSet& s, const Graph& g);

bool reduction_consistency(const PredictionSet& s, const Graph& g);

// Removes the member with the most non-neighbours inside S (ties to the
// smaller index). Throws AlreadyClique when S already induces a clique.
PredictionSet peel_max_nonadjacent(const PredictionSet& s, const Graph& g);

bool is_clique(const PredictionSet& s, const Graph& g);

inline constexpr std::size_t kDefaultCliqueCap = 16;

struct CliqueResult {
  std::size_t size = 0;
  PredictionSet witness;
};

CliqueResult max_clique_bruteforce(const Graph& g, std::size_t cap = kDefaultCliqueCap);

// Maximum of graph_objective over every nonempty subset.
Rational max_graph_objective(const Graph& g, std::size_t cap = kDefaultCliqueCap);

// True iff some nonempty subset reaches graph_objective >= k/n.
bool decide_threshold(const Graph& g, std::size_t k, std::size_t cap = kDefaultCliqueCap);

}  // namespace predset
