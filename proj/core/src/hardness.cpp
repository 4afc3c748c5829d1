#include "predset/hardness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <string>

#include "predset/objective.hpp"

namespace predset {

Graph::Graph(std::size_t vertex_count) : n_(vertex_count), adj_(vertex_count * vertex_count, 0) {}

void Graph::add_edge(std::size_t u, std::size_t v) {
  if (u >= n_ || v >= n_) {
    throw Error(ErrorCode::LabelOutOfRange,
                "edge (" + std::to_string(u) + "," + std::to_string(v) + ") outside graph");
  }
  if (u == v) throw Error(ErrorCode::SelfLoopRejected, "vertex " + std::to_string(u));
  if (adj_[u * n_ + v]) {
    throw Error(ErrorCode::DuplicateEdgeRejected,
                "edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
  }
  adj_[u * n_ + v] = adj_[v * n_ + u] = 1;
  ++edges_;
}

std::vector<std::pair<std::size_t, std::size_t>> Graph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t u = 0; u < n_; ++u) {
    for (std::size_t v = u + 1; v < n_; ++v) {
      if (adjacent(u, v)) out.emplace_back(u, v);
    }
  }
  return out;
}

Graph Graph::complete(std::size_t n) {
  Graph g(n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) g.add_edge(u, v);
  }
  return g;
}

Graph Graph::path(std::size_t n) {
  Graph g(n);
  for (std::size_t u = 0; u + 1 < n; ++u) g.add_edge(u, u + 1);
  return g;
}

Graph Graph::petersen() {
  Graph g(10);
  for (std::size_t i = 0; i < 5; ++i) {
    g.add_edge(i, (i + 1) % 5);          // outer cycle
    g.add_edge(i, i + 5);                // spokes
    g.add_edge(i + 5, (i + 2) % 5 + 5);  // inner pentagram
  }
  return g;
}

Graph Graph::erdos_renyi(std::size_t n, double p, RngStream& rng) {
  Graph g(n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.uniform() < p) g.add_edge(u, v);
    }
  }
  return g;
}

ReductionInstance clique_to_instance(const Graph& g) {
  const std::size_t n = g.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty graph");
  std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
  for (std::size_t y = 0; y < n; ++y) {
    std::size_t non_adjacent = 0;
    for (std::size_t v = 0; v < n; ++v) non_adjacent += g.adjacent(v, y) ? 0 : 1;
    for (std::size_t v = 0; v < n; ++v) {
      rows[v][y] = g.adjacent(v, y) ? 0.0 : 1.0 / static_cast<double>(non_adjacent);
    }
  }
  return {ProbVector::uniform(n), validate_confusion(rows)};
}

std::size_t non_adjacent_count(const PredictionSet& s, LabelId y, const Graph& g) {
  std::size_t count = 0;
  for (LabelId v : s) count += g.adjacent(v, y) ? 0 : 1;
  return count;
}

Rational graph_objective(const PredictionSet& s, const Graph& g) {
  if (s.empty()) throw Error(ErrorCode::EmptySet, "graph objective of empty set");
  Rational total(0);
  for (LabelId y : s) {
    if (y >= g.size()) throw Error(ErrorCode::LabelOutOfRange, "vertex outside graph");
    total += Rational(1, static_cast<std::int64_t>(non_adjacent_count(s, y, g)));
  }
  return total / static_cast<std::int64_t>(g.size());
}

bool reduction_consistency(const PredictionSet& s, const Graph& g) {
  const auto inst = clique_to_instance(g);
  const double numeric = expected_accuracy(s, inst.p_true, inst.confusion);
  return std::abs(numeric - boost::rational_cast<double>(graph_objective(s, g))) <= 1e-12;
}

PredictionSet peel_max_nonadjacent(const PredictionSet& s, const Graph& g) {
  if (s.empty()) throw Error(ErrorCode::EmptySet, "peel of empty set");
  LabelId worst = s.front();
  std::size_t worst_count = 0;
  for (LabelId y : s) {
    const std::size_t c = non_adjacent_count(s, y, g);
    if (c > worst_count) {
      worst_count = c;
      worst = y;
    }
  }
  if (worst_count <= 1) throw Error(ErrorCode::AlreadyClique, "set " + s.to_display());
  std::vector<LabelId> rest;
  for (LabelId y : s) {
    if (y != worst) rest.push_back(y);
  }
  return PredictionSet(std::move(rest));
}

bool is_clique(const PredictionSet& s, const Graph& g) {
  for (LabelId u : s) {
    for (LabelId v : s) {
      if (u < v && !g.adjacent(u, v)) return false;
    }
  }
  return true;
}

namespace {

void check_cap(const Graph& g, std::size_t cap) {
  if (g.size() > cap || g.size() >= 63) {
    throw Error(ErrorCode::GraphTooLarge,
                std::to_string(g.size()) + " vertices exceeds cap " + std::to_string(cap));
  }
}

std::vector<std::uint64_t> neighbour_masks(const Graph& g) {
  std::vector<std::uint64_t> masks(g.size(), 0);
  for (std::size_t u = 0; u < g.size(); ++u) {
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (g.adjacent(u, v)) masks[u] |= std::uint64_t{1} << v;
    }
  }
  return masks;
}

}  // namespace

CliqueResult max_clique_bruteforce(const Graph& g, std::size_t cap) {
  check_cap(g, cap);
  const auto nbr = neighbour_masks(g);
  std::uint64_t best = 0;
  std::size_t best_size = 0;
  // Extend a clique one vertex at a time; candidates are the common
  // neighbours with larger index, and branches that cannot beat the incumbent
  // are cut.
  std::function<void(std::uint64_t, std::size_t, std::uint64_t)> extend =
      [&](std::uint64_t clique, std::size_t size, std::uint64_t candidates) {
        if (size > best_size) {
          best_size = size;
          best = clique;
        }
        while (candidates != 0) {
          if (size + static_cast<std::size_t>(std::popcount(candidates)) <= best_size) return;
          const int v = std::countr_zero(candidates);
          candidates &= candidates - 1;
          const std::uint64_t higher = candidates;
          extend(clique | (std::uint64_t{1} << v), size + 1, higher & nbr[static_cast<std::size_t>(v)]);
        }
      };
  const std::uint64_t all = g.size() == 0 ? 0 : (std::uint64_t{1} << g.size()) - 1;
  extend(0, 0, all);
  return {best_size, PredictionSet::from_mask(best)};
}

Rational max_graph_objective(const Graph& g, std::size_t cap) {
  check_cap(g, cap);
  const std::size_t n = g.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty graph");
  const auto nbr = neighbour_masks(g);
  Rational best(0);
  const std::uint64_t limit = std::uint64_t{1} << n;
  for (std::uint64_t mask = 1; mask < limit; ++mask) {
    Rational sum(0);
    for (std::uint64_t rest = mask; rest != 0; rest &= rest - 1) {
      const auto y = static_cast<std::size_t>(std::countr_zero(rest));
      const auto nonadj = std::popcount(mask & ~nbr[y]);
      sum += Rational(1, nonadj);
    }
    if (sum > best) best = sum;
  }
  return best / static_cast<std::int64_t>(n);
}

bool decide_threshold(const Graph& g, std::size_t k, std::size_t cap) {
  return max_graph_objective(g, cap) >=
         Rational(static_cast<std::int64_t>(k), static_cast<std::int64_t>(g.size()));
}

}  // namespace predset
