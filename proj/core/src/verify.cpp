#include "predset/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "predset/hardness.hpp"
#include "predset/objective.hpp"
#include "predset/optimizer.hpp"

namespace predset {

namespace {

std::vector<double> exponentials(std::size_t n, RngStream& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = -std::log1p(-rng.uniform());
  return v;
}

void note(SuiteReport& r, const std::string& what) {
  if (r.violations++ == 0) r.first_violation = what;
}

}  // namespace

RandomInstance random_instance(std::size_t label_count, RngStream& rng) {
  auto f = exponentials(label_count, rng);
  double total = 0.0;
  for (double x : f) total += x;
  for (auto& x : f) x /= total;
  std::vector<std::vector<double>> rows(label_count, std::vector<double>(label_count, 0.0));
  for (std::size_t y = 0; y < label_count; ++y) {
    auto col = exponentials(label_count, rng);
    double sum = 0.0;
    for (std::size_t p = 0; p < label_count; ++p) {
      if (p != y && rng.uniform() < 0.25) col[p] = 0.0;
      sum += col[p];
    }
    for (std::size_t p = 0; p < label_count; ++p) rows[p][y] = col[p] / sum;
  }
  return {ProbVector::make(std::move(f), 1e-6), validate_confusion(rows, 1e-6)};
}

SuiteReport prefix_dominance_suite(std::size_t instances, std::size_t max_labels, std::uint64_t seed) {
  SuiteReport r;
  r.name = "greedy dominates ranking prefixes";
  RngStream rng(seed, "verify/prefix");
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t l = 1 + rng.uniform_index(max_labels);
    const auto inst = random_instance(l, rng);
    const double g = greedy_set(inst.f, inst.confusion).value;
    const auto prefixes = chain_prefix_values(inst.f, inst.confusion);
    const double best = *std::max_element(prefixes.begin(), prefixes.end());
    ++r.cases;
    if (g + 1e-12 < best) {
      std::ostringstream s;
      s << "instance " << i << " L=" << l << " greedy " << g << " prefix " << best;
      note(r, s.str());
    }
  }
  return r;
}

SuiteReport incremental_suite(std::size_t sequences, std::size_t max_labels, std::uint64_t seed) {
  SuiteReport r;
  r.name = "incremental objective matches recomputation";
  RngStream rng(seed, "verify/incremental");
  for (std::size_t i = 0; i < sequences; ++i) {
    const std::size_t l = 1 + rng.uniform_index(max_labels);
    const auto inst = random_instance(l, rng);
    std::vector<LabelId> order(l);
    for (std::size_t k = 0; k < l; ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng.engine());
    const std::size_t steps = 1 + rng.uniform_index(l);
    ObjectiveState state(l);
    for (std::size_t k = 0; k < steps; ++k) {
      const double before = state.value();
      const double gain = state.marginal_gain(order[k], inst.f, inst.confusion);
      const double after = state.commit(order[k], inst.f, inst.confusion);
      const std::vector<LabelId> members(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k + 1));
      const double direct = expected_accuracy(members, inst.f, inst.confusion);
      ++r.cases;
      if (std::abs(after - direct) > 1e-12 || std::abs(before + gain - direct) > 1e-12) {
        std::ostringstream s;
        s << "sequence " << i << " step " << k << " incremental " << after << " direct " << direct;
        note(r, s.str());
      }
    }
  }
  return r;
}

SuiteReport evaluation_count_suite(std::size_t max_labels) {
  SuiteReport r;
  r.name = "greedy evaluation count";
  RngStream rng(0, "verify/count");
  for (std::size_t l = 1; l <= max_labels; ++l) {
    const auto inst = random_instance(l, rng);
    const auto res = greedy_set(inst.f, inst.confusion);
    ++r.cases;
    if (res.trace.evaluations != greedy_evaluation_count(l)) {
      note(r, "L=" + std::to_string(l) + " counted " + std::to_string(res.trace.evaluations));
    }
  }
  return r;
}

SuiteReport reduction_suite(std::size_t graphs, std::size_t min_n, std::size_t max_n, std::uint64_t seed) {
  SuiteReport r;
  r.name = "clique reduction";
  RngStream rng(seed, "verify/graphs");
  constexpr double kDensities[] = {0.3, 0.5, 0.7};
  for (std::size_t i = 0; i < graphs; ++i) {
    const std::size_t n = min_n + rng.uniform_index(max_n - min_n + 1);
    const Graph g = Graph::erdos_renyi(n, kDensities[i % 3], rng);
    const std::string tag = "graph " + std::to_string(i) + " n=" + std::to_string(n);
    const std::size_t omega = max_clique_bruteforce(g).size;
    Rational best(0);
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
      const auto s = PredictionSet::from_mask(mask);
      ++r.cases;
      if (!reduction_consistency(s, g)) note(r, tag + " inconsistent at " + s.to_display());
      const Rational v = graph_objective(s, g);
      best = std::max(best, v);
      if (!is_clique(s, g)) {
        const auto peeled = peel_max_nonadjacent(s, g);
        if (graph_objective(peeled, g) < v) note(r, tag + " peel decreased " + s.to_display());
      }
    }
    if (best != Rational(static_cast<std::int64_t>(omega), static_cast<std::int64_t>(n))) {
      note(r, tag + " max objective differs from clique number");
    }
    for (std::size_t k = 1; k <= n; ++k) {
      if (decide_threshold(g, k) != (omega >= k)) note(r, tag + " threshold disagrees at k=" + std::to_string(k));
    }
  }
  return r;
}

}  // namespace predset
