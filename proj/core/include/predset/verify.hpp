#pragma once

// Randomized self-checks for the optimizer and the clique reduction, shared by
// `predset verify` and the benchmarks.

#include <cstddef>
#include <cstdint>
#include <string>

#include "predset/core.hpp"

namespace predset {

struct RandomInstance {
  ProbVector f;
  ConfusionMatrix confusion;
};

// f from normalized exponentials; each confusion column from normalized
// exponentials with roughly a quarter of the entries zeroed (diagonal kept).
RandomInstance random_instance(std::size_t label_count, RngStream& rng);

struct SuiteReport {
  std::string name;
  std::size_t cases = 0;
  std::size_t violations = 0;
  std::string first_violation;
  bool passed() const noexcept { return violations == 0; }
};

// Greedy value >= every ranking-prefix value.
SuiteReport prefix_dominance_suite(std::size_t instances, std::size_t max_labels, std::uint64_t seed);
// Incremental objective vs from-scratch evaluation within 1e-12.
SuiteReport incremental_suite(std::size_t sequences, std::size_t max_labels, std::uint64_t seed);
// Greedy trace counts L(L+1)(L+2)/6 marginal-gain evaluations.
SuiteReport evaluation_count_suite(std::size_t max_labels);
// Reduction consistency, max objective = clique number / n, threshold
// decisions and peeling, on Erdos-Renyi graphs with p in {0.3, 0.5, 0.7}.
SuiteReport reduction_suite(std::size_t graphs, std::size_t min_n, std::size_t max_n, std::uint64_t seed);

}  // namespace predset
