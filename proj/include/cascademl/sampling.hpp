#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cascademl/rng.hpp"
#include "cascademl/tensor.hpp"

namespace cml {

// Per-example losses sorted descending, with 1-based difficulty ranks
// (rank 1 = largest loss) and their selection probabilities.
struct DifficultyRanking {
  std::vector<std::size_t> example_ids;  // permutation of [0, N)
  std::vector<double> losses;            // non-increasing
  std::vector<std::size_t> ranks;        // 1..N aligned with sort order
  std::vector<double> selection_probs;   // sums to 1
};

// p_i = exp(-i*R/N) / sum_{n=1..N} exp(-n*R/N) for 1-based rank i.
// R = 0 gives the uniform distribution; larger R concentrates probability
// on low ranks (the difficult examples).
std::vector<double> eq1_probabilities(std::size_t n, double decay_rate);

// Stable descending sort by loss (ties keep original example order), with
// selection probabilities attached via eq1_probabilities.
DifficultyRanking rank_by_difficulty(const std::vector<double>& per_example_losses,
                                     double decay_rate);

// sample_size independent draws with replacement from the ranking's
// categorical distribution; returns example ids.
std::vector<std::size_t> draw_boost_sample(const DifficultyRanking& ranking,
                                           std::size_t sample_size, Rng& rng);

// Class-rebalancing draw. Each example weighs max over its positive classes
// of target/count (1.0 when it has no positive labels) and N ids are drawn
// with replacement proportional to weight.
struct RebalanceSpec {
  enum class Strategy { median_target, fixed_target };
  Strategy strategy = Strategy::median_target;
  double target = 0.0;  // used by fixed_target
};

std::vector<std::size_t> rebalance_sample(const Tensor2& labels,
                                          const RebalanceSpec& spec, Rng& rng);

// Audit export: example_id, loss, rank, selection_prob.
std::string ranking_to_csv(const DifficultyRanking& ranking);

}  // namespace cml
