#include "cascademl/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cascademl/errors.hpp"
#include "cascademl/losses.hpp"

namespace cml {

namespace {

double kahan_sum(const std::vector<double>& v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

std::vector<std::size_t> draw_with_replacement(const std::vector<double>& weights,
                                               std::size_t count, Rng& rng) {
  std::vector<double> cumulative(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cumulative[i] = acc;
  }
  std::vector<std::size_t> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    out[k] = std::min<std::size_t>(it - cumulative.begin(), weights.size() - 1);
  }
  return out;
}

}  // namespace

std::vector<double> eq1_probabilities(std::size_t n, double decay_rate) {
  if (n < 1) {
    throw Error(ErrorKind::invalid_argument, "eq1_probabilities: N must be >= 1");
  }
  if (decay_rate < 0.0) {
    throw Error(ErrorKind::invalid_argument, "eq1_probabilities: R must be >= 0");
  }
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rank = static_cast<double>(i + 1);
    probs[i] = std::exp(-rank * decay_rate / static_cast<double>(n));
  }
  const double norm = kahan_sum(probs);
  for (double& p : probs) p /= norm;
  return probs;
}

DifficultyRanking rank_by_difficulty(const std::vector<double>& per_example_losses,
                                     double decay_rate) {
  if (per_example_losses.empty()) {
    throw Error(ErrorKind::invalid_argument, "rank_by_difficulty: empty losses");
  }
  for (double loss : per_example_losses) {
    if (std::isnan(loss)) {
      throw Error(ErrorKind::numeric, "rank_by_difficulty: NaN loss");
    }
    if (loss < 0.0) {
      throw Error(ErrorKind::invalid_argument,
                  "rank_by_difficulty: losses must be >= 0");
    }
  }
  DifficultyRanking ranking;
  const std::size_t n = per_example_losses.size();
  ranking.example_ids.resize(n);
  std::iota(ranking.example_ids.begin(), ranking.example_ids.end(), 0);
  std::stable_sort(ranking.example_ids.begin(), ranking.example_ids.end(),
                   [&](std::size_t a, std::size_t b) {
                     return per_example_losses[a] > per_example_losses[b];
                   });
  ranking.losses.resize(n);
  ranking.ranks.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ranking.losses[i] = per_example_losses[ranking.example_ids[i]];
    ranking.ranks[i] = i + 1;
  }
  ranking.selection_probs = eq1_probabilities(n, decay_rate);
  return ranking;
}

std::vector<std::size_t> draw_boost_sample(const DifficultyRanking& ranking,
                                           std::size_t sample_size, Rng& rng) {
  if (sample_size < 1) {
    throw Error(ErrorKind::invalid_argument,
                "draw_boost_sample: sample_size must be >= 1");
  }
  std::vector<std::size_t> draws =
      draw_with_replacement(ranking.selection_probs, sample_size, rng);
  for (std::size_t& d : draws) d = ranking.example_ids[d];
  return draws;
}

std::vector<std::size_t> rebalance_sample(const Tensor2& labels,
                                          const RebalanceSpec& spec, Rng& rng) {
  if (labels.rows == 0 || labels.cols == 0) {
    throw Error(ErrorKind::invalid_argument, "rebalance_sample: empty labels");
  }
  validate_multi_hot(labels);

  std::vector<double> counts(labels.cols, 0.0);
  for (std::size_t r = 0; r < labels.rows; ++r) {
    for (std::size_t c = 0; c < labels.cols; ++c) counts[c] += labels(r, c);
  }
  std::vector<double> present;
  for (double c : counts) {
    if (c > 0.0) present.push_back(c);
  }
  if (present.empty()) {
    throw Error(ErrorKind::invalid_argument,
                "rebalance_sample: no positive example in any class");
  }

  double target = spec.target;
  if (spec.strategy == RebalanceSpec::Strategy::median_target) {
    std::sort(present.begin(), present.end());
    const std::size_t mid = present.size() / 2;
    target = present.size() % 2 == 1
                 ? present[mid]
                 : 0.5 * (present[mid - 1] + present[mid]);
  }
  if (!(target > 0.0)) {
    throw Error(ErrorKind::invalid_argument,
                "rebalance_sample: target frequency must be positive");
  }

  std::vector<double> weights(labels.rows, 1.0);
  for (std::size_t r = 0; r < labels.rows; ++r) {
    double w = 0.0;
    bool any_positive = false;
    for (std::size_t c = 0; c < labels.cols; ++c) {
      if (labels(r, c) == 1.0) {
        any_positive = true;
        w = std::max(w, target / counts[c]);
      }
    }
    weights[r] = any_positive ? w : 1.0;
  }
  return draw_with_replacement(weights, labels.rows, rng);
}

std::string ranking_to_csv(const DifficultyRanking& ranking) {
  std::ostringstream out;
  out << "example_id,loss,rank,selection_prob\n";
  out.precision(17);
  for (std::size_t i = 0; i < ranking.example_ids.size(); ++i) {
    out << ranking.example_ids[i] << ',' << ranking.losses[i] << ','
        << ranking.ranks[i] << ',' << ranking.selection_probs[i] << '\n';
  }
  return out.str();
}

}  // namespace cml
