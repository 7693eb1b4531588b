#include "pfr/cross_validation.hpp"

#include "pfr/random.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pfr {

std::vector<Index> fold_assignment(Index n, Index folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least two folds");
  if (folds > n) throw std::invalid_argument("cross-validation needs at least as many rows as folds");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Index> fold(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) fold[static_cast<std::size_t>(order[i])] = static_cast<Index>(i) % folds;
  return fold;
}

}  // namespace pfr
