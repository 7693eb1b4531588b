// K-fold helpers shared by every tuned estimator.
#pragma once

#include "pfr/types.hpp"

#include <cstdint>
#include <vector>

namespace pfr {

/// Seeded shuffle of 0..n-1 dealt round-robin into `folds` groups; returns the fold id of each row.
std::vector<Index> fold_assignment(Index n, Index folds, std::uint64_t seed);

/// Mean over folds of held-out mean squared error for each candidate.
/// `fit_predict(candidate, X_train, y_train, X_test)` returns test predictions.
template <typename Candidate, typename FitPredict>
std::vector<double> cv_errors(const Matrix& X, const Vector& y, const std::vector<Candidate>& candidates, Index folds,
                              std::uint64_t seed, FitPredict&& fit_predict) {
  const std::vector<Index> fold = fold_assignment(X.rows(), folds, seed);
  std::vector<double> err(candidates.size(), 0.0);
  for (Index f = 0; f < folds; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < X.rows(); ++i) (fold[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    const Matrix Xt = select_rows(X, train);
    const Vector yt = select_rows(y, train);
    const Matrix Xs = select_rows(X, test);
    const Vector ys = select_rows(y, test);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const Vector pred = fit_predict(candidates[c], Xt, yt, Xs);
      err[c] += (pred - ys).squaredNorm() / static_cast<double>(ys.size());
    }
  }
  for (double& e : err) e /= static_cast<double>(folds);
  return err;
}

}  // namespace pfr
