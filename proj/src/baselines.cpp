#include "pfr/baselines.hpp"

#include "pfr/cross_validation.hpp"
#include "pfr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pfr {

namespace {

constexpr double kRankTolerance = 1e-10;

void check_design(const Matrix& X, const Vector& y, const char* who) {
  if (X.rows() != y.size()) throw std::invalid_argument(std::string(who) + ": response length must equal rows of X");
}

// Index of the smallest error; `prefer_last` breaks ties toward later candidates.
std::size_t argmin(const std::vector<double>& err, bool prefer_last) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < err.size(); ++i) {
    if (err[i] < err[best] || (prefer_last && err[i] == err[best])) best = i;
  }
  return best;
}

Index usable_components(const Matrix& X, Index requested) {
  return std::min(requested, numerical_rank(X, kRankTolerance));
}

}  // namespace

Vector ridge_estimator(const Matrix& X, const Vector& y, double tau) {
  check_design(X, y, "ridge_estimator");
  if (!(tau >= 0.0)) throw std::invalid_argument("ridge_estimator: tau must be nonnegative");
  const Index n = X.rows();
  const Index p = X.cols();
  if (tau == 0.0 && numerical_rank(X, kRankTolerance) < p) {
    throw RankError("ridge_estimator: X'X is singular and tau = 0");
  }
  if (p <= n) {
    Matrix A = X.transpose() * X;
    A.diagonal().array() += tau;
    return A.ldlt().solve(X.transpose() * y);
  }
  Matrix K = X * X.transpose();
  K.diagonal().array() += tau;
  return X.transpose() * K.ldlt().solve(y);
}

Vector least_squares(const Matrix& X, const Vector& y) {
  check_design(X, y, "least_squares");
  return pseudo_inverse(X, kRankTolerance) * y;
}

Vector gprior_estimator(const Matrix& X, const Vector& y, double g) {
  if (!(g > 0.0)) throw std::invalid_argument("gprior_estimator: g must be positive");
  return least_squares(X, y) / (1.0 + g);
}

Vector covariance_ridge(const Matrix& X, const Vector& y, const Matrix& Sigma_X, const Vector& V0, double tau,
                        double sigma2) {
  check_design(X, y, "covariance_ridge");
  const Index p = X.cols();
  if (Sigma_X.rows() != p || Sigma_X.cols() != p || V0.size() != p) {
    throw std::invalid_argument("covariance_ridge: Sigma_X and V0 must match the predictor dimension");
  }
  if (!(tau > 0.0) || !(sigma2 > 0.0)) throw std::invalid_argument("covariance_ridge: tau and sigma2 must be positive");
  if (!is_positive_definite(Sigma_X)) throw std::domain_error("covariance_ridge: Sigma_X is not positive definite");
  Matrix A = X.transpose() * X + tau * Sigma_X;
  return A.llt().solve(X.transpose() * y + tau * V0);
}

WhitenedPair whiten_equivalence_check(const Matrix& X, const Vector& y, const Matrix& Sigma_X, double tau,
                                      double sigma2) {
  WhitenedPair out;
  out.beta_direct = covariance_ridge(X, y, Sigma_X, Vector::Zero(X.cols()), tau, sigma2);
  Eigen::LLT<Matrix> llt(Sigma_X);  // Sigma_X = L L' = U'U with U = L'
  const Matrix X_white = llt.matrixL().solve(X.transpose()).transpose();  // X U^-1
  const Vector alpha = ridge_estimator(X_white, y, tau);
  out.beta_whitened = llt.matrixU().solve(alpha);
  return out;
}

NigPrior NigPrior::standard() {
  NigPrior prior;
  const Index count = 21;
  prior.tau_grid.resize(count);
  for (Index i = 0; i < count; ++i) prior.tau_grid[static_cast<std::size_t>(i)] = std::pow(10.0, -3.0 + 6.0 * static_cast<double>(i) / 20.0);
  prior.tau_weights.assign(count, 1.0 / static_cast<double>(count));
  return prior;
}

LinearFit nig_regression(const Matrix& X, const Vector& y, const NigPrior& prior) {
  check_design(X, y, "nig_regression");
  if (!(prior.a > 0.0 && prior.b > 0.0)) throw std::invalid_argument("nig_regression: a and b must be positive");
  if (prior.tau_grid.empty() || prior.tau_grid.size() != prior.tau_weights.size()) {
    throw std::invalid_argument("nig_regression: tau grid and weights must be nonempty and equal length");
  }
  const double n = static_cast<double>(X.rows());
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  const Vector uty = svd.matrixU().transpose() * y;
  const double outside = std::max(y.squaredNorm() - uty.squaredNorm(), 0.0);

  // y | tau ~ multivariate t with scale (b/a)(I + XX'/tau); work in the SVD basis.
  std::vector<double> log_post(prior.tau_grid.size());
  for (std::size_t g = 0; g < prior.tau_grid.size(); ++g) {
    const double tau = prior.tau_grid[g];
    if (!(tau > 0.0) || !(prior.tau_weights[g] > 0.0)) throw std::invalid_argument("nig_regression: invalid tau prior");
    const Vector shrink = (1.0 + s.array().square() / tau).matrix();
    const double log_det = shrink.array().log().sum();
    const double quad = outside + (uty.array().square() / shrink.array()).sum();
    log_post[g] = std::log(prior.tau_weights[g]) - 0.5 * log_det - (prior.a + 0.5 * n) * std::log(prior.b + 0.5 * quad);
  }
  const double top = *std::max_element(log_post.begin(), log_post.end());
  double total = 0.0;
  for (double& lp : log_post) {
    lp = std::exp(lp - top);
    total += lp;
  }
  LinearFit fit;
  fit.method = "NIG";
  fit.beta = Vector::Zero(X.cols());
  double tau_mean = 0.0;
  for (std::size_t g = 0; g < prior.tau_grid.size(); ++g) {
    const double w = log_post[g] / total;
    const double tau = prior.tau_grid[g];
    const Vector coef = (s.array() / (s.array().square() + tau)).matrix();
    fit.beta += w * (svd.matrixV() * coef.cwiseProduct(uty));
    tau_mean += w * tau;
  }
  fit.tuning["tau_posterior_mean"] = tau_mean;
  return fit;
}

LinearFit pcr(const Matrix& X, const Vector& y, Index components) {
  check_design(X, y, "pcr");
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  const Index rank = s.size() > 0 && s(0) > 0 ? (s.array() > kRankTolerance * s(0)).count() : 0;
  if (components < 1 || components > rank) throw std::invalid_argument("pcr: components must lie in [1, rank(X)]");
  LinearFit fit;
  fit.method = "PCR";
  const Vector scores = svd.matrixU().leftCols(components).transpose() * y;
  fit.beta = svd.matrixV().leftCols(components) * scores.cwiseQuotient(s.head(components));
  fit.tuning["components"] = static_cast<double>(components);
  return fit;
}

LinearFit pls(const Matrix& X, const Vector& y, Index components) {
  check_design(X, y, "pls");
  const Index p = X.cols();
  if (components < 1 || components > numerical_rank(X, kRankTolerance)) {
    throw std::invalid_argument("pls: components must lie in [1, rank(X)]");
  }
  Matrix Xk = X;
  Vector yk = y;
  Matrix W(p, components), P(p, components);
  Vector q(components);
  const double initial = (X.transpose() * y).norm();
  Index found = 0;
  LinearFit fit;
  fit.method = "PLS";
  for (Index a = 0; a < components; ++a) {
    Vector w = Xk.transpose() * yk;
    const double norm = w.norm();
    if (!(norm > 1e-12 * std::max(initial, std::numeric_limits<double>::min()))) {
      fit.status = FitStatus::EarlyStop;
      fit.message = "pls: covariance with the response vanished after " + std::to_string(a) + " components";
      break;
    }
    w /= norm;
    const Vector t = Xk * w;
    const double tt = t.squaredNorm();
    if (!(tt > 0.0)) {
      fit.status = FitStatus::EarlyStop;
      fit.message = "pls: degenerate score vector";
      break;
    }
    W.col(a) = w;
    P.col(a) = Xk.transpose() * t / tt;
    q(a) = yk.dot(t) / tt;
    Xk -= t * P.col(a).transpose();
    yk -= q(a) * t;
    ++found;
  }
  if (found == 0) {
    fit.beta = Vector::Zero(p);
  } else {
    const Matrix Wf = W.leftCols(found);
    const Matrix PtW = P.leftCols(found).transpose() * Wf;
    fit.beta = Wf * PtW.partialPivLu().solve(q.head(found));
  }
  fit.tuning["components"] = static_cast<double>(found);
  return fit;
}

LinearFit lars(const Matrix& X, const Vector& y, Index steps) {
  check_design(X, y, "lars");
  if (steps < 1) throw std::invalid_argument("lars: steps must be at least 1");
  const Index p = X.cols();
  const Vector norms = X.colwise().norm().transpose();
  std::vector<bool> usable(static_cast<std::size_t>(p));
  Matrix Xs = X;
  for (Index j = 0; j < p; ++j) {
    usable[static_cast<std::size_t>(j)] = norms(j) > 0.0;
    if (norms(j) > 0.0) Xs.col(j) /= norms(j);
  }
  const Index max_active = numerical_rank(X, kRankTolerance);

  LinearFit fit;
  fit.method = "LARS";
  Vector beta = Vector::Zero(p);
  fit.tuning["steps"] = 0.0;
  if (max_active == 0) {
    fit.beta = beta;
    return fit;
  }
  Vector mu = Vector::Zero(X.rows());
  std::vector<Index> active;
  std::vector<bool> in_active(static_cast<std::size_t>(p), false);

  Vector c = Xs.transpose() * y;
  {
    Index first = -1;
    for (Index j = 0; j < p; ++j)
      if (usable[static_cast<std::size_t>(j)] && (first < 0 || std::abs(c(j)) > std::abs(c(first)))) first = j;
    active.push_back(first);
    in_active[static_cast<std::size_t>(first)] = true;
  }

  Index taken = 0;
  for (Index step = 0; step < steps; ++step) {
    c = Xs.transpose() * (y - mu);
    const Index m = static_cast<Index>(active.size());
    Vector sign(m);
    Matrix XA(X.rows(), m);
    double C = 0.0;
    for (Index a = 0; a < m; ++a) {
      const Index j = active[static_cast<std::size_t>(a)];
      sign(a) = c(j) >= 0.0 ? 1.0 : -1.0;
      XA.col(a) = sign(a) * Xs.col(j);
      C = std::max(C, std::abs(c(j)));
    }
    if (!(C > 0.0)) break;
    const Matrix G = XA.transpose() * XA;
    const Vector G1 = G.ldlt().solve(Vector::Ones(m));
    const double AA = 1.0 / std::sqrt(G1.sum());
    const Vector w = AA * G1;
    const Vector u = XA * w;
    const Vector a = Xs.transpose() * u;

    double gamma = C / AA;
    Index next = -1;
    if (m < max_active) {
      for (Index j = 0; j < p; ++j) {
        if (in_active[static_cast<std::size_t>(j)] || !usable[static_cast<std::size_t>(j)]) continue;
        for (double cand : {(C - c(j)) / (AA - a(j)), (C + c(j)) / (AA + a(j))}) {
          if (cand > 1e-12 && cand < gamma) {
            gamma = cand;
            next = j;
          }
        }
      }
    }
    mu += gamma * u;
    for (Index idx = 0; idx < m; ++idx) beta(active[static_cast<std::size_t>(idx)]) += gamma * sign(idx) * w(idx);
    ++taken;
    if (next < 0) break;  // least-squares fit on the active set reached
    active.push_back(next);
    in_active[static_cast<std::size_t>(next)] = true;
  }
  for (Index j = 0; j < p; ++j)
    if (usable[static_cast<std::size_t>(j)]) beta(j) /= norms(j);
  fit.beta = beta;
  fit.tuning["steps"] = static_cast<double>(taken);
  return fit;
}

std::vector<double> ridge_grid(const Matrix& X) {
  const double scale = X.cols() > 0 ? std::max(X.squaredNorm() / static_cast<double>(X.cols()), 1e-12) : 1.0;
  std::vector<double> grid(25);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = scale * std::pow(10.0, -4.0 + 8.0 * static_cast<double>(i) / 24.0);
  return grid;
}

LinearFit ridge_cv(const Matrix& X, const Vector& y, const std::vector<double>& grid, Index folds, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("ridge_cv: empty grid");
  const auto err = cv_errors(X, y, grid, folds, seed, [](double tau, const Matrix& Xt, const Vector& yt, const Matrix& Xs) {
    return Vector(Xs * ridge_estimator(Xt, yt, tau));
  });
  const double tau = grid[argmin(err, true)];
  LinearFit fit;
  fit.method = "RR";
  fit.beta = ridge_estimator(X, y, tau);
  fit.tuning["tau"] = tau;
  fit.tuning["cv_error"] = *std::min_element(err.begin(), err.end());
  return fit;
}

namespace {

template <typename Fitter>
LinearFit complexity_cv(const Matrix& X, const Vector& y, Index max_complexity, Index folds, std::uint64_t seed,
                        Fitter fitter, const char* key) {
  if (max_complexity < 1) throw std::invalid_argument("cross-validation needs at least one candidate");
  std::vector<Index> candidates;
  for (Index c = 1; c <= max_complexity; ++c) candidates.push_back(c);
  const auto err = cv_errors(X, y, candidates, folds, seed, [&](Index c, const Matrix& Xt, const Vector& yt, const Matrix& Xs) {
    return Vector(Xs * fitter(Xt, yt, c).beta);
  });
  const Index chosen = candidates[argmin(err, false)];
  LinearFit fit = fitter(X, y, chosen);
  fit.tuning[key] = static_cast<double>(chosen);
  fit.tuning["cv_error"] = *std::min_element(err.begin(), err.end());
  return fit;
}

}  // namespace

LinearFit pcr_cv(const Matrix& X, const Vector& y, Index max_components, Index folds, std::uint64_t seed) {
  return complexity_cv(X, y, max_components, folds, seed,
                       [](const Matrix& Xt, const Vector& yt, Index c) { return pcr(Xt, yt, usable_components(Xt, c)); },
                       "components");
}

LinearFit pls_cv(const Matrix& X, const Vector& y, Index max_components, Index folds, std::uint64_t seed) {
  return complexity_cv(X, y, max_components, folds, seed,
                       [](const Matrix& Xt, const Vector& yt, Index c) { return pls(Xt, yt, usable_components(Xt, c)); },
                       "components");
}

LinearFit lars_cv(const Matrix& X, const Vector& y, Index max_steps, Index folds, std::uint64_t seed) {
  return complexity_cv(X, y, max_steps, folds, seed,
                       [](const Matrix& Xt, const Vector& yt, Index c) { return lars(Xt, yt, c); }, "steps");
}

}  // namespace pfr
