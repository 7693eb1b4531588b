#include "pfr/selection.hpp"

#include "pfr/linalg.hpp"
#include "pfr/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace pfr {

std::string SubspaceEstimate::modal_rank() const {
  std::string best;
  double top = -1.0;
  for (const auto& [key, prob] : rank_distribution) {
    if (prob > top) {
      top = prob;
      best = key;
    }
  }
  return best;
}

LambdaModel reparametrize(const PartialFactorModel<double>& m) {
  LambdaModel out;
  out.base = m.base;
  out.theta = m.theta;
  out.Lambda = residual_loading(m);
  out.sigma2 = m.sigma2;
  out.inclusion_theta = out.theta.array() != 0.0;
  out.inclusion_lambda = out.Lambda.array() != 0.0;
  return out;
}

PartialFactorModel<double> to_partial_factor(const LambdaModel& m) {
  PartialFactorModel<double> out;
  out.base = m.base;
  out.theta = m.theta;
  out.V = m.base.B * m.theta + m.base.Psi.cwiseSqrt().cwiseProduct(m.Lambda);
  out.sigma2 = m.sigma2;
  out.omega = m.sigma2 + m.theta.squaredNorm() + m.Lambda.squaredNorm();
  return out;
}

double lambda_regression_mean(const LambdaModel& m, const Vector& f, const Vector& x) {
  const Vector r = (x - m.base.B * f).cwiseQuotient(m.base.Psi.cwiseSqrt());
  return m.theta.dot(f) + m.Lambda.dot(r);
}

double conditional_mean_reduced(const LambdaModel& m, const Vector& x) {
  if ((m.Lambda.array() != 0.0).any()) {
    throw std::invalid_argument("conditional_mean_reduced: requires Lambda = 0 (pure factor model)");
  }
  if (x.size() != m.p()) throw std::invalid_argument("conditional_mean_reduced: dimension mismatch");
  std::vector<Index> response_cols, other_cols;
  for (Index g = 0; g < m.k(); ++g) (m.theta(g) != 0.0 ? response_cols : other_cols).push_back(g);
  if (response_cols.empty()) return 0.0;

  const Index p = m.p();
  Matrix BY(p, static_cast<Index>(response_cols.size()));
  Matrix BX(p, static_cast<Index>(other_cols.size()));
  Vector thetaY(static_cast<Index>(response_cols.size()));
  for (std::size_t i = 0; i < response_cols.size(); ++i) {
    BY.col(static_cast<Index>(i)) = m.base.B.col(response_cols[i]);
    thetaY(static_cast<Index>(i)) = m.theta(response_cols[i]);
  }
  for (std::size_t i = 0; i < other_cols.size(); ++i) BX.col(static_cast<Index>(i)) = m.base.B.col(other_cols[i]);

  const FactorCovarianceSolver<double> delta(BX, m.base.Psi);  // Delta = B_X B_X' + Psi
  const Matrix delta_inv_BY = delta.solve(BY);
  const Matrix M = BY.transpose() * delta_inv_BY;
  const Index r = M.rows();
  const Matrix I = Matrix::Identity(r, r);
  const Matrix shrink = I - M * (I + M).ldlt().solve(I);
  const Vector projected = delta_inv_BY.transpose() * x;  // B_Y' Delta^-1 x
  return thetaY.dot(shrink * projected);
}

void SpikeSlabPriors::validate() const {
  factor.validate();
  if (!(theta_precision > 0 && lambda_precision > 0 && sigma_shape > 0 && sigma_rate > 0)) {
    throw std::invalid_argument("SpikeSlabPriors: precisions and sigma2 hyperparameters must be positive");
  }
  for (double pi : {theta_inclusion, lambda_inclusion, loading_inclusion}) {
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("SpikeSlabPriors: inclusion probabilities must lie in (0, 1)");
  }
}

namespace {


bool diagonal_entry(Index j, Index g) { return j == g; }

// Posterior inclusion draw for one coefficient with slab precision `prec`,
// column z and partial residual e; returns the new coefficient value.
double spike_slab_update(const Eigen::Ref<const Vector>& z, const Vector& e, double sigma2, double prec,
                         double prior_inclusion, bool& included, Rng& rng) {
  const double ztz = z.squaredNorm() / sigma2;
  const double zte = z.dot(e) / sigma2;
  const double post_prec = prec + ztz;
  const double log_bf = 0.5 * std::log(prec / post_prec) + 0.5 * zte * zte / post_prec;
  const double log_odds = log_bf + std::log(prior_inclusion) - std::log1p(-prior_inclusion);
  const double prob = 1.0 / (1.0 + std::exp(-log_odds));
  included = draw_uniform(rng) < prob;
  if (!included) return 0.0;
  return zte / post_prec + draw_normal(rng) / std::sqrt(post_prec);
}

class SpikeSlabGibbs {
 public:
  SpikeSlabGibbs(const DataMatrix& data, Index k, const SpikeSlabPriors& priors, SpikeSlabState start)
      : X_(data.X), k_(k), priors_(priors), labeled_(data.labeled), yL_(data.labeled_y()), s_(std::move(start)) {
    XL_ = select_rows(X_, labeled_);
  }

  SpikeSlabGibbs(const DataMatrix& data, Index k, const SpikeSlabPriors& priors)
      : SpikeSlabGibbs(data, k, priors, initial(data, k, priors)) {}

  void sweep(Rng& rng) {
    sample_scores(rng);
    refresh_residuals();
    sample_loadings(rng);
    sample_precisions(rng);
    sample_idiosyncratic(rng);
    refresh_residuals();
    sample_regression(rng);
    sample_noise(rng);
  }

  LambdaModel snapshot() const { return s_.model(); }
  SpikeSlabState&& release() { return std::move(s_); }

  double psi_acceptance() const {
    return psi_proposals_ == 0 ? 1.0 : static_cast<double>(psi_accepts_) / static_cast<double>(psi_proposals_);
  }

 private:
  static SpikeSlabState initial(const DataMatrix& data, Index k, const SpikeSlabPriors& priors) {
    SpikeSlabState s;
    const Index p = data.cols();
    s.factor = initial_state(data.X, k, priors.factor, Identification::LowerTriangular);
    s.theta = Vector::Zero(k);
    s.Lambda = Vector::Zero(p);
    const Vector y = data.labeled_y();
    s.sigma2 = std::max(y.squaredNorm() / static_cast<double>(y.size()), 1e-6);
    s.inclusion_theta = Mask::Constant(k, false);
    s.inclusion_lambda = Mask::Constant(p, false);
    if (priors.sparse_loadings) {
      s.inclusion_B = MaskMatrix::Constant(p, k, false);
      for (Index j = 0; j < p; ++j)
        for (Index g = 0; g <= std::min(j, k - 1); ++g) s.inclusion_B(j, g) = true;
    }
    return s;
  }

  Index p() const { return X_.cols(); }
  Index free_in_row(Index j) const { return std::min(j + 1, k_); }
  bool loading_included(Index j, Index g) const { return s_.inclusion_B.size() == 0 || s_.inclusion_B(j, g); }

  // F_L, R_L and the response residual y - F_L theta - R_L Lambda.
  void refresh_residuals() {
    FL_ = select_rows(s_.factor.F, labeled_);
    RL_ = (XL_ - FL_ * s_.factor.B.transpose()) * s_.factor.Psi.cwiseSqrt().cwiseInverse().asDiagonal();
    ry_ = yL_ - FL_ * s_.theta - RL_ * s_.Lambda;
  }

  void sample_scores(Rng& rng) {
    const FactorState& f = s_.factor;
    const Vector psi_inv = f.Psi.cwiseInverse();
    const Vector sd_inv = f.Psi.cwiseSqrt().cwiseInverse();
    const Matrix scaled_B = psi_inv.asDiagonal() * f.B;
    Matrix base_prec = Matrix::Identity(k_, k_);
    base_prec.noalias() += f.B.transpose() * scaled_B;
    // labeled rows: y - Lambda Psi^{-1/2} x = h'f + eps, h = theta - B' Psi^{-1/2} Lambda
    const Vector h = s_.theta - f.B.transpose() * sd_inv.cwiseProduct(s_.Lambda);
    Matrix lab_prec = base_prec + h * h.transpose() / s_.sigma2;
    Eigen::LLT<Matrix> base_llt(base_prec);
    Eigen::LLT<Matrix> lab_llt(lab_prec);
    const Vector lam_scaled = sd_inv.cwiseProduct(s_.Lambda);

    std::vector<bool> is_labeled(static_cast<std::size_t>(X_.rows()), false);
    std::vector<Index> slot(static_cast<std::size_t>(X_.rows()), -1);
    for (std::size_t i = 0; i < labeled_.size(); ++i) {
      is_labeled[static_cast<std::size_t>(labeled_[i])] = true;
      slot[static_cast<std::size_t>(labeled_[i])] = static_cast<Index>(i);
    }
    Matrix F(X_.rows(), k_);
    for (Index i = 0; i < X_.rows(); ++i) {
      Vector lin = scaled_B.transpose() * X_.row(i).transpose();
      if (is_labeled[static_cast<std::size_t>(i)]) {
        const double target = yL_(slot[static_cast<std::size_t>(i)]) - lam_scaled.dot(X_.row(i));
        lin += h * (target / s_.sigma2);
        F.row(i) = draw_from_precision(lab_llt.solve(lin), lab_llt, rng).transpose();
      } else {
        F.row(i) = draw_from_precision(base_llt.solve(lin), base_llt, rng).transpose();
      }
    }
    s_.factor.F = std::move(F);
  }

  void sample_loadings(Rng& rng) {
    FactorState& f = s_.factor;
    const Matrix FtF = f.F.transpose() * f.F;
    const Matrix FLtFL = FL_.transpose() * FL_;
    const Matrix FtX = f.F.transpose() * X_;
    for (Index j = 0; j < p(); ++j) {
      const Index m = free_in_row(j);
      const double psi = f.Psi(j);
      const double c = s_.Lambda(j) / std::sqrt(psi);
      const Vector e = ry_ - c * FL_ * f.B.row(j).transpose();  // e = -c F_L b_j + eps
      Matrix Q = FtF.topLeftCorner(m, m) / psi + (c * c / s_.sigma2) * FLtFL.topLeftCorner(m, m);
      Vector h = FtX.col(j).head(m) / psi - (c / s_.sigma2) * (FL_.leftCols(m).transpose() * e);
      Vector b = f.B.row(j).head(m).transpose();
      // single-site updates; the diagonal stays included and nonnegative
      for (Index g = 0; g < m; ++g) {
        const double prior_prec = s_.factor.xi(g) / psi;
        const double lin = h(g) - Q.row(g).dot(b) + Q(g, g) * b(g);
        const double prec = Q(g, g) + prior_prec;
        if (diagonal_entry(j, g)) {
          b(g) = draw_truncated_normal_positive(lin / prec, 1.0 / std::sqrt(prec), rng);
        } else if (s_.inclusion_B.size() != 0) {
          const double log_bf = 0.5 * std::log(prior_prec / prec) + 0.5 * lin * lin / prec;
          const double log_odds =
              log_bf + std::log(priors_.loading_inclusion) - std::log1p(-priors_.loading_inclusion);
          const bool inc = draw_uniform(rng) < 1.0 / (1.0 + std::exp(-log_odds));
          s_.inclusion_B(j, g) = inc;
          b(g) = inc ? lin / prec + draw_normal(rng) / std::sqrt(prec) : 0.0;
        } else {
          b(g) = lin / prec + draw_normal(rng) / std::sqrt(prec);
        }
      }
      f.B.row(j).head(m) = b.transpose();
      ry_ = e + c * (FL_.leftCols(m) * b);
    }
    RL_ = (XL_ - FL_ * f.B.transpose()) * f.Psi.cwiseSqrt().cwiseInverse().asDiagonal();
  }

  void sample_precisions(Rng& rng) {
    FactorState& f = s_.factor;
    const Vector psi_inv = f.Psi.cwiseInverse();
    for (Index g = 0; g < k_; ++g) {
      double ss = 0.0;
      Index count = 0;
      for (Index j = g; j < p(); ++j) {
        if (!loading_included(j, g)) continue;
        ss += f.B(j, g) * f.B(j, g) * psi_inv(j);
        ++count;
      }
      f.xi(g) = draw_gamma(priors_.factor.xi_shape + 0.5 * static_cast<double>(count), priors_.factor.xi_rate + 0.5 * ss, rng);
    }
  }

  void sample_idiosyncratic(Rng& rng) {
    FactorState& f = s_.factor;
    const Index n = X_.rows();
    const Matrix resid = X_ - f.F * f.B.transpose();
    const Matrix residL = XL_ - FL_ * f.B.transpose();
    for (Index j = 0; j < p(); ++j) {
      double prior_ss = 0.0;
      Index count = 0;
      for (Index g = 0; g < free_in_row(j); ++g) {
        if (!loading_included(j, g)) continue;
        prior_ss += f.B(j, g) * f.B(j, g) * f.xi(g);
        ++count;
      }
      const double shape = priors_.factor.psi_shape + 0.5 * static_cast<double>(n + count);
      const double rate = priors_.factor.psi_rate + 0.5 * (resid.col(j).squaredNorm() + prior_ss);
      const double proposal = draw_inverse_gamma(shape, rate, rng);
      const double lambda = s_.Lambda(j);
      if (lambda == 0.0) {
        f.Psi(j) = proposal;
        continue;
      }
      // independence proposal from the factor-model conditional: accept on the response likelihood
      const Vector r_old = residL.col(j) / std::sqrt(f.Psi(j));
      const Vector r_new = residL.col(j) / std::sqrt(proposal);
      const Vector ry_new = ry_ + lambda * (r_old - r_new);
      const double log_ratio = -(ry_new.squaredNorm() - ry_.squaredNorm()) / (2.0 * s_.sigma2);
      ++psi_proposals_;
      if (std::log(draw_uniform(rng)) < log_ratio) {
        ++psi_accepts_;
        f.Psi(j) = proposal;
        ry_ = ry_new;
      }
    }
  }

  void sample_regression(Rng& rng) {
    for (Index g = 0; g < k_; ++g) {
      const Vector e = ry_ + FL_.col(g) * s_.theta(g);
      bool inc = false;
      s_.theta(g) = spike_slab_update(FL_.col(g), e, s_.sigma2, priors_.theta_precision, priors_.theta_inclusion, inc, rng);
      s_.inclusion_theta(g) = inc;
      ry_ = e - FL_.col(g) * s_.theta(g);
    }
    for (Index j = 0; j < p(); ++j) {
      const Vector e = ry_ + RL_.col(j) * s_.Lambda(j);
      bool inc = false;
      s_.Lambda(j) = spike_slab_update(RL_.col(j), e, s_.sigma2, priors_.lambda_precision, priors_.lambda_inclusion, inc, rng);
      s_.inclusion_lambda(j) = inc;
      ry_ = e - RL_.col(j) * s_.Lambda(j);
    }
  }

  void sample_noise(Rng& rng) {
    const double shape = priors_.sigma_shape + 0.5 * static_cast<double>(ry_.size());
    s_.sigma2 = draw_inverse_gamma(shape, priors_.sigma_rate + 0.5 * ry_.squaredNorm(), rng);
  }

  const Matrix& X_;
  Index k_;
  SpikeSlabPriors priors_;
  std::vector<Index> labeled_;
  Vector yL_;
  Matrix XL_;
  SpikeSlabState s_;
  Matrix FL_;
  Matrix RL_;
  Vector ry_;
  Index psi_proposals_ = 0;
  Index psi_accepts_ = 0;
};

}  // namespace

LambdaModel SpikeSlabState::model() const {
  LambdaModel m;
  m.base = FactorModel<double>{factor.B, factor.Psi};
  m.theta = theta;
  m.Lambda = Lambda;
  m.sigma2 = sigma2;
  m.inclusion_theta = inclusion_theta;
  m.inclusion_lambda = inclusion_lambda;
  m.inclusion_B = inclusion_B;
  return m;
}

SpikeSlabState draw_spike_slab_prior(Index p, Index n, Index k, const SpikeSlabPriors& priors, Rng& rng) {
  priors.validate();
  if (k < 1 || k > p) throw std::invalid_argument("draw_spike_slab_prior: need 1 <= k <= p");
  SpikeSlabState s;
  s.factor = draw_from_prior(p, n, k, priors.factor, Identification::LowerTriangular, rng);
  if (priors.sparse_loadings) {
    s.inclusion_B = MaskMatrix::Constant(p, k, false);
    for (Index j = 0; j < p; ++j) {
      for (Index g = 0; g <= std::min(j, k - 1); ++g) {
        const bool inc = g == j || draw_uniform(rng) < priors.loading_inclusion;
        s.inclusion_B(j, g) = inc;
        if (!inc) s.factor.B(j, g) = 0.0;
      }
    }
  }
  auto slab = [&](Index size, double prec, double pi, Vector& value, Mask& inc) {
    value = Vector::Zero(size);
    inc = Mask::Constant(size, false);
    for (Index i = 0; i < size; ++i) {
      inc(i) = draw_uniform(rng) < pi;
      if (inc(i)) value(i) = draw_normal(rng) / std::sqrt(prec);
    }
  };
  slab(k, priors.theta_precision, priors.theta_inclusion, s.theta, s.inclusion_theta);
  slab(p, priors.lambda_precision, priors.lambda_inclusion, s.Lambda, s.inclusion_lambda);
  s.sigma2 = draw_inverse_gamma(priors.sigma_shape, priors.sigma_rate, rng);
  return s;
}

DataMatrix draw_spike_slab_data(const SpikeSlabState& state, Index n_labeled, Rng& rng) {
  const FactorState& f = state.factor;
  const Index n = f.F.rows();
  if (n_labeled < 0 || n_labeled > n) throw std::invalid_argument("draw_spike_slab_data: n_labeled out of range");
  const Matrix X = draw_predictors(f, rng);
  const Matrix R = (X - f.F * f.B.transpose()) * f.Psi.cwiseSqrt().cwiseInverse().asDiagonal();
  Vector y = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  const double sd = std::sqrt(state.sigma2);
  for (Index i = 0; i < n_labeled; ++i) y(i) = f.F.row(i).dot(state.theta) + R.row(i).dot(state.Lambda) + sd * draw_normal(rng);
  return make_data(X, y);
}

void spike_slab_sweep(SpikeSlabState& state, const DataMatrix& data, const SpikeSlabPriors& priors, Rng& rng) {
  const Index k = state.factor.B.cols();
  if (state.factor.B.rows() != data.cols() || state.factor.F.rows() != data.rows()) {
    throw std::invalid_argument("spike_slab_sweep: state does not match the data");
  }
  if (!data.y || data.labeled.empty()) throw std::invalid_argument("spike_slab_sweep: needs labeled responses");
  SpikeSlabGibbs sampler(data, k, priors, std::move(state));
  sampler.sweep(rng);
  state = sampler.release();
}

SpikeSlabResult spike_slab_sampler(const DataMatrix& data, Index k, const SpikeSlabPriors& priors,
                                   const SweepSchedule& schedule, std::uint64_t seed) {
  priors.validate();
  schedule.validate();
  if (data.cols() > kSelectionMaxPredictors || data.rows() > kSelectionMaxRows) {
    throw std::invalid_argument("spike_slab_sampler: limited to p <= 50 and n <= 200");
  }
  if (k < 1 || k > data.rows() || k > data.cols()) throw std::invalid_argument("spike_slab_sampler: need 1 <= k <= min(n, p)");
  if (!data.y || data.labeled.empty()) throw std::invalid_argument("spike_slab_sampler: needs labeled responses");
  if (!is_centered(data.X)) throw std::invalid_argument("spike_slab_sampler: predictors must be centered");

  Rng rng(seed);
  SpikeSlabGibbs sampler(data, k, priors);
  SpikeSlabResult out;
  out.chain.reserve(static_cast<std::size_t>(schedule.retained()));
  for (Index sweep = 0; sweep < schedule.total; ++sweep) {
    sampler.sweep(rng);
    if (sweep < schedule.burn_in || (sweep - schedule.burn_in) % schedule.thin != 0) continue;
    out.chain.push_back(sampler.snapshot());
  }
  out.estimate = estimate_subspace(out.chain);
  out.psi_acceptance = sampler.psi_acceptance();
  return out;
}

SubspaceEstimate estimate_subspace(const std::vector<LambdaModel>& chain) {
  if (chain.empty()) throw std::invalid_argument("estimate_subspace: empty chain");
  const Index k = chain.front().k();
  SubspaceEstimate est;
  for (Index j = 0; j <= k; ++j) est.rank_distribution[std::to_string(j)] = 0.0;
  est.rank_distribution["H0"] = 0.0;
  const double unit = 1.0 / static_cast<double>(chain.size());
  for (const auto& state : chain) {
    if (state.inclusion_lambda.any()) {
      est.rank_distribution["H0"] += unit;
      continue;
    }
    est.prob_lambda_zero += unit;
    est.rank_distribution[std::to_string(state.inclusion_theta.count())] += unit;
  }
  return est;
}

InclusionReport three_question_report(const std::vector<LambdaModel>& chain) {
  if (chain.empty()) throw std::invalid_argument("three_question_report: empty chain");
  const LambdaModel& first = chain.front();
  InclusionReport rep;
  rep.prob_theta = Vector::Zero(first.inclusion_theta.size());
  rep.prob_lambda = Vector::Zero(first.inclusion_lambda.size());
  const bool loadings = first.inclusion_B.size() != 0;
  if (loadings) rep.prob_loading = Matrix::Zero(first.inclusion_B.rows(), first.inclusion_B.cols());
  for (const auto& s : chain) {
    rep.prob_theta += s.inclusion_theta.cast<double>().matrix();
    rep.prob_lambda += s.inclusion_lambda.cast<double>().matrix();
    if (loadings) rep.prob_loading += s.inclusion_B.cast<double>().matrix();
  }
  const double inv = 1.0 / static_cast<double>(chain.size());
  rep.prob_theta *= inv;
  rep.prob_lambda *= inv;
  if (loadings) rep.prob_loading *= inv;
  return rep;
}

void write_chain(std::ostream& out, const std::vector<LambdaModel>& chain) {
  out << std::setprecision(17);
  for (const auto& s : chain) {
    bool first = true;
    auto put = [&](double v) {
      if (!first) out << ',';
      out << v;
      first = false;
    };
    for (Index j = 0; j < s.base.B.rows(); ++j)
      for (Index g = 0; g < s.base.B.cols(); ++g) put(s.base.B(j, g));
    for (Index j = 0; j < s.base.Psi.size(); ++j) put(s.base.Psi(j));
    for (Index g = 0; g < s.theta.size(); ++g) put(s.theta(g));
    for (Index j = 0; j < s.Lambda.size(); ++j) put(s.Lambda(j));
    put(s.sigma2);
    for (Index g = 0; g < s.inclusion_theta.size(); ++g) put(s.inclusion_theta(g) ? 1.0 : 0.0);
    for (Index j = 0; j < s.inclusion_lambda.size(); ++j) put(s.inclusion_lambda(j) ? 1.0 : 0.0);
    for (Index j = 0; j < s.inclusion_B.rows(); ++j)
      for (Index g = 0; g < s.inclusion_B.cols(); ++g) put(s.inclusion_B(j, g) ? 1.0 : 0.0);
    out << '\n';
  }
}

}  // namespace pfr
