#include "pfr/core_model.hpp"

#include "pfr/random.hpp"

#include <limits>

namespace pfr {

Matrix DataMatrix::labeled_X() const { return select_rows(X, labeled); }

Vector DataMatrix::labeled_y() const {
  if (!y) throw std::invalid_argument("DataMatrix has no response");
  return select_rows(*y, labeled);
}

std::vector<Index> DataMatrix::unlabeled() const {
  std::vector<bool> mark(static_cast<std::size_t>(rows()), false);
  for (Index i : labeled) mark[static_cast<std::size_t>(i)] = true;
  std::vector<Index> out;
  for (Index i = 0; i < rows(); ++i)
    if (!mark[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

void DataMatrix::center() {
  if (rows() == 0) throw std::invalid_argument("cannot center an empty DataMatrix");
  const Vector means = X.colwise().mean().transpose();
  double ym = 0.0;
  if (y && !labeled.empty()) {
    for (Index i : labeled) ym += (*y)(i);
    ym /= static_cast<double>(labeled.size());
  }
  center_with(means, ym);
}

void DataMatrix::center_with(const Vector& means, double response_mean) {
  if (means.size() != cols()) throw std::invalid_argument("centering statistics do not match column count");
  X.rowwise() -= means.transpose();
  if (y) {
    for (Index i : labeled) (*y)(i) -= response_mean;
  }
  column_means = means;
  y_mean = response_mean;
}

DataMatrix make_data(Matrix X, std::optional<Vector> y) {
  DataMatrix d;
  if (y && y->size() != X.rows()) throw std::invalid_argument("response length must equal row count");
  d.X = std::move(X);
  d.y = std::move(y);
  if (d.y) {
    for (Index i = 0; i < d.y->size(); ++i)
      if (!std::isnan((*d.y)(i))) d.labeled.push_back(i);
  }
  d.column_means = Vector::Zero(d.X.cols());
  return d;
}

bool is_centered(const Matrix& X, double tol) {
  if (X.rows() == 0) return true;
  const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
  return (X.colwise().mean().cwiseAbs().array() <= tol * scale).all();
}

Matrix select_rows(const Matrix& X, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = X.row(rows[i]);
  return out;
}

Vector select_rows(const Vector& v, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

DataMatrix sample_joint(const PartialFactorModel<double>& m, Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_joint: n must be at least 1");
  validate(m.base);
  Rng rng(seed);
  const Index p = m.p();
  const Index k = m.k();
  const Vector sd = m.base.Psi.cwiseSqrt();
  const Vector lambda = residual_loading(m);
  const double noise_sd = std::sqrt(m.sigma2);
  Matrix X(n, p);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const Vector f = draw_normal_vector(k, rng);
    const Vector z = draw_normal_vector(p, rng);
    X.row(i) = (m.base.B * f + sd.cwiseProduct(z)).transpose();
    // Psi^{-1/2}(x - Bf) is exactly z
    y(i) = m.theta.dot(f) + lambda.dot(z) + noise_sd * draw_normal(rng);
  }
  return make_data(std::move(X), std::move(y));
}

}  // namespace pfr
