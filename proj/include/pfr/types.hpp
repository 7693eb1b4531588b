// Shared aliases, the data container and error types.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfr {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Raised when a supplied parameter set cannot describe a valid joint law.
class ModelInconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an unpenalized solve meets a singular system.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Predictor matrix with optional response.
 *
 * Rows are observations. Unlabeled rows carry NaN in `y` and are absent
 * from `labeled`. After `center()` the columns of X have zero mean and
 * `column_means` holds the statistics that were subtracted; `y_mean` is the
 * mean of the labeled responses.
 */
struct DataMatrix {
  Matrix X;
  std::optional<Vector> y;
  std::vector<Index> labeled;
  Vector column_means;
  double y_mean = 0.0;

  Index rows() const { return X.rows(); }
  Index cols() const { return X.cols(); }
  bool has_response() const { return y.has_value(); }

  /// Labeled rows of X, in `labeled` order.
  Matrix labeled_X() const;
  /// Responses of the labeled rows, in `labeled` order.
  Vector labeled_y() const;
  /// Rows not in `labeled`.
  std::vector<Index> unlabeled() const;

  /// Subtract training column means from X (and the labeled mean from y).
  void center();
  /// Center with externally supplied statistics (test rows use training means).
  void center_with(const Vector& means, double response_mean);
};

/// Build a DataMatrix; NaN responses mark unlabeled rows.
DataMatrix make_data(Matrix X, std::optional<Vector> y = std::nullopt);

/// True when every column mean is within `tol` (scaled by the data magnitude) of zero.
bool is_centered(const Matrix& X, double tol = 1e-10);

Matrix select_rows(const Matrix& X, const std::vector<Index>& rows);
Vector select_rows(const Vector& v, const std::vector<Index>& rows);

}  // namespace pfr
