#pragma once

#include <gdf/error.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace gdf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Marked point sample {(X_i, Y_i)}. Points are stored column-wise in a d x n
/// matrix; every mark is finite and strictly positive.
class WeightedSample {
 public:
  WeightedSample(Matrix points, Vector weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.cols() == 0 || points_.rows() == 0) {
      throw Error(ErrorCode::InvalidInput, "sample must contain at least one point of dimension >= 1");
    }
    if (points_.cols() != weights_.size()) {
      throw Error(ErrorCode::InvalidInput,
                  "point count " + std::to_string(points_.cols()) + " does not match weight count " +
                      std::to_string(weights_.size()));
    }
    if (!points_.allFinite()) {
      throw Error(ErrorCode::InvalidInput, "sample coordinates must be finite");
    }
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      if (!std::isfinite(weights_[i]) || weights_[i] <= 0.0) {
        throw Error(ErrorCode::InvalidInput,
                    "weight at index " + std::to_string(i) + " must be finite and > 0");
      }
    }
  }

  /// Builds a sample from row-major point lists; all weights equal to one
  /// when `weights` is empty.
  static WeightedSample from_rows(const std::vector<std::vector<double>>& rows,
                                  std::vector<double> weights = {}) {
    if (rows.empty()) throw Error(ErrorCode::InvalidInput, "sample must contain at least one point");
    const auto d = static_cast<Eigen::Index>(rows.front().size());
    Matrix pts(d, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != d) {
        throw Error(ErrorCode::InvalidInput, "point " + std::to_string(i) + " has wrong dimension");
      }
      for (Eigen::Index j = 0; j < d; ++j) pts(j, static_cast<Eigen::Index>(i)) = rows[i][j];
    }
    if (weights.empty()) weights.assign(rows.size(), 1.0);
    return WeightedSample(std::move(pts), Eigen::Map<const Vector>(weights.data(), weights.size()));
  }

  Eigen::Index size() const { return points_.cols(); }
  Eigen::Index dim() const { return points_.rows(); }
  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  auto point(Eigen::Index i) const { return points_.col(i); }
  double weight(Eigen::Index i) const { return weights_[i]; }

  WeightedSample with_weights(Vector weights) const { return WeightedSample(points_, std::move(weights)); }
  WeightedSample scaled(double c) const { return with_weights(weights_ * c); }
  WeightedSample unit_weights() const { return with_weights(Vector::Ones(size())); }

 private:
  Matrix points_;
  Vector weights_;
};

/// A sample together with its smoothing bandwidth h. Immutable; every query
/// on it is a pure function.
class GdfModel {
 public:
  GdfModel(WeightedSample sample, double bandwidth, std::optional<double> weight_cap = std::nullopt)
      : sample_(std::move(sample)), bandwidth_(bandwidth), weight_cap_(weight_cap) {
    if (!std::isfinite(bandwidth_) || bandwidth_ <= 0.0) {
      throw Error(ErrorCode::InvalidInput, "bandwidth must be finite and > 0");
    }
    if (weight_cap_) {
      if (!std::isfinite(*weight_cap_) || *weight_cap_ <= 0.0) {
        throw Error(ErrorCode::InvalidInput, "weight cap must be finite and > 0");
      }
      if (sample_.weights().maxCoeff() > *weight_cap_) {
        throw Error(ErrorCode::InvalidInput, "sample weight exceeds declared weight cap");
      }
    }
  }

  const WeightedSample& sample() const { return sample_; }
  double bandwidth() const { return bandwidth_; }
  std::optional<double> weight_cap() const { return weight_cap_; }
  Eigen::Index dim() const { return sample_.dim(); }
  Eigen::Index size() const { return sample_.size(); }

 private:
  WeightedSample sample_;
  double bandwidth_;
  std::optional<double> weight_cap_;
};

inline void require_dim(const GdfModel& model, const Vector& x) {
  if (x.size() != model.dim()) {
    throw Error(ErrorCode::InvalidInput, "query has dimension " + std::to_string(x.size()) +
                                             ", model has dimension " + std::to_string(model.dim()));
  }
  if (!x.allFinite()) throw Error(ErrorCode::InvalidInput, "query point must be finite");
}

}  // namespace gdf
