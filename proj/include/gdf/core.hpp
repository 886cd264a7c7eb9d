#pragma once

// Weighted Gaussian-kernel estimate of a generalized density function
//
//   f(x) = 1/(n h^d) * sum_i Y_i K((x - X_i) / h),  K = standard normal density,
//
// together with its gradient and Hessian. Sums run in ascending index order
// into long double accumulators so results are reproducible bit for bit.

#include <gdf/sample.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>

namespace gdf {

/// Terms with ||x - X_i|| / h beyond this radius contribute exactly zero.
inline constexpr double kUnderflowRadius = 40.0;
inline constexpr double kUnderflowRadiusSq = kUnderflowRadius * kUnderflowRadius;

/// Optional instrumentation: number of kernel terms evaluated.
struct EvalCounter {
  std::size_t kernel_evals = 0;
};

struct GdfDerivatives {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
  /// True when every kernel term underflowed (value is exactly zero).
  bool low_density = false;
};

/// (2 pi)^(-d/2)
inline double gaussian_normalizer(Eigen::Index d) {
  return std::pow(2.0 * std::numbers::pi, -0.5 * static_cast<double>(d));
}

inline double kernel_value(const Vector& u) {
  if (!u.allFinite()) throw Error(ErrorCode::InvalidInput, "kernel argument must be finite");
  if (u.size() == 0) throw Error(ErrorCode::InvalidInput, "kernel argument must have dimension >= 1");
  return gaussian_normalizer(u.size()) * std::exp(-0.5 * u.squaredNorm());
}

namespace detail {

/// exp(-s/2) with the hard underflow cutoff applied; s is the squared scaled distance.
inline double kernel_profile(double scaled_sq) {
  return scaled_sq > kUnderflowRadiusSq ? 0.0 : std::exp(-0.5 * scaled_sq);
}

inline double value_scale(const GdfModel& m, int extra_power) {
  const double h = m.bandwidth();
  return gaussian_normalizer(m.dim()) /
         (static_cast<double>(m.size()) * std::pow(h, static_cast<double>(m.dim() + extra_power)));
}

inline void count(EvalCounter* counter, std::size_t k) {
  if (counter != nullptr) counter->kernel_evals += k;
}

}  // namespace detail

inline double gdf_value(const GdfModel& model, const Vector& x, EvalCounter* counter = nullptr) {
  require_dim(model, x);
  const auto& pts = model.sample().points();
  const auto& w = model.sample().weights();
  const double inv_h2 = 1.0 / (model.bandwidth() * model.bandwidth());
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double s = (x - pts.col(i)).squaredNorm() * inv_h2;
    acc += static_cast<long double>(w[i] * detail::kernel_profile(s));
  }
  detail::count(counter, static_cast<std::size_t>(pts.cols()));
  return static_cast<double>(acc * detail::value_scale(model, 0));
}

inline Vector gdf_gradient(const GdfModel& model, const Vector& x, EvalCounter* counter = nullptr) {
  require_dim(model, x);
  const auto& pts = model.sample().points();
  const auto& w = model.sample().weights();
  const Eigen::Index d = model.dim();
  const double inv_h2 = 1.0 / (model.bandwidth() * model.bandwidth());
  Eigen::Matrix<long double, Eigen::Dynamic, 1> acc = Eigen::Matrix<long double, Eigen::Dynamic, 1>::Zero(d);
  Vector diff(d);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    diff.noalias() = pts.col(i) - x;
    const double term = w[i] * detail::kernel_profile(diff.squaredNorm() * inv_h2);
    if (term == 0.0) continue;
    for (Eigen::Index j = 0; j < d; ++j) acc[j] += static_cast<long double>(term * diff[j]);
  }
  detail::count(counter, static_cast<std::size_t>(pts.cols()));
  return (acc * static_cast<long double>(detail::value_scale(model, 2))).cast<double>();
}

inline Matrix gdf_hessian(const GdfModel& model, const Vector& x, EvalCounter* counter = nullptr) {
  require_dim(model, x);
  const auto& pts = model.sample().points();
  const auto& w = model.sample().weights();
  const Eigen::Index d = model.dim();
  const double h2 = model.bandwidth() * model.bandwidth();
  const double inv_h2 = 1.0 / h2;
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> acc =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>::Zero(d, d);
  long double mass = 0.0L;
  Vector diff(d);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    diff.noalias() = pts.col(i) - x;
    const double term = w[i] * detail::kernel_profile(diff.squaredNorm() * inv_h2);
    if (term == 0.0) continue;
    mass += term;
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = a; b < d; ++b) acc(a, b) += static_cast<long double>(term * diff[a] * diff[b]);
    }
  }
  detail::count(counter, static_cast<std::size_t>(pts.cols()));
  Matrix out(d, d);
  const long double scale = detail::value_scale(model, 4);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a; b < d; ++b) {
      long double v = acc(a, b);
      if (a == b) v -= static_cast<long double>(h2) * mass;
      out(a, b) = out(b, a) = static_cast<double>(v * scale);
    }
  }
  return out;
}

/// Value, gradient and Hessian from a single pass over the sample.
inline GdfDerivatives gdf_all(const GdfModel& model, const Vector& x, EvalCounter* counter = nullptr) {
  require_dim(model, x);
  const auto& pts = model.sample().points();
  const auto& w = model.sample().weights();
  const Eigen::Index d = model.dim();
  const double h2 = model.bandwidth() * model.bandwidth();
  const double inv_h2 = 1.0 / h2;
  Eigen::Matrix<long double, Eigen::Dynamic, 1> grad = Eigen::Matrix<long double, Eigen::Dynamic, 1>::Zero(d);
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> outer =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>::Zero(d, d);
  long double mass = 0.0L;
  Vector diff(d);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    diff.noalias() = pts.col(i) - x;
    const double term = w[i] * detail::kernel_profile(diff.squaredNorm() * inv_h2);
    if (term == 0.0) continue;
    mass += term;
    for (Eigen::Index a = 0; a < d; ++a) {
      grad[a] += static_cast<long double>(term * diff[a]);
      for (Eigen::Index b = a; b < d; ++b) outer(a, b) += static_cast<long double>(term * diff[a] * diff[b]);
    }
  }
  detail::count(counter, static_cast<std::size_t>(pts.cols()));

  GdfDerivatives out;
  out.value = static_cast<double>(mass * detail::value_scale(model, 0));
  out.gradient = (grad * static_cast<long double>(detail::value_scale(model, 2))).cast<double>();
  out.hessian.resize(d, d);
  const long double scale = detail::value_scale(model, 4);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a; b < d; ++b) {
      long double v = outer(a, b);
      if (a == b) v -= static_cast<long double>(h2) * mass;
      out.hessian(a, b) = out.hessian(b, a) = static_cast<double>(v * scale);
    }
  }
  out.low_density = (mass == 0.0L);
  return out;
}

/// Rule-of-thumb bandwidth (Silverman-style, weighted spread, plain n).
/// Heuristic only: nothing else in the library calls it.
inline double silverman_bandwidth(const WeightedSample& sample) {
  const auto& pts = sample.points();
  const auto& w = sample.weights();
  const double total = w.sum();
  const Vector mean = pts * w / total;
  double spread = 0.0;
  for (Eigen::Index j = 0; j < sample.dim(); ++j) {
    const double var = ((pts.row(j).transpose().array() - mean[j]).square() * w.array()).sum() / total;
    spread += std::sqrt(var);
  }
  spread /= static_cast<double>(sample.dim());
  const auto d = static_cast<double>(sample.dim());
  const auto n = static_cast<double>(sample.size());
  const double h = std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0)) * std::pow(n, -1.0 / (d + 4.0)) * spread;
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::InvalidInput, "rule-of-thumb bandwidth undefined for a sample with zero spread");
  }
  return h;
}

}  // namespace gdf
