#pragma once

// Synthetic generalized-density models with closed-form ground truth:
// point density p, mean mark mu(x) = E[Y | X = x], and f = mu * p.

#include <gdf/core.hpp>
#include <gdf/sample.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gdf {

using Rng = std::mt19937_64;

struct Box {
  Vector lower;
  Vector upper;
};

struct Circle {
  Vector center;
  double radius = 1.0;

  std::vector<Vector> discretize(std::size_t count) const {
    std::vector<Vector> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
      Vector p(2);
      p << center[0] + radius * std::cos(t), center[1] + radius * std::sin(t);
      pts.push_back(std::move(p));
    }
    return pts;
  }
};

/// Value, gradient and Hessian of a closed-form function.
using Field = std::function<GdfDerivatives(const Vector&)>;

struct SyntheticModel {
  std::string name;
  Eigen::Index dim = 1;
  std::function<WeightedSample(std::size_t, Rng&)> sample;
  std::function<double(const Vector&)> density;
  Field density_field;  ///< p with derivatives; empty when unavailable
  Field mark_field;     ///< mu with derivatives
  Box support;          ///< covers +-6 sigma of every component
  std::vector<Vector> density_modes;
  std::vector<Vector> true_modes;  ///< modes of f = mu * p
  std::optional<Circle> true_ridge;

  bool has_derivatives() const { return static_cast<bool>(density_field); }

  /// f = mu * p and its first two derivatives by the product rule.
  GdfDerivatives gdf(const Vector& x) const {
    if (!has_derivatives()) {
      GdfDerivatives out;
      out.value = mark_field(x).value * density(x);
      return out;
    }
    const GdfDerivatives p = density_field(x);
    const GdfDerivatives mu = mark_field(x);
    GdfDerivatives f;
    f.value = mu.value * p.value;
    f.gradient = mu.value * p.gradient + p.value * mu.gradient;
    f.hessian = mu.value * p.hessian + p.gradient * mu.gradient.transpose() +
                mu.gradient * p.gradient.transpose() + p.value * mu.hessian;
    return f;
  }
};

namespace detail {

inline GdfDerivatives isotropic_gaussian(const Vector& x, const Vector& mean, double sigma) {
  const auto d = x.size();
  const double s2 = sigma * sigma;
  const Vector diff = x - mean;
  GdfDerivatives out;
  out.value = std::pow(2.0 * std::numbers::pi * s2, -0.5 * static_cast<double>(d)) *
              std::exp(-0.5 * diff.squaredNorm() / s2);
  out.gradient = -out.value / s2 * diff;
  out.hessian = out.value * (diff * diff.transpose() / (s2 * s2) - Matrix::Identity(d, d) / s2);
  return out;
}

inline GdfDerivatives constant_field(Eigen::Index d, double c) {
  GdfDerivatives out;
  out.value = c;
  out.gradient = Vector::Zero(d);
  out.hessian = Matrix::Zero(d, d);
  return out;
}

/// Newton's method on a closed-form field, started at x0; stops once the
/// step is below tol. Throws if it does not land on a nondegenerate maximum.
inline Vector newton_maximize(const Field& field, Vector x, double tol = 1e-10, int max_iters = 200) {
  for (int it = 0; it < max_iters; ++it) {
    const GdfDerivatives f = field(x);
    const Vector step = f.hessian.ldlt().solve(-f.gradient);
    x += step;
    if (step.norm() < tol) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(field(x).hessian, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().maxCoeff() >= 0.0) break;
      return x;
    }
  }
  throw Error(ErrorCode::Numeric, "closed-form mode search did not converge to a maximum");
}

inline Field product_field(Field a, Field b) {
  return [a = std::move(a), b = std::move(b)](const Vector& x) {
    const GdfDerivatives p = a(x), q = b(x);
    GdfDerivatives f;
    f.value = p.value * q.value;
    f.gradient = p.value * q.gradient + q.value * p.gradient;
    f.hessian = p.value * q.hessian + p.gradient * q.gradient.transpose() + q.gradient * p.gradient.transpose() +
                q.value * p.hessian;
    return f;
  };
}

}  // namespace detail

/// Model (a): X ~ N(0, sigma^2 I_d), Y = 1.
inline SyntheticModel gaussian_model(Eigen::Index dim = 1, double sigma = 1.0) {
  SyntheticModel m;
  m.name = "gaussian";
  m.dim = dim;
  const Vector zero = Vector::Zero(dim);
  m.sample = [dim, sigma](std::size_t n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, sigma);
    Matrix pts(dim, static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) pts(j, i) = normal(rng);
    }
    return WeightedSample(std::move(pts), Vector::Ones(static_cast<Eigen::Index>(n)));
  };
  m.density_field = [zero, sigma](const Vector& x) { return detail::isotropic_gaussian(x, zero, sigma); };
  m.density = [f = m.density_field](const Vector& x) { return f(x).value; };
  m.mark_field = [dim](const Vector&) { return detail::constant_field(dim, 1.0); };
  m.support = {Vector::Constant(dim, -6.0 * sigma), Vector::Constant(dim, 6.0 * sigma)};
  m.density_modes = {zero};
  m.true_modes = {zero};
  return m;
}

/// Model (b): equal mixture of N((-a, 0), s^2 I) and N((a, 0), s^2 I) in the
/// plane with mu(x) = b0 + b1 * x_1. Marks are Y = mu(X) * U, U ~ Uniform(0.5, 1.5),
/// so E[Y | X] = mu(X). The tilt moves the modes of f away from those of p.
inline SyntheticModel mixture_model(double separation = 1.5, double sigma = 0.6, double b0 = 2.0,
                                    double b1 = 0.45) {
  SyntheticModel m;
  m.name = "mixture";
  m.dim = 2;
  Vector c1(2), c2(2);
  c1 << -separation, 0.0;
  c2 << separation, 0.0;
  auto mu = [b0, b1](const Vector& x) { return b0 + b1 * x[0]; };
  m.sample = [c1, c2, sigma, mu](std::size_t n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, sigma);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> noise(0.5, 1.5);
    Matrix pts(2, static_cast<Eigen::Index>(n));
    Vector w(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const Vector& c = coin(rng) ? c2 : c1;
      pts(0, i) = c[0] + normal(rng);
      pts(1, i) = c[1] + normal(rng);
      // mu is positive except > 7 sigma into the left tail; the floor keeps marks valid there.
      w[i] = std::max(mu(pts.col(i)), 1e-3) * noise(rng);
    }
    return WeightedSample(std::move(pts), std::move(w));
  };
  m.density_field = [c1, c2, sigma](const Vector& x) {
    GdfDerivatives a = detail::isotropic_gaussian(x, c1, sigma);
    const GdfDerivatives b = detail::isotropic_gaussian(x, c2, sigma);
    a.value = 0.5 * (a.value + b.value);
    a.gradient = 0.5 * (a.gradient + b.gradient);
    a.hessian = 0.5 * (a.hessian + b.hessian);
    return a;
  };
  m.density = [f = m.density_field](const Vector& x) { return f(x).value; };
  m.mark_field = [b0, b1](const Vector& x) {
    GdfDerivatives out = detail::constant_field(2, b0 + b1 * x[0]);
    out.gradient[0] = b1;
    return out;
  };
  const double reach = separation + 6.0 * sigma;
  Vector lo(2), hi(2);
  lo << -reach, -6.0 * sigma;
  hi << reach, 6.0 * sigma;
  m.support = {lo, hi};
  const Field f = detail::product_field(m.mark_field, m.density_field);
  for (const Vector& c : {c1, c2}) {
    Vector pm = detail::newton_maximize(m.density_field, c);
    m.true_modes.push_back(detail::newton_maximize(f, pm));
    m.density_modes.push_back(std::move(pm));
  }
  return m;
}

/// Model (c): points on a circle of the given radius plus isotropic Gaussian
/// noise, Y = 1. The generating circle is the reference ridge.
inline SyntheticModel circle_model(double radius = 2.0, double sigma = 0.2) {
  SyntheticModel m;
  m.name = "circle";
  m.dim = 2;
  m.sample = [radius, sigma](std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> normal(0.0, sigma);
    Matrix pts(2, static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const double t = angle(rng);
      pts(0, i) = radius * std::cos(t) + normal(rng);
      pts(1, i) = radius * std::sin(t) + normal(rng);
    }
    return WeightedSample(std::move(pts), Vector::Ones(static_cast<Eigen::Index>(n)));
  };
  // Angular average of N(R(cos t, sin t), s^2 I):
  //   p(x) = exp(-(r^2 + R^2) / (2 s^2)) I_0(r R / s^2) / (2 pi s^2).
  m.density = [radius, sigma](const Vector& x) {
    const double s2 = sigma * sigma;
    const double r = x.norm();
    const double z = r * radius / s2;
    const double gap = -(r - radius) * (r - radius) / (2.0 * s2);
    // I_0(z) e^{-z}, switching to the asymptotic series where I_0 would overflow.
    const double scaled_i0 = z < 500.0 ? std::cyl_bessel_i(0.0, z) * std::exp(-z)
                                       : (1.0 + 1.0 / (8.0 * z)) / std::sqrt(2.0 * std::numbers::pi * z);
    return std::exp(gap) * scaled_i0 / (2.0 * std::numbers::pi * s2);
  };
  m.mark_field = [](const Vector&) { return detail::constant_field(2, 1.0); };
  const double reach = radius + 6.0 * sigma;
  m.support = {Vector::Constant(2, -reach), Vector::Constant(2, reach)};
  m.true_ridge = Circle{Vector::Zero(2), radius};
  return m;
}

}  // namespace gdf
