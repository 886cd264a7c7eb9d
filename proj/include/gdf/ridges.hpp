#pragma once

// Weighted subspace-constrained mean shift: x <- x + V(x) V(x)^T m(x), where
// V spans the eigenvectors of the estimated Hessian for all but the largest
// eigenvalue and m(x) = h^2 grad f(x) / f(x) is the mean-shift vector.

#include <gdf/core.hpp>
#include <gdf/modes.hpp>
#include <gdf/parallel.hpp>

#include <Eigen/Eigenvalues>

#include <optional>
#include <sstream>
#include <vector>

namespace gdf {

struct EigenFrame {
  Vector eigenvalues;  ///< descending
  Vector leading;      ///< v_1, eigenvector of the largest eigenvalue
  Matrix basis;        ///< V = [v_2 ... v_d], d x (d-1), orthonormal columns
  bool degenerate = false;

  Matrix projector() const { return basis * basis.transpose(); }
};

/// Relative gap below which lambda_1 and lambda_2 are treated as coincident.
inline constexpr double kDegenerateGap = 1e-10;

inline EigenFrame eigen_frame(const Matrix& hessian) {
  const Eigen::Index d = hessian.rows();
  if (hessian.cols() != d) throw Error(ErrorCode::InvalidInput, "Hessian must be square");
  if (d < 2) throw Error(ErrorCode::UnsupportedDimension, "ridges need dimension >= 2");
  if (!hessian.allFinite()) throw Error(ErrorCode::Numeric, "Hessian has non-finite entries");
  const double scale = hessian.cwiseAbs().maxCoeff();
  if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::InvalidInput, "Hessian must be symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(hessian);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::Numeric, "symmetric eigensolver failed");

  EigenFrame frame;
  frame.eigenvalues = es.eigenvalues().reverse();
  Matrix vecs = es.eigenvectors().rowwise().reverse();
  // Sign convention: the first entry of largest magnitude is positive.
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(vecs(j, k)) > std::abs(vecs(arg, k))) arg = j;
    }
    if (vecs(arg, k) < 0.0) vecs.col(k) *= -1.0;
  }
  frame.leading = vecs.col(0);
  frame.basis = vecs.rightCols(d - 1);
  const double lam_scale = frame.eigenvalues.cwiseAbs().maxCoeff();
  frame.degenerate = (frame.eigenvalues[0] - frame.eigenvalues[1]) < kDegenerateGap * lam_scale;
  return frame;
}

struct RidgePointSet {
  std::vector<Vector> points;
  std::vector<double> projected_grad_norms;  ///< max-norm of V V^T grad f
  std::vector<double> second_eigenvalues;
  std::vector<double> values;
  std::vector<std::size_t> seed_indices;

  std::size_t size() const { return points.size(); }
};

struct RidgeOptions {
  double density_floor = 0.0;
  /// Absolute acceptance threshold on the projected gradient. When unset it
  /// is relative_ridge_tol times the largest of |grad f| and f / h over the
  /// seeds (f / h keeps the scale meaningful when every seed is stationary).
  std::optional<double> ridge_tol;
  double relative_ridge_tol = 1e-6;
};

struct RidgeSearch {
  RidgePointSet ridge;
  std::vector<Vector> endpoints;
  std::vector<StopReason> reasons;
  double ridge_tol = 0.0;
};

namespace detail {

struct ScmsState {
  Vector next;
  GdfDerivatives derivs;
  EigenFrame frame;
};

inline ScmsState scms_update(const GdfModel& model, const Vector& x) {
  ScmsState st;
  st.derivs = gdf_all(model, x);
  if (st.derivs.low_density || !(st.derivs.value > 0.0)) throw_low_density(x);
  st.frame = eigen_frame(st.derivs.hessian);
  const double h = model.bandwidth();
  const Vector shift = (h * h / st.derivs.value) * st.derivs.gradient;
  st.next = x + st.frame.basis * (st.frame.basis.transpose() * shift);
  return st;
}

}  // namespace detail

inline Vector scms_step(const GdfModel& model, const Vector& x) {
  require_dim(model, x);
  if (model.dim() < 2) throw Error(ErrorCode::UnsupportedDimension, "ridges need dimension >= 2");
  return detail::scms_update(model, x).next;
}

/// Runs SCMS from every seed and keeps the converged endpoints that satisfy
/// the ridge predicate. No deduplication: the output samples a continuum.
inline RidgeSearch trace_ridge_detailed(const GdfModel& model, const std::vector<Vector>& seeds,
                                        const AscentConfig& cfg, const RidgeOptions& opts = {}) {
  cfg.validate();
  if (model.dim() < 2) throw Error(ErrorCode::UnsupportedDimension, "ridges need dimension >= 2");
  if (seeds.empty()) throw Error(ErrorCode::InvalidInput, "ridge tracing needs at least one seed");
  if (!(opts.density_floor >= 0.0)) throw Error(ErrorCode::InvalidInput, "density_floor must be >= 0");
  if (opts.ridge_tol && !(*opts.ridge_tol > 0.0)) throw Error(ErrorCode::InvalidInput, "ridge_tol must be > 0");
  for (const auto& s : seeds) require_dim(model, s);

  const std::size_t m = seeds.size();
  const double tol = cfg.step_tol * model.bandwidth();
  RidgeSearch out;
  out.endpoints.resize(m);
  out.reasons.assign(m, StopReason::MaxIterations);
  std::vector<double> seed_grad(m, 0.0), proj_grad(m, 0.0), lambda2(m, 0.0), value(m, 0.0);
  std::vector<char> degenerate(m, 0);

  parallel_for(
      m,
      [&](std::size_t s) {
        Vector x = seeds[s];
        bool converged = false;
        try {
          for (int it = 0; it < cfg.max_iters; ++it) {
            auto st = detail::scms_update(model, x);
            if (it == 0) seed_grad[s] = std::max(st.derivs.gradient.norm(), st.derivs.value / model.bandwidth());
            const double step = (st.next - x).norm();
            x = std::move(st.next);
            if (step < tol) {
              converged = true;
              break;
            }
          }
          out.endpoints[s] = x;
          if (!converged) return;
          const GdfDerivatives fin = gdf_all(model, x);
          if (fin.low_density) {
            out.reasons[s] = StopReason::LowDensity;
            return;
          }
          const EigenFrame frame = eigen_frame(fin.hessian);
          value[s] = fin.value;
          lambda2[s] = frame.eigenvalues[1];
          degenerate[s] = frame.degenerate;
          proj_grad[s] = (frame.basis * (frame.basis.transpose() * fin.gradient)).cwiseAbs().maxCoeff();
          out.reasons[s] = StopReason::Converged;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::LowDensity) throw;
          out.endpoints[s] = x;
          out.reasons[s] = StopReason::LowDensity;
        }
      },
      cfg.threads);

  out.ridge_tol = opts.ridge_tol ? *opts.ridge_tol
                                 : opts.relative_ridge_tol * *std::max_element(seed_grad.begin(), seed_grad.end());

  for (std::size_t s = 0; s < m; ++s) {
    if (out.reasons[s] != StopReason::Converged) continue;
    if (degenerate[s]) {
      out.reasons[s] = StopReason::DegenerateFrame;
    } else if (value[s] < opts.density_floor) {
      out.reasons[s] = StopReason::BelowDensityFloor;
    } else if (!(lambda2[s] < 0.0)) {
      out.reasons[s] = StopReason::NotRidge;
    } else if (proj_grad[s] > out.ridge_tol) {
      out.reasons[s] = StopReason::RidgeTolerance;
    } else {
      out.ridge.points.push_back(out.endpoints[s]);
      out.ridge.projected_grad_norms.push_back(proj_grad[s]);
      out.ridge.second_eigenvalues.push_back(lambda2[s]);
      out.ridge.values.push_back(value[s]);
      out.ridge.seed_indices.push_back(s);
    }
  }

  if (out.ridge.points.empty()) {
    std::ostringstream os;
    os << "no ridge points retained from " << m << " seeds; reasons:";
    const std::size_t shown = std::min<std::size_t>(m, 20);
    for (std::size_t s = 0; s < shown; ++s) os << ' ' << s << '=' << to_string(out.reasons[s]);
    if (shown < m) os << " ...";
    throw Error(ErrorCode::EmptyResult, os.str());
  }
  return out;
}

inline RidgePointSet trace_ridge(const GdfModel& model, const std::vector<Vector>& seeds, const AscentConfig& cfg,
                                 double density_floor = 0.0) {
  RidgeOptions opts;
  opts.density_floor = density_floor;
  return trace_ridge_detailed(model, seeds, cfg, opts).ridge;
}

}  // namespace gdf
