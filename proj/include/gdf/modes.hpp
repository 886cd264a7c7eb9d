#pragma once

// Weighted mean shift: x <- sum_i Y_i X_i K((x - X_i)/h) / sum_i Y_i K((x - X_i)/h).
// Every iterate is a convex combination of the data, and for the Gaussian
// kernel with positive marks the estimate never decreases along a path.

#include <gdf/core.hpp>
#include <gdf/parallel.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace gdf {

struct AscentConfig {
  double step_tol = 1e-7;      ///< stop once a step is shorter than step_tol * h
  int max_iters = 500;
  double merge_radius = 0.5;   ///< endpoints closer than merge_radius * h are merged
  unsigned threads = 0;        ///< 0: default_thread_count()

  void validate() const {
    if (!(step_tol > 0.0) || !std::isfinite(step_tol)) throw Error(ErrorCode::InvalidInput, "step_tol must be > 0");
    if (max_iters < 1) throw Error(ErrorCode::InvalidInput, "max_iters must be >= 1");
    if (!(merge_radius > 0.0) || !std::isfinite(merge_radius)) {
      throw Error(ErrorCode::InvalidInput, "merge_radius must be > 0");
    }
  }
};

enum class StopReason : std::uint8_t {
  Converged,
  MaxIterations,
  LowDensity,
  SaddleRejected,   ///< converged, but the merged endpoint is not a local maximum
  DegenerateFrame,  ///< ridge tracing only: leading eigenvalues coincide
  BelowDensityFloor,
  RidgeTolerance,   ///< converged, but the projected gradient exceeds ridge_tol
  NotRidge,         ///< converged, but the second eigenvalue is >= 0
};

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::Converged: return "converged";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::LowDensity: return "low_density";
    case StopReason::SaddleRejected: return "saddle_rejected";
    case StopReason::DegenerateFrame: return "degenerate_frame";
    case StopReason::BelowDensityFloor: return "below_density_floor";
    case StopReason::RidgeTolerance: return "ridge_tolerance";
    case StopReason::NotRidge: return "not_ridge";
  }
  return "unknown";
}

struct Trajectory {
  std::vector<Vector> points;
  std::vector<double> values;  ///< f at each recorded point
  bool converged = false;
  StopReason reason = StopReason::MaxIterations;
  int iterations = 0;
};

struct ModeSet {
  std::vector<Vector> modes;
  std::vector<double> values;
  std::vector<double> top_eigenvalues;
  std::vector<std::size_t> basin_counts;

  std::size_t size() const { return modes.size(); }
};

/// Per-seed outcome of a mode search; `labels[s]` is the index of the mode
/// seed s ended at, or -1.
struct ModeSearch {
  ModeSet modes;
  std::vector<int> labels;
  std::vector<Vector> endpoints;
  std::vector<StopReason> reasons;
};

namespace detail {

struct ShiftMoments {
  long double mass = 0.0L;  ///< sum_i Y_i exp(-|u_i|^2 / 2)
  Vector mean;              ///< kernel-weighted average of the data
};

inline ShiftMoments shift_moments(const GdfModel& model, const Vector& x) {
  const auto& pts = model.sample().points();
  const auto& w = model.sample().weights();
  const Eigen::Index d = model.dim();
  const double inv_h2 = 1.0 / (model.bandwidth() * model.bandwidth());
  Eigen::Matrix<long double, Eigen::Dynamic, 1> num = Eigen::Matrix<long double, Eigen::Dynamic, 1>::Zero(d);
  ShiftMoments out;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double term = w[i] * kernel_profile((x - pts.col(i)).squaredNorm() * inv_h2);
    if (term == 0.0) continue;
    out.mass += term;
    for (Eigen::Index j = 0; j < d; ++j) num[j] += static_cast<long double>(term) * pts(j, i);
  }
  if (out.mass > static_cast<long double>(std::numeric_limits<double>::min())) {
    out.mean = (num / out.mass).cast<double>();
  }
  return out;
}

inline double moments_value(const GdfModel& model, const ShiftMoments& m) {
  return static_cast<double>(m.mass * value_scale(model, 0));
}

[[noreturn]] inline void throw_low_density(const Vector& x) {
  std::ostringstream os;
  os << "kernel mass underflows at x = [" << x.transpose() << "]";
  throw Error(ErrorCode::LowDensity, os.str());
}

/// Largest Hessian eigenvalue and the magnitude scale used for the saddle test.
inline std::pair<double, double> top_eigenvalue(const Matrix& hessian) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hessian, Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();  // ascending
  return {ev[ev.size() - 1], ev.cwiseAbs().maxCoeff()};
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent_[a] != a) a = parent_[a] = parent_[parent_[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/// One weighted mean-shift update. Throws LowDensity when every kernel term
/// underflows at x.
inline Vector mean_shift_step(const GdfModel& model, const Vector& x) {
  require_dim(model, x);
  auto m = detail::shift_moments(model, x);
  if (m.mean.size() == 0) detail::throw_low_density(x);
  return std::move(m.mean);
}

/// Iterates mean_shift_step from x0. With `record` unset only the final point
/// and its value are kept.
inline Trajectory ascend(const GdfModel& model, const Vector& x0, const AscentConfig& cfg, bool record = true) {
  cfg.validate();
  require_dim(model, x0);
  const double tol = cfg.step_tol * model.bandwidth();
  Trajectory traj;
  Vector x = x0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    auto m = detail::shift_moments(model, x);
    const double value = detail::moments_value(model, m);
    if (record || it == 0) {
      traj.points.push_back(x);
      traj.values.push_back(value);
    }
    if (m.mean.size() == 0) {
      traj.reason = StopReason::LowDensity;
      traj.iterations = it;
      if (!record) {
        traj.points.assign(1, x);
        traj.values.assign(1, value);
      }
      return traj;
    }
    const double step = (m.mean - x).norm();
    x = std::move(m.mean);
    traj.iterations = it + 1;
    if (step < tol) {
      traj.converged = true;
      traj.reason = StopReason::Converged;
      break;
    }
  }
  const double final_value = gdf_value(model, x);
  if (!record) {
    traj.points.clear();
    traj.values.clear();
  }
  traj.points.push_back(std::move(x));
  traj.values.push_back(final_value);
  return traj;
}

/// Every data point, as a list of seeds.
inline std::vector<Vector> data_seeds(const WeightedSample& sample) {
  std::vector<Vector> seeds;
  seeds.reserve(static_cast<std::size_t>(sample.size()));
  for (Eigen::Index i = 0; i < sample.size(); ++i) seeds.emplace_back(sample.point(i));
  return seeds;
}

/// Uniform mesh of cell centres over [lower, upper] with `resolution` cells per axis.
inline std::vector<Vector> grid_seeds(const Vector& lower, const Vector& upper, const std::vector<int>& resolution) {
  const auto d = lower.size();
  if (upper.size() != d || static_cast<Eigen::Index>(resolution.size()) != d || d == 0) {
    throw Error(ErrorCode::InvalidInput, "grid bounds and resolution must share the same dimension");
  }
  std::size_t total = 1;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (resolution[j] < 1 || !(upper[j] > lower[j])) throw Error(ErrorCode::InvalidInput, "empty grid axis");
    total *= static_cast<std::size_t>(resolution[j]);
  }
  std::vector<Vector> seeds;
  seeds.reserve(total);
  std::vector<int> idx(d, 0);
  for (std::size_t c = 0; c < total; ++c) {
    Vector p(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double cell = (upper[j] - lower[j]) / resolution[j];
      p[j] = lower[j] + (idx[j] + 0.5) * cell;
    }
    seeds.push_back(std::move(p));
    for (Eigen::Index j = 0; j < d; ++j) {
      if (++idx[j] < resolution[j]) break;
      idx[j] = 0;
    }
  }
  return seeds;
}

/// Relative gap below which two endpoint values are treated as equal.
inline constexpr double kValueTieTol = 1e-14;

/// Ascends from every seed, merges nearby endpoints and keeps local maxima.
/// Connected components of the proximity graph (edges between endpoints
/// within merge_radius * h) become one candidate each, represented by the
/// endpoint with the largest f (ties, up to kValueTieTol: lowest seed index). Modes are ordered
/// by decreasing f.
inline ModeSearch collect_modes_detailed(const GdfModel& model, const std::vector<Vector>& seeds,
                                         const AscentConfig& cfg) {
  cfg.validate();
  if (seeds.empty()) throw Error(ErrorCode::InvalidInput, "mode search needs at least one seed");
  for (const auto& s : seeds) require_dim(model, s);

  const std::size_t m = seeds.size();
  ModeSearch out;
  out.endpoints.resize(m);
  out.reasons.resize(m);
  out.labels.assign(m, -1);
  std::vector<double> end_values(m, 0.0);

  parallel_for(
      m,
      [&](std::size_t s) {
        Trajectory t = ascend(model, seeds[s], cfg, /*record=*/false);
        out.endpoints[s] = std::move(t.points.back());
        end_values[s] = t.values.back();
        out.reasons[s] = t.reason;
      },
      cfg.threads);

  std::vector<std::size_t> ok;
  for (std::size_t s = 0; s < m; ++s) {
    if (out.reasons[s] == StopReason::Converged) ok.push_back(s);
  }

  // Sweep along the first coordinate; only pairs inside the window can be linked.
  const double radius = cfg.merge_radius * model.bandwidth();
  std::vector<std::size_t> order = ok;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double xa = out.endpoints[a][0], xb = out.endpoints[b][0];
    return xa != xb ? xa < xb : a < b;
  });
  detail::DisjointSets sets(m);
  for (std::size_t p = 0; p < order.size(); ++p) {
    const Vector& ep = out.endpoints[order[p]];
    for (std::size_t q = p + 1; q < order.size(); ++q) {
      const Vector& eq = out.endpoints[order[q]];
      if (eq[0] - ep[0] > radius) break;
      if ((eq - ep).norm() <= radius) sets.unite(order[p], order[q]);
    }
  }

  // Representative per component: max value, lowest seed index on ties (ok is
  // ascending). Converged endpoints of one basin differ in f only by rounding,
  // so values within kValueTieTol of the maximum count as ties; otherwise
  // rescaling the marks could pick a different endpoint.
  std::vector<double> top(m, -std::numeric_limits<double>::infinity());
  for (std::size_t s : ok) {
    const std::size_t root = sets.find(s);
    top[root] = std::max(top[root], end_values[s]);
  }
  std::vector<std::ptrdiff_t> rep(m, -1);
  for (std::size_t s : ok) {
    const std::size_t root = sets.find(s);
    if (rep[root] < 0 && end_values[s] >= top[root] - kValueTieTol * std::abs(top[root])) {
      rep[root] = static_cast<std::ptrdiff_t>(s);
    }
  }

  struct Candidate {
    std::size_t root;
    std::size_t seed;
    double value;
    double lambda1;
  };
  std::vector<Candidate> kept;
  std::vector<char> rejected_root(m, 0);
  for (std::size_t root = 0; root < m; ++root) {
    if (rep[root] < 0) continue;
    const auto s = static_cast<std::size_t>(rep[root]);
    const auto [lambda1, scale] = detail::top_eigenvalue(gdf_hessian(model, out.endpoints[s]));
    if (lambda1 >= -1e-12 * scale || !(end_values[s] > 0.0)) {
      rejected_root[root] = 1;
      continue;
    }
    kept.push_back({root, s, end_values[s], lambda1});
  }
  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
    return a.value != b.value ? a.value > b.value : a.seed < b.seed;
  });

  std::vector<int> root_label(m, -1);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    root_label[kept[k].root] = static_cast<int>(k);
    out.modes.modes.push_back(out.endpoints[kept[k].seed]);
    out.modes.values.push_back(kept[k].value);
    out.modes.top_eigenvalues.push_back(kept[k].lambda1);
  }
  out.modes.basin_counts.assign(kept.size(), 0);
  for (std::size_t s : ok) {
    const std::size_t root = sets.find(s);
    if (rejected_root[root]) {
      out.reasons[s] = StopReason::SaddleRejected;
      continue;
    }
    out.labels[s] = root_label[root];
    ++out.modes.basin_counts[static_cast<std::size_t>(root_label[root])];
  }

  if (kept.empty()) {
    std::size_t counts[8] = {};
    for (auto r : out.reasons) ++counts[static_cast<int>(r)];
    std::ostringstream os;
    os << "no modes retained from " << m << " seeds (converged=" << counts[0]
       << " max_iterations=" << counts[1] << " low_density=" << counts[2]
       << " saddle_rejected=" << counts[3] << ")";
    throw Error(ErrorCode::EmptyResult, os.str());
  }
  return out;
}

inline ModeSet collect_modes(const GdfModel& model, const std::vector<Vector>& seeds, const AscentConfig& cfg) {
  return collect_modes_detailed(model, seeds, cfg).modes;
}

inline ModeSet collect_modes(const GdfModel& model, const AscentConfig& cfg) {
  return collect_modes(model, data_seeds(model.sample()), cfg);
}

}  // namespace gdf
