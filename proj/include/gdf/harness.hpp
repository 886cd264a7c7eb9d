#pragma once

// Monte-Carlo validation of the estimator against synthetic ground truth:
// integrated squared error of derivatives, Hausdorff error of modes and
// ridges, and log-log slope fits over (n, h) schedules.

#include <gdf/core.hpp>
#include <gdf/hausdorff.hpp>
#include <gdf/modes.hpp>
#include <gdf/ridges.hpp>
#include <gdf/synthetic.hpp>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace gdf {

/// Tensor-product midpoint rule over a box.
struct QuadratureGrid {
  Box box;
  std::vector<int> resolution;

  std::size_t point_count() const {
    std::size_t c = 1;
    for (int r : resolution) c *= static_cast<std::size_t>(r);
    return c;
  }
  double cell_volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < resolution.size(); ++j) {
      v *= (box.upper[static_cast<Eigen::Index>(j)] - box.lower[static_cast<Eigen::Index>(j)]) / resolution[j];
    }
    return v;
  }
  std::vector<Vector> nodes() const { return grid_seeds(box.lower, box.upper, resolution); }
  QuadratureGrid refined() const {
    QuadratureGrid g = *this;
    for (int& r : g.resolution) r *= 2;
    return g;
  }
};

inline QuadratureGrid support_grid(const SyntheticModel& model, int per_axis) {
  return {model.support, std::vector<int>(static_cast<std::size_t>(model.dim), per_axis)};
}

namespace detail {

/// Sum over multi-indices |alpha| = k of squared differences of the partial derivatives.
inline double derivative_gap_sq(const GdfDerivatives& a, const GdfDerivatives& b, int k) {
  switch (k) {
    case 0: return (a.value - b.value) * (a.value - b.value);
    case 1: return (a.gradient - b.gradient).squaredNorm();
    case 2: {
      const Matrix diff = a.hessian - b.hessian;
      double s = 0.0;
      for (Eigen::Index i = 0; i < diff.rows(); ++i) {
        for (Eigen::Index j = i; j < diff.cols(); ++j) s += diff(i, j) * diff(i, j);
      }
      return s;
    }
    default: throw Error(ErrorCode::InvalidInput, "derivative order must be 0, 1 or 2");
  }
}

inline void check_order(int k) {
  if (k < 0 || k > 2) {
    throw Error(ErrorCode::InvalidInput, "derivative order " + std::to_string(k) +
                                             " unsupported: third and higher derivatives are not implemented");
  }
}

}  // namespace detail

/// Midpoint-rule approximation of the integral over the grid box of the
/// order-k derivative discrepancy between two fields.
inline double integrated_squared_error(const Field& estimate, const Field& truth, const QuadratureGrid& grid,
                                       int k) {
  detail::check_order(k);
  long double acc = 0.0L;
  for (const Vector& x : grid.nodes()) acc += detail::derivative_gap_sq(estimate(x), truth(x), k);
  return static_cast<double>(acc * grid.cell_volume());
}

/// Fraction of the point density's mass inside the grid box.
inline double grid_mass(const SyntheticModel& model, const QuadratureGrid& grid) {
  long double acc = 0.0L;
  for (const Vector& x : grid.nodes()) acc += model.density(x);
  return static_cast<double>(acc * grid.cell_volume());
}

struct MiseEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> ise;  ///< one per replicate
  std::uint64_t seed = 0;
};

/// Monte-Carlo MISE_k: replicates are drawn in sequence from one generator
/// seeded with `seed`.
inline MiseEstimate mise_estimate(const SyntheticModel& model, std::size_t n, double h, int k,
                                  std::size_t replicates, const QuadratureGrid& grid, std::uint64_t seed) {
  detail::check_order(k);
  if (k > 0 && !model.has_derivatives()) {
    throw Error(ErrorCode::InvalidInput, "model '" + model.name + "' has no closed-form derivatives");
  }
  if (replicates == 0 || n == 0) throw Error(ErrorCode::InvalidInput, "n and replicates must be positive");
  if (static_cast<Eigen::Index>(grid.resolution.size()) != model.dim) {
    throw Error(ErrorCode::InvalidInput, "quadrature grid dimension does not match the model");
  }
  const double mass = grid_mass(model, grid);
  if (mass < 0.99) {
    throw Error(ErrorCode::InvalidInput,
                "quadrature grid misses " + std::to_string(100.0 * (1.0 - mass)) + "% of the density mass");
  }
  const Field truth = [&model](const Vector& x) { return model.gdf(x); };
  MiseEstimate out;
  out.seed = seed;
  Rng rng(seed);
  for (std::size_t r = 0; r < replicates; ++r) {
    const GdfModel est(model.sample(n, rng), h);
    Field fhat;
    if (k == 0) {
      fhat = [&est](const Vector& x) {
        GdfDerivatives d;
        d.value = gdf_value(est, x);
        return d;
      };
    } else {
      fhat = [&est](const Vector& x) { return gdf_all(est, x); };
    }
    out.ise.push_back(integrated_squared_error(fhat, truth, grid, k));
  }
  const double count = static_cast<double>(replicates);
  out.mean = std::accumulate(out.ise.begin(), out.ise.end(), 0.0) / count;
  if (replicates > 1) {
    double ss = 0.0;
    for (double v : out.ise) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (count - 1.0) / count);
  }
  return out;
}

/// Doubles the per-axis resolution, starting from `start`, until the integral
/// of the truth's squared order-k derivatives changes by less than 1%.
inline QuadratureGrid stable_grid(const SyntheticModel& model, int k, int start = 32, int max_per_axis = 4096) {
  const Field truth = [&model](const Vector& x) { return model.gdf(x); };
  const Field zero = [&model](const Vector&) { return detail::constant_field(model.dim, 0.0); };
  QuadratureGrid grid = support_grid(model, start);
  double prev = integrated_squared_error(zero, truth, grid, k);
  while (grid.resolution.front() * 2 <= max_per_axis) {
    QuadratureGrid next = grid.refined();
    const double cur = integrated_squared_error(zero, truth, next, k);
    grid = std::move(next);
    if (std::abs(cur - prev) < 0.01 * std::abs(cur)) break;
    prev = cur;
  }
  return grid;
}

enum class RateTarget { Mise, ModeHausdorff, RidgeHausdorff };

inline std::string_view to_string(RateTarget t) {
  switch (t) {
    case RateTarget::Mise: return "mise";
    case RateTarget::ModeHausdorff: return "mode_hausdorff";
    case RateTarget::RidgeHausdorff: return "ridge_hausdorff";
  }
  return "unknown";
}

struct ScheduleCell {
  std::size_t n = 0;
  double h = 0.0;
};

/// h = c * n^(-gamma) for every n.
inline std::vector<ScheduleCell> power_schedule(const std::vector<std::size_t>& ns, double c, double gamma) {
  std::vector<ScheduleCell> out;
  for (std::size_t n : ns) out.push_back({n, c * std::pow(static_cast<double>(n), -gamma)});
  return out;
}

struct RateOptions {
  std::size_t replicates = 10;
  std::uint64_t seed = 1;
  int derivative_order = 0;  ///< MISE target only
  std::optional<QuadratureGrid> grid;
  AscentConfig ascent;
  std::size_t max_seeds = 300;        ///< seeds are the first sample points
  double mode_floor_fraction = 0.05;  ///< modes below this fraction of the top mode's value are dropped
  double ridge_floor_fraction = 0.1;  ///< ridge density floor relative to the largest f at the seeds
  std::size_t ridge_reference_points = 2000;
};

struct RateCell {
  std::size_t n = 0;
  double h = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> errors;
  /// mode_hausdorff: distance to the modes of p alone;
  /// ridge_hausdorff: mean | |x - c| - R | over ridge points. Empty for MISE.
  std::vector<double> secondary;
  std::vector<std::size_t> estimate_sizes;
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
};

struct RateReport {
  std::string model;
  RateTarget target = RateTarget::Mise;
  int derivative_order = 0;
  std::size_t replicates = 0;
  std::string secondary_name;
  std::vector<RateCell> cells;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_stderr = std::numeric_limits<double>::quiet_NaN();
  double slope_lower = std::numeric_limits<double>::quiet_NaN();  ///< 95% band
  double slope_upper = std::numeric_limits<double>::quiet_NaN();
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
};

/// Ordinary least squares of log(y) on log(x) with a 95% Student-t band.
inline SlopeFit fit_log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  SlopeFit fit;
  const std::size_t m = x.size();
  if (m < 2 || y.size() != m) return fit;
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return fit;
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(m);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  if (m > 2) {
    double sse = 0.0;
    const double icpt = my - fit.slope * mx;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = ly[i] - (icpt + fit.slope * lx[i]);
      sse += r * r;
    }
    fit.std_error = std::sqrt(sse / static_cast<double>(m - 2) / sxx);
    const boost::math::students_t dist(static_cast<double>(m - 2));
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    fit.lower = fit.slope - t * fit.std_error;
    fit.upper = fit.slope + t * fit.std_error;
  }
  return fit;
}

namespace detail {

inline std::vector<Vector> leading_points(const WeightedSample& s, std::size_t count) {
  const auto m = std::min<Eigen::Index>(s.size(), static_cast<Eigen::Index>(count));
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) out.emplace_back(s.point(i));
  return out;
}

struct ReplicateError {
  double error = 0.0;
  double secondary = 0.0;
  std::size_t size = 0;
};

inline ReplicateError mode_replicate(const SyntheticModel& truth, const GdfModel& est, const RateOptions& opts) {
  if (truth.true_modes.empty()) throw Error(ErrorCode::InvalidInput, "model has no reference modes");
  const ModeSet found = collect_modes(est, leading_points(est.sample(), opts.max_seeds), opts.ascent);
  const double top = *std::max_element(found.values.begin(), found.values.end());
  std::vector<Vector> kept;
  for (std::size_t j = 0; j < found.size(); ++j) {
    if (found.values[j] >= opts.mode_floor_fraction * top) kept.push_back(found.modes[j]);
  }
  return {hausdorff(kept, truth.true_modes), hausdorff(kept, truth.density_modes), kept.size()};
}

/// Whether the true density bends downward along the normal of the reference
/// circle at x. Outside that tube p is convex across the circle and every
/// point with a tangential gradient passes the ridge predicate, so the
/// reference circle is only the ridge inside it.
inline bool concave_across(const SyntheticModel& truth, const Circle& c, const Vector& x) {
  const Vector offset = x - c.center;
  const double r = offset.norm();
  if (r == 0.0) return false;
  const Vector u = offset / r;
  constexpr double step = 1e-3;
  return truth.density(x + step * u) - 2.0 * truth.density(x) + truth.density(x - step * u) < 0.0;
}

inline ReplicateError ridge_replicate(const SyntheticModel& truth, const GdfModel& est, const RateOptions& opts) {
  if (!truth.true_ridge) throw Error(ErrorCode::InvalidInput, "model has no reference ridge");
  const auto seeds = leading_points(est.sample(), opts.max_seeds);
  double top = 0.0;
  for (const auto& s : seeds) top = std::max(top, gdf_value(est, s));
  RidgeOptions ropts;
  ropts.density_floor = opts.ridge_floor_fraction * top;
  const RidgePointSet ridge = trace_ridge_detailed(est, seeds, opts.ascent, ropts).ridge;
  const Circle& c = *truth.true_ridge;
  double radial = 0.0;
  std::vector<Vector> tube;
  for (const auto& p : ridge.points) {
    radial += std::abs((p - c.center).norm() - c.radius);
    if (concave_across(truth, c, p)) tube.push_back(p);
  }
  radial /= static_cast<double>(ridge.size());
  if (tube.empty()) throw Error(ErrorCode::EmptyResult, "no ridge point lies where the true density is concave across the ridge");
  return {hausdorff(tube, c.discretize(opts.ridge_reference_points)), radial, tube.size()};
}

}  // namespace detail

/// Runs the full pipeline for every replicate of every schedule cell and fits
/// the log-log slope of the mean error against n. Cell i uses generator seed
/// opts.seed + i.
inline RateReport rate_experiment(const SyntheticModel& model, RateTarget target,
                                  const std::vector<ScheduleCell>& schedule, const RateOptions& opts = {}) {
  if (schedule.empty()) throw Error(ErrorCode::InvalidInput, "schedule must contain at least one cell");
  if (opts.replicates < 10) throw Error(ErrorCode::InvalidInput, "rate experiments need at least 10 replicates per cell");
  RateReport report;
  report.model = model.name;
  report.target = target;
  report.derivative_order = opts.derivative_order;
  report.replicates = opts.replicates;
  if (target == RateTarget::ModeHausdorff) report.secondary_name = "density_mode_hausdorff";
  if (target == RateTarget::RidgeHausdorff) report.secondary_name = "mean_radial_error";

  std::optional<QuadratureGrid> grid = opts.grid;
  if (target == RateTarget::Mise && !grid) grid = stable_grid(model, opts.derivative_order);

  for (std::size_t ci = 0; ci < schedule.size(); ++ci) {
    const ScheduleCell& sc = schedule[ci];
    RateCell cell;
    cell.n = sc.n;
    cell.h = sc.h;
    cell.seed = opts.seed + ci;
    try {
      if (target == RateTarget::Mise) {
        const MiseEstimate est =
            mise_estimate(model, sc.n, sc.h, opts.derivative_order, opts.replicates, *grid, cell.seed);
        cell.errors = est.ise;
      } else {
        Rng rng(cell.seed);
        for (std::size_t r = 0; r < opts.replicates; ++r) {
          const GdfModel est(model.sample(sc.n, rng), sc.h);
          const auto rep = target == RateTarget::ModeHausdorff ? detail::mode_replicate(model, est, opts)
                                                                : detail::ridge_replicate(model, est, opts);
          cell.errors.push_back(rep.error);
          cell.secondary.push_back(rep.secondary);
          cell.estimate_sizes.push_back(rep.size);
        }
      }
    } catch (const Error& e) {
      throw Error(e.code(), "cell " + std::to_string(ci) + " (n=" + std::to_string(sc.n) +
                                ", h=" + std::to_string(sc.h) + "): " + e.what());
    }
    const double count = static_cast<double>(cell.errors.size());
    cell.mean = std::accumulate(cell.errors.begin(), cell.errors.end(), 0.0) / count;
    double ss = 0.0;
    for (double v : cell.errors) ss += (v - cell.mean) * (v - cell.mean);
    cell.stddev = cell.errors.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    cell.median = median_of(cell.errors);
    report.cells.push_back(std::move(cell));
  }

  std::vector<double> ns, means;
  for (const auto& c : report.cells) {
    ns.push_back(static_cast<double>(c.n));
    means.push_back(c.mean);
  }
  const SlopeFit fit = fit_log_log_slope(ns, means);
  report.slope = fit.slope;
  report.slope_stderr = fit.std_error;
  report.slope_lower = fit.lower;
  report.slope_upper = fit.upper;
  return report;
}

inline nlohmann::json to_json(const RateReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json jc = {{"n", c.n},          {"h", c.h},           {"seed", c.seed},
                         {"errors", c.errors}, {"mean", num(c.mean)}, {"stddev", num(c.stddev)},
                         {"median", num(c.median)}};
    if (!c.secondary.empty()) jc["secondary"] = c.secondary;
    if (!c.estimate_sizes.empty()) jc["estimate_sizes"] = c.estimate_sizes;
    cells.push_back(std::move(jc));
  }
  nlohmann::json out = {{"model", r.model},
                        {"target", std::string(to_string(r.target))},
                        {"replicates", r.replicates},
                        {"cells", std::move(cells)},
                        {"slope", num(r.slope)},
                        {"slope_stderr", num(r.slope_stderr)},
                        {"slope_band_95", {num(r.slope_lower), num(r.slope_upper)}}};
  if (r.target == RateTarget::Mise) out["derivative_order"] = r.derivative_order;
  if (!r.secondary_name.empty()) out["secondary_name"] = r.secondary_name;
  return out;
}

/// One row per replicate, for plotting tools that want a flat table.
inline std::string report_csv(const RateReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "model,target,n,h,seed,replicate,error,secondary,estimate_size\n";
  for (const auto& c : r.cells) {
    for (std::size_t i = 0; i < c.errors.size(); ++i) {
      os << r.model << ',' << to_string(r.target) << ',' << c.n << ',' << c.h << ',' << c.seed << ',' << i << ','
         << c.errors[i] << ',';
      if (i < c.secondary.size()) os << c.secondary[i];
      os << ',';
      if (i < c.estimate_sizes.size()) os << c.estimate_sizes[i];
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace gdf
