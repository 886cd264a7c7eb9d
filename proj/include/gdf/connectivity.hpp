#pragma once

// Absorbing Markov chain over data points (transient) and modes (absorbing).
// From X_i the walk moves to X_j with score Y_j K((X_i - X_j)/h) and to mode
// M_j with score W_j K((X_i - M_j)/h); each row is normalised by its total.
// A = (I - T)^{-1} S gives absorption probabilities and Omega symmetrises the
// mark-weighted cross-absorption between clusters.

#include <gdf/clustering.hpp>
#include <gdf/core.hpp>
#include <gdf/parallel.hpp>

#include <Eigen/LU>

#include <string>
#include <vector>

namespace gdf {

struct ChainBlocks {
  Matrix S;             ///< n x k, data -> mode
  Matrix T;             ///< n x n, data -> data
  Vector mode_weights;  ///< W_j
};

struct ConnectivityResult {
  ChainBlocks blocks;
  Matrix A;                  ///< n x k absorption probabilities
  Matrix omega;              ///< k x k, symmetric, zero diagonal
  Vector self_connectivity;  ///< the diagonal omega would carry before zeroing
};

struct ChainOptions {
  Eigen::Index max_points = 10000;
  unsigned threads = 0;
};

/// W = f(M) / p(M): the ratio of the weighted to the unweighted kernel
/// estimate at `mode`, i.e. the kernel-weighted mean mark around it.
inline double mode_weight(const GdfModel& model, const Vector& mode) {
  require_dim(model, mode);
  const auto& pts = model.sample().points();
  const auto& w = model.sample().weights();
  const double inv_h2 = 1.0 / (model.bandwidth() * model.bandwidth());
  long double weighted = 0.0L, plain = 0.0L;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double k = detail::kernel_profile((mode - pts.col(i)).squaredNorm() * inv_h2);
    weighted += static_cast<long double>(w[i] * k);
    plain += k;
  }
  if (!(plain > static_cast<long double>(std::numeric_limits<double>::min()))) {
    throw Error(ErrorCode::Numeric, "unweighted kernel estimate underflows at mode");
  }
  return static_cast<double>(weighted / plain);
}

inline ChainBlocks build_chain(const GdfModel& model, const ModeSet& modeset, const ChainOptions& opts = {}) {
  if (modeset.modes.empty()) throw Error(ErrorCode::InvalidInput, "chain needs at least one mode");
  const Eigen::Index n = model.size();
  if (n > opts.max_points) {
    throw Error(ErrorCode::InvalidInput, "chain size " + std::to_string(n) + " exceeds the limit of " +
                                             std::to_string(opts.max_points) + " points");
  }
  const auto k = static_cast<Eigen::Index>(modeset.modes.size());
  const auto& pts = model.sample().points();
  const auto& y = model.sample().weights();
  const double inv_h2 = 1.0 / (model.bandwidth() * model.bandwidth());

  ChainBlocks out;
  out.mode_weights.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) out.mode_weights[j] = mode_weight(model, modeset.modes[j]);
  out.S.resize(n, k);
  out.T.resize(n, n);

  std::vector<Eigen::Index> isolated;
  std::mutex isolated_mutex;
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        const auto xi = pts.col(i);
        long double total = 0.0L;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double score = y[j] * detail::kernel_profile((xi - pts.col(j)).squaredNorm() * inv_h2);
          out.T(i, j) = score;
          total += score;
        }
        for (Eigen::Index j = 0; j < k; ++j) {
          const double score =
              out.mode_weights[j] * detail::kernel_profile((xi - modeset.modes[j]).squaredNorm() * inv_h2);
          out.S(i, j) = score;
          total += score;
        }
        if (!(total > 0.0L)) {
          std::lock_guard lock(isolated_mutex);
          isolated.push_back(i);
          return;
        }
        const double inv = static_cast<double>(1.0L / total);
        out.T.row(i) *= inv;
        out.S.row(i) *= inv;
      },
      opts.threads);
  if (!isolated.empty()) {
    throw Error(ErrorCode::IsolatedPoint,
                "data point " + std::to_string(*std::min_element(isolated.begin(), isolated.end())) +
                    " has zero transition mass");
  }
  // The self-transition keeps every row total positive, so the failure that
  // matters is a point whose walk can never reach a mode (I - T singular).
  std::vector<char> reaches(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> frontier;
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((out.S.row(i).array() > 0.0).any()) {
      reaches[static_cast<std::size_t>(i)] = 1;
      frontier.push_back(i);
    }
  }
  while (!frontier.empty()) {
    const Eigen::Index j = frontier.back();
    frontier.pop_back();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!reaches[static_cast<std::size_t>(i)] && out.T(i, j) > 0.0) {
        reaches[static_cast<std::size_t>(i)] = 1;
        frontier.push_back(i);
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!reaches[static_cast<std::size_t>(i)]) {
      throw Error(ErrorCode::IsolatedPoint, "data point " + std::to_string(i) + " cannot reach any mode");
    }
  }
  return out;
}

/// Solves (I - T) A = S with a pivoted LU factorisation.
inline Matrix absorb(const ChainBlocks& blocks) {
  const Eigen::Index n = blocks.T.rows();
  if (blocks.T.cols() != n || blocks.S.rows() != n) {
    throw Error(ErrorCode::InvalidInput, "chain blocks have inconsistent shapes");
  }
  const Matrix system = Matrix::Identity(n, n) - blocks.T;
  Eigen::PartialPivLU<Matrix> lu(system);
  Matrix a = lu.solve(blocks.S);
  if (!a.allFinite()) throw Error(ErrorCode::Numeric, "absorption solve produced non-finite values");
  const double residual = (system * a - blocks.S).cwiseAbs().maxCoeff();
  if (residual > 1e-8) {
    throw Error(ErrorCode::Numeric, "absorption solve is inaccurate (residual " + std::to_string(residual) + ")");
  }
  return a;
}

namespace detail {

/// a(i, j): mark-weighted mean of A(., j) over cluster i.
inline Matrix cluster_absorption(const Matrix& a, const std::vector<int>& labels, const WeightedSample& sample) {
  const Eigen::Index k = a.cols();
  if (static_cast<Eigen::Index>(labels.size()) != a.rows() || sample.size() != a.rows()) {
    throw Error(ErrorCode::InvalidInput, "absorption matrix, labels and sample disagree on n");
  }
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> sums =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>::Zero(k, k);
  std::vector<long double> mass(static_cast<std::size_t>(k), 0.0L);
  for (Eigen::Index l = 0; l < a.rows(); ++l) {
    const int c = labels[static_cast<std::size_t>(l)];
    if (c < 0) continue;
    if (c >= k) throw Error(ErrorCode::InvalidInput, "label references a missing mode");
    const double yl = sample.weight(l);
    mass[static_cast<std::size_t>(c)] += yl;
    for (Eigen::Index j = 0; j < k; ++j) sums(c, j) += static_cast<long double>(yl * a(l, j));
  }
  Matrix out(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (mass[static_cast<std::size_t>(i)] == 0.0L) {
      throw Error(ErrorCode::InvalidInput, "cluster " + std::to_string(i) + " is empty");
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      out(i, j) = static_cast<double>(sums(i, j) / mass[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

}  // namespace detail

inline Matrix connectivity_matrix(const Matrix& a, const ClusterAssignment& assignment, const WeightedSample& sample) {
  const Matrix c = detail::cluster_absorption(a, assignment.labels, sample);
  const Eigen::Index k = c.rows();
  Matrix omega = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) omega(i, j) = omega(j, i) = 0.5 * (c(i, j) + c(j, i));
  }
  return omega;
}

/// Full chain: blocks, absorption probabilities and the connectivity table.
inline ConnectivityResult connectivity(const GdfModel& model, const ClusterAssignment& assignment,
                                       const ChainOptions& opts = {}) {
  ConnectivityResult out;
  out.blocks = build_chain(model, assignment.modes, opts);
  out.A = absorb(out.blocks);
  out.omega = connectivity_matrix(out.A, assignment, model.sample());
  out.self_connectivity = detail::cluster_absorption(out.A, assignment.labels, model.sample()).diagonal();
  return out;
}

}  // namespace gdf
