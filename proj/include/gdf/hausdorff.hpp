#pragma once

#include <gdf/sample.hpp>

#include <limits>
#include <vector>

namespace gdf {

/// max_{a in A} min_{b in B} |a - b|. The inner scan stops as soon as some b
/// is closer to a than the running maximum, since that a cannot raise it.
inline double directed_hausdorff(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidInput, "Hausdorff distance needs non-empty sets");
  double worst_sq = 0.0;
  for (const auto& p : a) {
    double best_sq = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      if (q.size() != p.size()) throw Error(ErrorCode::InvalidInput, "Hausdorff sets differ in dimension");
      const double d2 = (p - q).squaredNorm();
      if (d2 < best_sq) best_sq = d2;
      if (best_sq < worst_sq) break;
    }
    if (best_sq > worst_sq) worst_sq = best_sq;
  }
  return std::sqrt(worst_sq);
}

/// Symmetric Hausdorff distance between two finite point sets.
inline double hausdorff(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

}  // namespace gdf
