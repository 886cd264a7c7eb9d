#pragma once

// Mode clustering: every data point is labelled by the mode its weighted
// mean-shift path ends at.

#include <gdf/modes.hpp>

#include <vector>

namespace gdf {

struct ClusterAssignment {
  std::vector<int> labels;            ///< per data point; -1 when unassigned
  ModeSet modes;
  std::vector<std::size_t> unassigned;
  std::vector<Vector> endpoints;      ///< trajectory endpoint per data point
  std::vector<StopReason> reasons;

  std::size_t cluster_count() const { return modes.size(); }
};

inline ClusterAssignment cluster(const GdfModel& model, const AscentConfig& cfg) {
  ModeSearch search = collect_modes_detailed(model, data_seeds(model.sample()), cfg);
  ClusterAssignment out;
  out.labels = std::move(search.labels);
  out.modes = std::move(search.modes);
  out.endpoints = std::move(search.endpoints);
  out.reasons = std::move(search.reasons);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (out.labels[i] < 0) out.unassigned.push_back(i);
  }
  return out;
}

}  // namespace gdf
