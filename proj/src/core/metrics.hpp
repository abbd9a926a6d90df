#pragma once

#include <string>
#include <vector>

#include "core/data.hpp"

namespace stochflow {

// DTW over monotone boundary-matched alignments with Euclidean point costs.
// `normalized` divides the cumulative cost by the backtracked path length
// (diagonal-preferring tie break) so values compare across lengths.
struct DtwResult {
  double cost = 0;        // minimum cumulative cost
  int path_length = 0;    // steps on the backtracked optimal path
  double normalized = 0;  // cost / path_length
};

DtwResult dtw_alignment(const Trajectory& a, const Trajectory& b);
double dtw(const Trajectory& a, const Trajectory& b);  // normalized value

double discrete_frechet(const Trajectory& a, const Trajectory& b);

// Area swept between corresponding segments (2D only). The reproduced
// trajectory is resampled to the demo's point count by arc-length-uniform
// interpolation; it is reversed first when the swapped endpoint pairing
// matches the demo better (index alignment convention).
double swept_area(const Trajectory& reproduced, const Trajectory& demo);

struct MetricReport {
  std::vector<double> dtw_values;
  std::vector<double> frechet_values;
  std::vector<double> swept_values;  // empty unless dim == 2

  double mean(const std::vector<double>& v) const;
  double median(const std::vector<double>& v) const;
};

std::string metric_table(const MetricReport& r);
std::string metric_json(const MetricReport& r);

}  // namespace stochflow
