#pragma once

#include <string>
#include <vector>

#include "core/matrix.hpp"
#include "core/rng.hpp"

namespace stochflow {

// Fixed-rate trajectory; points are columns of a d x N matrix.
struct Trajectory {
  Matrix points;
  double dt = 0;

  int dim() const { return points.rows(); }
  int length() const { return points.cols(); }
  Matrix point(int i) const { return slice_cols(points, i, i + 1); }
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  int dim = 0;
  double dt = 0;

  int count() const { return static_cast<int>(trajectories.size()); }
};

// Plain-text format: one header line `dim=<d> dt=<dt>`, then trajectory
// blocks separated by blank lines, one whitespace-separated point per line.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset parse_dataset(std::istream& in, const std::string& origin);
void write_dataset(const Dataset& ds, std::ostream& out);

// Linear interpolation onto a uniform grid at new_dt; endpoints preserved.
Trajectory resample(const Trajectory& t, double new_dt);

enum class PointToPointShape { line, sine, s_curve };
enum class LimitCycleShape { circle, ellipse, lissajous };

PointToPointShape parse_p2p_shape(const std::string& name);      // throws on unknown
LimitCycleShape parse_cycle_shape(const std::string& name);
bool is_cycle_shape_name(const std::string& name);
bool is_p2p_shape_name(const std::string& name);

struct SynthOptions {
  double dt = 0.02;
  int length = 150;          // points per demo
  double omega = 2.0;        // cycle angular velocity (rad/s)
  double decay = 1.5;        // point-to-point approach rate (1/s)
};

// Demonstrations ending at a common goal, Gaussian position noise of size
// `noise` on interior points; the final point is the goal exactly.
Dataset synth_point_to_point(PointToPointShape shape, int n_demos, double noise, std::uint64_t seed,
                             const SynthOptions& opts = {});

Dataset synth_limit_cycle(LimitCycleShape shape, int n_demos, double noise, std::uint64_t seed,
                          const SynthOptions& opts = {});

}  // namespace stochflow
