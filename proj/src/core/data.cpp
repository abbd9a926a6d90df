#include "core/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "core/error.hpp"

namespace stochflow {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& msg) {
  throw Error(ErrorCode::parse, origin + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

Dataset parse_dataset(std::istream& in, const std::string& origin) {
  std::string line;
  int lineno = 0;
  Dataset ds;
  bool have_header = false;
  std::vector<std::vector<double>> block;

  auto flush_block = [&]() {
    if (block.empty()) return;
    Matrix pts(ds.dim, static_cast<int>(block.size()));
    for (std::size_t j = 0; j < block.size(); ++j)
      for (int i = 0; i < ds.dim; ++i) pts(i, static_cast<int>(j)) = block[j][i];
    ds.trajectories.push_back({pts, ds.dt});
    block.clear();
  };

  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (!have_header) {
      if (t.empty()) parse_fail(origin, lineno, "expected header line 'dim=<d> dt=<dt>'");
      int dim = 0;
      double dt = 0;
      if (std::sscanf(t.c_str(), "dim=%d dt=%lf", &dim, &dt) != 2)
        parse_fail(origin, lineno, "malformed header, expected 'dim=<d> dt=<dt>'");
      if (dim < 1) parse_fail(origin, lineno, "dim must be >= 1");
      if (!(dt > 0) || !std::isfinite(dt)) parse_fail(origin, lineno, "dt must be positive and finite");
      ds.dim = dim;
      ds.dt = dt;
      have_header = true;
      continue;
    }
    if (t.empty()) {
      flush_block();
      continue;
    }
    std::istringstream ls(t);
    std::vector<double> pt;
    double v;
    while (ls >> v) pt.push_back(v);
    if (!ls.eof()) parse_fail(origin, lineno, "non-numeric token in point line");
    if (static_cast<int>(pt.size()) != ds.dim)
      parse_fail(origin, lineno, "point has " + std::to_string(pt.size()) + " values, expected " +
                                     std::to_string(ds.dim));
    for (double x : pt)
      if (!std::isfinite(x)) parse_fail(origin, lineno, "non-finite value");
    block.push_back(std::move(pt));
  }
  flush_block();
  if (!have_header) throw Error(ErrorCode::parse, origin + ": empty file, no trajectories");
  if (ds.trajectories.empty()) throw Error(ErrorCode::parse, origin + ": no trajectories");
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open dataset file: " + path);
  return parse_dataset(in, path);
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", ds.dt);
  out << "dim=" << ds.dim << " dt=" << buf << "\n";
  for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
    const Trajectory& t = ds.trajectories[k];
    for (int j = 0; j < t.length(); ++j) {
      for (int i = 0; i < t.dim(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", t.points(i, j));
        out << (i ? " " : "") << buf;
      }
      out << "\n";
    }
    if (k + 1 < ds.trajectories.size()) out << "\n";
  }
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write dataset file: " + path);
  write_dataset(ds, out);
  if (!out) throw Error(ErrorCode::io, "write failed: " + path);
}

Trajectory resample(const Trajectory& t, double new_dt) {
  if (!(new_dt > 0)) throw Error(ErrorCode::invalid_argument, "resample: dt must be positive");
  if (t.length() < 2) throw Error(ErrorCode::invalid_argument, "resample: need at least 2 points");
  if (new_dt == t.dt) return t;
  const int n = t.length();
  const double total = (n - 1) * t.dt;
  const int m = static_cast<int>(std::floor(total / new_dt + 1e-9)) + 1;
  Matrix out(t.dim(), m);
  for (int k = 0; k < m; ++k) {
    double tm = std::min(k * new_dt, total);
    double pos = tm / t.dt;
    int i = std::min(static_cast<int>(pos), n - 2);
    double frac = pos - i;
    for (int r = 0; r < t.dim(); ++r)
      out(r, k) = t.points(r, i) + frac * (t.points(r, i + 1) - t.points(r, i));
  }
  // exact endpoints when the grids line up
  for (int r = 0; r < t.dim(); ++r) out(r, 0) = t.points(r, 0);
  if (std::fabs((m - 1) * new_dt - total) < 1e-9 * t.dt)
    for (int r = 0; r < t.dim(); ++r) out(r, m - 1) = t.points(r, n - 1);
  return {out, new_dt};
}

PointToPointShape parse_p2p_shape(const std::string& name) {
  if (name == "line") return PointToPointShape::line;
  if (name == "sine") return PointToPointShape::sine;
  if (name == "s-curve" || name == "s_curve") return PointToPointShape::s_curve;
  throw Error(ErrorCode::invalid_argument, "unknown point-to-point shape: " + name);
}

LimitCycleShape parse_cycle_shape(const std::string& name) {
  if (name == "circle") return LimitCycleShape::circle;
  if (name == "ellipse") return LimitCycleShape::ellipse;
  if (name == "lissajous") return LimitCycleShape::lissajous;
  throw Error(ErrorCode::invalid_argument, "unknown limit-cycle shape: " + name);
}

bool is_p2p_shape_name(const std::string& name) {
  return name == "line" || name == "sine" || name == "s-curve" || name == "s_curve";
}

bool is_cycle_shape_name(const std::string& name) {
  return name == "circle" || name == "ellipse" || name == "lissajous";
}

Dataset synth_point_to_point(PointToPointShape shape, int n_demos, double noise, std::uint64_t seed,
                             const SynthOptions& opts) {
  if (n_demos < 1) throw Error(ErrorCode::invalid_argument, "synth_point_to_point: n_demos must be >= 1");
  Rng rng(seed);
  const double sx = -1.0, sy = -0.8;
  const double gx = 1.0, gy = 0.6;
  const double nx_ = -(gy - sy), ny_ = gx - sx;  // normal to the chord
  const double nn = std::sqrt(nx_ * nx_ + ny_ * ny_);
  const double amp = 0.45;

  Dataset ds;
  ds.dim = 2;
  ds.dt = opts.dt;
  const double total = (opts.length - 1) * opts.dt;
  const double cend = 1.0 - std::exp(-opts.decay * total);
  for (int k = 0; k < n_demos; ++k) {
    Matrix pts(2, opts.length);
    double jx = noise * rng.normal();
    double jy = noise * rng.normal();
    for (int j = 0; j < opts.length; ++j) {
      double t = j * opts.dt;
      double c = (1.0 - std::exp(-opts.decay * t)) / cend;
      double wiggle = 0.0;
      if (shape == PointToPointShape::sine)
        wiggle = amp * std::sin(std::numbers::pi * c) * (1.0 - c);
      else if (shape == PointToPointShape::s_curve)
        wiggle = amp * std::sin(2.0 * std::numbers::pi * c) * (1.0 - c);
      double px = sx + (gx - sx) * c + wiggle * nx_ / nn;
      double py = sy + (gy - sy) * c + wiggle * ny_ / nn;
      if (j == 0) {
        pts(0, j) = px + jx;
        pts(1, j) = py + jy;
      } else {
        pts(0, j) = px + noise * rng.normal();
        pts(1, j) = py + noise * rng.normal();
      }
    }
    pts(0, opts.length - 1) = gx;  // common goal, exactly
    pts(1, opts.length - 1) = gy;
    ds.trajectories.push_back({pts, opts.dt});
  }
  return ds;
}

Dataset synth_limit_cycle(LimitCycleShape shape, int n_demos, double noise, std::uint64_t seed,
                          const SynthOptions& opts) {
  if (n_demos < 1) throw Error(ErrorCode::invalid_argument, "synth_limit_cycle: n_demos must be >= 1");
  Rng rng(seed);
  const double cx = 0.5, cy = -0.3;
  Dataset ds;
  ds.dim = 2;
  ds.dt = opts.dt;
  for (int k = 0; k < n_demos; ++k) {
    double phase = 2.0 * std::numbers::pi * rng.uniform();
    Matrix pts(2, opts.length);
    for (int j = 0; j < opts.length; ++j) {
      double a = opts.omega * j * opts.dt + phase;
      double px = 0, py = 0;
      switch (shape) {
        case LimitCycleShape::circle:
          px = std::cos(a);
          py = std::sin(a);
          break;
        case LimitCycleShape::ellipse:
          px = 1.6 * std::cos(a);
          py = 0.9 * std::sin(a);
          break;
        case LimitCycleShape::lissajous:
          px = std::sin(a);
          py = std::sin(2.0 * a + std::numbers::pi / 4.0);
          break;
      }
      pts(0, j) = cx + px + noise * rng.normal();
      pts(1, j) = cy + py + noise * rng.normal();
    }
    ds.trajectories.push_back({pts, opts.dt});
  }
  return ds;
}

}  // namespace stochflow
