#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/error.hpp"

namespace stochflow {

namespace {

double point_dist(const Matrix& a, int i, const Matrix& b, int j) {
  double s = 0.0;
  for (int r = 0; r < a.rows(); ++r) {
    double d = a(r, i) - b(r, j);
    s += d * d;
  }
  return std::sqrt(s);
}

void check_pair(const Trajectory& a, const Trajectory& b, const char* op) {
  if (a.length() < 1 || b.length() < 1)
    throw Error(ErrorCode::invalid_argument, std::string(op) + ": empty trajectory");
  if (a.dim() != b.dim()) throw Error(ErrorCode::dimension_mismatch, std::string(op) + ": dim mismatch");
}

}  // namespace

DtwResult dtw_alignment(const Trajectory& a, const Trajectory& b) {
  check_pair(a, b, "dtw");
  const int n = a.length(), m = b.length();
  Matrix acc(n, m);
  acc(0, 0) = point_dist(a.points, 0, b.points, 0);
  for (int i = 1; i < n; ++i) acc(i, 0) = acc(i - 1, 0) + point_dist(a.points, i, b.points, 0);
  for (int j = 1; j < m; ++j) acc(0, j) = acc(0, j - 1) + point_dist(a.points, 0, b.points, j);
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < m; ++j)
      acc(i, j) = point_dist(a.points, i, b.points, j) +
                  std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});

  int i = n - 1, j = m - 1, steps = 1;
  while (i + j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      double diag = acc(i - 1, j - 1), up = acc(i - 1, j), left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    ++steps;
  }
  DtwResult r;
  r.cost = acc(n - 1, m - 1);
  r.path_length = steps;
  r.normalized = r.cost / steps;
  return r;
}

double dtw(const Trajectory& a, const Trajectory& b) { return dtw_alignment(a, b).normalized; }

double discrete_frechet(const Trajectory& a, const Trajectory& b) {
  check_pair(a, b, "discrete_frechet");
  const int n = a.length(), m = b.length();
  Matrix c(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double d = point_dist(a.points, i, b.points, j);
      if (i == 0 && j == 0)
        c(i, j) = d;
      else if (i == 0)
        c(i, j) = std::max(c(i, j - 1), d);
      else if (j == 0)
        c(i, j) = std::max(c(i - 1, j), d);
      else
        c(i, j) = std::max(std::min({c(i - 1, j - 1), c(i - 1, j), c(i, j - 1)}), d);
    }
  return c(n - 1, m - 1);
}

namespace {

double tri_area(double ax, double ay, double bx, double by, double cx, double cy) {
  return 0.5 * std::fabs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay));
}

Trajectory resample_to_count(const Trajectory& t, int count) {
  const int n = t.length();
  std::vector<double> arc(n, 0.0);
  for (int i = 1; i < n; ++i) arc[i] = arc[i - 1] + point_dist(t.points, i, t.points, i - 1);
  double total = arc[n - 1];
  Matrix out(t.dim(), count);
  if (total <= 0.0) {
    for (int k = 0; k < count; ++k)
      for (int r = 0; r < t.dim(); ++r) out(r, k) = t.points(r, 0);
    return {out, t.dt};
  }
  int seg = 0;
  for (int k = 0; k < count; ++k) {
    double target = total * k / (count - 1);
    while (seg + 2 < n && arc[seg + 1] < target) ++seg;
    double span = arc[seg + 1] - arc[seg];
    double frac = span > 0 ? (target - arc[seg]) / span : 0.0;
    frac = std::clamp(frac, 0.0, 1.0);
    for (int r = 0; r < t.dim(); ++r)
      out(r, k) = t.points(r, seg) + frac * (t.points(r, seg + 1) - t.points(r, seg));
  }
  for (int r = 0; r < t.dim(); ++r) {
    out(r, 0) = t.points(r, 0);
    out(r, count - 1) = t.points(r, n - 1);
  }
  return {out, t.dt};
}

}  // namespace

double swept_area(const Trajectory& reproduced, const Trajectory& demo) {
  check_pair(reproduced, demo, "swept_area");
  if (demo.dim() != 2) throw Error(ErrorCode::dimension_mismatch, "swept_area: defined for dim == 2 only");
  if (demo.length() < 2 || reproduced.length() < 2)
    throw Error(ErrorCode::invalid_argument, "swept_area: need at least 2 points");
  Trajectory rep = reproduced.length() == demo.length() ? reproduced
                                                        : resample_to_count(reproduced, demo.length());
  // align indices: reverse rep when the swapped endpoint pairing is closer
  double direct = point_dist(rep.points, 0, demo.points, 0) +
                  point_dist(rep.points, rep.length() - 1, demo.points, demo.length() - 1);
  double swapped = point_dist(rep.points, rep.length() - 1, demo.points, 0) +
                   point_dist(rep.points, 0, demo.points, demo.length() - 1);
  if (swapped < direct) {
    Matrix rev(rep.points.rows(), rep.points.cols());
    for (int j = 0; j < rep.points.cols(); ++j)
      for (int r = 0; r < rep.points.rows(); ++r) rev(r, j) = rep.points(r, rep.points.cols() - 1 - j);
    rep.points = rev;
  }
  double area = 0.0;
  for (int i = 0; i + 1 < demo.length(); ++i) {
    double dx0 = demo.points(0, i), dy0 = demo.points(1, i);
    double dx1 = demo.points(0, i + 1), dy1 = demo.points(1, i + 1);
    double rx0 = rep.points(0, i), ry0 = rep.points(1, i);
    double rx1 = rep.points(0, i + 1), ry1 = rep.points(1, i + 1);
    area += tri_area(dx0, dy0, dx1, dy1, rx1, ry1);
    area += tri_area(dx0, dy0, rx1, ry1, rx0, ry0);
  }
  return area;
}

double MetricReport::mean(const std::vector<double>& v) const {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

double MetricReport::median(const std::vector<double>& v) const {
  if (v.empty()) return 0.0;
  std::vector<double> c = v;
  std::sort(c.begin(), c.end());
  std::size_t n = c.size();
  return n % 2 ? c[n / 2] : 0.5 * (c[n / 2 - 1] + c[n / 2]);
}

std::string metric_table(const MetricReport& r) {
  std::ostringstream os;
  char buf[160];
  os << "demo        dtw        frechet    swept_area\n";
  for (std::size_t i = 0; i < r.dtw_values.size(); ++i) {
    if (!r.swept_values.empty())
      std::snprintf(buf, sizeof(buf), "%-6zu %12.6g %12.6g %12.6g\n", i, r.dtw_values[i],
                    r.frechet_values[i], r.swept_values[i]);
    else
      std::snprintf(buf, sizeof(buf), "%-6zu %12.6g %12.6g %12s\n", i, r.dtw_values[i], r.frechet_values[i],
                    "-");
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-6s %12.6g %12.6g %12.6g\n", "mean", r.mean(r.dtw_values),
                r.mean(r.frechet_values), r.swept_values.empty() ? 0.0 : r.mean(r.swept_values));
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-6s %12.6g %12.6g %12.6g\n", "median", r.median(r.dtw_values),
                r.median(r.frechet_values), r.swept_values.empty() ? 0.0 : r.median(r.swept_values));
  os << buf;
  return os.str();
}

std::string metric_json(const MetricReport& r) {
  auto arr = [](const std::vector<double>& v) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      os << (i ? "," : "") << buf;
    }
    os << "]";
    return os.str();
  };
  std::ostringstream os;
  os << "{\n";
  os << "  \"dtw\": {\"per_demo\": " << arr(r.dtw_values) << ", \"mean\": " << r.mean(r.dtw_values)
     << ", \"median\": " << r.median(r.dtw_values) << "},\n";
  os << "  \"frechet\": {\"per_demo\": " << arr(r.frechet_values) << ", \"mean\": " << r.mean(r.frechet_values)
     << ", \"median\": " << r.median(r.frechet_values) << "},\n";
  os << "  \"swept_area\": {\"per_demo\": " << arr(r.swept_values)
     << ", \"mean\": " << (r.swept_values.empty() ? 0.0 : r.mean(r.swept_values))
     << ", \"median\": " << (r.swept_values.empty() ? 0.0 : r.median(r.swept_values)) << "}\n";
  os << "}\n";
  return os.str();
}

}  // namespace stochflow
