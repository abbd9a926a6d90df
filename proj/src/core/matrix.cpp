#include "core/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "core/error.hpp"

namespace stochflow {

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

template <class F>
Matrix map1(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i]);
  return out;
}

template <class F>
Matrix map2(const Matrix& a, const Matrix& b, F f, const char* op) {
  require(a.same_shape(b), ErrorCode::dimension_mismatch,
          std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  Matrix out(a.rows(), a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
  return out;
}

}  // namespace

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {
  require(rows >= 0 && cols >= 0, ErrorCode::invalid_argument, "Matrix: negative dimension");
}

Matrix::Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == static_cast<std::size_t>(rows) * cols, ErrorCode::invalid_argument,
          "Matrix: data size does not match rows*cols");
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::filled(int rows, int cols, double value) {
  Matrix m(rows, cols);
  std::fill(m.data_.begin(), m.data_.end(), value);
  return m;
}

Matrix Matrix::column(const std::vector<double>& v) {
  return Matrix(static_cast<int>(v.size()), 1, v);
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  int r = static_cast<int>(rows.size());
  int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    require(static_cast<int>(row.size()) == c, ErrorCode::invalid_argument, "from_rows: ragged rows");
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::diagonal(const std::vector<double>& d) {
  Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_string(const Matrix& a) {
  std::ostringstream os;
  os << a.rows() << "x" << a.cols();
  return os.str();
}

Matrix add(const Matrix& a, const Matrix& b) { return map2(a, b, [](double x, double y) { return x + y; }, "add"); }
Matrix sub(const Matrix& a, const Matrix& b) { return map2(a, b, [](double x, double y) { return x - y; }, "sub"); }
Matrix mul(const Matrix& a, const Matrix& b) { return map2(a, b, [](double x, double y) { return x * y; }, "mul"); }
Matrix div(const Matrix& a, const Matrix& b) { return map2(a, b, [](double x, double y) { return x / y; }, "div"); }
Matrix neg(const Matrix& a) { return map1(a, [](double x) { return -x; }); }
Matrix scale(const Matrix& a, double s) { return map1(a, [s](double x) { return s * x; }); }
Matrix add_scalar(const Matrix& a, double s) { return map1(a, [s](double x) { return x + s; }); }

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix tanh(const Matrix& a) { return map1(a, [](double x) { return std::tanh(x); }); }
Matrix exp(const Matrix& a) { return map1(a, [](double x) { return std::exp(x); }); }
Matrix log(const Matrix& a) { return map1(a, [](double x) { return std::log(x); }); }
Matrix sqrt(const Matrix& a) { return map1(a, [](double x) { return std::sqrt(x); }); }

Matrix softplus(const Matrix& a) {
  return map1(a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); });
}

Matrix atan2(const Matrix& y, const Matrix& x) {
  return map2(y, x, [](double yy, double xx) { return std::atan2(yy, xx); }, "atan2");
}

Matrix log_add_exp(const Matrix& a, const Matrix& b) {
  return map2(a, b,
              [](double x, double y) {
                double m = std::max(x, y);
                if (!std::isfinite(m)) return m;
                return m + std::log(std::exp(x - m) + std::exp(y - m));
              },
              "log_add_exp");
}

Matrix wrap_angle(const Matrix& a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return map1(a, [two_pi](double x) {
    double w = x - two_pi * std::floor((x + std::numbers::pi) / two_pi);
    // floor form lands in (-pi, pi]; guard the boundary against rounding
    if (w <= -std::numbers::pi) w += two_pi;
    if (w > std::numbers::pi) w -= two_pi;
    return w;
  });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorCode::dimension_mismatch,
          "matmul: " + shape_string(a) + " * " + shape_string(b));
  Matrix out(a.rows(), b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    double* o = out.data() + static_cast<std::size_t>(i) * m;
    const double* ai = a.data() + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b.data() + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) o[j] += av * bp[j];
    }
  }
  return out;
}

Matrix add_bias(const Matrix& a, const Matrix& bias) {
  require(bias.cols() == 1 && bias.rows() == a.rows(), ErrorCode::dimension_mismatch,
          "add_bias: bias " + shape_string(bias) + " for " + shape_string(a));
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double bv = bias(i, 0);
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + bv;
  }
  return out;
}

Matrix broadcast(const Matrix& s, int rows, int cols) {
  require(s.rows() == 1 && s.cols() == 1, ErrorCode::dimension_mismatch, "broadcast: source must be 1x1");
  return Matrix::filled(rows, cols, s(0, 0));
}

Matrix gather_rows(const Matrix& a, const std::vector<int>& idx) {
  Matrix out(static_cast<int>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] >= 0 && idx[k] < a.rows(), ErrorCode::invalid_argument, "gather_rows: index out of range");
    for (int j = 0; j < a.cols(); ++j) out(static_cast<int>(k), j) = a(idx[k], j);
  }
  return out;
}

Matrix scatter_rows(const std::vector<int>& idx, const Matrix& a, int total_rows) {
  require(static_cast<int>(idx.size()) == a.rows(), ErrorCode::dimension_mismatch,
          "scatter_rows: index count vs rows");
  Matrix out(total_rows, a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] >= 0 && idx[k] < total_rows, ErrorCode::invalid_argument, "scatter_rows: index out of range");
    for (int j = 0; j < a.cols(); ++j) out(idx[k], j) = a(static_cast<int>(k), j);
  }
  return out;
}

Matrix slice_rows(const Matrix& a, int r0, int r1) {
  require(0 <= r0 && r0 <= r1 && r1 <= a.rows(), ErrorCode::invalid_argument, "slice_rows: bad range");
  Matrix out(r1 - r0, a.cols());
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < a.cols(); ++j) out(i - r0, j) = a(i, j);
  return out;
}

Matrix slice_cols(const Matrix& a, int c0, int c1) {
  require(0 <= c0 && c0 <= c1 && c1 <= a.cols(), ErrorCode::invalid_argument, "slice_cols: bad range");
  Matrix out(a.rows(), c1 - c0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = c0; j < c1; ++j) out(i, j - c0) = a(i, j);
  return out;
}

Matrix col_sum(const Matrix& a) {
  Matrix out(1, a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  return out;
}

Matrix row_sum(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, 0) += a(i, j);
  return out;
}

Matrix sum_all(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
  return Matrix(1, 1, {s});
}

Matrix reshape(const Matrix& a, int rows, int cols) {
  require(static_cast<std::size_t>(rows) * cols == a.size(), ErrorCode::dimension_mismatch,
          "reshape: element count mismatch");
  return Matrix(rows, cols, a.values());
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      double av = a(i, j);
      if (av == 0.0) continue;
      for (int k = 0; k < b.rows(); ++k)
        for (int l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = av * b(k, l);
    }
  return out;
}

double scalar(const Matrix& a) {
  require(a.rows() == 1 && a.cols() == 1, ErrorCode::dimension_mismatch, "scalar: matrix is " + shape_string(a));
  return a(0, 0);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i]));
  return m;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

double norm1(const Matrix& a) {
  double m = 0.0;
  for (int j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += std::fabs(a(i, j));
    m = std::max(m, s);
  }
  return m;
}

double trace(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

Matrix vec_cols(const Matrix& a) {
  Matrix out(a.rows() * a.cols(), 1);
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i) out(j * a.rows() + i, 0) = a(i, j);
  return out;
}

Matrix unvec_cols(const Matrix& v, int rows, int cols) {
  require(v.cols() == 1 && v.rows() == rows * cols, ErrorCode::dimension_mismatch, "unvec_cols: size mismatch");
  Matrix out(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) out(i, j) = v(j * rows + i, 0);
  return out;
}

// ---- LU ----

LuFactor lu_factor(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorCode::dimension_mismatch, "lu_factor: matrix not square");
  const int n = a.rows();
  LuFactor f{a, std::vector<int>(n), 1};
  for (int i = 0; i < n; ++i) f.perm[i] = i;
  Matrix& m = f.lu;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::fabs(m(k, k));
    for (int i = k + 1; i < n; ++i) {
      double v = std::fabs(m(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best == 0.0) throw Error(ErrorCode::singular_matrix, "lu_factor: exactly singular at column " + std::to_string(k));
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(f.perm[k], f.perm[piv]);
      f.sign = -f.sign;
    }
    for (int i = k + 1; i < n; ++i) {
      m(i, k) /= m(k, k);
      double l = m(i, k);
      if (l == 0.0) continue;
      for (int j = k + 1; j < n; ++j) m(i, j) -= l * m(k, j);
    }
  }
  return f;
}

Matrix lu_solve(const LuFactor& f, const Matrix& b) {
  const int n = f.lu.rows();
  require(b.rows() == n, ErrorCode::dimension_mismatch, "lu_solve: rhs rows mismatch");
  Matrix x(n, b.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < b.cols(); ++j) x(i, j) = b(f.perm[i], j);
  // forward substitution (unit lower)
  for (int i = 1; i < n; ++i)
    for (int k = 0; k < i; ++k) {
      double l = f.lu(i, k);
      if (l == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) x(i, j) -= l * x(k, j);
    }
  // back substitution
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) {
      double u = f.lu(i, k);
      if (u == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) x(i, j) -= u * x(k, j);
    }
    double d = f.lu(i, i);
    for (int j = 0; j < b.cols(); ++j) x(i, j) /= d;
  }
  return x;
}

double lu_log_abs_det(const LuFactor& f) {
  double s = 0.0;
  for (int i = 0; i < f.lu.rows(); ++i) s += std::log(std::fabs(f.lu(i, i)));
  return s;
}

double condition_estimate(const Matrix& a) {
  LuFactor f = lu_factor(a);
  Matrix inv = lu_solve(f, Matrix::identity(a.rows()));
  return norm1(a) * norm1(inv);
}

Matrix solve(const Matrix& a, const Matrix& b, double cond_bound) {
  LuFactor f = lu_factor(a);
  Matrix inv = lu_solve(f, Matrix::identity(a.rows()));
  double cond = norm1(a) * norm1(inv);
  if (!(cond < cond_bound) || !std::isfinite(cond)) {
    throw Error(ErrorCode::singular_matrix,
                "solve: ill-conditioned matrix, condition estimate " + std::to_string(cond));
  }
  return lu_solve(f, b);
}

// ---- Cholesky ----

namespace {

bool try_cholesky(const Matrix& a, Matrix& out) {
  const int n = a.rows();
  out = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= out(i, k) * out(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return false;
        out(i, i) = std::sqrt(s);
      } else {
        out(i, j) = s / out(j, j);
      }
    }
  }
  return true;
}

}  // namespace

Matrix cholesky(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorCode::dimension_mismatch, "cholesky: matrix not square");
  Matrix l;
  if (try_cholesky(a, l)) return l;
  double jitter = 1e-9 * trace(a) / std::max(1, a.rows());
  Matrix aj = a;
  for (int i = 0; i < a.rows(); ++i) aj(i, i) += jitter;
  if (try_cholesky(aj, l)) return l;
  throw Error(ErrorCode::numeric, "cholesky: matrix not positive definite (jitter " + std::to_string(jitter) + ")");
}

Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
  const int n = l.rows();
  require(b.rows() == n, ErrorCode::dimension_mismatch, "cholesky_solve: rhs rows mismatch");
  Matrix x = b;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k)
      for (int j = 0; j < b.cols(); ++j) x(i, j) -= l(i, k) * x(k, j);
    for (int j = 0; j < b.cols(); ++j) x(i, j) /= l(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k)
      for (int j = 0; j < b.cols(); ++j) x(i, j) -= l(k, i) * x(k, j);
    for (int j = 0; j < b.cols(); ++j) x(i, j) /= l(i, i);
  }
  return x;
}

double logdet_from_cholesky(const Matrix& l) {
  double s = 0.0;
  for (int i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Matrix logdet_spd(const Matrix& a) { return Matrix(1, 1, {logdet_from_cholesky(cholesky(a))}); }

// ---- eigenvalues ----

namespace {

void eig2x2(double a, double b, double c, double d, std::complex<double>& l1, std::complex<double>& l2) {
  double tr = a + d;
  double det = a * d - b * c;
  double disc = 0.25 * tr * tr - det;
  if (disc >= 0.0) {
    double r = std::sqrt(disc);
    l1 = std::complex<double>(0.5 * tr + r, 0.0);
    l2 = std::complex<double>(0.5 * tr - r, 0.0);
  } else {
    double im = std::sqrt(-disc);
    l1 = std::complex<double>(0.5 * tr, im);
    l2 = std::complex<double>(0.5 * tr, -im);
  }
}

// Householder reduction to upper Hessenberg (similarity transform).
void hessenberg(Matrix& a) {
  const int n = a.rows();
  for (int k = 0; k < n - 2; ++k) {
    double norm = 0.0;
    for (int i = k + 1; i < n; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    double alpha = a(k + 1, k) >= 0 ? -norm : norm;
    std::vector<double> v(n, 0.0);
    v[k + 1] = a(k + 1, k) - alpha;
    for (int i = k + 2; i < n; ++i) v[i] = a(i, k);
    double vtv = 0.0;
    for (int i = k + 1; i < n; ++i) vtv += v[i] * v[i];
    if (vtv == 0.0) continue;
    double beta = 2.0 / vtv;
    // A <- (I - beta v v^T) A
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = k + 1; i < n; ++i) s += v[i] * a(i, j);
      s *= beta;
      for (int i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
    }
    // A <- A (I - beta v v^T)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = k + 1; j < n; ++j) s += a(i, j) * v[j];
      s *= beta;
      for (int j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
    }
  }
  for (int i = 2; i < n; ++i)
    for (int j = 0; j <= i - 2; ++j) a(i, j) = 0.0;
}

// Francis double-shift QR on a Hessenberg matrix (classic hqr scheme).
std::vector<std::complex<double>> hqr(Matrix& a) {
  const int n = a.rows();
  std::vector<std::complex<double>> w(n);
  const double eps = 1e-14;
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::fabs(a(i, j));
  if (anorm == 0.0) anorm = 1.0;

  int nn = n - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l;
    for (;;) {
      for (l = nn; l >= 1; --l) {
        double s = std::fabs(a(l - 1, l - 1)) + std::fabs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::fabs(a(l, l - 1)) <= eps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        w[nn--] = std::complex<double>(x + t, 0.0);
        break;
      }
      double y = a(nn - 1, nn - 1);
      double wq = a(nn, nn - 1) * a(nn - 1, nn);
      if (l == nn - 1) {
        double p = 0.5 * (y - x);
        double q = p * p + wq;
        double z = std::sqrt(std::fabs(q));
        x += t;
        if (q >= 0.0) {
          z = p + (p >= 0 ? z : -z);
          w[nn - 1] = std::complex<double>(x + z, 0.0);
          w[nn] = (z != 0.0) ? std::complex<double>(x - wq / z, 0.0) : w[nn - 1];
        } else {
          w[nn - 1] = std::complex<double>(x + p, -z);
          w[nn] = std::conj(w[nn - 1]);
        }
        nn -= 2;
        break;
      }
      if (its == 60) throw Error(ErrorCode::numeric, "eigenvalues: QR iteration did not converge");
      if (its == 10 || its == 20 || its == 30 || its == 40 || its == 50) {
        t += x;
        for (int i = 0; i <= nn; ++i) a(i, i) -= x;
        double s = std::fabs(a(nn, nn - 1)) + std::fabs(a(nn - 1, nn - 2));
        y = x = 0.75 * s;
        wq = -0.4375 * s * s;
      }
      ++its;
      int m;
      double p = 0, q = 0, r = 0, z = 0;
      for (m = nn - 2; m >= l; --m) {
        z = a(m, m);
        double rr = x - z;
        double ss = y - z;
        p = (rr * ss - wq) / a(m + 1, m) + a(m, m + 1);
        q = a(m + 1, m + 1) - z - rr - ss;
        r = a(m + 2, m + 1);
        double s = std::fabs(p) + std::fabs(q) + std::fabs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        double u = std::fabs(a(m, m - 1)) * (std::fabs(q) + std::fabs(r));
        double v = std::fabs(p) * (std::fabs(a(m - 1, m - 1)) + std::fabs(z) + std::fabs(a(m + 1, m + 1)));
        if (u <= eps * v) break;
      }
      for (int i = m + 2; i <= nn; ++i) {
        a(i, i - 2) = 0.0;
        if (i != m + 2) a(i, i - 3) = 0.0;
      }
      for (int k = m; k <= nn - 1; ++k) {
        if (k != m) {
          p = a(k, k - 1);
          q = a(k + 1, k - 1);
          r = (k != nn - 1) ? a(k + 2, k - 1) : 0.0;
          x = std::fabs(p) + std::fabs(q) + std::fabs(r);
          if (x != 0.0) {
            p /= x;
            q /= x;
            r /= x;
          }
        }
        double s = std::sqrt(p * p + q * q + r * r);
        s = (p >= 0 ? s : -s);
        if (s == 0.0) continue;
        if (k == m) {
          if (l != m) a(k, k - 1) = -a(k, k - 1);
        } else {
          a(k, k - 1) = -s * x;
        }
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;
        for (int j = k; j <= nn; ++j) {
          p = a(k, j) + q * a(k + 1, j);
          if (k != nn - 1) {
            p += r * a(k + 2, j);
            a(k + 2, j) -= p * z;
          }
          a(k + 1, j) -= p * y;
          a(k, j) -= p * x;
        }
        int mmin = std::min(nn, k + 3);
        for (int i = l; i <= mmin; ++i) {
          p = x * a(i, k) + y * a(i, k + 1);
          if (k != nn - 1) {
            p += z * a(i, k + 2);
            a(i, k + 2) -= p * r;
          }
          a(i, k + 1) -= p * q;
          a(i, k) -= p;
        }
      }
    }
  }
  return w;
}

}  // namespace

std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorCode::dimension_mismatch, "eigenvalues: matrix not square");
  require(a.all_finite(), ErrorCode::numeric, "eigenvalues: non-finite entries");
  const int n = a.rows();
  if (n == 0) return {};
  if (n == 1) return {std::complex<double>(a(0, 0), 0.0)};
  if (n == 2) {
    std::complex<double> l1, l2;
    eig2x2(a(0, 0), a(0, 1), a(1, 0), a(1, 1), l1, l2);
    return {l1, l2};
  }
  Matrix h = a;
  hessenberg(h);
  return hqr(h);
}

double spectral_radius(const Matrix& a) {
  double r = 0.0;
  for (const auto& l : eigenvalues(a)) r = std::max(r, std::abs(l));
  return r;
}

double max_real_eigenvalue(const Matrix& a) {
  double r = -std::numeric_limits<double>::infinity();
  for (const auto& l : eigenvalues(a)) r = std::max(r, l.real());
  return r;
}

Matrix matrix_power(const Matrix& a, int n) {
  require(a.rows() == a.cols(), ErrorCode::dimension_mismatch, "matrix_power: matrix not square");
  require(n >= 0, ErrorCode::invalid_argument, "matrix_power: negative exponent");
  Matrix out = Matrix::identity(a.rows());
  for (int i = 0; i < n; ++i) out = matmul(out, a);
  return out;
}

}  // namespace stochflow
