#pragma once

#include <complex>
#include <initializer_list>
#include <string>
#include <vector>

namespace stochflow {

// Dense row-major matrix of doubles. Column vectors are (n x 1).
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols);
  Matrix(int rows, int cols, std::vector<double> data);

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
  static Matrix identity(int n);
  static Matrix filled(int rows, int cols, double value);
  static Matrix column(const std::vector<double>& v);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix diagonal(const std::vector<double>& d);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  bool all_finite() const;
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// ---- elementwise / structural ops (shared names with the autodiff layer) ----

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix mul(const Matrix& a, const Matrix& b);  // Hadamard
Matrix div(const Matrix& a, const Matrix& b);
Matrix neg(const Matrix& a);
Matrix scale(const Matrix& a, double s);
Matrix add_scalar(const Matrix& a, double s);
Matrix transpose(const Matrix& a);

Matrix tanh(const Matrix& a);
Matrix exp(const Matrix& a);
Matrix log(const Matrix& a);
Matrix sqrt(const Matrix& a);
Matrix softplus(const Matrix& a);
Matrix atan2(const Matrix& y, const Matrix& x);
Matrix log_add_exp(const Matrix& a, const Matrix& b);
Matrix wrap_angle(const Matrix& a);  // elementwise to (-pi, pi]

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add_bias(const Matrix& a, const Matrix& bias);        // bias: (rows x 1), broadcast over columns
Matrix broadcast(const Matrix& s, int rows, int cols);       // s: (1 x 1)
Matrix gather_rows(const Matrix& a, const std::vector<int>& idx);
Matrix scatter_rows(const std::vector<int>& idx, const Matrix& a, int total_rows);
Matrix slice_rows(const Matrix& a, int r0, int r1);
Matrix slice_cols(const Matrix& a, int c0, int c1);
Matrix col_sum(const Matrix& a);  // (1 x cols)
Matrix row_sum(const Matrix& a);  // (rows x 1)
Matrix sum_all(const Matrix& a);  // (1 x 1)
Matrix reshape(const Matrix& a, int rows, int cols);
Matrix kron(const Matrix& a, const Matrix& b);
inline const Matrix& detach(const Matrix& a) { return a; }
inline const Matrix& value_of(const Matrix& a) { return a; }

double scalar(const Matrix& a);  // requires 1x1
double max_abs(const Matrix& a);
double frobenius_norm(const Matrix& a);
double norm1(const Matrix& a);  // induced 1-norm (max column abs sum)
double trace(const Matrix& a);

// Column-stacking vec and its inverse; vec(B X A^T) = (A (x) B) vec(X).
Matrix vec_cols(const Matrix& a);
Matrix unvec_cols(const Matrix& v, int rows, int cols);

// ---- factorizations / solvers ----

struct LuFactor {
  Matrix lu;
  std::vector<int> perm;
  int sign = 1;
};

LuFactor lu_factor(const Matrix& a);                  // throws ErrorCode::singular_matrix
Matrix lu_solve(const LuFactor& f, const Matrix& b);
double lu_log_abs_det(const LuFactor& f);

// Solves a x = b with a condition estimate guard; throws
// ErrorCode::singular_matrix with the estimate when cond_1 exceeds the bound.
Matrix solve(const Matrix& a, const Matrix& b, double cond_bound = 1e12);
double condition_estimate(const Matrix& a);  // kappa_1 via explicit inverse

// Lower Cholesky factor; one jitter retry of 1e-9 * trace/n on the diagonal,
// throws ErrorCode::numeric if the matrix is still not positive definite.
Matrix cholesky(const Matrix& a);
Matrix cholesky_solve(const Matrix& chol_lower, const Matrix& b);
double logdet_from_cholesky(const Matrix& chol_lower);
Matrix logdet_spd(const Matrix& a);  // (1 x 1)

// ---- eigenvalues (small dense, Hessenberg + shifted QR) ----

std::vector<std::complex<double>> eigenvalues(const Matrix& a);
double spectral_radius(const Matrix& a);
double max_real_eigenvalue(const Matrix& a);

Matrix matrix_power(const Matrix& a, int n);  // n >= 0

std::string shape_string(const Matrix& a);

}  // namespace stochflow
