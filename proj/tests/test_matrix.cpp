#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>

#include "core/error.hpp"
#include "core/matrix.hpp"
#include "core/rng.hpp"
#include "doctest.h"

using namespace stochflow;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double scl = 1.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scl * rng.normal();
  return m;
}

Matrix random_spd(int n, Rng& rng) {
  Matrix a = random_matrix(n, n, rng);
  return add(matmul(a, transpose(a)), scale(Matrix::identity(n), 0.5));
}

}  // namespace

TEST_CASE("matmul basics") {
  Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(max_abs(sub(matmul(Matrix::identity(2), m), m)) == 0.0);

  Matrix v = Matrix::from_rows({{0}, {1}});
  Matrix p = matmul(m, v);
  CHECK(p(0, 0) == doctest::Approx(2.0));
  CHECK(p(1, 0) == doctest::Approx(4.0));

  CHECK(max_abs(matmul(Matrix::zeros(2, 2), m)) == 0.0);
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), Error);
}

TEST_CASE("solve identity and diagonal") {
  Matrix b = Matrix::from_rows({{1.5}, {-2.0}});
  Matrix x = solve(Matrix::identity(2), b);
  CHECK(max_abs(sub(x, b)) < 1e-15);

  Matrix d = Matrix::from_rows({{2, 0}, {0, 4}});
  Matrix inv = solve(d, Matrix::identity(2));
  CHECK(inv(0, 0) == doctest::Approx(0.5));
  CHECK(inv(1, 1) == doctest::Approx(0.25));
  CHECK(inv(0, 1) == 0.0);
}

TEST_CASE("solve residual on random SPD systems") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = random_spd(5, rng);
    Matrix b = random_matrix(5, 1, rng);
    Matrix x = solve(a, b);
    double resid = frobenius_norm(sub(matmul(a, x), b)) / frobenius_norm(b);
    CHECK(resid < 1e-10);
  }
}

TEST_CASE("solve rejects singular matrices with a condition estimate") {
  Matrix sing = Matrix::from_rows({{1, 2}, {2, 4}});
  CHECK_THROWS_AS(solve(sing, Matrix::identity(2)), Error);
  Matrix near = Matrix::from_rows({{1, 1}, {1, 1 + 1e-15}});
  CHECK_THROWS_WITH_AS(solve(near, Matrix::identity(2)), doctest::Contains("condition estimate"), Error);
}

TEST_CASE("kron basics and block layout") {
  Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(max_abs(sub(kron(Matrix(1, 1, {2.0}), m), scale(m, 2.0))) == 0.0);
  CHECK(max_abs(sub(kron(Matrix::identity(2), Matrix::identity(2)), Matrix::identity(4))) == 0.0);

  // antidiagonal blocks by definition expansion
  Matrix x = Matrix::from_rows({{0, 1}, {1, 0}});
  Matrix expect = Matrix::from_rows({
      {0, 0, 1, 2},
      {0, 0, 3, 4},
      {1, 2, 0, 0},
      {3, 4, 0, 0},
  });
  CHECK(max_abs(sub(kron(x, m), expect)) == 0.0);
}

TEST_CASE("kron/vec consistency: vec(B X A^T) = (A kron B) vec(X)") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = random_matrix(3, 3, rng);
    Matrix b = random_matrix(3, 3, rng);
    Matrix x = random_matrix(3, 3, rng);
    Matrix lhs = vec_cols(matmul(b, matmul(x, transpose(a))));
    Matrix rhs = matmul(kron(a, b), vec_cols(x));
    CHECK(max_abs(sub(lhs, rhs)) < 1e-12 * std::max(1.0, max_abs(lhs)));
  }
}

TEST_CASE("cholesky and logdet") {
  Matrix a = Matrix::from_rows({{4, 2}, {2, 3}});
  Matrix l = cholesky(a);
  CHECK(max_abs(sub(matmul(l, transpose(l)), a)) < 1e-12);
  CHECK(logdet_from_cholesky(l) == doctest::Approx(std::log(4.0 * 3.0 - 4.0)));
  CHECK_THROWS_AS(cholesky(Matrix::from_rows({{1, 0}, {0, -1}})), Error);
}

TEST_CASE("lu log abs det matches 2x2 closed form") {
  Matrix a = Matrix::from_rows({{3, 1}, {-2, 4}});
  CHECK(lu_log_abs_det(lu_factor(a)) == doctest::Approx(std::log(std::fabs(3.0 * 4.0 + 2.0))));
}

TEST_CASE("eigenvalues of diagonal and rotation matrices") {
  auto eig = eigenvalues(Matrix::diagonal({3.0, -1.0, 0.5}));
  double max_re = -1e300, min_re = 1e300;
  for (auto& l : eig) {
    CHECK(l.imag() == doctest::Approx(0.0));
    max_re = std::max(max_re, l.real());
    min_re = std::min(min_re, l.real());
  }
  CHECK(max_re == doctest::Approx(3.0));
  CHECK(min_re == doctest::Approx(-1.0));

  // scaled rotation: eigenvalues r e^{+-i theta}
  double r = 0.8, th = 0.6;
  Matrix rot = Matrix::from_rows({{r * std::cos(th), -r * std::sin(th)}, {r * std::sin(th), r * std::cos(th)}});
  CHECK(spectral_radius(rot) == doctest::Approx(r));
  auto e2 = eigenvalues(rot);
  CHECK(std::abs(e2[0]) == doctest::Approx(r));
  CHECK(std::fabs(e2[0].imag()) == doctest::Approx(r * std::sin(th)));
}

TEST_CASE("eigenvalues are similarity invariant and match the power oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 15; ++trial) {
    int n = 3 + rng.uniform_int(3);  // 3..5
    Matrix a = random_matrix(n, n, rng);
    double rho = spectral_radius(a);

    // independent oracle: ||A^k||^(1/k) -> rho
    Matrix p = a;
    for (int k = 1; k < 64; ++k) {
      p = matmul(p, a);
      double nrm = frobenius_norm(p);
      if (nrm > 1e100 || nrm < 1e-100) p = scale(p, 1.0 / nrm);  // track growth via log
    }
    // recompute with explicit log accumulation
    Matrix q = a;
    double log_norm = 0.0;
    int k_total = 1;
    for (int k = 1; k < 80; ++k) {
      q = matmul(q, a);
      ++k_total;
      double nrm = frobenius_norm(q);
      log_norm += std::log(nrm);
      q = scale(q, 1.0 / nrm);
    }
    double rho_est = std::exp(log_norm / (k_total - 1));
    if (rho > 1e-6) CHECK(rho_est / rho == doctest::Approx(1.0).epsilon(0.1));

    // similarity transform preserves the spectrum
    Matrix t = add(random_matrix(n, n, rng, 0.3), Matrix::identity(n));
    Matrix sim = matmul(solve(t, matmul(a, t)), Matrix::identity(n));
    CHECK(spectral_radius(sim) == doctest::Approx(rho).epsilon(1e-6));
  }
}

TEST_CASE("matrix_power") {
  Matrix a = Matrix::from_rows({{0.5, 0.1}, {0, 0.5}});
  CHECK(max_abs(sub(matrix_power(a, 0), Matrix::identity(2))) == 0.0);
  CHECK(max_abs(sub(matrix_power(a, 3), matmul(a, matmul(a, a)))) < 1e-15);
}

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  Matrix a(1, 5, {0.0, 3.2, -3.2, 7.0, -7.0});
  Matrix w = wrap_angle(a);
  for (int j = 0; j < 5; ++j) {
    CHECK(w(0, j) <= 3.14159265358979312 + 1e-12);
    CHECK(w(0, j) > -3.14159265358979312 - 1e-12);
    double diff = a(0, j) - w(0, j);
    CHECK(std::fabs(std::remainder(diff, 2 * 3.141592653589793238)) < 1e-12);
  }
}

TEST_CASE("gather/scatter/slice round trips") {
  Rng rng(3);
  Matrix a = random_matrix(4, 6, rng);
  std::vector<int> idx = {2, 0};
  Matrix g = gather_rows(a, idx);
  CHECK(g(0, 3) == a(2, 3));
  CHECK(g(1, 5) == a(0, 5));
  Matrix sc = scatter_rows(idx, g, 4);
  CHECK(sc(2, 3) == a(2, 3));
  CHECK(sc(1, 0) == 0.0);
  Matrix cols = slice_cols(a, 2, 5);
  CHECK(cols.cols() == 3);
  CHECK(cols(1, 0) == a(1, 2));
  CHECK(cols(3, 2) == a(3, 4));
  Matrix u = unvec_cols(vec_cols(a), 4, 6);
  CHECK(max_abs(sub(u, a)) == 0.0);
}
