#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "core/latent.hpp"
#include "doctest.h"

using namespace stochflow;

namespace {

struct BuiltLinear {
  ParamVector params;
  LinearSDE sde;
};

BuiltLinear build_linear(int dim, double eps = 0.01) {
  BuiltLinear b;
  b.sde = make_linear_sde(dim, eps, b.params.layout, "latent");
  b.params.layout.validate();
  b.params.values.assign(b.params.layout.total, 0.0);
  return b;
}

struct BuiltCycle {
  ParamVector params;
  LimitCycleSDE sde;
};

BuiltCycle build_cycle(int dim = 2, double eps = 0.01) {
  BuiltCycle b;
  b.sde = make_limit_cycle_sde(dim, eps, b.params.layout, "latent");
  b.params.layout.validate();
  b.params.values.assign(b.params.layout.total, 0.0);
  return b;
}

}  // namespace

TEST_CASE("Hurwitz by construction over random raw parameters") {
  for (int dim : {1, 2, 3}) {
    BuiltLinear b = build_linear(dim);
    Rng rng(100 + dim);
    PlainParams p(b.params.values);
    int draws = dim == 2 ? 1000 : 200;
    for (int trial = 0; trial < draws; ++trial) {
      for (double& v : b.params.values) v = 2.0 * rng.normal();
      Matrix a = linear_drift_matrix(b.sde, p);
      CHECK(max_real_eigenvalue(a) < -b.sde.eps / 2);
    }
  }
}

TEST_CASE("set_linear_params realizes a requested (A, K) exactly") {
  BuiltLinear b = build_linear(2);
  Matrix a_target = Matrix::from_rows({{-1.0, 2.0}, {-2.0, -1.5}});
  Matrix k_target = Matrix::from_rows({{0.3, 0.0}, {0.1, 0.2}});
  set_linear_params(b.sde, b.params.values, a_target, k_target);
  PlainParams p(b.params.values);
  CHECK(max_abs(sub(linear_drift_matrix(b.sde, p), a_target)) < 1e-12);
  CHECK(max_abs(sub(linear_diffusion_matrix(b.sde, p), k_target)) < 1e-15);
  // sym(A) > -eps I is not representable
  CHECK_THROWS_AS(set_linear_params(b.sde, b.params.values, Matrix::from_rows({{0.5, 0}, {0, -1}}), k_target),
                  Error);
}

TEST_CASE("discretize: direct formula, boundary, and instability report") {
  BuiltLinear b = build_linear(2);
  set_linear_params(b.sde, b.params.values, scale(Matrix::identity(2), -1.0), Matrix::identity(2));
  DiscretizedLinear d = discretize(b.sde, b.params.values, 0.1);
  CHECK(max_abs(sub(d.F, scale(Matrix::identity(2), 0.9))) < 1e-12);
  CHECK(max_abs(sub(d.Sigma, scale(Matrix::identity(2), 0.1))) < 1e-12);

  CHECK_THROWS_AS(discretize(b.sde, b.params.values, 0.0), Error);
  CHECK_THROWS_WITH_AS(discretize(b.sde, b.params.values, 2.5), doctest::Contains("1.5"), Error);
}

TEST_CASE("stationary covariance: scalar series, F = 0, and the fixed point") {
  DiscretizedLinear scalar_sys{Matrix(1, 1, {0.5}), Matrix(1, 1, {0.75}), 0.1};
  CHECK(scalar(stationary_covariance(scalar_sys)) == doctest::Approx(1.0).epsilon(1e-12));

  DiscretizedLinear zero_f{Matrix::zeros(2, 2), Matrix::from_rows({{0.4, 0.1}, {0.1, 0.3}}), 0.1};
  CHECK(max_abs(sub(stationary_covariance(zero_f), zero_f.Sigma)) < 1e-14);

  Rng rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    BuiltLinear b = build_linear(3);
    for (double& v : b.params.values) v = rng.normal();
    DiscretizedLinear d = discretize(b.sde, b.params.values, 0.05);
    Matrix s_inf = stationary_covariance(d);
    Matrix resid = sub(add(matmul(d.F, matmul(s_inf, transpose(d.F))), d.Sigma), s_inf);
    CHECK(max_abs(resid) < 1e-8 * max_abs(s_inf));
  }
}

TEST_CASE("scalar stationary covariance matches the closed form to 1e-12") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    double f = rng.uniform(-0.95, 0.95);
    double q = 0.1 + rng.uniform();
    DiscretizedLinear d{Matrix(1, 1, {f}), Matrix(1, 1, {q}), 0.1};
    double expect = q / (1.0 - f * f);
    CHECK(std::fabs(scalar(stationary_covariance(d)) - expect) < 1e-12 * expect);
  }
}

TEST_CASE("backward conditional: paper formula, identity F, two-step composition") {
  DiscretizedLinear d{Matrix(1, 1, {0.5}), Matrix(1, 1, {0.1}), 0.1};
  GaussianDensity g1 = backward_conditional(d, Matrix(1, 1, {1.0}), 1);
  CHECK(scalar(g1.mean) == doctest::Approx(2.0));
  CHECK(scalar(g1.cov) == doctest::Approx(0.4));

  DiscretizedLinear id{Matrix::identity(2), Matrix::from_rows({{0.2, 0.05}, {0.05, 0.1}}), 0.1};
  Matrix z = Matrix::from_rows({{0.3}, {-0.7}});
  GaussianDensity g2 = backward_conditional(id, z, 1);
  CHECK(max_abs(sub(g2.mean, z)) < 1e-14);
  CHECK(max_abs(sub(g2.cov, id.Sigma)) < 1e-14);

  GaussianDensity g3 = backward_conditional(d, Matrix(1, 1, {1.0}), 2);
  CHECK(scalar(g3.mean) == doctest::Approx(4.0));
  CHECK(scalar(g3.cov) == doctest::Approx(2.0));
}

TEST_CASE("gaussian log density: standard values and 3D quadrature") {
  GaussianDensity std1(Matrix::zeros(1, 1), Matrix::identity(1));
  CHECK(log_density(std1, Matrix::zeros(1, 1)) == doctest::Approx(-0.9189385332046727));

  GaussianDensity wide(Matrix::zeros(1, 1), Matrix(1, 1, {4.0}));
  CHECK(log_density(wide, Matrix::zeros(1, 1)) ==
        doctest::Approx(-0.5 * std::log(8.0 * std::numbers::pi)));

  // quadrature oracle on a random-ish 3D covariance
  Matrix l = Matrix::from_rows({{0.8, 0, 0}, {0.2, 0.7, 0}, {-0.1, 0.1, 0.6}});
  GaussianDensity g(Matrix::zeros(3, 1), matmul(l, transpose(l)));
  const int n = 35;
  const double lim = 4.0, h = 2 * lim / n;
  double total = 0.0;
  Matrix x(3, 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        x(0, 0) = -lim + (i + 0.5) * h;
        x(1, 0) = -lim + (j + 0.5) * h;
        x(2, 0) = -lim + (k + 0.5) * h;
        total += std::exp(log_density(g, x)) * h * h * h;
      }
  CHECK(total == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("polar maps: worked example, unit circle, round trips, origin guard") {
  PolarPoint p = cartesian_to_polar(3.0, 4.0);
  CHECK(p.rho == doctest::Approx(5.0));
  CHECK(p.psi == doctest::Approx(std::atan2(4.0, 3.0)));
  CHECK(std::exp(p.logdet) == doctest::Approx(0.2));

  PolarPoint u = cartesian_to_polar(1.0, 0.0);
  CHECK(u.rho == doctest::Approx(1.0));
  CHECK(u.psi == 0.0);
  CHECK(u.logdet == doctest::Approx(0.0));

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    double rho = 0.1 + 5.0 * rng.uniform();
    double psi = rng.uniform(-std::numbers::pi, std::numbers::pi);
    double x, y;
    polar_to_cartesian(rho, psi, x, y);
    PolarPoint back = cartesian_to_polar(x, y);
    CHECK(std::fabs(back.rho - rho) < 1e-12);
    CHECK(std::fabs(back.psi - psi) < 1e-12);
  }

  double x, y;
  polar_to_cartesian(2.0, std::numbers::pi / 2, x, y);
  CHECK(std::fabs(x) < 1e-12);
  CHECK(y == doctest::Approx(2.0));

  CHECK_THROWS_AS(cartesian_to_polar(1e-9, 0.0), Error);
}

TEST_CASE("polar logdet matches the finite-difference Jacobian determinant") {
  Rng rng(19);
  const double h = 1e-7;
  for (int trial = 0; trial < 100; ++trial) {
    double rho = 0.1 + 9.9 * rng.uniform();
    double psi = rng.uniform(-3.0, 3.0);
    double x, y;
    polar_to_cartesian(rho, psi, x, y);
    auto rho_of = [](double xx, double yy) { return std::sqrt(xx * xx + yy * yy); };
    auto psi_of = [](double xx, double yy) { return std::atan2(yy, xx); };
    double j00 = (rho_of(x + h, y) - rho_of(x - h, y)) / (2 * h);
    double j01 = (rho_of(x, y + h) - rho_of(x, y - h)) / (2 * h);
    double j10 = (psi_of(x + h, y) - psi_of(x - h, y)) / (2 * h);
    double j11 = (psi_of(x, y + h) - psi_of(x, y - h)) / (2 * h);
    double det = std::fabs(j00 * j11 - j01 * j10);
    double logdet = cartesian_to_polar(x, y).logdet;
    CHECK(std::fabs(std::log(det) - logdet) < 1e-6 * std::max(1.0, std::fabs(logdet)));
  }
}

TEST_CASE("cycle stationary density: radial mode, rotational symmetry, quadrature") {
  BuiltCycle b = build_cycle();
  set_cycle_params(b.sde, b.params.values, {-1.0, 2.0, 1.0, 0.2, 0.3});
  const double dt = 0.01;

  // polar density (cartesian value with the volume factor removed) peaks at rho*
  auto polar_lp = [&](double rho) {
    Matrix z = Matrix::from_rows({{rho}, {0.0}});
    return cycle_stationary_logdensity(b.sde, b.params.values, z, dt) + std::log(rho);
  };
  double at_star = polar_lp(1.0);
  CHECK(at_star > polar_lp(0.7));
  CHECK(at_star > polar_lp(1.3));
  CHECK(at_star > polar_lp(0.97));
  CHECK(at_star > polar_lp(1.03));

  double base = cycle_stationary_logdensity(b.sde, b.params.values, Matrix::from_rows({{1.0}, {0.0}}), dt);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    double ang = rng.uniform(-std::numbers::pi, std::numbers::pi);
    Matrix z = Matrix::from_rows({{std::cos(ang)}, {std::sin(ang)}});
    double lp = cycle_stationary_logdensity(b.sde, b.params.values, z, dt);
    CHECK(std::fabs(lp - base) < 1e-10 * std::max(1.0, std::fabs(base)));
  }

  const int n = 400;
  const double lim = 2.5, h = 2 * lim / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = -lim + (i + 0.5) * h;
      double y = -lim + (j + 0.5) * h;
      if (x * x + y * y < 1e-8) continue;
      Matrix z = Matrix::from_rows({{x}, {y}});
      total += std::exp(cycle_stationary_logdensity(b.sde, b.params.values, z, dt)) * h * h;
    }
  CHECK(total == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("cycle backward conditional: rho part matches the linear module exactly") {
  BuiltCycle b = build_cycle();
  CycleCoeffs c{-0.8, 1.7, 1.2, 0.25, 0.15};
  set_cycle_params(b.sde, b.params.values, c);
  const double dt = 0.02;

  // matched scalar linear system for rho - rho*
  BuiltLinear lin = build_linear(1, 1e-6);
  set_linear_params(lin.sde, lin.params.values, Matrix(1, 1, {c.a}), Matrix(1, 1, {c.sigma1}));
  // raw softplus parameterization cannot hit a exactly; force the discrete pieces instead
  DiscretizedLinear d{Matrix(1, 1, {1.0 + c.a * dt}), Matrix(1, 1, {c.sigma1 * c.sigma1 * dt}), dt};

  for (int steps : {1, 2, 5}) {
    Matrix z_next = Matrix::from_rows({{1.5}, {0.4}});
    auto cond = cycle_backward_conditional(b.sde, b.params.values, z_next, steps, dt);
    PolarPoint next = cartesian_to_polar(z_next(0, 0), z_next(1, 0));
    GaussianDensity rho_cond =
        backward_conditional(d, Matrix(1, 1, {next.rho - c.rho_star}), steps);

    Matrix z_prev = Matrix::from_rows({{1.3}, {-0.2}});
    PolarPoint prev = cartesian_to_polar(z_prev(0, 0), z_prev(1, 0));
    double lp_rho = log_density(rho_cond, Matrix(1, 1, {prev.rho - c.rho_star}));

    // psi part with the nearest-wrap residual (sigma2 sqrt(dt s) << pi here)
    double var_psi = c.sigma2 * c.sigma2 * dt * steps;
    double mean_psi = next.psi - c.b * dt * steps;
    double r = std::remainder(prev.psi - mean_psi, 2 * std::numbers::pi);
    double lp_psi = -0.5 * r * r / var_psi - 0.5 * std::log(var_psi) - 0.5 * kLogTwoPi;

    double expected = lp_rho + lp_psi + prev.logdet;
    CHECK(cond(z_prev) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("cycle backward conditional: deterministic-phase limit") {
  BuiltCycle b = build_cycle();
  CycleCoeffs c{-1.0, 2.0, 1.0, 0.2, 1e-4};
  set_cycle_params(b.sde, b.params.values, c);
  const double dt = 0.05;
  Matrix z_next = Matrix::from_rows({{1.0}, {0.0}});
  auto cond = cycle_backward_conditional(b.sde, b.params.values, z_next, 1, dt);
  // the conditional mean of psi is psi_next - b dt: density collapses there
  double best_psi = -c.b * dt;
  auto at_angle = [&](double psi) {
    Matrix z = Matrix::from_rows({{std::cos(psi)}, {std::sin(psi)}});
    return cond(z);
  };
  CHECK(at_angle(best_psi) > at_angle(best_psi + 0.01));
  CHECK(at_angle(best_psi) > at_angle(best_psi - 0.01));
}

TEST_CASE("euler-maruyama: degenerate cases and the explicit Euler reduction") {
  Rng rng(1);
  Matrix z = Matrix::from_rows({{0.4}, {-1.1}});
  auto zero_v = [](const Matrix& x) { return Matrix::zeros(x.rows(), 1); };
  auto zero_m = [](const Matrix& x) { return Matrix::zeros(x.rows(), x.rows()); };
  Matrix z1 = euler_maruyama_step(zero_v, zero_m, z, 0.1, rng);
  CHECK(max_abs(sub(z1, z)) == 0.0);

  Matrix a = Matrix::from_rows({{-1.0, 0.5}, {-0.5, -1.0}});
  auto lin_drift = [&a](const Matrix& x) { return matmul(a, x); };
  Matrix z2 = euler_maruyama_step(lin_drift, zero_m, z, 0.1, rng);
  CHECK(max_abs(sub(z2, add(z, scale(matmul(a, z), 0.1)))) < 1e-15);

  CHECK_THROWS_AS(euler_maruyama_step(zero_v, zero_m, z, 0.0, rng), Error);
}

TEST_CASE("euler-maruyama: OU stationary variance matches the discrete closed form") {
  const double a = -1.0, k = 0.5, dt = 0.05;
  const int steps = 100, paths = 100000;
  const double f = 1.0 + a * dt;
  const double target = k * k * dt / (1.0 - f * f);
  Rng rng(2024);
  Matrix amat(1, 1, {a}), kmat(1, 1, {k});
  auto drift = [&amat](const Matrix& x) { return matmul(amat, x); };
  auto diff = [&kmat](const Matrix&) { return kmat; };
  double sum = 0, sum2 = 0;
  for (int p = 0; p < paths; ++p) {
    Matrix z = Matrix::zeros(1, 1);
    for (int s = 0; s < steps; ++s) z = euler_maruyama_step(drift, diff, z, dt, rng);
    sum += z(0, 0);
    sum2 += z(0, 0) * z(0, 0);
  }
  double var = sum2 / paths - (sum / paths) * (sum / paths);
  CHECK(var == doctest::Approx(target).epsilon(0.03));
}

TEST_CASE("rollout: zero steps, linear decay, limit-cycle radius convergence") {
  BuiltLinear lin = build_linear(2);
  Matrix a = Matrix::from_rows({{-1.0, 2.0}, {-2.0, -1.0}});
  set_linear_params(lin.sde, lin.params.values, a, scale(Matrix::identity(2), 0.05));
  LatentSpec spec = lin.sde;

  Rng rng(77);
  Matrix z0 = Matrix::from_rows({{8.0}, {-5.0}});
  Matrix r0 = latent_rollout(spec, lin.params.values, z0, 0, 0.01, rng, 1.0);
  CHECK(r0.cols() == 1);
  CHECK(max_abs(sub(r0, z0)) == 0.0);

  // |lambda_max| = 1 here; horizon 50 time constants
  int n = static_cast<int>(50.0 / 0.01);
  Matrix path = latent_rollout(spec, lin.params.values, z0, n, 0.01, rng, 0.0);
  Matrix last = slice_cols(path, n, n + 1);
  CHECK(frobenius_norm(last) < 1e-3);

  BuiltCycle cyc = build_cycle();
  set_cycle_params(cyc.sde, cyc.params.values, {-1.0, 2.0, 1.0, 0.1, 0.1});
  LatentSpec cspec = cyc.sde;
  Matrix c0 = Matrix::from_rows({{3.0}, {0.0}});
  Matrix cpath = latent_rollout(cspec, cyc.params.values, c0, 600, 0.01, rng, 0.0);
  double prev_err = 1e300;
  for (int j = 0; j <= 600; j += 60) {
    double rho = std::sqrt(cpath(0, j) * cpath(0, j) + cpath(1, j) * cpath(1, j));
    double err = std::fabs(rho - 1.0);
    CHECK(err <= prev_err + 1e-9);
    prev_err = err;
  }
  CHECK(prev_err < 0.01);
}

TEST_CASE("monte-carlo stochastic stability of noisy rollouts") {
  // small diffusion: most noisy paths contract well below their start
  BuiltLinear b = build_linear(2);
  Matrix a = Matrix::from_rows({{-1.0, 1.5}, {-1.5, -1.0}});
  set_linear_params(b.sde, b.params.values, a, scale(Matrix::identity(2), 0.02));
  LatentSpec spec = b.sde;
  Rng rng(99);
  Matrix z0 = Matrix::from_rows({{4.0}, {-3.0}});
  const double dt = 0.01;
  const int steps = 800;  // T = 8 time constants of |Re lambda| = 1
  int contracted = 0;
  const int trials = 500;
  for (int trial = 0; trial < trials; ++trial) {
    Matrix path = latent_rollout(spec, b.params.values, z0, steps, dt, rng, 1.0);
    Matrix last = slice_cols(path, steps, steps + 1);
    if (frobenius_norm(last) < 0.5 * frobenius_norm(z0)) ++contracted;
  }
  CHECK(contracted >= static_cast<int>(0.95 * trials));
}

TEST_CASE("bayes identity at stationarity for the scalar chain") {
  // posterior of z_i given z_{i+1} under the stationary prior is N(F z, Sigma)
  const double f = 0.7, q = 0.3;
  const double s_inf = q / (1.0 - f * f);
  auto log_n = [](double x, double mean, double var) {
    return -0.5 * (x - mean) * (x - mean) / var - 0.5 * std::log(var) - 0.5 * kLogTwoPi;
  };
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    double a = 2.0 * rng.normal();
    double b = 2.0 * rng.normal();
    double lhs = log_n(a, f * b, q) + log_n(b, 0.0, s_inf);   // p(z_i|z_{i+1}) p_inf(z_{i+1})
    double rhs = log_n(b, f * a, q) + log_n(a, 0.0, s_inf);   // p(z_{i+1}|z_i) p_inf(z_i)
    CHECK(std::fabs(lhs - rhs) < 1e-8);
  }
}

TEST_CASE("latent term gradients pass the finite-difference check") {
  Rng rng(31);
  Matrix z(2, 8);
  for (int j = 0; j < 8; ++j) {
    z(0, j) = 1.2 * std::cos(0.7 * j) + 0.05 * rng.normal();
    z(1, j) = 1.2 * std::sin(0.7 * j) + 0.05 * rng.normal();
  }
  const double dt = 0.05;

  SUBCASE("linear") {
    BuiltLinear b = build_linear(2);
    set_linear_params(b.sde, b.params.values, Matrix::from_rows({{-1.0, 0.8}, {-0.8, -1.2}}),
                      Matrix::from_rows({{0.3, 0.05}, {0.0, 0.25}}));
    const LinearSDE& sde = b.sde;
    for (int stride : {1, 3}) {
      auto graph = [&, stride](Tape& t, const Var& flat) {
        TapeParams p(t, flat);
        auto terms = linear_latent_terms(sde, p, t.constant(z), stride, dt);
        return add(terms.conditional, terms.endpoint);
      };
      auto value = [&, stride](const std::vector<double>& v) {
        PlainParams p(v);
        auto terms = linear_latent_terms(sde, p, z, stride, dt);
        return scalar(terms.conditional) + scalar(terms.endpoint);
      };
      GradientReport r = check_gradient(graph, value, b.params, 1e-6);
      CHECK(r.max_rel_err < 1e-4);
    }
  }

  SUBCASE("cycle") {
    BuiltCycle b = build_cycle();
    set_cycle_params(b.sde, b.params.values, {-0.9, 1.4, 1.1, 0.3, 0.25});
    const LimitCycleSDE& sde = b.sde;
    for (int stride : {1, 2}) {
      auto graph = [&, stride](Tape& t, const Var& flat) {
        TapeParams p(t, flat);
        auto terms = cycle_latent_terms(sde, p, t.constant(z), stride, dt);
        return add(terms.conditional, terms.endpoint);
      };
      auto value = [&, stride](const std::vector<double>& v) {
        PlainParams p(v);
        auto terms = cycle_latent_terms(sde, p, z, stride, dt);
        return scalar(terms.conditional) + scalar(terms.endpoint);
      };
      GradientReport r = check_gradient(graph, value, b.params, 1e-6);
      CHECK(r.max_rel_err < 1e-4);
    }
  }

  SUBCASE("cycle with extra dims") {
    BuiltCycle b = build_cycle(3);
    set_cycle_params(b.sde, b.params.values, {-0.9, 1.4, 1.1, 0.3, 0.25});
    set_linear_params(*b.sde.extra, b.params.values, Matrix(1, 1, {-0.7}), Matrix(1, 1, {0.2}));
    Matrix z3(3, 8);
    for (int j = 0; j < 8; ++j) {
      z3(0, j) = z(0, j);
      z3(1, j) = z(1, j);
      z3(2, j) = 0.3 * rng.normal();
    }
    const LimitCycleSDE& sde = b.sde;
    auto graph = [&](Tape& t, const Var& flat) {
      TapeParams p(t, flat);
      auto terms = cycle_latent_terms(sde, p, t.constant(z3), 1, dt);
      return add(terms.conditional, terms.endpoint);
    };
    auto value = [&](const std::vector<double>& v) {
      PlainParams p(v);
      auto terms = cycle_latent_terms(sde, p, z3, 1, dt);
      return scalar(terms.conditional) + scalar(terms.endpoint);
    };
    GradientReport r = check_gradient(graph, value, b.params, 1e-6);
    CHECK(r.max_rel_err < 1e-4);
  }
}
