#include "core/latent.hpp"

#include <cmath>
#include <limits>

namespace stochflow {

namespace {

double softplus_inverse(double y) {
  if (!(y > 0)) throw Error(ErrorCode::invalid_argument, "softplus_inverse: argument must be positive");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

}  // namespace

LinearSDE make_linear_sde(int dim, double eps, ParamLayout& layout, const std::string& prefix) {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "make_linear_sde: dim must be >= 1");
  if (!(eps > 0)) throw Error(ErrorCode::invalid_argument, "make_linear_sde: eps must be positive");
  LinearSDE s;
  s.dim = dim;
  s.eps = eps;
  s.off_skew = layout.add(prefix + ".skew", s.skew_count());
  s.off_spd = layout.add(prefix + ".spd", s.spd_count());
  s.off_diff = layout.add(prefix + ".diffusion", s.diff_count());

  // fixed embeddings from packed parameters into row-major vec(d x d)
  s.skew_embed = Matrix(dim * dim, std::max(s.skew_count(), 0));
  int k = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      s.skew_embed(i * dim + j, k) = 1.0;
      s.skew_embed(j * dim + i, k) = -1.0;
      ++k;
    }
  s.diag_embed = Matrix(dim * dim, dim);
  for (int i = 0; i < dim; ++i) s.diag_embed(i * dim + i, i) = 1.0;
  s.lower_embed = Matrix(dim * dim, std::max(dim * (dim - 1) / 2, 0));
  k = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < i; ++j) s.lower_embed(i * dim + j, k++) = 1.0;
  return s;
}

void set_linear_params(const LinearSDE& sde, std::vector<double>& values, const Matrix& a, const Matrix& k) {
  const int d = sde.dim;
  if (a.rows() != d || a.cols() != d || k.rows() != d || k.cols() != d)
    throw Error(ErrorCode::dimension_mismatch, "set_linear_params: shape mismatch");
  // -sym(A) - eps I must admit a Cholesky factor
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = -0.5 * (a(i, j) + a(j, i)) - (i == j ? sde.eps : 0.0);
  Matrix l = cholesky(m);
  int idx = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) values[sde.off_skew + idx++] = 0.5 * (a(i, j) - a(j, i));
  for (int i = 0; i < d; ++i) values[sde.off_spd + i] = softplus_inverse(l(i, i));
  idx = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < i; ++j) values[sde.off_spd + idx++] = l(i, j);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) values[sde.off_diff + static_cast<std::size_t>(i) * d + j] = k(i, j);
}

LimitCycleSDE make_limit_cycle_sde(int dim, double eps, ParamLayout& layout, const std::string& prefix) {
  if (dim < 2) throw Error(ErrorCode::invalid_argument, "make_limit_cycle_sde: dim must be >= 2");
  LimitCycleSDE s;
  s.dim = dim;
  s.eps = eps;
  s.off_a = layout.add(prefix + ".a", 1);
  s.off_b = layout.add(prefix + ".b", 1);
  s.off_rho = layout.add(prefix + ".rho_star", 1);
  s.off_sigma1 = layout.add(prefix + ".sigma1", 1);
  s.off_sigma2 = layout.add(prefix + ".sigma2", 1);
  if (dim > 2) s.extra = make_linear_sde(dim - 2, eps, layout, prefix + ".extra");
  return s;
}

void set_cycle_params(const LimitCycleSDE& sde, std::vector<double>& values, const CycleCoeffs& c) {
  if (!(c.a < 0)) throw Error(ErrorCode::invalid_argument, "set_cycle_params: a must be negative");
  values[sde.off_a] = softplus_inverse(-c.a);
  values[sde.off_b] = c.b;
  values[sde.off_rho] = softplus_inverse(c.rho_star);
  values[sde.off_sigma1] = softplus_inverse(c.sigma1);
  values[sde.off_sigma2] = softplus_inverse(c.sigma2);
}

GaussianDensity::GaussianDensity(Matrix mean_, Matrix cov_) : mean(std::move(mean_)), cov(std::move(cov_)) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.rows() || mean.cols() != 1)
    throw Error(ErrorCode::dimension_mismatch, "GaussianDensity: mean/cov shape mismatch");
  if (max_abs(sub(cov, transpose(cov))) > 1e-9 * std::max(1.0, max_abs(cov)))
    throw Error(ErrorCode::invalid_argument, "GaussianDensity: covariance not symmetric");
  chol = cholesky(cov);
}

double log_density(const GaussianDensity& g, const Matrix& x) {
  if (x.rows() != g.mean.rows() || x.cols() != 1)
    throw Error(ErrorCode::dimension_mismatch, "log_density: point shape mismatch");
  Matrix r = sub(x, g.mean);
  Matrix w = cholesky_solve(g.chol, r);
  double quad = 0.0;
  for (int i = 0; i < r.rows(); ++i) quad += r(i, 0) * w(i, 0);
  return -0.5 * quad - 0.5 * logdet_from_cholesky(g.chol) - 0.5 * g.mean.rows() * kLogTwoPi;
}

Matrix sample(const GaussianDensity& g, Rng& rng) {
  Matrix xi(g.mean.rows(), 1);
  for (int i = 0; i < xi.rows(); ++i) xi(i, 0) = rng.normal();
  return add(g.mean, matmul(g.chol, xi));
}

DiscretizedLinear discretize(const Matrix& a, const Matrix& k, double dt) {
  if (!(dt > 0)) throw Error(ErrorCode::invalid_argument, "discretize: dt must be positive");
  if (a.rows() != a.cols() || !k.rows() || k.rows() != a.rows())
    throw Error(ErrorCode::dimension_mismatch, "discretize: shape mismatch");
  Matrix f = add(Matrix::identity(a.rows()), scale(a, dt));
  double radius = spectral_radius(f);
  if (!(radius < 1.0))
    throw Error(ErrorCode::unstable,
                "discretize: spectral radius " + std::to_string(radius) + " >= 1 (dt too large)");
  return {f, scale(matmul(k, transpose(k)), dt), dt};
}

DiscretizedLinear discretize(const LinearSDE& sde, const std::vector<double>& params, double dt) {
  PlainParams p(params);
  auto d = discretize_t(sde, p, dt);
  return {d.F, d.Sigma, dt};
}

Matrix stationary_covariance(const DiscretizedLinear& disc) {
  PlainParams p(disc.F.values());  // provider only used for constants here
  DiscretizedT<PlainParams, Matrix> d{disc.F, disc.Sigma, disc.dt};
  return stationary_covariance_t(p, d);
}

GaussianDensity backward_conditional(const DiscretizedLinear& disc, const Matrix& z_next, int steps) {
  if (steps < 1) throw Error(ErrorCode::invalid_argument, "backward_conditional: steps must be >= 1");
  if (z_next.rows() != disc.F.rows() || z_next.cols() != 1)
    throw Error(ErrorCode::dimension_mismatch, "backward_conditional: point shape mismatch");
  PlainParams p(disc.F.values());
  DiscretizedT<PlainParams, Matrix> d{disc.F, disc.Sigma, disc.dt};
  Matrix f_s, sigma_s;
  multi_step(p, d, steps, f_s, sigma_s);
  Matrix mean = solve(f_s, z_next);
  Matrix cov = transpose(solve(f_s, transpose(solve(f_s, sigma_s))));
  cov = scale(add(cov, transpose(cov)), 0.5);
  return GaussianDensity(mean, cov);
}

PolarPoint cartesian_to_polar(double x, double y, double delta_origin) {
  double r2 = x * x + y * y;
  if (!(r2 > delta_origin * delta_origin))
    throw Error(ErrorCode::origin, "cartesian_to_polar: point within " + std::to_string(delta_origin) +
                                       " of the origin");
  PolarPoint p;
  p.rho = std::sqrt(r2);
  p.psi = std::atan2(y, x);
  p.logdet = -0.5 * std::log(r2);
  return p;
}

void polar_to_cartesian(double rho, double psi, double& x, double& y) {
  if (!(rho > 0)) throw Error(ErrorCode::invalid_argument, "polar_to_cartesian: rho must be positive");
  x = rho * std::cos(psi);
  y = rho * std::sin(psi);
}

Matrix euler_maruyama_step(const DriftFn& drift, const DiffusionFn& diffusion, const Matrix& z, double dt,
                           Rng& rng) {
  if (!(dt > 0)) throw Error(ErrorCode::invalid_argument, "euler_maruyama_step: dt must be positive");
  Matrix f = drift(z);
  Matrix g = diffusion(z);
  if (!f.all_finite() || !g.all_finite())
    throw Error(ErrorCode::numeric, "euler_maruyama_step: non-finite drift or diffusion");
  Matrix xi(z.rows(), 1);
  for (int i = 0; i < xi.rows(); ++i) xi(i, 0) = rng.normal();
  return add(z, add(scale(f, dt), scale(matmul(g, xi), std::sqrt(dt))));
}

namespace {

Matrix linear_rollout(const Matrix& a, const Matrix& k, const Matrix& z0, int n_steps, double dt, Rng& rng,
                      double noise_scale) {
  Matrix out(z0.rows(), n_steps + 1);
  Matrix z = z0;
  Matrix kn = scale(k, noise_scale);
  DriftFn drift = [&a](const Matrix& x) { return matmul(a, x); };
  DiffusionFn diff = [&kn](const Matrix&) { return kn; };
  for (int i = 0; i < z0.rows(); ++i) out(i, 0) = z(i, 0);
  for (int step = 1; step <= n_steps; ++step) {
    z = euler_maruyama_step(drift, diff, z, dt, rng);
    for (int i = 0; i < z0.rows(); ++i) out(i, step) = z(i, 0);
  }
  return out;
}

struct CycleRealized {
  CycleCoeffs c;
  Matrix extra_a, extra_k;
};

CycleRealized realize_cycle(const LimitCycleSDE& sde, const std::vector<double>& params) {
  PlainParams p(params);
  auto cv = cycle_vars(sde, p);
  CycleRealized r;
  r.c.a = scalar(cv.a);
  r.c.b = scalar(cv.b);
  r.c.rho_star = scalar(cv.rho_star);
  r.c.sigma1 = scalar(cv.sigma1);
  r.c.sigma2 = scalar(cv.sigma2);
  if (sde.extra) {
    r.extra_a = linear_drift_matrix(*sde.extra, p);
    r.extra_k = linear_diffusion_matrix(*sde.extra, p);
  }
  return r;
}

// The polar dynamics are linear, so the cycle integrates in (rho, psi) and
// maps back; extra coordinates run their own linear step. Noise draw order is
// fixed: rho, psi, then extras.
Matrix cycle_rollout(const LimitCycleSDE& sde, const std::vector<double>& params, const Matrix& z0,
                     int n_steps, double dt, Rng& rng, double noise_scale) {
  CycleRealized r = realize_cycle(sde, params);
  Matrix out(z0.rows(), n_steps + 1);
  PolarPoint pp = cartesian_to_polar(z0(0, 0), z0(1, 0), sde.delta_origin);
  double rho = pp.rho, psi = pp.psi;
  Matrix extra = sde.extra ? slice_rows(z0, 2, sde.dim) : Matrix();
  const double sdt = std::sqrt(dt);
  for (int i = 0; i < z0.rows(); ++i) out(i, 0) = z0(i, 0);
  for (int step = 1; step <= n_steps; ++step) {
    double new_rho = rho + r.c.a * (rho - r.c.rho_star) * dt + noise_scale * r.c.sigma1 * sdt * rng.normal();
    double new_psi = psi + r.c.b * dt + noise_scale * r.c.sigma2 * sdt * rng.normal();
    rho = std::max(new_rho, sde.delta_origin);
    psi = new_psi;
    if (sde.extra) {
      Matrix xi(extra.rows(), 1);
      for (int i = 0; i < xi.rows(); ++i) xi(i, 0) = rng.normal();
      extra = add(extra, add(scale(matmul(r.extra_a, extra), dt),
                             scale(matmul(r.extra_k, xi), noise_scale * sdt)));
    }
    out(0, step) = rho * std::cos(psi);
    out(1, step) = rho * std::sin(psi);
    for (int i = 2; i < z0.rows(); ++i) out(i, step) = extra(i - 2, 0);
  }
  return out;
}

}  // namespace

Matrix latent_rollout(const LatentSpec& spec, const std::vector<double>& params, const Matrix& z0,
                      int n_steps, double dt, Rng& rng, double noise_scale) {
  if (n_steps < 0) throw Error(ErrorCode::invalid_argument, "latent_rollout: n_steps must be >= 0");
  if (z0.rows() != latent_dim(spec) || z0.cols() != 1)
    throw Error(ErrorCode::dimension_mismatch, "latent_rollout: start point shape mismatch");
  if (std::holds_alternative<LinearSDE>(spec)) {
    const LinearSDE& sde = std::get<LinearSDE>(spec);
    PlainParams p(params);
    return linear_rollout(linear_drift_matrix(sde, p), linear_diffusion_matrix(sde, p), z0, n_steps, dt,
                          rng, noise_scale);
  }
  return cycle_rollout(std::get<LimitCycleSDE>(spec), params, z0, n_steps, dt, rng, noise_scale);
}

Matrix latent_drift(const LatentSpec& spec, const std::vector<double>& params, const Matrix& z) {
  PlainParams p(params);
  if (std::holds_alternative<LinearSDE>(spec)) {
    return matmul(linear_drift_matrix(std::get<LinearSDE>(spec), p), z);
  }
  const LimitCycleSDE& sde = std::get<LimitCycleSDE>(spec);
  CycleRealized r = realize_cycle(sde, params);
  PolarPoint pp = cartesian_to_polar(z(0, 0), z(1, 0), sde.delta_origin);
  // d(x,y)/dt from the polar drift: rho_dot along the ray, b rotating
  double rho_dot = r.c.a * (pp.rho - r.c.rho_star);
  Matrix v(z.rows(), 1);
  v(0, 0) = rho_dot * z(0, 0) / pp.rho - r.c.b * z(1, 0);
  v(1, 0) = rho_dot * z(1, 0) / pp.rho + r.c.b * z(0, 0);
  if (sde.extra) {
    Matrix ve = matmul(r.extra_a, slice_rows(z, 2, sde.dim));
    for (int i = 2; i < z.rows(); ++i) v(i, 0) = ve(i - 2, 0);
  }
  return v;
}

double latent_stationary_logdensity(const LatentSpec& spec, const std::vector<double>& params,
                                    const Matrix& z, double dt) {
  PlainParams p(params);
  return scalar(latent_stationary_logpdf_cols(spec, p, z, dt));
}

double cycle_stationary_logdensity(const LimitCycleSDE& sde, const std::vector<double>& params,
                                   const Matrix& z, double dt) {
  PlainParams p(params);
  return scalar(cycle_stationary_logpdf_cols(sde, p, z, dt));
}

std::function<double(const Matrix&)> cycle_backward_conditional(const LimitCycleSDE& sde,
                                                                const std::vector<double>& params,
                                                                const Matrix& z_next, int steps, double dt) {
  if (steps < 1) throw Error(ErrorCode::invalid_argument, "cycle_backward_conditional: steps must be >= 1");
  CycleRealized r = realize_cycle(sde, params);
  double f1 = 1.0 + r.c.a * dt;
  if (!(std::fabs(f1) < 1.0))
    throw Error(ErrorCode::unstable, "cycle_backward_conditional: |1 + a dt| >= 1 (dt too large)");
  double sig1 = r.c.sigma1 * r.c.sigma1 * dt;
  double f_s = f1, sig_s = sig1, pow = f1;
  for (int j = 1; j < steps; ++j) {
    sig_s += pow * pow * sig1;
    pow *= f1;
  }
  f_s = pow;
  PolarPoint next = cartesian_to_polar(z_next(0, 0), z_next(1, 0), sde.delta_origin);
  double mean_rho = r.c.rho_star + (next.rho - r.c.rho_star) / f_s;
  double var_rho = sig_s / (f_s * f_s);
  double mean_psi = next.psi - r.c.b * dt * steps;
  double var_psi = r.c.sigma2 * r.c.sigma2 * dt * steps;
  std::optional<GaussianDensity> extra_cond;
  Matrix z_next_extra;
  if (sde.extra) {
    DiscretizedLinear disc = discretize(*sde.extra, params, dt);
    Matrix z_next_sub(sde.dim - 2, 1);
    for (int i = 2; i < sde.dim; ++i) z_next_sub(i - 2, 0) = z_next(i, 0);
    extra_cond = backward_conditional(disc, z_next_sub, steps);
  }
  LimitCycleSDE sde_copy = sde;
  return [sde_copy, mean_rho, var_rho, mean_psi, var_psi, extra_cond](const Matrix& z_prev) {
    PolarPoint prev = cartesian_to_polar(z_prev(0, 0), z_prev(1, 0), sde_copy.delta_origin);
    double dr = prev.rho - mean_rho;
    double lp_rho = -0.5 * dr * dr / var_rho - 0.5 * std::log(var_rho) - 0.5 * kLogTwoPi;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double resid = prev.psi - mean_psi;
    resid -= two_pi * std::floor((resid + std::numbers::pi) / two_pi);
    double lp_psi = -std::numeric_limits<double>::infinity();
    for (int k = -1; k <= 1; ++k) {
      double rr = resid + two_pi * k;
      double lp = -0.5 * rr * rr / var_psi - 0.5 * std::log(var_psi) - 0.5 * kLogTwoPi;
      double m = std::max(lp_psi, lp);
      lp_psi = m + std::log(std::exp(lp_psi - m) + std::exp(lp - m));
    }
    double total = lp_rho + lp_psi + prev.logdet;
    if (extra_cond) {
      Matrix z_prev_sub(sde_copy.dim - 2, 1);
      for (int i = 2; i < sde_copy.dim; ++i) z_prev_sub(i - 2, 0) = z_prev(i, 0);
      total += log_density(*extra_cond, z_prev_sub);
    }
    return total;
  };
}

int latent_dim(const LatentSpec& spec) {
  return std::holds_alternative<LinearSDE>(spec) ? std::get<LinearSDE>(spec).dim
                                                 : std::get<LimitCycleSDE>(spec).dim;
}

std::size_t latent_param_count(const LatentSpec& spec) {
  return std::holds_alternative<LinearSDE>(spec) ? std::get<LinearSDE>(spec).param_count()
                                                 : std::get<LimitCycleSDE>(spec).param_count();
}

}  // namespace stochflow
