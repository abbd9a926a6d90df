#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

#include "core/autodiff.hpp"
#include "core/error.hpp"
#include "core/matrix.hpp"
#include "core/rng.hpp"

namespace stochflow {

inline constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)

// ---- parameter specs -------------------------------------------------------
//
// Latent dynamics are stable by construction. The linear system realizes
//   A = S - (L L^T + eps I)
// from unconstrained parameters (S skew-symmetric, L lower-triangular with
// softplus diagonal), so A + A^T < 0 and A is Hurwitz for any raw values.

struct LinearSDE {
  int dim = 0;
  double eps = 0.01;  // stability margin
  std::size_t off_skew = 0, off_spd = 0, off_diff = 0;

  int skew_count() const { return dim * (dim - 1) / 2; }
  int spd_count() const { return dim * (dim + 1) / 2; }  // packed [diag | strict lower]
  int diff_count() const { return dim * dim; }
  std::size_t param_count() const { return skew_count() + spd_count() + diff_count(); }

  Matrix skew_embed;        // d^2 x skew_count, row-major vec of (E_ij - E_ji)
  Matrix diag_embed;        // d^2 x d
  Matrix lower_embed;       // d^2 x d(d-1)/2
};

LinearSDE make_linear_sde(int dim, double eps, ParamLayout& layout, const std::string& prefix);

// Raw parameters realizing a given (A, K); sym(A) must be < -eps I.
void set_linear_params(const LinearSDE& sde, std::vector<double>& values, const Matrix& a, const Matrix& k);

// Polar limit cycle on coordinates (0, 1), optional linear attractor on the
// rest:  d rho = a (rho - rho*) dt + sigma1 dB,  d psi = b dt + sigma2 dB
// with a = -softplus(raw_a) < 0 and rho*, sigma1, sigma2 > 0 via softplus.
struct LimitCycleSDE {
  int dim = 2;
  double eps = 0.01;
  double delta_origin = 1e-6;
  std::size_t off_a = 0, off_b = 0, off_rho = 0, off_sigma1 = 0, off_sigma2 = 0;
  std::optional<LinearSDE> extra;  // coordinates 2..dim-1

  std::size_t param_count() const { return 5 + (extra ? extra->param_count() : 0); }
};

LimitCycleSDE make_limit_cycle_sde(int dim, double eps, ParamLayout& layout, const std::string& prefix);

struct CycleCoeffs {
  double a = 0, b = 0, rho_star = 0, sigma1 = 0, sigma2 = 0;
};

void set_cycle_params(const LimitCycleSDE& sde, std::vector<double>& values, const CycleCoeffs& c);

using LatentSpec = std::variant<LinearSDE, LimitCycleSDE>;

// ---- plain value types -----------------------------------------------------

struct GaussianDensity {
  Matrix mean;  // d x 1
  Matrix cov;   // d x d SPD
  Matrix chol;  // cached lower factor

  GaussianDensity() = default;
  GaussianDensity(Matrix mean_, Matrix cov_);
};

double log_density(const GaussianDensity& g, const Matrix& x);
Matrix sample(const GaussianDensity& g, Rng& rng);

struct DiscretizedLinear {
  Matrix F;      // A dt + I
  Matrix Sigma;  // K K^T dt
  double dt = 0;
};

// Throws ErrorCode::unstable (reporting the spectral radius) if rho(F) >= 1.
DiscretizedLinear discretize(const Matrix& a, const Matrix& k, double dt);
DiscretizedLinear discretize(const LinearSDE& sde, const std::vector<double>& params, double dt);

// Sigma_inf from vec(Sigma_inf) = (I - F (x) F)^{-1} vec(Sigma); fixed point
// F S F^T + Sigma = S verified to 1e-8 relative.
Matrix stationary_covariance(const DiscretizedLinear& disc);

// p(z_i | z_{i+s}) = N(F^-s z_next, F^-s Sigma_s F^-s^T), Sigma_s = sum F^j Sigma F^j^T.
GaussianDensity backward_conditional(const DiscretizedLinear& disc, const Matrix& z_next, int steps);

struct PolarPoint {
  double rho = 0, psi = 0, logdet = 0;  // logdet = log|det d(rho,psi)/d(x,y)|
};

PolarPoint cartesian_to_polar(double x, double y, double delta_origin = 1e-6);
void polar_to_cartesian(double rho, double psi, double& x, double& y);

// ---- simulation -------------------------------------------------------------

using DriftFn = std::function<Matrix(const Matrix&)>;      // d x 1 -> d x 1
using DiffusionFn = std::function<Matrix(const Matrix&)>;  // d x 1 -> d x d

Matrix euler_maruyama_step(const DriftFn& drift, const DiffusionFn& diffusion, const Matrix& z, double dt,
                           Rng& rng);

// Latent trajectory as d x (n_steps + 1) columns; noise_scale 0 gives the
// deterministic mean flow. Limit cycles integrate in polar coordinates where
// the dynamics are linear, the output is cartesian.
Matrix latent_rollout(const LatentSpec& spec, const std::vector<double>& params, const Matrix& z0,
                      int n_steps, double dt, Rng& rng, double noise_scale);

Matrix latent_drift(const LatentSpec& spec, const std::vector<double>& params, const Matrix& z);

double latent_stationary_logdensity(const LatentSpec& spec, const std::vector<double>& params,
                                    const Matrix& z, double dt);

// Limit-cycle backward conditional as a log-density over d-vectors (spec op).
std::function<double(const Matrix&)> cycle_backward_conditional(const LimitCycleSDE& sde,
                                                                const std::vector<double>& params,
                                                                const Matrix& z_next, int steps, double dt);

double cycle_stationary_logdensity(const LimitCycleSDE& sde, const std::vector<double>& params,
                                   const Matrix& z, double dt);

// ---- templated realization / likelihood kernels ----------------------------

template <class P, class M = typename P::value_type>
M linear_drift_matrix(const LinearSDE& s, const P& p) {
  M spd_raw = p.get(s.off_spd, s.spd_count(), 1);
  M diag_raw = slice_rows(spd_raw, 0, s.dim);
  M l_vec = matmul(p.constant(s.diag_embed), softplus(diag_raw));
  if (s.dim > 1) {
    M low_raw = slice_rows(spd_raw, s.dim, s.spd_count());
    l_vec = add(l_vec, matmul(p.constant(s.lower_embed), low_raw));
  }
  M l = reshape(l_vec, s.dim, s.dim);
  M sym = add(matmul(l, transpose(l)), p.constant(scale(Matrix::identity(s.dim), s.eps)));
  if (s.dim > 1) {
    M skew_raw = p.get(s.off_skew, s.skew_count(), 1);
    M sk = reshape(matmul(p.constant(s.skew_embed), skew_raw), s.dim, s.dim);
    return sub(sk, sym);
  }
  return neg(sym);
}

template <class P, class M = typename P::value_type>
M linear_diffusion_matrix(const LinearSDE& s, const P& p) {
  return p.get(s.off_diff, s.dim, s.dim);
}

template <class M>
M vec_cols_t(const M& a) {
  const Matrix& v = value_of(a);
  return reshape(transpose(a), v.rows() * v.cols(), 1);
}

template <class M>
M unvec_cols_t(const M& v, int rows, int cols) {
  return transpose(reshape(v, cols, rows));
}

template <class P, class M = typename P::value_type>
struct DiscretizedT {
  M F;
  M Sigma;
  double dt = 0;
};

template <class P, class M = typename P::value_type>
DiscretizedT<P, M> discretize_t(const LinearSDE& s, const P& p, double dt) {
  if (!(dt > 0)) throw Error(ErrorCode::invalid_argument, "discretize: dt must be positive");
  M a = linear_drift_matrix(s, p);
  M k = linear_diffusion_matrix(s, p);
  M f = add(p.constant(Matrix::identity(s.dim)), scale(a, dt));
  double radius = spectral_radius(value_of(f));
  if (!(radius < 1.0))
    throw Error(ErrorCode::unstable,
                "discretize: spectral radius " + std::to_string(radius) + " >= 1 (dt too large)");
  M sigma = scale(matmul(k, transpose(k)), dt);
  return {f, sigma, dt};
}

template <class P, class M = typename P::value_type>
M stationary_covariance_t(const P& p, const DiscretizedT<P, M>& disc) {
  const int d = value_of(disc.F).rows();
  M lhs = sub(p.constant(Matrix::identity(d * d)), kron(disc.F, disc.F));
  M vec = solve(lhs, vec_cols_t(disc.Sigma));
  M s = unvec_cols_t(vec, d, d);
  s = scale(add(s, transpose(s)), 0.5);
  const Matrix& fv = value_of(disc.F);
  const Matrix& sv = value_of(s);
  Matrix resid = sub(add(matmul(fv, matmul(sv, transpose(fv))), value_of(disc.Sigma)), sv);
  if (!(max_abs(resid) < 1e-8 * std::max(max_abs(sv), 1e-300)))
    throw Error(ErrorCode::numeric, "stationary_covariance: fixed point residual too large");
  return s;
}

// s-step transition pieces: F^s and Sigma_s = sum_{j<s} F^j Sigma F^j^T.
template <class P, class M = typename P::value_type>
void multi_step(const P& p, const DiscretizedT<P, M>& disc, int steps, M& f_s, M& sigma_s) {
  f_s = disc.F;
  sigma_s = disc.Sigma;
  M pow = disc.F;
  for (int j = 1; j < steps; ++j) {
    sigma_s = add(sigma_s, matmul(pow, matmul(disc.Sigma, transpose(pow))));
    pow = matmul(pow, disc.F);
  }
  f_s = pow;
}

// log N(x_col; mean_col, cov) per column, as a 1 x N row.
template <class M>
M gaussian_cols_logpdf(const M& x, const M& mean, const M& cov) {
  const int d = value_of(x).rows();
  const int n = value_of(x).cols();
  M r = sub(x, mean);
  M q = col_sum(mul(r, solve(cov, r)));
  M ld = logdet_spd(cov);
  return add_scalar(sub(scale(q, -0.5), scale(broadcast(ld, 1, n), 0.5)), -0.5 * d * kLogTwoPi);
}

// scalar-variance version over 1 x N rows (var is 1 x 1)
template <class M>
M normal_rows_logpdf(const M& x, const M& mean, const M& var) {
  const int n = value_of(x).cols();
  M vb = broadcast(var, 1, n);
  M r = sub(x, mean);
  return add_scalar(sub(scale(div(mul(r, r), vb), -0.5), scale(log(vb), 0.5)), -0.5 * kLogTwoPi);
}

template <class M>
struct LatentTermsT {
  M conditional;  // sum over pairs of log p(z_i | z_{i+s})   (1 x 1)
  M endpoint;     // log p_inf(z_n)                            (1 x 1)
};

// Linear latent: backward conditionals at stride s plus the stationary
// endpoint, over latent columns z (d x N).
template <class P, class M = typename P::value_type>
LatentTermsT<M> linear_latent_terms(const LinearSDE& sde, const P& p, const M& z, int stride, double dt) {
  const int n = value_of(z).cols();
  if (!(stride >= 1 && stride < n))
    throw Error(ErrorCode::invalid_argument, "latent terms: stride must be in [1, length)");
  auto disc = discretize_t(sde, p, dt);
  M f_s, sigma_s;
  multi_step(p, disc, stride, f_s, sigma_s);
  M z_prev = slice_cols(z, 0, n - stride);
  M z_next = slice_cols(z, stride, n);
  M mean = solve(f_s, z_next);
  M cov = transpose(solve(f_s, transpose(solve(f_s, sigma_s))));
  cov = scale(add(cov, transpose(cov)), 0.5);
  M cond = sum_all(gaussian_cols_logpdf(z_prev, mean, cov));
  M s_inf = stationary_covariance_t(p, disc);
  M z_n = slice_cols(z, n - 1, n);
  M ep = sum_all(gaussian_cols_logpdf(z_n, p.constant(Matrix::zeros(sde.dim, 1)), s_inf));
  return {cond, ep};
}

template <class M>
struct PolarColsT {
  M rho;     // 1 x N
  M psi;     // 1 x N
  M logdet;  // 1 x N, log|det d(rho,psi)/d(x,y)| = -log rho
};

template <class P, class M = typename P::value_type>
PolarColsT<M> cartesian_to_polar_cols(const P& p, const M& plane, double delta_origin) {
  M x = slice_rows(plane, 0, 1);
  M y = slice_rows(plane, 1, 2);
  M r2 = add(mul(x, x), mul(y, y));
  const Matrix& r2v = value_of(r2);
  for (int j = 0; j < r2v.cols(); ++j)
    if (!(r2v(0, j) > delta_origin * delta_origin))
      throw Error(ErrorCode::origin, "polar map: point " + std::to_string(j) + " within " +
                                         std::to_string(delta_origin) + " of the origin");
  M rho = sqrt(r2);
  M psi = atan2(y, x);
  return {rho, psi, scale(log(r2), -0.5)};
}

template <class P, class M = typename P::value_type>
struct CycleVarsT {
  M a, b, rho_star, sigma1, sigma2;  // all 1 x 1
};

template <class P, class M = typename P::value_type>
CycleVarsT<P, M> cycle_vars(const LimitCycleSDE& sde, const P& p) {
  CycleVarsT<P, M> v;
  v.a = neg(softplus(p.get(sde.off_a, 1, 1)));
  v.b = p.get(sde.off_b, 1, 1);
  v.rho_star = softplus(p.get(sde.off_rho, 1, 1));
  v.sigma1 = softplus(p.get(sde.off_sigma1, 1, 1));
  v.sigma2 = softplus(p.get(sde.off_sigma2, 1, 1));
  return v;
}

// Limit-cycle latent terms. rho - rho* follows a scalar stable linear SDE and
// uses the same backward conditional as the linear module; psi drifts at rate
// b with the Gaussian evaluated on the wrapped residual (branches k = -1,0,1).
template <class P, class M = typename P::value_type>
LatentTermsT<M> cycle_latent_terms(const LimitCycleSDE& sde, const P& p, const M& z, int stride, double dt) {
  const int n = value_of(z).cols();
  const int s = stride;
  if (!(s >= 1 && s < n))
    throw Error(ErrorCode::invalid_argument, "latent terms: stride must be in [1, length)");
  auto cv = cycle_vars(sde, p);
  M plane = slice_rows(z, 0, 2);
  auto polar = cartesian_to_polar_cols(p, plane, sde.delta_origin);

  M f1 = add_scalar(scale(cv.a, dt), 1.0);  // 1 + a dt
  {
    double fv = scalar(value_of(f1));
    if (!(std::fabs(fv) < 1.0))
      throw Error(ErrorCode::unstable, "cycle discretization: |1 + a dt| = " + std::to_string(std::fabs(fv)) +
                                           " >= 1 (dt too large)");
  }
  M sig1 = scale(mul(cv.sigma1, cv.sigma1), dt);  // sigma1^2 dt

  // s-step scalar pieces
  M f_s = f1;
  M sig_s = sig1;
  M pow = f1;
  for (int j = 1; j < s; ++j) {
    sig_s = add(sig_s, mul(mul(pow, pow), sig1));
    pow = mul(pow, f1);
  }
  f_s = pow;

  M rho_t = sub(polar.rho, broadcast(cv.rho_star, 1, n));  // centered radius
  M rho_prev = slice_cols(rho_t, 0, n - s);
  M rho_next = slice_cols(rho_t, s, n);
  M mean_rho = div(rho_next, broadcast(f_s, 1, n - s));
  M var_rho = div(sig_s, mul(f_s, f_s));
  M cond_rho = normal_rows_logpdf(rho_prev, mean_rho, var_rho);

  M psi_prev = slice_cols(polar.psi, 0, n - s);
  M psi_next = slice_cols(polar.psi, s, n);
  M mean_psi = sub(psi_next, broadcast(scale(cv.b, dt * s), 1, n - s));
  M var_psi = scale(mul(cv.sigma2, cv.sigma2), dt * s);
  M resid = wrap_angle(sub(psi_prev, mean_psi));
  M zero_mean = p.constant(Matrix::zeros(1, n - s));
  constexpr double two_pi = 2.0 * std::numbers::pi;
  M lp0 = normal_rows_logpdf(resid, zero_mean, var_psi);
  M lpp = normal_rows_logpdf(add_scalar(resid, two_pi), zero_mean, var_psi);
  M lpm = normal_rows_logpdf(add_scalar(resid, -two_pi), zero_mean, var_psi);
  M cond_psi = log_add_exp(log_add_exp(lp0, lpp), lpm);

  M polar_ld_prev = slice_cols(polar.logdet, 0, n - s);
  M cond = add(sum_all(add(cond_rho, cond_psi)), sum_all(polar_ld_prev));

  // endpoint: N(rho; rho*, Sigma_inf) * U(-pi, pi), plus the polar logdet
  M s_inf = div(sig1, add_scalar(neg(mul(f1, f1)), 1.0));
  M rho_n = slice_cols(rho_t, n - 1, n);
  M ep_rho = normal_rows_logpdf(rho_n, p.constant(Matrix::zeros(1, 1)), s_inf);
  M ep = add(add_scalar(ep_rho, -std::log(two_pi)), slice_cols(polar.logdet, n - 1, n));

  if (sde.extra) {
    M z_extra = slice_rows(z, 2, sde.dim);
    auto extra = linear_latent_terms(*sde.extra, p, z_extra, stride, dt);
    cond = add(cond, extra.conditional);
    ep = add(ep, extra.endpoint);
  }
  return {cond, sum_all(ep)};
}

template <class P, class M = typename P::value_type>
LatentTermsT<M> latent_terms(const LatentSpec& spec, const P& p, const M& z, int stride, double dt) {
  if (std::holds_alternative<LinearSDE>(spec))
    return linear_latent_terms(std::get<LinearSDE>(spec), p, z, stride, dt);
  return cycle_latent_terms(std::get<LimitCycleSDE>(spec), p, z, stride, dt);
}

// Stationary log-density per column (1 x N).
template <class P, class M = typename P::value_type>
M linear_stationary_logpdf_cols(const LinearSDE& sde, const P& p, const M& z, double dt) {
  auto disc = discretize_t(sde, p, dt);
  M s_inf = stationary_covariance_t(p, disc);
  const int n = value_of(z).cols();
  return gaussian_cols_logpdf(z, p.constant(Matrix::zeros(sde.dim, n)), s_inf);
}

template <class P, class M = typename P::value_type>
M cycle_stationary_logpdf_cols(const LimitCycleSDE& sde, const P& p, const M& z, double dt) {
  auto cv = cycle_vars(sde, p);
  M plane = slice_rows(z, 0, 2);
  auto polar = cartesian_to_polar_cols(p, plane, sde.delta_origin);
  const int n = value_of(z).cols();
  M f1 = add_scalar(scale(cv.a, dt), 1.0);
  M sig1 = scale(mul(cv.sigma1, cv.sigma1), dt);
  M s_inf = div(sig1, add_scalar(neg(mul(f1, f1)), 1.0));
  M rho_t = sub(polar.rho, broadcast(cv.rho_star, 1, n));
  M zero_mean = p.constant(Matrix::zeros(1, n));
  M lp = add(add_scalar(normal_rows_logpdf(rho_t, zero_mean, s_inf), -std::log(2.0 * std::numbers::pi)),
             polar.logdet);
  if (sde.extra) {
    M z_extra = slice_rows(z, 2, sde.dim);
    lp = add(lp, linear_stationary_logpdf_cols(*sde.extra, p, z_extra, dt));
  }
  return lp;
}

template <class P, class M = typename P::value_type>
M latent_stationary_logpdf_cols(const LatentSpec& spec, const P& p, const M& z, double dt) {
  if (std::holds_alternative<LinearSDE>(spec))
    return linear_stationary_logpdf_cols(std::get<LinearSDE>(spec), p, z, dt);
  return cycle_stationary_logpdf_cols(std::get<LimitCycleSDE>(spec), p, z, dt);
}

int latent_dim(const LatentSpec& spec);
std::size_t latent_param_count(const LatentSpec& spec);

}  // namespace stochflow
