#include "core/model.hpp"

#include <cmath>
#include <limits>

namespace stochflow {

Matrix Normalizer::normalize(const Matrix& raw_cols) const {
  if (raw_cols.rows() != dim())
    throw Error(ErrorCode::dimension_mismatch, "Normalizer: expected " + std::to_string(dim()) + " rows");
  Matrix out(raw_cols.rows(), raw_cols.cols());
  for (int i = 0; i < raw_cols.rows(); ++i)
    for (int j = 0; j < raw_cols.cols(); ++j) out(i, j) = (raw_cols(i, j) - shift[i]) / scale[i];
  return out;
}

Matrix Normalizer::denormalize(const Matrix& norm_cols) const {
  if (norm_cols.rows() != dim())
    throw Error(ErrorCode::dimension_mismatch, "Normalizer: expected " + std::to_string(dim()) + " rows");
  Matrix out(norm_cols.rows(), norm_cols.cols());
  for (int i = 0; i < norm_cols.rows(); ++i)
    for (int j = 0; j < norm_cols.cols(); ++j) out(i, j) = norm_cols(i, j) * scale[i] + shift[i];
  return out;
}

double Normalizer::log_det() const {
  double s = 0.0;
  for (double v : scale) s -= std::log(v);
  return s;
}

ImitationModel make_model(const ModelConfig& cfg, const Normalizer& norm, double dt, Rng& rng) {
  if (norm.dim() != cfg.dim) throw Error(ErrorCode::dimension_mismatch, "make_model: normalizer dim mismatch");
  for (double s : norm.scale)
    if (!(s > 0)) throw Error(ErrorCode::invalid_argument, "make_model: normalizer scales must be positive");
  if (!(dt > 0)) throw Error(ErrorCode::invalid_argument, "make_model: dt must be positive");

  ImitationModel m;
  m.normalizer = norm;
  m.dt = dt;

  FlowConfig fc;
  fc.dim = cfg.dim;
  fc.pairs = cfg.flow_pairs;
  fc.hidden = cfg.hidden_width;
  m.flow = make_flow(fc, m.params.layout);
  if (cfg.latent == LatentKind::linear)
    m.latent = make_linear_sde(cfg.dim, cfg.stability_margin, m.params.layout, "latent");
  else
    m.latent = make_limit_cycle_sde(cfg.dim, cfg.stability_margin, m.params.layout, "latent");
  m.params.layout.validate();
  m.params.values.assign(m.params.layout.total, 0.0);
  init_flow_params(m.flow, m.params.values, rng);
  if (cfg.latent == LatentKind::linear) {
    set_linear_params(std::get<LinearSDE>(m.latent), m.params.values, scale(Matrix::identity(cfg.dim), -1.0),
                      scale(Matrix::identity(cfg.dim), 0.1));
  } else {
    LimitCycleSDE& sde = std::get<LimitCycleSDE>(m.latent);
    set_cycle_params(sde, m.params.values, {-1.0, 1.0, 1.0, 0.1, 0.1});
    if (sde.extra)
      set_linear_params(*sde.extra, m.params.values, scale(Matrix::identity(cfg.dim - 2), -1.0),
                        scale(Matrix::identity(cfg.dim - 2), 0.1));
  }
  return m;
}

namespace {

// Shared likelihood assembly over both providers.
template <class P, class M = typename P::value_type>
struct TermsT {
  M endpoint, conditional, logdet, total;
};

template <class P, class M = typename P::value_type>
TermsT<P, M> loglik_terms_t(const ImitationModel& m, const P& p, const Matrix& raw_cols, int stride) {
  const int n = raw_cols.cols();
  if (n < 2) throw Error(ErrorCode::invalid_argument, "log_likelihood: trajectory length must be >= 2");
  if (!(stride >= 1 && stride < n))
    throw Error(ErrorCode::invalid_argument, "log_likelihood: stride must be in [1, length)");
  M y_norm = p.constant(m.normalizer.normalize(raw_cols));
  auto [z, inv_logdet] = flow_inverse(m.flow, p, y_norm);
  auto terms = latent_terms(m.latent, p, z, stride, m.dt);
  // volume terms at every point carrying a density factor: i in [0, n-s), n-1
  M ld_pairs = sum_all(slice_cols(inv_logdet, 0, n - stride));
  M ld_end = slice_cols(inv_logdet, n - 1, n);
  const double norm_ld = (n - stride + 1) * m.normalizer.log_det();
  M logdet = add_scalar(add(ld_pairs, ld_end), norm_ld);
  M total = add(add(terms.endpoint, terms.conditional), logdet);
  return {terms.endpoint, terms.conditional, logdet, total};
}

}  // namespace

LossBreakdown log_likelihood_terms(const ImitationModel& m, const Trajectory& t, int stride) {
  if (t.dim() != m.dim()) throw Error(ErrorCode::dimension_mismatch, "log_likelihood: trajectory dim mismatch");
  PlainParams p(m.params.values);
  auto terms = loglik_terms_t(m, p, t.points, stride);
  LossBreakdown out;
  out.endpoint = scalar(terms.endpoint);
  out.conditional = scalar(terms.conditional);
  out.logdet = scalar(terms.logdet);
  out.total = scalar(terms.total);
  if (!std::isfinite(out.total)) throw Error(ErrorCode::numeric, "log_likelihood: non-finite value");
  return out;
}

double log_likelihood_trajectory(const ImitationModel& m, const Trajectory& t, int stride) {
  return log_likelihood_terms(m, t, stride).total;
}

LossBreakdownVars log_likelihood_graph(Tape& tape, const Var& flat_params, const ImitationModel& m,
                                       const Matrix& raw_cols, int stride) {
  TapeParams p(tape, flat_params);
  auto terms = loglik_terms_t(m, p, raw_cols, stride);
  return {terms.endpoint, terms.conditional, terms.logdet, terms.total};
}

Matrix to_latent(const ImitationModel& m, const Matrix& raw_cols) {
  PlainParams p(m.params.values);
  return flow_inverse(m.flow, p, m.normalizer.normalize(raw_cols)).first;
}

Trajectory generate(const ImitationModel& m, const Matrix& y0, int n_steps, double noise_scale, Rng& rng) {
  if (n_steps < 0) throw Error(ErrorCode::invalid_argument, "generate: n_steps must be >= 0");
  if (y0.rows() != m.dim() || y0.cols() != 1)
    throw Error(ErrorCode::dimension_mismatch, "generate: start point shape mismatch");
  Matrix z0 = to_latent(m, y0);
  Matrix zs = latent_rollout(m.latent, m.params.values, z0, n_steps, m.dt, rng, noise_scale);
  PlainParams p(m.params.values);
  Matrix ys = flow_forward(m.flow, p, zs).first;
  return {m.normalizer.denormalize(ys), m.dt};
}

Matrix attractor_image(const ImitationModel& m) {
  if (m.kind() != LatentKind::linear)
    throw Error(ErrorCode::invalid_argument, "attractor_image: limit-cycle latent has no point attractor");
  PlainParams p(m.params.values);
  return m.normalizer.denormalize(flow_forward(m.flow, p, Matrix::zeros(m.dim(), 1)).first);
}

Matrix vector_field(const ImitationModel& m, const Matrix& raw_points) {
  PlainParams p(m.params.values);
  Matrix y_norm = m.normalizer.normalize(raw_points);
  Matrix z = flow_inverse(m.flow, p, y_norm).first;
  Matrix out(m.dim(), raw_points.cols());
  for (int j = 0; j < z.cols(); ++j) {
    Matrix zj = slice_cols(z, j, j + 1);
    Matrix v = matmul(flow_jacobian(m.flow, m.params.values, zj), latent_drift(m.latent, m.params.values, zj));
    for (int i = 0; i < m.dim(); ++i) out(i, j) = v(i, 0) * m.normalizer.scale[i];
  }
  return out;
}

Matrix stationary_log_density_cols(const ImitationModel& m, const Matrix& raw_cols) {
  PlainParams p(m.params.values);
  Matrix y_norm = m.normalizer.normalize(raw_cols);
  auto [z, inv_logdet] = flow_inverse(m.flow, p, y_norm);
  Matrix lp = latent_stationary_logpdf_cols(m.latent, p, z, m.dt);
  return add_scalar(add(lp, inv_logdet), m.normalizer.log_det());
}

double stationary_log_density(const ImitationModel& m, const Matrix& raw_point) {
  return scalar(stationary_log_density_cols(m, raw_point));
}

Classification classify(const Trajectory& t, const std::vector<const ImitationModel*>& models) {
  if (models.empty()) throw Error(ErrorCode::invalid_argument, "classify: need at least one model");
  Classification c;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k]->dim() != t.dim())
      throw Error(ErrorCode::dimension_mismatch, "classify: model " + std::to_string(k) + " dim mismatch");
    double ll = log_likelihood_trajectory(*models[k], t, 1);
    c.log_likelihoods.push_back(ll);
    if (ll > best) {
      best = ll;
      c.index = static_cast<int>(k);
    }
  }
  return c;
}

}  // namespace stochflow
