#include "stochflow/stochflow.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "core/data.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/serialize.hpp"
#include "core/trainer.hpp"

using namespace stochflow;

struct sf_dataset {
  Dataset ds;
};

struct sf_model {
  ImitationModel m;
};

namespace {

thread_local std::string g_last_error;

sf_status map_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return SF_ERR_INVALID_ARG;
    case ErrorCode::dimension_mismatch: return SF_ERR_DIM_MISMATCH;
    case ErrorCode::io: return SF_ERR_IO;
    case ErrorCode::parse: return SF_ERR_PARSE;
    case ErrorCode::numeric: return SF_ERR_NUMERIC;
    case ErrorCode::singular_matrix: return SF_ERR_SINGULAR;
    case ErrorCode::unstable: return SF_ERR_UNSTABLE;
    case ErrorCode::degenerate_data: return SF_ERR_DEGENERATE_DATA;
    case ErrorCode::origin: return SF_ERR_ORIGIN;
  }
  return SF_ERR_NUMERIC;
}

template <class F>
sf_status guarded(F&& f) {
  try {
    f();
    return SF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SF_ERR_NUMERIC;
  }
}

sf_status fail_arg(const char* msg) {
  g_last_error = msg;
  return SF_ERR_INVALID_ARG;
}

int log_level() {
  const char* v = std::getenv("STOCHFLOW_LOG");
  return v ? std::atoi(v) : 0;
}

}  // namespace

extern "C" {

const char* sf_status_name(sf_status status) {
  switch (status) {
    case SF_OK: return "ok";
    case SF_ERR_INVALID_ARG: return "invalid argument";
    case SF_ERR_IO: return "io error";
    case SF_ERR_PARSE: return "parse error";
    case SF_ERR_DIM_MISMATCH: return "dimension mismatch";
    case SF_ERR_NUMERIC: return "numerical failure";
    case SF_ERR_UNSTABLE: return "unstable discretization";
    case SF_ERR_DEGENERATE_DATA: return "degenerate data";
    case SF_ERR_SINGULAR: return "singular matrix";
    case SF_ERR_ORIGIN: return "polar origin violation";
  }
  return "unknown";
}

const char* sf_last_error(void) { return g_last_error.c_str(); }

sf_status sf_dataset_load(const char* path, sf_dataset** out) {
  if (!path || !out) return fail_arg("sf_dataset_load: null argument");
  return guarded([&] { *out = new sf_dataset{load_dataset(path)}; });
}

sf_status sf_dataset_save(const sf_dataset* ds, const char* path) {
  if (!ds || !path) return fail_arg("sf_dataset_save: null argument");
  return guarded([&] { save_dataset(ds->ds, path); });
}

void sf_dataset_free(sf_dataset* ds) { delete ds; }

int sf_dataset_dim(const sf_dataset* ds) { return ds ? ds->ds.dim : 0; }
int sf_dataset_count(const sf_dataset* ds) { return ds ? ds->ds.count() : 0; }
double sf_dataset_dt(const sf_dataset* ds) { return ds ? ds->ds.dt : 0.0; }

int sf_dataset_length(const sf_dataset* ds, int index) {
  if (!ds || index < 0 || index >= ds->ds.count()) return 0;
  return ds->ds.trajectories[index].length();
}

sf_status sf_dataset_points(const sf_dataset* ds, int index, double* out) {
  if (!ds || !out) return fail_arg("sf_dataset_points: null argument");
  if (index < 0 || index >= ds->ds.count()) return fail_arg("sf_dataset_points: index out of range");
  const Trajectory& t = ds->ds.trajectories[index];
  for (int j = 0; j < t.length(); ++j)
    for (int i = 0; i < t.dim(); ++i) out[static_cast<std::size_t>(j) * t.dim() + i] = t.points(i, j);
  return SF_OK;
}

void sf_synth_options_init(sf_synth_options* opts) {
  if (!opts) return;
  SynthOptions d;
  opts->dt = d.dt;
  opts->length = d.length;
  opts->omega = d.omega;
  opts->decay = d.decay;
}

sf_status sf_dataset_synth(const char* shape, int n_demos, double noise, uint64_t seed,
                           const sf_synth_options* opts, sf_dataset** out) {
  if (!shape || !out) return fail_arg("sf_dataset_synth: null argument");
  return guarded([&] {
    SynthOptions so;
    if (opts) {
      so.dt = opts->dt;
      so.length = opts->length;
      so.omega = opts->omega;
      so.decay = opts->decay;
    }
    std::string name(shape);
    Dataset ds;
    if (is_p2p_shape_name(name))
      ds = synth_point_to_point(parse_p2p_shape(name), n_demos, noise, seed, so);
    else
      ds = synth_limit_cycle(parse_cycle_shape(name), n_demos, noise, seed, so);
    *out = new sf_dataset{std::move(ds)};
  });
}

void sf_train_config_init(sf_train_config* cfg) {
  if (!cfg) return;
  TrainConfig d;
  cfg->epochs = d.epochs;
  cfg->learning_rate = d.learning_rate;
  cfg->beta1 = d.beta1;
  cfg->beta2 = d.beta2;
  cfg->adam_eps = d.adam_eps;
  cfg->s_max = d.s_max;
  cfg->grad_clip = d.grad_clip;
  cfg->seed = d.seed;
  cfg->latent_kind = 0;
  cfg->flow_pairs = d.flow_pairs;
  cfg->hidden_width = d.hidden_width;
  cfg->plateau_tol = d.plateau_tol;
  cfg->plateau_window = d.plateau_window;
  cfg->stability_margin = d.stability_margin;
}

sf_status sf_train(const sf_dataset* data, const sf_train_config* cfg, const char* log_path,
                   sf_model** out_model, sf_train_report* out_report) {
  if (!data || !cfg || !out_model) return fail_arg("sf_train: null argument");
  if (cfg->latent_kind != 0 && cfg->latent_kind != 1) return fail_arg("sf_train: latent_kind must be 0 or 1");
  return guarded([&] {
    TrainConfig tc;
    tc.epochs = cfg->epochs;
    tc.learning_rate = cfg->learning_rate;
    tc.beta1 = cfg->beta1;
    tc.beta2 = cfg->beta2;
    tc.adam_eps = cfg->adam_eps;
    tc.s_max = cfg->s_max;
    tc.grad_clip = cfg->grad_clip;
    tc.seed = cfg->seed;
    tc.latent = cfg->latent_kind == 0 ? LatentKind::linear : LatentKind::cycle;
    tc.flow_pairs = cfg->flow_pairs;
    tc.hidden_width = cfg->hidden_width;
    tc.plateau_tol = cfg->plateau_tol;
    tc.plateau_window = cfg->plateau_window;
    tc.stability_margin = cfg->stability_margin;

    const int level = log_level();
    EpochCallback cb = nullptr;
    if (level >= 1) {
      cb = [level](const EpochRecord& r) {
        if (level >= 2 || r.epoch % 25 == 0)
          std::fprintf(stderr, "[stochflow] epoch %d nll %.6f grad %.3g\n", r.epoch, r.nll, r.grad_norm);
      };
    }
    Rng rng(tc.seed);
    TrainResult res = train(data->ds, tc, rng, cb);
    if (log_path) write_train_log(res.report, log_path);
    if (out_report) {
      out_report->initial_nll = res.report.initial_nll;
      out_report->final_nll = res.report.final_nll;
      out_report->epochs_run = res.report.epochs_run;
      out_report->aborted_non_finite = res.report.aborted_non_finite ? 1 : 0;
    }
    if (res.report.aborted_non_finite)
      g_last_error = "training aborted on non-finite loss; last finite checkpoint returned";
    *out_model = new sf_model{std::move(res.model)};
    if (res.report.aborted_non_finite) throw Error(ErrorCode::numeric, g_last_error);
  });
}

sf_status sf_model_load(const char* path, sf_model** out) {
  if (!path || !out) return fail_arg("sf_model_load: null argument");
  return guarded([&] { *out = new sf_model{load_model(path)}; });
}

sf_status sf_model_save(const sf_model* m, const char* path) {
  if (!m || !path) return fail_arg("sf_model_save: null argument");
  return guarded([&] { save_model(m->m, path); });
}

void sf_model_free(sf_model* m) { delete m; }

int sf_model_dim(const sf_model* m) { return m ? m->m.dim() : 0; }
double sf_model_dt(const sf_model* m) { return m ? m->m.dt : 0.0; }
int sf_model_latent_kind(const sf_model* m) {
  return m ? (m->m.kind() == LatentKind::linear ? 0 : 1) : -1;
}

sf_status sf_model_generate(const sf_model* m, const double* y0, int dim, int n_steps, double noise_scale,
                            uint64_t seed, double* out) {
  if (!m || !y0 || !out) return fail_arg("sf_model_generate: null argument");
  if (dim != m->m.dim()) return fail_arg("sf_model_generate: dim does not match model");
  if (n_steps < 0) return fail_arg("sf_model_generate: n_steps must be >= 0");
  return guarded([&] {
    Matrix start(dim, 1);
    for (int i = 0; i < dim; ++i) start(i, 0) = y0[i];
    Rng rng(seed);
    Trajectory t = generate(m->m, start, n_steps, noise_scale, rng);
    for (int j = 0; j < t.length(); ++j)
      for (int i = 0; i < dim; ++i) out[static_cast<std::size_t>(j) * dim + i] = t.points(i, j);
  });
}

namespace {

Trajectory trajectory_from_rows(const double* points, int len, int dim, double dt) {
  Matrix cols(dim, len);
  for (int j = 0; j < len; ++j)
    for (int i = 0; i < dim; ++i) cols(i, j) = points[static_cast<std::size_t>(j) * dim + i];
  return {cols, dt};
}

}  // namespace

sf_status sf_model_log_likelihood(const sf_model* m, const double* points, int len, int dim, double dt,
                                  double* out) {
  if (!m || !points || !out) return fail_arg("sf_model_log_likelihood: null argument");
  if (dim != m->m.dim()) return fail_arg("sf_model_log_likelihood: dim does not match model");
  if (len < 2) return fail_arg("sf_model_log_likelihood: need at least 2 points");
  if (std::fabs(dt - m->m.dt) > 1e-9 * std::max(dt, m->m.dt))
    return fail_arg("sf_model_log_likelihood: trajectory dt does not match model dt");
  return guarded([&] { *out = log_likelihood_trajectory(m->m, trajectory_from_rows(points, len, dim, dt), 1); });
}

sf_status sf_model_stationary_log_density(const sf_model* m, const double* point, int dim, double* out) {
  if (!m || !point || !out) return fail_arg("sf_model_stationary_log_density: null argument");
  if (dim != m->m.dim()) return fail_arg("sf_model_stationary_log_density: dim does not match model");
  return guarded([&] {
    Matrix p(dim, 1);
    for (int i = 0; i < dim; ++i) p(i, 0) = point[i];
    *out = stationary_log_density(m->m, p);
  });
}

sf_status sf_model_classify(const sf_model* const* models, int n_models, const double* points, int len,
                            int dim, double dt, int* out_index, double* out_log_likelihoods) {
  if (!models || !points || !out_index) return fail_arg("sf_model_classify: null argument");
  if (n_models < 1) return fail_arg("sf_model_classify: need at least one model");
  for (int k = 0; k < n_models; ++k)
    if (!models[k]) return fail_arg("sf_model_classify: null model");
  return guarded([&] {
    Trajectory t = trajectory_from_rows(points, len, dim, dt);
    std::vector<const ImitationModel*> ms;
    for (int k = 0; k < n_models; ++k) ms.push_back(&models[k]->m);
    Classification c = classify(t, ms);
    *out_index = c.index;
    if (out_log_likelihoods)
      for (int k = 0; k < n_models; ++k) out_log_likelihoods[k] = c.log_likelihoods[k];
  });
}

sf_status sf_model_vector_field(const sf_model* m, const double* grid_min, const double* grid_max,
                                const int* counts, double* out) {
  if (!m || !grid_min || !grid_max || !counts || !out) return fail_arg("sf_model_vector_field: null argument");
  const int d = m->m.dim();
  long total = 1;
  for (int i = 0; i < d; ++i) {
    if (counts[i] < 1) return fail_arg("sf_model_vector_field: counts must be >= 1");
    total *= counts[i];
  }
  return guarded([&] {
    Matrix pts(d, static_cast<int>(total));
    std::vector<int> idx(d, 0);
    for (long j = 0; j < total; ++j) {
      for (int i = 0; i < d; ++i) {
        double lo = grid_min[i], hi = grid_max[i];
        pts(i, static_cast<int>(j)) = counts[i] == 1 ? lo : lo + (hi - lo) * idx[i] / (counts[i] - 1);
      }
      for (int i = d - 1; i >= 0; --i) {  // last dimension fastest
        if (++idx[i] < counts[i]) break;
        idx[i] = 0;
      }
    }
    Matrix vel = vector_field(m->m, pts);
    for (long j = 0; j < total; ++j) {
      for (int i = 0; i < d; ++i) out[j * 2 * d + i] = pts(i, static_cast<int>(j));
      for (int i = 0; i < d; ++i) out[j * 2 * d + d + i] = vel(i, static_cast<int>(j));
    }
  });
}

sf_status sf_model_eval(const sf_model* m, const sf_dataset* data, double* out_dtw, double* out_frechet,
                        double* out_swept) {
  if (!m || !data || !out_dtw || !out_frechet) return fail_arg("sf_model_eval: null argument");
  if (m->m.dim() != data->ds.dim) return fail_arg("sf_model_eval: dataset dim does not match model");
  if (out_swept && data->ds.dim != 2) return fail_arg("sf_model_eval: swept area requires dim == 2");
  return guarded([&] {
    for (int k = 0; k < data->ds.count(); ++k) {
      const Trajectory& demo = data->ds.trajectories[k];
      Rng rng(0);
      Trajectory rep = generate(m->m, demo.point(0), demo.length() - 1, 0.0, rng);
      out_dtw[k] = dtw(rep, demo);
      out_frechet[k] = discrete_frechet(rep, demo);
      if (out_swept) out_swept[k] = swept_area(rep, demo);
    }
  });
}

}  // extern "C"
