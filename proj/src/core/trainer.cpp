#include "core/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace stochflow {

namespace {

void validate_dataset(const Dataset& data) {
  if (data.trajectories.empty()) throw Error(ErrorCode::invalid_argument, "train: no trajectories");
  for (std::size_t k = 0; k < data.trajectories.size(); ++k) {
    const Trajectory& t = data.trajectories[k];
    if (t.dim() != data.dim || t.dt != data.dt)
      throw Error(ErrorCode::dimension_mismatch, "train: trajectory " + std::to_string(k) + " inconsistent");
    if (t.length() < 2)
      throw Error(ErrorCode::invalid_argument, "train: trajectory " + std::to_string(k) + " shorter than 2");
    if (!t.points.all_finite())
      throw Error(ErrorCode::numeric, "train: trajectory " + std::to_string(k) + " has non-finite values");
    double spread = 0.0;
    for (int i = 0; i < t.dim(); ++i)
      for (int j = 1; j < t.length(); ++j) spread = std::max(spread, std::fabs(t.points(i, j) - t.points(i, 0)));
    if (spread < 1e-12)
      throw Error(ErrorCode::degenerate_data, "train: trajectory " + std::to_string(k) + " is constant");
  }
}

}  // namespace

Normalizer make_p2p_normalizer(const Dataset& data) {
  const int d = data.dim;
  Normalizer n;
  n.shift.assign(d, 0.0);
  n.scale.assign(d, 0.0);
  // shift: mean final point, so the common goal lands on the latent origin
  for (const Trajectory& t : data.trajectories)
    for (int i = 0; i < d; ++i) n.shift[i] += t.points(i, t.length() - 1);
  for (int i = 0; i < d; ++i) n.shift[i] /= data.count();

  std::vector<double> mean(d, 0.0);
  std::size_t count = 0;
  for (const Trajectory& t : data.trajectories) {
    for (int j = 0; j < t.length(); ++j)
      for (int i = 0; i < d; ++i) mean[i] += t.points(i, j);
    count += t.length();
  }
  for (int i = 0; i < d; ++i) mean[i] /= count;
  for (const Trajectory& t : data.trajectories)
    for (int j = 0; j < t.length(); ++j)
      for (int i = 0; i < d; ++i) {
        double dlt = t.points(i, j) - mean[i];
        n.scale[i] += dlt * dlt;
      }
  for (int i = 0; i < d; ++i) {
    n.scale[i] = std::sqrt(n.scale[i] / count);
    if (!(n.scale[i] > 1e-12))
      throw Error(ErrorCode::degenerate_data, "normalizer: dimension " + std::to_string(i) + " has no spread");
  }
  return n;
}

Normalizer make_cycle_normalizer(const Dataset& data) {
  const int d = data.dim;
  Normalizer n;
  n.shift.assign(d, 0.0);
  std::size_t count = 0;
  for (const Trajectory& t : data.trajectories) {
    for (int j = 0; j < t.length(); ++j)
      for (int i = 0; i < d; ++i) n.shift[i] += t.points(i, j);
    count += t.length();
  }
  for (int i = 0; i < d; ++i) n.shift[i] /= count;
  double ms = 0.0;
  for (const Trajectory& t : data.trajectories)
    for (int j = 0; j < t.length(); ++j) {
      double r2 = 0.0;
      for (int i = 0; i < d; ++i) {
        double dlt = t.points(i, j) - n.shift[i];
        r2 += dlt * dlt;
      }
      ms += r2;
    }
  double rms = std::sqrt(ms / count);
  if (!(rms > 1e-12)) throw Error(ErrorCode::degenerate_data, "normalizer: data has no spread");
  n.scale.assign(d, rms);
  return n;
}

LinearInit init_linear_from_mean_velocity(const std::vector<Trajectory>& trajs, double dt) {
  if (trajs.empty()) throw Error(ErrorCode::invalid_argument, "init_linear: no trajectories");
  const int d = trajs[0].dim();
  // goal = mean final point
  Matrix goal(d, 1);
  for (const Trajectory& t : trajs)
    for (int i = 0; i < d; ++i) goal(i, 0) += t.points(i, t.length() - 1) / trajs.size();

  double speed_sum = 0.0;
  std::size_t speed_count = 0;
  double start_dist_sum = 0.0;
  for (const Trajectory& t : trajs) {
    if (t.length() < 2) throw Error(ErrorCode::invalid_argument, "init_linear: trajectory shorter than 2");
    for (int j = 0; j + 1 < t.length(); ++j) {
      double v2 = 0.0;
      for (int i = 0; i < d; ++i) {
        double dv = (t.points(i, j + 1) - t.points(i, j)) / dt;
        v2 += dv * dv;
      }
      speed_sum += std::sqrt(v2);
      ++speed_count;
    }
    double s2 = 0.0;
    for (int i = 0; i < d; ++i) {
      double dlt = t.points(i, 0) - goal(i, 0);
      s2 += dlt * dlt;
    }
    start_dist_sum += std::sqrt(s2);
  }
  double mean_speed = speed_sum / speed_count;
  double mean_dist = start_dist_sum / trajs.size();
  if (!(mean_dist > 1e-12))
    throw Error(ErrorCode::degenerate_data, "init_linear: zero mean distance to goal (stationary demos)");
  if (!(mean_speed > 0))
    throw Error(ErrorCode::degenerate_data, "init_linear: demonstrations do not move");
  double rate = mean_speed / mean_dist;
  // keep the one-step map F = I + A dt away from 0 and the unit circle
  rate = std::min(rate, 0.5 / dt);
  LinearInit init;
  init.A = scale(Matrix::identity(d), -rate);
  init.K = scale(Matrix::identity(d), 0.1);
  return init;
}

namespace {

// dominant principal direction of the pooled point cloud (power iteration)
Matrix principal_component(const std::vector<Trajectory>& trajs, const Matrix& centroid) {
  const int d = trajs[0].dim();
  Matrix cov(d, d);
  std::size_t count = 0;
  for (const Trajectory& t : trajs) {
    for (int j = 0; j < t.length(); ++j) {
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          cov(a, b) += (t.points(a, j) - centroid(a, 0)) * (t.points(b, j) - centroid(b, 0));
    }
    count += t.length();
  }
  cov = scale(cov, 1.0 / count);
  Matrix v(d, 1);
  v(0, 0) = 1.0;
  for (int i = 1; i < d; ++i) v(i, 0) = 1e-3 * i;  // break symmetry deterministically
  for (int it = 0; it < 500; ++it) {
    v = matmul(cov, v);
    double nrm = frobenius_norm(v);
    if (nrm < 1e-300) {
      v = Matrix(d, 1);
      v(0, 0) = 1.0;
      break;
    }
    v = scale(v, 1.0 / nrm);
  }
  return v;
}

}  // namespace

CycleCoeffs init_cycle_from_pca_fft(const std::vector<Trajectory>& trajs, double dt) {
  if (trajs.empty()) throw Error(ErrorCode::invalid_argument, "init_cycle: no trajectories");
  const int d = trajs[0].dim();
  const Trajectory* longest = &trajs[0];
  for (const Trajectory& t : trajs)
    if (t.length() > longest->length()) longest = &t;
  if (longest->length() < 8)
    throw Error(ErrorCode::degenerate_data, "init_cycle: trajectories too short to cover a period");

  Matrix centroid(d, 1);
  std::size_t count = 0;
  for (const Trajectory& t : trajs) {
    for (int j = 0; j < t.length(); ++j)
      for (int i = 0; i < d; ++i) centroid(i, 0) += t.points(i, j);
    count += t.length();
  }
  centroid = scale(centroid, 1.0 / static_cast<double>(count));

  Matrix pc = principal_component(trajs, centroid);
  const int n = longest->length();
  std::vector<double> series(n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < d; ++i) series[j] += (longest->points(i, j) - centroid(i, 0)) * pc(i, 0);

  double spread = 0.0;
  for (int j = 1; j < n; ++j) spread = std::max(spread, std::fabs(series[j] - series[0]));
  if (spread < 1e-12)
    throw Error(ErrorCode::degenerate_data, "init_cycle: no oscillation detected (constant projection)");

  // dominant nonzero DFT bin of the projected series
  int best_k = 1;
  double best_mag = -1.0;
  for (int k = 1; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (int j = 0; j < n; ++j) {
      double a = 2.0 * std::numbers::pi * k * j / n;
      re += series[j] * std::cos(a);
      im -= series[j] * std::sin(a);
    }
    double mag = re * re + im * im;
    if (mag > best_mag) {
      best_mag = mag;
      best_k = k;
    }
  }
  if (!(best_mag > 1e-18))
    throw Error(ErrorCode::degenerate_data, "init_cycle: no oscillation detected (flat spectrum)");
  double b0 = 2.0 * std::numbers::pi * best_k / (n * dt);

  // rotation sign from the mean angular increment in the (0, 1) plane
  double dpsi_sum = 0.0;
  for (const Trajectory& t : trajs)
    for (int j = 0; j + 1 < t.length(); ++j) {
      double x0 = t.points(0, j) - centroid(0, 0), y0 = t.points(1, j) - centroid(1, 0);
      double x1 = t.points(0, j + 1) - centroid(0, 0), y1 = t.points(1, j + 1) - centroid(1, 0);
      if (x0 * x0 + y0 * y0 < 1e-18 || x1 * x1 + y1 * y1 < 1e-18) continue;
      double dpsi = std::atan2(y1, x1) - std::atan2(y0, x0);
      dpsi -= 2.0 * std::numbers::pi * std::floor((dpsi + std::numbers::pi) / (2.0 * std::numbers::pi));
      dpsi_sum += dpsi;
    }
  if (dpsi_sum < 0) b0 = -b0;

  double rho_sum = 0.0;
  for (const Trajectory& t : trajs)
    for (int j = 0; j < t.length(); ++j) {
      double r2 = 0.0;
      for (int i = 0; i < std::min(d, 2); ++i) {
        double dlt = t.points(i, j) - centroid(i, 0);
        dlt *= dlt;
        r2 += dlt;
      }
      rho_sum += std::sqrt(r2);
    }
  double rho_star = rho_sum / count;
  if (!(rho_star > 1e-9)) throw Error(ErrorCode::degenerate_data, "init_cycle: data collapses to the centroid");

  return {-1.0, b0, rho_star, 0.1, 0.1};
}

double dataset_nll(const ImitationModel& m, const Dataset& data) {
  double s = 0.0;
  for (const Trajectory& t : data.trajectories) s -= log_likelihood_trajectory(m, t, 1);
  return s / data.count();
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, Rng& rng, const EpochCallback& on_epoch) {
  if (cfg.epochs < 1) throw Error(ErrorCode::invalid_argument, "train: epochs must be >= 1");
  if (!(cfg.learning_rate > 0)) throw Error(ErrorCode::invalid_argument, "train: learning rate must be positive");
  if (cfg.s_max < 1) throw Error(ErrorCode::invalid_argument, "train: s_max must be >= 1");
  validate_dataset(data);

  Normalizer norm = cfg.latent == LatentKind::linear ? make_p2p_normalizer(data) : make_cycle_normalizer(data);

  ModelConfig mc;
  mc.dim = data.dim;
  mc.latent = cfg.latent;
  mc.flow_pairs = cfg.flow_pairs;
  mc.hidden_width = cfg.hidden_width;
  mc.stability_margin = cfg.stability_margin;
  ImitationModel model = make_model(mc, norm, data.dt, rng);

  std::vector<Trajectory> normalized;
  for (const Trajectory& t : data.trajectories) normalized.push_back({norm.normalize(t.points), t.dt});
  if (cfg.latent == LatentKind::linear) {
    LinearInit init = init_linear_from_mean_velocity(normalized, data.dt);
    set_linear_params(std::get<LinearSDE>(model.latent), model.params.values, init.A, init.K);
  } else {
    CycleCoeffs init = init_cycle_from_pca_fft(normalized, data.dt);
    set_cycle_params(std::get<LimitCycleSDE>(model.latent), model.params.values, init);
  }

  TrainResult result{std::move(model), {}};
  ImitationModel& m = result.model;
  LossReport& report = result.report;
  report.initial_nll = dataset_nll(m, data);

  const std::size_t np = m.params.values.size();
  std::vector<double> adam_m(np, 0.0), adam_v(np, 0.0);
  long adam_t = 0;
  const int iters_per_epoch = data.count();
  std::vector<double> checkpoint = m.params.values;
  auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    checkpoint = m.params.values;
    double nll_sum = 0, ep_sum = 0, cond_sum = 0, ld_sum = 0, gmax = 0;
    bool failed = false;
    for (int it = 0; it < iters_per_epoch; ++it) {
      const int ti = rng.uniform_int(data.count());
      const Trajectory& traj = data.trajectories[ti];
      const int max_s = std::min(cfg.s_max, traj.length() - 1);
      const int stride = 1 + rng.uniform_int(max_s);
      try {
        Tape tape;
        Var flat = tape.leaf(Matrix::column(m.params.values));
        auto terms = log_likelihood_graph(tape, flat, m, traj.points, stride);
        Var loss = neg(terms.total);
        double lv = scalar(value_of(loss));
        if (!std::isfinite(lv)) throw Error(ErrorCode::numeric, "train: non-finite loss");
        tape.backward(loss);
        Matrix g = tape.grad(flat);
        if (!g.all_finite()) throw Error(ErrorCode::numeric, "train: non-finite gradient");

        double gnorm = frobenius_norm(g);
        if (gnorm > cfg.grad_clip) g = scale(g, cfg.grad_clip / gnorm);
        gmax = std::max(gmax, frobenius_norm(g));

        ++adam_t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, adam_t);
        const double bc2 = 1.0 - std::pow(cfg.beta2, adam_t);
        for (std::size_t i = 0; i < np; ++i) {
          double gi = g.data()[i];
          adam_m[i] = cfg.beta1 * adam_m[i] + (1.0 - cfg.beta1) * gi;
          adam_v[i] = cfg.beta2 * adam_v[i] + (1.0 - cfg.beta2) * gi * gi;
          double mhat = adam_m[i] / bc1;
          double vhat = adam_v[i] / bc2;
          m.params.values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }

        nll_sum += lv;
        ep_sum -= scalar(value_of(terms.endpoint));
        cond_sum -= scalar(value_of(terms.conditional));
        ld_sum -= scalar(value_of(terms.logdet));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::numeric || e.code() == ErrorCode::unstable ||
            e.code() == ErrorCode::origin || e.code() == ErrorCode::singular_matrix) {
          failed = true;
          break;
        }
        throw;
      }
    }
    if (failed) {
      m.params.values = checkpoint;
      report.aborted_non_finite = true;
      break;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.nll = nll_sum / iters_per_epoch;
    rec.endpoint = ep_sum / iters_per_epoch;
    rec.conditional = cond_sum / iters_per_epoch;
    rec.logdet = ld_sum / iters_per_epoch;
    rec.grad_norm = gmax;
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);
    report.epochs_run = epoch + 1;
    if (on_epoch) on_epoch(rec);

    if (static_cast<int>(report.epochs.size()) > cfg.plateau_window) {
      double now = rec.nll;
      double before = report.epochs[report.epochs.size() - 1 - cfg.plateau_window].nll;
      if (std::fabs(now - before) < cfg.plateau_tol * std::max(1.0, std::fabs(now))) break;
    }
  }

  report.final_nll = dataset_nll(m, data);
  return result;
}

void write_train_log(const LossReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write training log: " + path);
  out << "epoch\tnll\tendpoint\tconditional\tlogdet\tgrad_norm\twall_s\n";
  char buf[256];
  for (const EpochRecord& r : report.epochs) {
    std::snprintf(buf, sizeof(buf), "%d\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.3f\n", r.epoch, r.nll,
                  r.endpoint, r.conditional, r.logdet, r.grad_norm, r.wall_s);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "# initial_nll=%.17g final_nll=%.17g epochs_run=%d aborted=%d\n",
                report.initial_nll, report.final_nll, report.epochs_run, report.aborted_non_finite ? 1 : 0);
  out << buf;
  if (!out) throw Error(ErrorCode::io, "write failed: " + path);
}

}  // namespace stochflow
