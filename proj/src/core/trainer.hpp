#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/model.hpp"

namespace stochflow {

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int s_max = 5;             // conditioning stride drawn uniformly from {1..s_max}
  double grad_clip = 100.0;  // global norm bound applied before the update
  std::uint64_t seed = 0;
  LatentKind latent = LatentKind::linear;
  int flow_pairs = 10;
  int hidden_width = 64;
  double plateau_tol = 1e-5;  // relative NLL change considered a plateau
  int plateau_window = 50;    // epochs
  double stability_margin = 0.01;
};

struct EpochRecord {
  int epoch = 0;
  double nll = 0;          // mean per-iteration negative log-likelihood
  double endpoint = 0;     // mean -log p_inf(z_n) share
  double conditional = 0;  // mean conditional share
  double logdet = 0;       // mean volume-term share
  double grad_norm = 0;    // max post-clip gradient norm over the epoch
  double wall_s = 0;       // seconds since training start (not reproducible)
};

struct LossReport {
  std::vector<EpochRecord> epochs;
  double initial_nll = 0;  // dataset mean NLL (stride 1) before training
  double final_nll = 0;
  int epochs_run = 0;
  bool aborted_non_finite = false;
};

struct TrainResult {
  ImitationModel model;
  LossReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Maximum-likelihood training: per iteration draw a trajectory and a stride,
// descend the negative trajectory log-likelihood with Adam on flow and latent
// parameters jointly. Aborts to the last finite checkpoint on numerical
// failure (report flag set).
TrainResult train(const Dataset& data, const TrainConfig& cfg, Rng& rng,
                  const EpochCallback& on_epoch = nullptr);

double dataset_nll(const ImitationModel& m, const Dataset& data);

// Mean-velocity initialization for the linear latent: the decay rate is mean
// speed over mean start distance-to-goal, so unit-speed demos from unit
// distance start at A = -I; K starts at 0.1 I.
struct LinearInit {
  Matrix A;
  Matrix K;
};
LinearInit init_linear_from_mean_velocity(const std::vector<Trajectory>& trajs, double dt);

// PCA + DFT initialization for the limit cycle: project onto the first
// principal component, take the dominant nonzero frequency bin as b, the mean
// centroid distance as rho*; a = -1, sigmas 0.1. Rotation sign comes from the
// mean angular increment.
CycleCoeffs init_cycle_from_pca_fft(const std::vector<Trajectory>& trajs, double dt);

// Normalizers used before training: point-to-point maps the common endpoint
// to the origin with per-dimension unit variance; cycles center on the
// centroid with one isotropic scale (RMS centroid distance) so circles stay
// circles in latent coordinates.
Normalizer make_p2p_normalizer(const Dataset& data);
Normalizer make_cycle_normalizer(const Dataset& data);

// Newline-delimited training log (tab-separated, one record per epoch).
void write_train_log(const LossReport& report, const std::string& path);

}  // namespace stochflow
