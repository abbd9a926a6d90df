#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/flows.hpp"
#include "core/latent.hpp"

namespace stochflow {

// Fixed per-dimension affine transform applied to raw observations before the
// flow; computed from the demonstrations, not trained.
struct Normalizer {
  std::vector<double> shift;
  std::vector<double> scale;

  int dim() const { return static_cast<int>(shift.size()); }
  Matrix normalize(const Matrix& raw_cols) const;
  Matrix denormalize(const Matrix& norm_cols) const;
  double log_det() const;  // log|det d(normalized)/d(raw)| = -sum log scale
};

enum class LatentKind : std::uint8_t { linear = 0, cycle = 1 };

struct ImitationModel {
  FlowStack flow;
  LatentSpec latent;
  Normalizer normalizer;
  double dt = 0;
  ParamVector params;

  int dim() const { return flow.dim; }
  LatentKind kind() const {
    return std::holds_alternative<LinearSDE>(latent) ? LatentKind::linear : LatentKind::cycle;
  }
};

struct ModelConfig {
  int dim = 2;
  LatentKind latent = LatentKind::linear;
  int flow_pairs = 10;
  int hidden_width = 64;
  double stability_margin = 0.01;
};

// Assembles specs + layout and initializes the flow to the identity map.
// Latent raw parameters start at set_linear_params(-I, 0.1 I) equivalents and
// are normally overwritten by the trainer's init heuristics.
ImitationModel make_model(const ModelConfig& cfg, const Normalizer& norm, double dt, Rng& rng);

struct LossBreakdown {
  double endpoint = 0;     // log p_inf(z_n)
  double conditional = 0;  // sum log p(z_i | z_{i+s})
  double logdet = 0;       // flow + normalizer volume terms over evaluated points
  double total = 0;
};

// Alg.-style trajectory log-likelihood at stride s (s in [1, length)):
//   log p = log p_inf(z_n) + sum_i log p(z_i | z_{i+s}) + volume terms,
// where z = flow^-1(normalize(y)) and the volume terms cover each point that
// carries a density factor (i in [0, N-s) and n).
LossBreakdown log_likelihood_terms(const ImitationModel& m, const Trajectory& t, int stride);
double log_likelihood_trajectory(const ImitationModel& m, const Trajectory& t, int stride);

// Tape-graph version for training; returns the same decomposition as Vars.
struct LossBreakdownVars {
  Var endpoint, conditional, logdet, total;
};
LossBreakdownVars log_likelihood_graph(Tape& tape, const Var& flat_params, const ImitationModel& m,
                                       const Matrix& raw_cols, int stride);

// Start point mapped to latent, latent rollout, flow + normalizer applied
// back; exactly the observed SDE because the emission is a diffeomorphism.
Trajectory generate(const ImitationModel& m, const Matrix& y0, int n_steps, double noise_scale, Rng& rng);

// Image of the latent equilibrium (linear latent: h(0) denormalized).
Matrix attractor_image(const ImitationModel& m);

// Expected velocity v(y) = J(z) f(z) pushed through the normalizer scaling,
// for a batch of raw points (d x N); returns d x N velocities.
Matrix vector_field(const ImitationModel& m, const Matrix& raw_points);

// Stationary observed-space log-density at a raw point.
double stationary_log_density(const ImitationModel& m, const Matrix& raw_point);
Matrix stationary_log_density_cols(const ImitationModel& m, const Matrix& raw_cols);

// argmax_k log p(t | model_k); ties break to the lowest index.
struct Classification {
  int index = 0;
  std::vector<double> log_likelihoods;
};
Classification classify(const Trajectory& t, const std::vector<const ImitationModel*>& models);

// Map a raw trajectory through normalizer + flow inverse (latent columns).
Matrix to_latent(const ImitationModel& m, const Matrix& raw_cols);

}  // namespace stochflow
