#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "core/trainer.hpp"
#include "doctest.h"

using namespace stochflow;

namespace {

// straight line toward the origin at unit speed from unit distance
Trajectory unit_speed_line(double dt = 0.05) {
  const int n = static_cast<int>(1.0 / dt) + 1;
  Matrix pts(2, n);
  for (int j = 0; j < n; ++j) {
    pts(0, j) = 1.0 - j * dt;
    pts(1, j) = 0.0;
  }
  return {pts, dt};
}

Dataset quick_dataset() {
  return synth_point_to_point(PointToPointShape::line, 3, 0.01, 5, {0.05, 40, 2.0, 2.0});
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.flow_pairs = 1;
  cfg.hidden_width = 6;
  cfg.s_max = 2;
  cfg.seed = 1;
  return cfg;
}

}  // namespace

TEST_CASE("mean-velocity init: unit-speed demos from unit distance give A = -I") {
  std::vector<Trajectory> demos = {unit_speed_line()};
  LinearInit init = init_linear_from_mean_velocity(demos, 0.05);
  CHECK(max_abs(sub(init.A, scale(Matrix::identity(2), -1.0))) < 1e-9);
  CHECK(max_abs(sub(init.K, scale(Matrix::identity(2), 0.1))) == 0.0);

  // duplicated demos do not change the estimate
  std::vector<Trajectory> two = {unit_speed_line(), unit_speed_line()};
  LinearInit init2 = init_linear_from_mean_velocity(two, 0.05);
  CHECK(max_abs(sub(init2.A, init.A)) == 0.0);

  // stationary demonstrations have no usable velocity or distance
  Matrix still(2, 10);
  for (int j = 0; j < 10; ++j) {
    still(0, j) = 0.0;
    still(1, j) = 0.0;
  }
  std::vector<Trajectory> bad = {{still, 0.05}};
  CHECK_THROWS_AS(init_linear_from_mean_velocity(bad, 0.05), Error);
}

TEST_CASE("pca+fft init: circle frequency within one bin, unit radius, rotation sign") {
  const double dt = 0.025;
  const int n = 320;
  // two full periods over the n samples: the sample centroid is exactly the center
  const double omega = 2.0 * std::numbers::pi * 2.0 / (n * dt);
  for (double direction : {1.0, -1.0}) {
    Matrix pts(2, n);
    for (int j = 0; j < n; ++j) {
      pts(0, j) = std::cos(direction * omega * j * dt);
      pts(1, j) = std::sin(direction * omega * j * dt);
    }
    std::vector<Trajectory> demos = {{pts, dt}};
    CycleCoeffs c = init_cycle_from_pca_fft(demos, dt);
    double bin = 2.0 * std::numbers::pi / (n * dt);
    CHECK(std::fabs(c.b - direction * omega) <= bin);
    CHECK(c.rho_star == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(c.a == doctest::Approx(-1.0));
    CHECK(c.sigma1 == doctest::Approx(0.1));
  }

  Matrix flat(2, 64);
  for (int j = 0; j < 64; ++j) {
    flat(0, j) = 1.0;
    flat(1, j) = 2.0;
  }
  std::vector<Trajectory> constant = {{flat, dt}};
  CHECK_THROWS_AS(init_cycle_from_pca_fft(constant, dt), Error);

  Matrix tiny(2, 4);
  std::vector<Trajectory> too_short = {{tiny, dt}};
  CHECK_THROWS_AS(init_cycle_from_pca_fft(too_short, dt), Error);
}

TEST_CASE("normalizers: goal to origin for point-to-point, isotropic for cycles") {
  Dataset ds = quick_dataset();
  Normalizer n = make_p2p_normalizer(ds);
  // the common goal maps to the origin
  const Trajectory& t0 = ds.trajectories[0];
  Matrix goal = t0.point(t0.length() - 1);
  Matrix z = n.normalize(goal);
  CHECK(max_abs(z) < 1e-12);

  SynthOptions opts{0.025, 320, 2.0 * std::numbers::pi * 2.0 / (320 * 0.025), 1.5};
  Dataset circle = synth_limit_cycle(LimitCycleShape::circle, 2, 0.0, 3, opts);
  Normalizer cn = make_cycle_normalizer(circle);
  CHECK(cn.scale[0] == cn.scale[1]);
  CHECK(cn.scale[0] == doctest::Approx(1.0).epsilon(1e-9));  // unit circle, RMS distance 1
  // a circle stays a circle: normalized radius constant
  Matrix zc = cn.normalize(circle.trajectories[0].points);
  for (int j = 0; j < zc.cols(); ++j) {
    double r = std::sqrt(zc(0, j) * zc(0, j) + zc(1, j) * zc(1, j));
    CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("train runs on a minimal two-point trajectory") {
  Dataset ds;
  ds.dim = 2;
  ds.dt = 0.05;
  Matrix pts = Matrix::from_rows({{1.0, 0.0}, {0.5, 0.0}});
  ds.trajectories.push_back({pts, ds.dt});
  TrainConfig cfg = quick_config();
  cfg.epochs = 3;
  Rng rng(cfg.seed);
  TrainResult res = train(ds, cfg, rng);
  CHECK(std::isfinite(res.report.initial_nll));
  CHECK(std::isfinite(res.report.final_nll));
  CHECK(res.report.epochs_run == 3);
}

TEST_CASE("degenerate data is rejected") {
  Dataset ds;
  ds.dim = 2;
  ds.dt = 0.05;
  Matrix still(2, 12);
  for (int j = 0; j < 12; ++j) {
    still(0, j) = 0.7;
    still(1, j) = -0.1;
  }
  ds.trajectories.push_back({still, ds.dt});
  TrainConfig cfg = quick_config();
  Rng rng(1);
  CHECK_THROWS_AS(train(ds, cfg, rng), Error);
}

TEST_CASE("training is deterministic per seed and improves the likelihood") {
  Dataset ds = quick_dataset();
  TrainConfig cfg = quick_config();
  cfg.epochs = 20;
  Rng r1(cfg.seed), r2(cfg.seed);
  TrainResult a = train(ds, cfg, r1);
  TrainResult b = train(ds, cfg, r2);
  CHECK(a.model.params.values == b.model.params.values);
  CHECK(a.report.final_nll == b.report.final_nll);
  CHECK(a.report.final_nll < a.report.initial_nll);

  Rng r3(cfg.seed + 1);
  TrainResult c = train(ds, cfg, r3);
  CHECK(c.model.params.values != a.model.params.values);
}

TEST_CASE("gradient clip bound holds for every recorded epoch") {
  Dataset ds = quick_dataset();
  TrainConfig cfg = quick_config();
  cfg.grad_clip = 1.0;
  cfg.epochs = 10;
  Rng rng(2);
  TrainResult res = train(ds, cfg, rng);
  for (const EpochRecord& r : res.report.epochs) CHECK(r.grad_norm <= cfg.grad_clip + 1e-12);
}

TEST_CASE("both flow and latent parameter groups receive gradient") {
  Dataset ds = quick_dataset();
  TrainConfig cfg = quick_config();
  Rng rng(3);
  TrainResult res = train(ds, cfg, rng);
  const ImitationModel& m = res.model;
  Tape tape;
  Var flat = tape.leaf(Matrix::column(m.params.values));
  auto terms = log_likelihood_graph(tape, flat, m, ds.trajectories[0].points, 1);
  tape.backward(terms.total);
  Matrix g = tape.grad_or_zero(flat);
  double flow_norm = 0, latent_norm = 0;
  for (std::size_t i = 0; i < m.params.values.size(); ++i) {
    if (i < m.flow.param_count)
      flow_norm += g.data()[i] * g.data()[i];
    else
      latent_norm += g.data()[i] * g.data()[i];
  }
  CHECK(flow_norm > 0);
  CHECK(latent_norm > 0);
}

TEST_CASE("plateau stop ends training before the epoch budget") {
  Dataset ds = quick_dataset();
  TrainConfig cfg = quick_config();
  cfg.learning_rate = 1e-300;  // nothing moves, NLL is flat
  cfg.epochs = 500;
  cfg.plateau_window = 10;
  Rng rng(4);
  TrainResult res = train(ds, cfg, rng);
  CHECK(res.report.epochs_run < 500);
  CHECK(res.report.epochs_run >= 10);
}

TEST_CASE("loss report breakdown sums to the total") {
  Dataset ds = quick_dataset();
  TrainConfig cfg = quick_config();
  Rng rng(6);
  TrainResult res = train(ds, cfg, rng);
  for (const EpochRecord& r : res.report.epochs)
    CHECK(r.nll == doctest::Approx(r.endpoint + r.conditional + r.logdet).epsilon(1e-9));
}

TEST_CASE("training log is written in the documented schema") {
  Dataset ds = quick_dataset();
  TrainConfig cfg = quick_config();
  cfg.epochs = 3;
  Rng rng(7);
  TrainResult res = train(ds, cfg, rng);
  const char* path = "trainer_log_test.tsv";
  write_train_log(res.report, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch\tnll\tendpoint\tconditional\tlogdet\tgrad_norm\twall_s");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 4);  // 3 epochs + summary comment
  in.close();
  std::remove(path);
}

TEST_CASE("cycle training smoke test on circle data") {
  SynthOptions opts{0.05, 100, 2.0, 1.5};
  Dataset ds = synth_limit_cycle(LimitCycleShape::circle, 2, 0.01, 9, opts);
  TrainConfig cfg = quick_config();
  cfg.latent = LatentKind::cycle;
  cfg.epochs = 10;
  Rng rng(cfg.seed);
  TrainResult res = train(ds, cfg, rng);
  CHECK(res.report.final_nll <= res.report.initial_nll);
  CHECK(!res.report.aborted_non_finite);
}
