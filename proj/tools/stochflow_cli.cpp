// stochflow command-line tool. Uses only the public C API.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stochflow/stochflow.h"

namespace {

int exit_code_for(sf_status s) {
  if (s == SF_OK) return 0;
  if (s == SF_ERR_NUMERIC || s == SF_ERR_UNSTABLE) return 2;
  return 1;
}

int fail(sf_status s) {
  std::fprintf(stderr, "error: %s (%s)\n", sf_last_error(), sf_status_name(s));
  return exit_code_for(s);
}

int fail_usage(const std::string& msg) {
  std::fprintf(stderr, "error: %s\n", msg.c_str());
  return 1;
}

struct DatasetHandle {
  sf_dataset* ds = nullptr;
  ~DatasetHandle() { sf_dataset_free(ds); }
};

struct ModelHandle {
  sf_model* m = nullptr;
  ~ModelHandle() { sf_model_free(m); }
};

std::vector<double> parse_point(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw CLI::ValidationError("--start", "expected comma-separated numbers");
    }
  }
  return out;
}

struct GridAxis {
  double lo = 0, hi = 0;
  int count = 0;
};

std::vector<GridAxis> parse_grid(const std::string& s) {
  std::vector<GridAxis> axes;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    GridAxis a;
    if (std::sscanf(part.c_str(), "%lf:%lf:%d", &a.lo, &a.hi, &a.count) != 3 || a.count < 1)
      throw CLI::ValidationError("--grid", "expected min:max:count[,min:max:count...]");
    axes.push_back(a);
  }
  return axes;
}

std::string stem_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

// ---- train ----

struct TrainArgs {
  std::string data_path, out_path, log_path, config_path, latent;
  sf_train_config cfg{};
  CLI::App* cmd = nullptr;
};

void apply_config_file(TrainArgs& a) {
  if (a.config_path.empty()) return;
  std::ifstream in(a.config_path);
  if (!in) throw std::runtime_error("cannot open config file: " + a.config_path);
  nlohmann::json j = nlohmann::json::parse(in);
  // flags win: only fill values the user did not pass on the command line
  auto unset = [&](const char* flag) { return a.cmd->count(flag) == 0; };
  if (j.contains("epochs") && unset("--epochs")) a.cfg.epochs = j["epochs"].get<int>();
  if (j.contains("lr") && unset("--lr")) a.cfg.learning_rate = j["lr"].get<double>();
  if (j.contains("smax") && unset("--smax")) a.cfg.s_max = j["smax"].get<int>();
  if (j.contains("seed") && unset("--seed")) a.cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("flow_pairs") && unset("--flow-pairs")) a.cfg.flow_pairs = j["flow_pairs"].get<int>();
  if (j.contains("hidden") && unset("--hidden")) a.cfg.hidden_width = j["hidden"].get<int>();
  if (j.contains("grad_clip") && unset("--clip")) a.cfg.grad_clip = j["grad_clip"].get<double>();
  if (j.contains("latent") && a.latent.empty()) a.latent = j["latent"].get<std::string>();
}

int run_train(TrainArgs& a) {
  try {
    apply_config_file(a);
  } catch (const std::exception& e) {
    return fail_usage(e.what());
  }
  if (a.latent != "linear" && a.latent != "cycle")
    return fail_usage("--latent must be 'linear' or 'cycle'");
  a.cfg.latent_kind = a.latent == "cycle" ? 1 : 0;

  DatasetHandle data;
  sf_status s = sf_dataset_load(a.data_path.c_str(), &data.ds);
  if (s != SF_OK) return fail(s);

  ModelHandle model;
  sf_train_report report{};
  s = sf_train(data.ds, &a.cfg, a.log_path.empty() ? nullptr : a.log_path.c_str(), &model.m, &report);
  if (s != SF_OK && !(s == SF_ERR_NUMERIC && model.m)) return fail(s);

  sf_status save_status = sf_model_save(model.m, a.out_path.c_str());
  if (save_status != SF_OK) return fail(save_status);

  std::printf("trained %s latent on %d demos: nll %.6f -> %.6f over %d epochs%s\n", a.latent.c_str(),
              sf_dataset_count(data.ds), report.initial_nll, report.final_nll, report.epochs_run,
              report.aborted_non_finite ? " (aborted on non-finite loss, checkpoint saved)" : "");
  std::printf("model written to %s\n", a.out_path.c_str());
  return s == SF_OK ? 0 : 2;
}

// ---- generate ----

int run_generate(const std::string& model_path, const std::string& start, int steps, double noise_scale,
                 uint64_t seed, bool seed_given, const std::string& out_path) {
  if (noise_scale > 0 && !seed_given) return fail_usage("--seed is required when --noise-scale > 0");
  ModelHandle model;
  sf_status s = sf_model_load(model_path.c_str(), &model.m);
  if (s != SF_OK) return fail(s);
  const int dim = sf_model_dim(model.m);
  std::vector<double> y0 = parse_point(start);
  if (static_cast<int>(y0.size()) != dim)
    return fail_usage("--start has " + std::to_string(y0.size()) + " values, model dim is " +
                      std::to_string(dim));
  std::vector<double> out(static_cast<std::size_t>(steps + 1) * dim);
  s = sf_model_generate(model.m, y0.data(), dim, steps, noise_scale, seed, out.data());
  if (s != SF_OK) return fail(s);

  std::ofstream f(out_path);
  if (!f) return fail_usage("cannot write " + out_path);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", sf_model_dt(model.m));
  f << "dim=" << dim << " dt=" << buf << "\n";
  for (int j = 0; j <= steps; ++j) {
    for (int i = 0; i < dim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", out[static_cast<std::size_t>(j) * dim + i]);
      f << (i ? " " : "") << buf;
    }
    f << "\n";
  }
  std::printf("wrote %d points to %s\n", steps + 1, out_path.c_str());
  return 0;
}

// ---- eval ----

int run_eval(const std::string& model_path, const std::string& data_path, const std::string& out_path,
             const std::string& json_path) {
  ModelHandle model;
  sf_status s = sf_model_load(model_path.c_str(), &model.m);
  if (s != SF_OK) return fail(s);
  DatasetHandle data;
  s = sf_dataset_load(data_path.c_str(), &data.ds);
  if (s != SF_OK) return fail(s);

  const int n = sf_dataset_count(data.ds);
  const bool planar = sf_dataset_dim(data.ds) == 2;
  std::vector<double> dtw_v(n), fre_v(n), swe_v(planar ? n : 0);
  s = sf_model_eval(model.m, data.ds, dtw_v.data(), fre_v.data(), planar ? swe_v.data() : nullptr);
  if (s != SF_OK) return fail(s);

  auto mean = [](const std::vector<double>& v) {
    double t = 0;
    for (double x : v) t += x;
    return v.empty() ? 0.0 : t / v.size();
  };
  auto median = [](std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };

  std::ostringstream table;
  table << "demo        dtw        frechet    swept_area\n";
  char buf[160];
  for (int k = 0; k < n; ++k) {
    if (planar)
      std::snprintf(buf, sizeof(buf), "%-6d %12.6g %12.6g %12.6g\n", k, dtw_v[k], fre_v[k], swe_v[k]);
    else
      std::snprintf(buf, sizeof(buf), "%-6d %12.6g %12.6g %12s\n", k, dtw_v[k], fre_v[k], "-");
    table << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-6s %12.6g %12.6g %12.6g\n", "mean", mean(dtw_v), mean(fre_v),
                planar ? mean(swe_v) : 0.0);
  table << buf;
  std::snprintf(buf, sizeof(buf), "%-6s %12.6g %12.6g %12.6g\n", "median", median(dtw_v), median(fre_v),
                planar ? median(swe_v) : 0.0);
  table << buf;
  std::fputs(table.str().c_str(), stdout);

  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) return fail_usage("cannot write " + out_path);
    f << table.str();
  }
  if (!json_path.empty()) {
    nlohmann::json j;
    j["dtw"] = {{"per_demo", dtw_v}, {"mean", mean(dtw_v)}, {"median", median(dtw_v)}};
    j["frechet"] = {{"per_demo", fre_v}, {"mean", mean(fre_v)}, {"median", median(fre_v)}};
    if (planar)
      j["swept_area"] = {{"per_demo", swe_v}, {"mean", mean(swe_v)}, {"median", median(swe_v)}};
    std::ofstream f(json_path);
    if (!f) return fail_usage("cannot write " + json_path);
    f << j.dump(2) << "\n";
  }
  return 0;
}

// ---- classify ----

int run_classify(const std::vector<std::string>& model_paths, const std::vector<std::string>& data_paths) {
  std::vector<std::unique_ptr<ModelHandle>> models;
  std::vector<std::string> labels;
  for (const std::string& p : model_paths) {
    auto h = std::make_unique<ModelHandle>();
    sf_status s = sf_model_load(p.c_str(), &h->m);
    if (s != SF_OK) return fail(s);
    labels.push_back(stem_of(p));
    models.push_back(std::move(h));
  }
  const int n_models = static_cast<int>(models.size());
  std::vector<const sf_model*> raw;
  for (auto& h : models) raw.push_back(h->m);

  // confusion[i][j]: true label i classified as j (only when labels resolve)
  std::vector<std::vector<int>> confusion(n_models, std::vector<int>(n_models, 0));
  bool any_labels = false;

  std::printf("%-20s %-6s %-10s", "data", "traj", "predicted");
  for (const std::string& l : labels) std::printf(" %14s", ("ll_" + l).c_str());
  std::printf("\n");

  for (const std::string& dp : data_paths) {
    DatasetHandle data;
    sf_status s = sf_dataset_load(dp.c_str(), &data.ds);
    if (s != SF_OK) return fail(s);

    int true_label = -1;
    std::string dstem = stem_of(dp);
    for (int k = 0; k < n_models; ++k)
      if (dstem.find(labels[k]) != std::string::npos) {
        true_label = true_label == -1 ? k : true_label;
        any_labels = true;
      }

    const int dim = sf_dataset_dim(data.ds);
    for (int t = 0; t < sf_dataset_count(data.ds); ++t) {
      const int len = sf_dataset_length(data.ds, t);
      std::vector<double> pts(static_cast<std::size_t>(len) * dim);
      sf_dataset_points(data.ds, t, pts.data());
      int pred = 0;
      std::vector<double> lls(n_models);
      s = sf_model_classify(raw.data(), n_models, pts.data(), len, dim, sf_dataset_dt(data.ds), &pred,
                            lls.data());
      if (s != SF_OK) return fail(s);
      std::printf("%-20s %-6d %-10s", dstem.c_str(), t, labels[pred].c_str());
      for (double ll : lls) std::printf(" %14.4f", ll);
      std::printf("\n");
      if (true_label >= 0) ++confusion[true_label][pred];
    }
  }

  if (any_labels) {
    std::printf("\nconfusion matrix (rows: true label from filename, cols: predicted)\n%-12s", "");
    for (const std::string& l : labels) std::printf(" %10s", l.c_str());
    std::printf("\n");
    for (int i = 0; i < n_models; ++i) {
      std::printf("%-12s", labels[i].c_str());
      for (int j = 0; j < n_models; ++j) std::printf(" %10d", confusion[i][j]);
      std::printf("\n");
    }
  }
  return 0;
}

// ---- field ----

int run_field(const std::string& model_path, const std::string& grid_spec, const std::string& out_path) {
  ModelHandle model;
  sf_status s = sf_model_load(model_path.c_str(), &model.m);
  if (s != SF_OK) return fail(s);
  const int dim = sf_model_dim(model.m);
  std::vector<GridAxis> axes;
  try {
    axes = parse_grid(grid_spec);
  } catch (const std::exception& e) {
    return fail_usage(e.what());
  }
  if (static_cast<int>(axes.size()) != dim)
    return fail_usage("--grid has " + std::to_string(axes.size()) + " axes, model dim is " +
                      std::to_string(dim));
  std::vector<double> lo(dim), hi(dim);
  std::vector<int> counts(dim);
  long total = 1;
  for (int i = 0; i < dim; ++i) {
    lo[i] = axes[i].lo;
    hi[i] = axes[i].hi;
    counts[i] = axes[i].count;
    total *= counts[i];
  }
  std::vector<double> out(static_cast<std::size_t>(total) * 2 * dim);
  s = sf_model_vector_field(model.m, lo.data(), hi.data(), counts.data(), out.data());
  if (s != SF_OK) return fail(s);

  std::ofstream f(out_path);
  if (!f) return fail_usage("cannot write " + out_path);
  f << "dim=" << dim << " grid=";
  for (int i = 0; i < dim; ++i) f << (i ? " " : "") << counts[i];
  f << "\n";
  char buf[64];
  for (long j = 0; j < total; ++j) {
    for (int i = 0; i < 2 * dim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", out[j * 2 * dim + i]);
      f << (i ? " " : "") << buf;
    }
    f << "\n";
  }
  std::printf("wrote %ld field rows to %s\n", total, out_path.c_str());
  return 0;
}

// ---- synth ----

int run_synth(const std::string& shape, int n, double noise, uint64_t seed, const std::string& out_path,
              double dt, int length, double omega) {
  sf_synth_options opts;
  sf_synth_options_init(&opts);
  if (dt > 0) opts.dt = dt;
  if (length > 0) opts.length = length;
  if (omega > 0) opts.omega = omega;
  DatasetHandle data;
  sf_status s = sf_dataset_synth(shape.c_str(), n, noise, seed, &opts, &data.ds);
  if (s != SF_OK) return fail(s);
  s = sf_dataset_save(data.ds, out_path.c_str());
  if (s != SF_OK) return fail(s);
  std::printf("wrote %d %s demos to %s\n", n, shape.c_str(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochflow: stable stochastic dynamics from demonstrations"};
  app.require_subcommand(1);

  // train
  TrainArgs ta;
  sf_train_config_init(&ta.cfg);
  auto* train = app.add_subcommand("train", "fit a model to a trajectory dataset");
  ta.cmd = train;
  train->add_option("--data", ta.data_path, "trajectory dataset file")->required();
  train->add_option("--latent", ta.latent, "latent dynamics: linear | cycle");
  train->add_option("--out", ta.out_path, "output model file")->required();
  train->add_option("--epochs", ta.cfg.epochs, "training epochs");
  train->add_option("--lr", ta.cfg.learning_rate, "learning rate");
  train->add_option("--smax", ta.cfg.s_max, "max conditioning stride");
  train->add_option("--seed", ta.cfg.seed, "rng seed");
  train->add_option("--flow-pairs", ta.cfg.flow_pairs, "coupling+orthogonal pairs");
  train->add_option("--hidden", ta.cfg.hidden_width, "coupling net hidden width");
  train->add_option("--clip", ta.cfg.grad_clip, "gradient norm clip");
  train->add_option("--log", ta.log_path, "training log file");
  train->add_option("--config", ta.config_path, "JSON config file (flags win)");

  // generate
  std::string g_model, g_start, g_out;
  int g_steps = 100;
  double g_noise = 0.0;
  uint64_t g_seed = 0;
  auto* gen = app.add_subcommand("generate", "roll out a trajectory from a model");
  gen->add_option("--model", g_model, "model file")->required();
  gen->add_option("--start", g_start, "start point, comma-separated")->required();
  gen->add_option("--steps", g_steps, "number of steps");
  auto* g_noise_opt = gen->add_option("--noise-scale", g_noise, "diffusion scale in [0,1]");
  auto* g_seed_opt = gen->add_option("--seed", g_seed, "rng seed");
  gen->add_option("--out", g_out, "output trajectory file")->required();
  (void)g_noise_opt;

  // eval
  std::string e_model, e_data, e_out, e_json;
  auto* eval = app.add_subcommand("eval", "reproduction metrics against demonstrations");
  eval->add_option("--model", e_model, "model file")->required();
  eval->add_option("--data", e_data, "trajectory dataset file")->required();
  eval->add_option("--out", e_out, "metric table file");
  eval->add_option("--json", e_json, "metric JSON file");

  // classify
  std::vector<std::string> c_models, c_data;
  auto* cls = app.add_subcommand("classify", "pick the most likely model per trajectory");
  cls->add_option("--models", c_models, "model files")->required()->expected(-1);
  cls->add_option("--data", c_data, "trajectory dataset files")->required()->expected(-1);

  // field
  std::string f_model, f_grid, f_out;
  auto* field = app.add_subcommand("field", "export the expected-velocity vector field on a grid");
  field->add_option("--model", f_model, "model file")->required();
  field->add_option("--grid", f_grid, "per-axis min:max:count, comma-separated")->required();
  field->add_option("--out", f_out, "output table file")->required();

  // synth
  std::string s_shape, s_out;
  int s_n = 7, s_len = 0;
  double s_noise = 0.0, s_dt = 0.0, s_omega = 0.0;
  uint64_t s_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic demonstration dataset");
  synth->add_option("--shape", s_shape, "line|sine|s-curve|circle|ellipse|lissajous")->required();
  synth->add_option("--n", s_n, "number of demonstrations");
  synth->add_option("--noise", s_noise, "position noise sigma");
  synth->add_option("--seed", s_seed, "rng seed")->required();
  synth->add_option("--out", s_out, "output dataset file")->required();
  synth->add_option("--dt", s_dt, "sampling interval");
  synth->add_option("--len", s_len, "points per demonstration");
  synth->add_option("--omega", s_omega, "cycle angular velocity");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return run_train(ta);
  if (gen->parsed())
    return run_generate(g_model, g_start, g_steps, g_noise, g_seed, g_seed_opt->count() > 0, g_out);
  if (eval->parsed()) return run_eval(e_model, e_data, e_out, e_json);
  if (cls->parsed()) return run_classify(c_models, c_data);
  if (field->parsed()) return run_field(f_model, f_grid, f_out);
  if (synth->parsed()) return run_synth(s_shape, s_n, s_noise, s_seed, s_out, s_dt, s_len, s_omega);
  return 1;
}
