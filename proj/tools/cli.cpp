#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "isacwave/detect.hpp"
#include "isacwave/estimate.hpp"
#include "isacwave/harness.hpp"
#include "isacwave/learn.hpp"

namespace iw = isacwave;

namespace {

struct SceneArgs {
  std::string preset = "desk";
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
};

void add_scene_flags(CLI::App* cmd, SceneArgs& args) {
  cmd->add_option("--preset", args.preset, "Scene preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--config", args.config, "key=value scene config file (overrides --preset)");
  cmd->add_option("--seed", args.seed, "RNG seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
}

iw::SceneConfig make_scene(const SceneArgs& args) {
  iw::SceneConfig cfg =
      args.config.empty() ? iw::preset_config(args.preset) : iw::SceneConfig::from_file(args.config);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

iw::Task parse_task(const std::string& s) {
  if (s == "detect") return iw::Task::detect;
  if (s == "estimate") return iw::Task::estimate;
  throw CLI::ValidationError("--task must be detect or estimate");
}

nlohmann::json cvec_json(const iw::CVec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    j.push_back(v(i).real());
    j.push_back(v(i).imag());
  }
  return j;
}

int cmd_synth(const SceneArgs& scene, int count, const std::string& out) {
  const iw::SceneConfig cfg = make_scene(scene);
  iw::Rng rng(cfg.seed);
  cfg.to_file(out + "/scene.cfg");
  for (int i = 0; i < count; ++i) {
    const iw::ChannelSet ch = iw::synth_channels(cfg, rng);
    std::ostringstream name;
    name << out << "/channels_" << i << ".json";
    ch.save_json(name.str(), cfg);
  }
  std::cout << "wrote " << count << " channel set(s) and scene.cfg to " << out << "\n";
  return 0;
}

int cmd_train(const SceneArgs& scene, const std::string& task_s, int batch, int T, int J, int R,
              int spsa_iters, const std::string& out, const std::string& log) {
  const iw::SceneConfig cfg = make_scene(scene);
  const iw::Task task = parse_task(task_s);
  iw::Rng rng(cfg.seed);
  const auto chans = iw::synth_dataset(cfg, batch, rng);
  std::vector<iw::SymbolFrame> frames;
  frames.reserve(batch);
  for (int b = 0; b < batch; ++b) frames.push_back(iw::draw_symbols(cfg, rng));

  const iw::StepSchedule base = iw::hand_tuned_schedule(task, cfg, chans[0], frames[0], T, J, R);
  iw::Rng init_rng(cfg.seed + 1);
  iw::ProducerBank bank = iw::ProducerBank::init(task, base, init_rng);

  iw::TrainOptions opts;
  opts.seed = cfg.seed + 2;
  opts.spsa_iters = spsa_iters;
  opts.solver.rho = iw::hand_tuned_rho(task, cfg, chans[0], frames[0]);
  const iw::TrainHistory hist = iw::train_layerwise(task, cfg, chans, frames, bank, opts);
  bank.save(out);
  if (!log.empty()) {
    std::ofstream os(log);
    iw::write_history_csv(os, hist);
  }
  std::cout << "initial_loss=" << hist.initial_loss << "\nfinal_loss=" << hist.final_loss
            << "\nrolled_back=" << (hist.rolled_back ? 1 : 0) << "\nweights=" << out << "\n";
  return 0;
}

int cmd_solve(const SceneArgs& scene, const std::string& task_s, const std::string& scheme_s,
              const std::string& weights, int T, int J, int R, double pfa, const std::string& out,
              const std::string& trace_path) {
  const iw::SceneConfig cfg = make_scene(scene);
  const iw::Task task = parse_task(task_s);
  const iw::Scheme scheme = iw::scheme_from_string(scheme_s);

  iw::Rng rng(cfg.seed);
  iw::ChannelSet ch = iw::synth_channels(cfg, rng);
  const iw::SymbolFrame frame = iw::draw_symbols(cfg, rng);

  iw::UnfoldOptions opts;
  opts.record_trace = !trace_path.empty();
  iw::CVec x0, phi0;
  if (scheme == iw::Scheme::no_ris) {
    ch = iw::zero_ris(ch);
    opts.optimize_phi = false;
    std::tie(x0, phi0) = iw::default_init(ch, cfg);
  } else if (scheme == iw::Scheme::random_ris) {
    opts.optimize_phi = false;
    phi0.resize(cfg.N);
    std::uniform_real_distribution<double> ud(0.0, 2.0 * M_PI);
    for (int n = 0; n < cfg.N; ++n) phi0(n) = std::exp(iw::kImag * ud(rng));
    const iw::CVec beff =
        ch.h_bt + ch.G.adjoint() * (phi0.conjugate().asDiagonal() * ch.h_rt);
    const iw::CVec slot = iw::project_x(beff, cfg.power_amp());
    x0.resize(static_cast<Eigen::Index>(cfg.M) * cfg.L);
    for (int l = 0; l < cfg.L; ++l) x0.segment(l * cfg.M, cfg.M) = slot;
  } else {
    if (scheme == iw::Scheme::radar_only) opts.enforce_qos = false;
    std::tie(x0, phi0) = iw::default_init(ch, cfg);
  }

  iw::StepSchedule sched;
  if (!weights.empty()) {
    const iw::ProducerBank bank = iw::ProducerBank::load(weights);
    if (bank.task != task) throw std::runtime_error("weights file was trained for the other task");
    sched = bank.schedule();
  } else {
    sched = iw::hand_tuned_schedule(task, cfg, ch, frame, T, J, R);
  }
  opts.rho = iw::hand_tuned_rho(task, cfg, ch, frame);

  const iw::SolveResult res = iw::run_unfolded(task, cfg, ch, frame, sched, x0, phi0, opts);
  if (!trace_path.empty()) {
    std::ofstream os(trace_path);
    iw::write_trace_csv(os, res.trace);
  }

  const iw::QosMargins q = iw::ci_margin(res.x, res.phi, frame, ch, cfg);
  nlohmann::json j;
  j["task"] = task_s;
  j["scheme"] = scheme_s;
  j["seed"] = cfg.seed;
  j["max_violation"] = q.g.maxCoeff();
  if (task == iw::Task::detect) {
    const iw::CascadeOps ops = iw::build_cascade(ch, res.phi, cfg);
    const iw::DetectionReport rep = iw::detection_report(ops, res.x, cfg, pfa);
    j["sinr_db"] = 10.0 * std::log10(rep.sinr);
    j["pd"] = rep.pd;
    j["pfa"] = rep.pfa;
    std::cout << "sinr_db=" << j["sinr_db"].get<double>() << "\npd=" << rep.pd << "\n";
  } else {
    j["crb_theta_rad2"] = res.objective;
    std::cout << "crb_theta_rad2=" << res.objective << "\n";
  }
  std::cout << "max_violation=" << q.g.maxCoeff() << "\n";
  if (!out.empty()) {
    j["x"] = cvec_json(res.x);
    j["phi"] = cvec_json(res.phi);
    std::ofstream os(out);
    os << j.dump(2) << "\n";
    std::cout << "solution=" << out << "\n";
  }
  return 0;
}

int cmd_experiment(const SceneArgs& scene, iw::ExperimentSpec spec, const std::string& out,
                   const std::string& timing_out) {
  iw::SceneConfig cfg = iw::preset_config(spec.preset);
  if (!scene.config.empty()) cfg = iw::SceneConfig::from_file(scene.config);
  if (scene.seed_set) cfg.seed = scene.seed;
  const auto rows = iw::run_experiment(spec, cfg);
  if (out.empty()) {
    iw::write_results_csv(std::cout, rows);
  } else {
    std::ofstream os(out);
    iw::write_results_csv(os, rows);
    std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  }
  if (!timing_out.empty()) {
    std::ofstream os(timing_out);
    iw::write_timing_csv(os, iw::timing_report(rows));
  }
  return 0;
}

int cmd_verify(const SceneArgs& scene) {
  iw::SceneConfig cfg = make_scene(scene);
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  // Channel synthesis determinism.
  {
    iw::Rng r1(cfg.seed), r2(cfg.seed);
    const auto a = iw::synth_channels(cfg, r1);
    const auto b = iw::synth_channels(cfg, r2);
    check("synth_determinism", (a.G - b.G).norm() == 0.0 && (a.h_bt - b.h_bt).norm() == 0.0);
  }
  iw::Rng rng(cfg.seed);
  const auto ch = iw::synth_channels(cfg, rng);
  const auto frame = iw::draw_symbols(cfg, rng);
  const auto [x0, phi0] = iw::default_init(ch, cfg);

  // Warm-start feasibility of the projections.
  {
    bool ok = true;
    for (Eigen::Index i = 0; i < x0.size(); ++i)
      ok = ok && std::abs(std::abs(x0(i)) - cfg.power_amp()) < 1e-9;
    for (Eigen::Index i = 0; i < phi0.size(); ++i)
      ok = ok && std::abs(std::abs(phi0(i)) - 1.0) < 1e-9;
    check("projection_feasibility", ok);
  }

  // MVDR SINR identity.
  {
    const iw::CascadeOps ops = iw::build_cascade(ch, phi0, cfg);
    const iw::DetectionReport rep = iw::detection_report(ops, x0, cfg, 1e-4);
    const double f1 = iw::f1_value(ops, x0, cfg);
    check("mvdr_sinr_identity", std::abs(rep.sinr - cfg.xi2_0 * f1) <= 1e-9 * cfg.xi2_0 * f1);
  }

  // f1 gradient against a central finite difference in one random direction.
  {
    const iw::RealGradPair g = iw::f1_grad(x0, phi0, ch, cfg);
    iw::Rng dr(7);
    std::normal_distribution<double> nd;
    iw::RVec dx(g.x.size());
    for (Eigen::Index i = 0; i < dx.size(); ++i) dx(i) = nd(dr);
    dx.normalize();
    const double h = 1e-6 * cfg.power_amp();
    const iw::CVec xp = iw::from_real(iw::to_real(x0) + h * dx);
    const iw::CVec xm = iw::from_real(iw::to_real(x0) - h * dx);
    const double fd =
        (iw::f1_value(xp, phi0, ch, cfg) - iw::f1_value(xm, phi0, ch, cfg)) / (2.0 * h);
    const double an = g.x.dot(dx);
    check("f1_gradient_fd", std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
  }

  // Solver smoke run: finite objective, consensus residual shrinks.
  {
    const iw::StepSchedule sched = iw::hand_tuned_schedule(iw::Task::detect, cfg, ch, frame, 5, 2, 3);
    iw::UnfoldOptions opts;
    opts.rho = iw::hand_tuned_rho(iw::Task::detect, cfg, ch, frame);
    opts.record_trace = true;
    const iw::SolveResult res =
        iw::run_unfolded(iw::Task::detect, cfg, ch, frame, sched, x0, phi0, opts);
    check("solver_smoke", std::isfinite(res.objective) && !res.trace.empty());
  }

  std::cout << (failures == 0 ? "verify: all checks passed\n" : "verify: FAILURES\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint waveform and RIS phase design for ISAC via unfolded ADMM"};
  app.require_subcommand(1);

  SceneArgs scene;

  auto* synth = app.add_subcommand("synth", "Synthesize a channel dataset");
  add_scene_flags(synth, scene);
  int synth_count = 1;
  std::string synth_out = ".";
  synth->add_option("--count", synth_count, "Number of channel sets");
  synth->add_option("--out", synth_out, "Output directory");

  auto* train = app.add_subcommand("train", "Train the step-size producers");
  add_scene_flags(train, scene);
  std::string train_task = "detect", train_out = "weights.bin", train_log;
  int train_batch = 50, train_T = 6, train_J = 2, train_R = 2, train_iters = 4;
  train->add_option("--task", train_task)->check(CLI::IsMember({"detect", "estimate"}));
  train->add_option("--batch", train_batch, "Training dataset size");
  train->add_option("--T", train_T)->check(CLI::PositiveNumber);
  train->add_option("--J", train_J)->check(CLI::PositiveNumber);
  train->add_option("--R", train_R)->check(CLI::PositiveNumber);
  train->add_option("--spsa-iters", train_iters, "Probe pairs per stage");
  train->add_option("--out", train_out, "Weights output file");
  train->add_option("--log", train_log, "Training log CSV");

  auto* solve = app.add_subcommand("solve", "Solve one instance and report metrics");
  add_scene_flags(solve, scene);
  std::string solve_task = "detect", solve_scheme = "proposed_ris", solve_weights, solve_out,
              solve_trace;
  int solve_T = 12, solve_J = 2, solve_R = 3;
  double solve_pfa = 1e-4;
  solve->add_option("--task", solve_task)->check(CLI::IsMember({"detect", "estimate"}));
  solve->add_option("--scheme", solve_scheme)
      ->check(CLI::IsMember({"proposed_ris", "random_ris", "no_ris", "radar_only"}));
  solve->add_option("--weights", solve_weights, "Trained step-size weights file");
  solve->add_option("--T", solve_T)->check(CLI::PositiveNumber);
  solve->add_option("--J", solve_J)->check(CLI::PositiveNumber);
  solve->add_option("--R", solve_R)->check(CLI::PositiveNumber);
  solve->add_option("--pfa", solve_pfa, "False-alarm rate for the detection report");
  solve->add_option("--out", solve_out, "Solution JSON output");
  solve->add_option("--trace", solve_trace, "Per-layer trace CSV output");

  auto* expc = app.add_subcommand("experiment", "Run a sweep and emit result CSV");
  add_scene_flags(expc, scene);
  iw::ExperimentSpec spec;
  std::string exp_spec_file, exp_out, exp_timing_out, exp_schemes, exp_grid;
  expc->add_option("--spec", exp_spec_file, "Experiment spec file (key=value)");
  expc->add_option("--experiment", spec.experiment, "Experiment id");
  expc->add_option("--grid", exp_grid, "Comma-separated sweep values");
  expc->add_option("--schemes", exp_schemes, "Comma-separated scheme list");
  expc->add_option("--seeds", spec.n_seeds, "Seeds per cell");
  expc->add_option("--T", spec.T)->check(CLI::PositiveNumber);
  expc->add_option("--J", spec.J)->check(CLI::PositiveNumber);
  expc->add_option("--R", spec.R)->check(CLI::PositiveNumber);
  expc->add_option("--ser-trials", spec.ser_trials);
  expc->add_option("--out", exp_out, "Result CSV path (default stdout)");
  expc->add_option("--timing-out", exp_timing_out, "Aggregated timing CSV path");

  auto* verify = app.add_subcommand("verify", "Run quick built-in consistency checks");
  add_scene_flags(verify, scene);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(scene, synth_count, synth_out);
    if (train->parsed())
      return cmd_train(scene, train_task, train_batch, train_T, train_J, train_R, train_iters,
                       train_out, train_log);
    if (solve->parsed())
      return cmd_solve(scene, solve_task, solve_scheme, solve_weights, solve_T, solve_J, solve_R,
                       solve_pfa, solve_out, solve_trace);
    if (expc->parsed()) {
      if (!exp_spec_file.empty()) {
        spec = iw::ExperimentSpec::from_file(exp_spec_file);
      } else {
        spec.preset = scene.preset;
        if (!exp_grid.empty()) {
          spec.grid.clear();
          std::stringstream ss(exp_grid);
          std::string item;
          while (std::getline(ss, item, ',')) spec.grid.push_back(std::stod(item));
        }
        if (!exp_schemes.empty()) {
          spec.schemes.clear();
          std::stringstream ss(exp_schemes);
          std::string item;
          while (std::getline(ss, item, ',')) spec.schemes.push_back(iw::scheme_from_string(item));
        }
      }
      return cmd_experiment(scene, spec, exp_out, exp_timing_out);
    }
    if (verify->parsed()) return cmd_verify(scene);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
