#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>

#include "isacwave/learn.hpp"
#include "test_util.hpp"

using namespace isacwave;
using namespace isacwave::testutil;

namespace {

/// Smallest configuration that still exercises every tensor shape.
SceneConfig tiny_config() {
  SceneConfig cfg = SceneConfig::desk();
  cfg.M = 2;
  cfg.N = 4;
  cfg.K = 1;
  cfg.L = 2;
  cfg.Q = 1;
  cfg.Gamma.resize(1);
  cfg.sigma2.resize(1);
  cfg.xi2_q.resize(1);
  cfg.theta_q.resize(1);
  cfg.theta_rq.resize(1);
  cfg.d_q.resize(1);
  cfg.geometry.bs_user_m.resize(1);
  cfg.geometry.ris_user_m.resize(1);
  cfg.geometry.bs_clutter_m.resize(1);
  cfg.geometry.ris_clutter_m.resize(1);
  cfg.validate();
  return cfg;
}

struct Dataset {
  SceneConfig cfg;
  std::vector<ChannelSet> chans;
  std::vector<SymbolFrame> frames;
};

Dataset make_dataset(const SceneConfig& cfg, int n, std::uint64_t seed) {
  Dataset d;
  d.cfg = cfg;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    d.chans.push_back(synth_channels(cfg, rng));
    d.frames.push_back(draw_symbols(cfg, rng));
  }
  return d;
}

StepSchedule base_schedule(const Dataset& d, int T, int J, int R) {
  return hand_tuned_schedule(Task::detect, d.cfg, d.chans[0], d.frames[0], T, J, R);
}

}  // namespace

TEST_CASE("fresh producers reproduce the hand-tuned base schedule exactly") {
  const Dataset d = make_dataset(SceneConfig::desk(), 1, 201);
  const StepSchedule base = base_schedule(d, 3, 2, 2);
  Rng rng(202);
  const ProducerBank bank = ProducerBank::init(Task::detect, base, rng);
  const StepSchedule got = produce_schedule(bank);
  REQUIRE(got.T == base.T);
  for (size_t i = 0; i < base.eta.size(); ++i) {
    CHECK(rel_err(got.eta[i], base.eta[i]) < 1e-12);
    CHECK(rel_err(got.kappa[i], base.kappa[i]) < 1e-12);
  }
  for (size_t i = 0; i < base.tau.size(); ++i) {
    CHECK(rel_err(got.tau[i], base.tau[i]) < 1e-12);
    CHECK(rel_err(got.zeta[i], base.zeta[i]) < 1e-12);
  }
}

TEST_CASE("produced step sizes stay positive under weight perturbations") {
  const Dataset d = make_dataset(SceneConfig::desk(), 1, 203);
  Rng rng(204);
  ProducerBank bank = ProducerBank::init(Task::detect, base_schedule(d, 2, 1, 2), rng);
  RVec w = flatten_weights(bank);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    RVec wp = w;
    for (Eigen::Index i = 0; i < wp.size(); ++i) wp(i) += 2.0 * nd(rng);
    unflatten_weights(bank, wp);
    const StepSchedule s = produce_schedule(bank);
    for (const RVec& e : s.eta) CHECK(e.minCoeff() > 0.0);
    for (const RVec& e : s.kappa) CHECK(e.minCoeff() > 0.0);
    for (double t : s.tau) CHECK(t > 0.0);
    for (double z : s.zeta) CHECK(z > 0.0);
  }
}

TEST_CASE("weight flattening and file persistence round-trip") {
  const Dataset d = make_dataset(SceneConfig::desk(), 1, 205);
  Rng rng(206);
  ProducerBank bank = ProducerBank::init(Task::estimate, base_schedule(d, 2, 2, 2), rng);
  const RVec w = flatten_weights(bank);
  // Perturb, restore, and compare.
  RVec w2 = w;
  w2.array() += 0.1;
  unflatten_weights(bank, w2);
  CHECK((flatten_weights(bank) - w2).norm() == 0.0);
  unflatten_weights(bank, w);
  CHECK((flatten_weights(bank) - w).norm() == 0.0);

  const std::string path = "test_learn_bank.json";
  bank.save(path);
  const ProducerBank loaded = ProducerBank::load(path);
  std::remove(path.c_str());
  CHECK(loaded.task == bank.task);
  CHECK(loaded.T == bank.T);
  CHECK((flatten_weights(loaded) - w).norm() == 0.0);
  const StepSchedule a = produce_schedule(bank), b = produce_schedule(loaded);
  for (size_t i = 0; i < a.tau.size(); ++i) CHECK(a.tau[i] == b.tau[i]);
}

TEST_CASE("producer weight gradient matches finite differences") {
  Rng rng(207);
  StepProducer p = StepProducer::init(0.37, 0.5, rng);
  // Move off the zero-output-layer point so the gradient is generic.
  RVec w = p.w.flatten();
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) += 0.3 * nd(rng);
  p.w.unflatten(w);

  const RVec g = p.weight_grad();
  const RVec fd = fd_grad(
      [&](const RVec& z) {
        StepProducer q = p;
        q.w.unflatten(z);
        return q.value();
      },
      w, 1e-6);
  CHECK(rel_err(g, fd) < 1e-6);
}

TEST_CASE("unroll weight gradient matches finite differences on the tiny config") {
  const Dataset d = make_dataset(tiny_config(), 2, 208);
  Rng rng(209);
  ProducerBank bank = ProducerBank::init(Task::detect, base_schedule(d, 1, 1, 1), rng);
  // Generic point: nudge all weights so no producer sits at its init.
  RVec w = flatten_weights(bank);
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) += 0.05 * nd(rng);
  unflatten_weights(bank, w);

  UnfoldOptions opts;
  opts.rho = hand_tuned_rho(Task::detect, d.cfg, d.chans[0], d.frames[0]);
  const RVec g = grad_of_loss_wrt_weights(Task::detect, d.cfg, d.chans, d.frames, bank, opts);

  const RVec fd = fd_grad(
      [&](const RVec& z) {
        ProducerBank b2 = bank;
        unflatten_weights(b2, z);
        return schedule_loss(Task::detect, d.cfg, d.chans, d.frames, produce_schedule(b2), opts);
      },
      w, 1e-5);
  CHECK(rel_err(g, fd) < 1e-3);
}

TEST_CASE("layer-wise training never ends worse than the untrained bank") {
  for (Task task : {Task::detect, Task::estimate}) {
    const Dataset d = make_dataset(SceneConfig::desk(), 4, 210 + static_cast<int>(task));
    Rng rng(212);
    ProducerBank bank =
        ProducerBank::init(task, hand_tuned_schedule(task, d.cfg, d.chans[0], d.frames[0], 3, 1, 2),
                           rng);
    TrainOptions topt;
    topt.seed = 213;
    topt.spsa_iters = 2;
    topt.solver.rho = hand_tuned_rho(task, d.cfg, d.chans[0], d.frames[0]);
    const TrainHistory h =
        train_layerwise(task, d.cfg, d.chans, d.frames, bank, topt);
    CHECK(h.final_loss <= h.initial_loss + 1e-12);
    CHECK(!h.rows.empty());
    // Stages must cover every layer in order.
    CHECK(h.rows.front().stage == 0);
    CHECK(h.rows.back().stage == 2);
    // The returned bank reproduces the reported final loss.
    const double replay =
        schedule_loss(task, d.cfg, d.chans, d.frames, produce_schedule(bank), topt.solver);
    CHECK(rel_err(replay, h.final_loss) < 1e-12);
  }
}

TEST_CASE("schedule loss averages the per-instance task losses") {
  const Dataset d = make_dataset(tiny_config(), 3, 214);
  const StepSchedule s = base_schedule(d, 2, 1, 1);
  UnfoldOptions opts;
  opts.rho = hand_tuned_rho(Task::detect, d.cfg, d.chans[0], d.frames[0]);
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto [x0, phi0] = default_init(d.chans[i], d.cfg);
    acc += run_unfolded(Task::detect, d.cfg, d.chans[i], d.frames[i], s, x0, phi0, opts).objective;
  }
  CHECK(rel_err(schedule_loss(Task::detect, d.cfg, d.chans, d.frames, s, opts), acc / 3.0) <
        1e-12);
  // Truncation to the first layer matches running the truncated schedule.
  const StepSchedule s1 = truncate_schedule(s, 1);
  CHECK(rel_err(schedule_loss(Task::detect, d.cfg, d.chans, d.frames, s, opts, 1),
                schedule_loss(Task::detect, d.cfg, d.chans, d.frames, s1, opts)) < 1e-12);
}
