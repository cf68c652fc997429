#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "isacwave/unfold.hpp"

namespace isacwave {

inline constexpr int kProducerHidden = 10;

struct MlpWeights {
  RMat w1;  // hidden x 2
  RVec b1;  // hidden
  RVec w2;  // hidden
  double b2 = 0.0;

  Eigen::Index n_params() const;
  RVec flatten() const;
  void unflatten(const RVec& w);
};

/// One trainable producer per step-size slot.  Input features are [1, layer
/// fraction]; the output passes through a softplus positivity map scaled so a
/// fresh producer reproduces its hand-tuned base value exactly (the output
/// layer starts at zero).
struct StepProducer {
  MlpWeights w;
  double scale = 1.0;  // base / softplus(0)
  double frac = 0.0;   // fixed layer-fraction feature

  static StepProducer init(double base, double layer_fraction, Rng& rng);
  double value() const;
  RVec weight_grad() const;  // d(value)/d(flattened weights)
};

/// The full learnable step-size set for one task.
struct ProducerBank {
  Task task = Task::detect;
  int T = 0, J = 0, R = 0, KL = 0;
  std::vector<StepProducer> eta;    // T*J
  std::vector<StepProducer> kappa;  // T*J
  std::vector<StepProducer> tau;    // T*J*R
  std::vector<StepProducer> zeta;   // T*J*R

  /// Fresh bank whose schedule equals `base` slot for slot.
  static ProducerBank init(Task task, const StepSchedule& base, Rng& rng);
  StepSchedule schedule() const;

  void save(const std::string& path) const;
  static ProducerBank load(const std::string& path);
};

StepSchedule produce_schedule(const ProducerBank& bank);

RVec flatten_weights(const ProducerBank& bank);
void unflatten_weights(ProducerBank& bank, const RVec& w);

struct TrainOptions {
  int spsa_iters = 4;       // probe pairs per stage
  double spsa_step = 0.15;  // weight perturbation magnitude
  double lr = 0.5;          // accepted-move length in units of spsa_step
  std::uint64_t seed = 1;
  UnfoldOptions solver;
};

struct TrainHistory {
  struct Row {
    int stage = 0;
    int step = 0;
    double loss = 0.0;
    double best = 0.0;
  };
  std::vector<Row> rows;
  double initial_loss = 0.0;  // untrained bank, full unroll
  double final_loss = 0.0;    // returned bank, full unroll
  bool rolled_back = false;   // final weights reverted to the best seen
};

/// Mean task loss (detection: -f1, estimation: f2 at the solver output) over
/// the dataset; truncate_t < 0 runs the full unroll.
double schedule_loss(Task task, const SceneConfig& cfg, const std::vector<ChannelSet>& chans,
                     const std::vector<SymbolFrame>& frames, const StepSchedule& schedule,
                     const UnfoldOptions& opts, int truncate_t = -1);

/// Stage t trains only layer t's producers on the unroll truncated after t,
/// by sign-SPSA with accept-if-improved moves; the returned bank is the best
/// full-unroll performer seen (rollback on regression).
TrainHistory train_layerwise(Task task, const SceneConfig& cfg,
                             const std::vector<ChannelSet>& chans,
                             const std::vector<SymbolFrame>& frames, ProducerBank& bank,
                             const TrainOptions& opts);

/// d(loss)/d(weights): central differences over the schedule slots chained
/// with the analytic producer jacobians.  Layout matches flatten_weights.
RVec grad_of_loss_wrt_weights(Task task, const SceneConfig& cfg,
                              const std::vector<ChannelSet>& chans,
                              const std::vector<SymbolFrame>& frames, const ProducerBank& bank,
                              const UnfoldOptions& opts, double rel_step = 1e-4);

void write_history_csv(std::ostream& os, const TrainHistory& h);

}  // namespace isacwave
