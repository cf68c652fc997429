#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "isacwave/learn.hpp"

namespace isacwave {

enum class Scheme { proposed_ris, random_ris, no_ris, radar_only };

const char* scheme_name(Scheme s);
Scheme scheme_from_string(const std::string& name);

struct ExperimentSpec {
  std::string experiment = "sinr_vs_power";  // sinr_vs_power | sinr_vs_N | sinr_vs_gamma |
                                             // roc | crb_vs_power | crb_vs_gamma |
                                             // ser_vs_gamma | timing
  std::vector<double> grid;                  // empty: per-experiment default
  std::vector<Scheme> schemes = {Scheme::proposed_ris, Scheme::random_ris, Scheme::no_ris};
  int n_seeds = 5;
  std::string preset = "desk";
  int T = 12, J = 2, R = 3;  // solver budget
  long ser_trials = 100000;

  static ExperimentSpec from_file(const std::string& path);
  void validate() const;
};

struct ResultRow {
  std::string experiment;
  std::string scheme;
  double sweep = 0.0;
  double metric = 0.0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  bool failed = false;
};

/// Removes every RIS-side channel; the solver then shapes x only.
ChannelSet zero_ris(const ChannelSet& ch);

Task experiment_task(const std::string& experiment);

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const SceneConfig& base);

/// Aggregates timing rows into (scheme, sweep, mean, stddev, reps).
struct TimingCell {
  std::string scheme;
  double sweep = 0.0;
  double mean_s = 0.0;
  double std_s = 0.0;
  int reps = 0;
};
std::vector<TimingCell> timing_report(const std::vector<ResultRow>& rows);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_timing_csv(std::ostream& os, const std::vector<TimingCell>& cells);

/// Config preset lookup used by the CLI: "desk" or "paper".
SceneConfig preset_config(const std::string& preset);

}  // namespace isacwave
