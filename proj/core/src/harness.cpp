#include "isacwave/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "isacwave/detect.hpp"
#include "isacwave/estimate.hpp"

namespace isacwave {

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::proposed_ris: return "proposed_ris";
    case Scheme::random_ris: return "random_ris";
    case Scheme::no_ris: return "no_ris";
    case Scheme::radar_only: return "radar_only";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "proposed_ris") return Scheme::proposed_ris;
  if (name == "random_ris") return Scheme::random_ris;
  if (name == "no_ris") return Scheme::no_ris;
  if (name == "radar_only") return Scheme::radar_only;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

void ExperimentSpec::validate() const {
  static const char* known[] = {"sinr_vs_power", "sinr_vs_N", "sinr_vs_gamma", "roc",
                                "crb_vs_power", "crb_vs_gamma", "ser_vs_gamma", "timing"};
  bool ok = false;
  for (const char* k : known) ok = ok || experiment == k;
  if (!ok) throw std::invalid_argument("unknown experiment '" + experiment + "'");
  if (schemes.empty()) throw std::invalid_argument("experiment needs at least one scheme");
  if (n_seeds < 1) throw std::invalid_argument("experiment needs at least one seed");
  if (preset != "desk" && preset != "paper")
    throw std::invalid_argument("preset must be desk or paper");
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open experiment spec " + path);
  ExperimentSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "experiment") spec.experiment = val;
    else if (key == "preset") spec.preset = val;
    else if (key == "seeds") spec.n_seeds = std::stoi(val);
    else if (key == "T") spec.T = std::stoi(val);
    else if (key == "J") spec.J = std::stoi(val);
    else if (key == "R") spec.R = std::stoi(val);
    else if (key == "ser_trials") spec.ser_trials = std::stol(val);
    else if (key == "grid") {
      spec.grid.clear();
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) spec.grid.push_back(std::stod(item));
    } else if (key == "schemes") {
      spec.schemes.clear();
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) spec.schemes.push_back(scheme_from_string(item));
    }
  }
  spec.validate();
  return spec;
}

ChannelSet zero_ris(const ChannelSet& ch) {
  ChannelSet out = ch;
  out.G.setZero();
  for (auto& h : out.h_rk) h.setZero();
  out.h_rt.setZero();
  for (auto& h : out.h_rq) h.setZero();
  return out;
}

Task experiment_task(const std::string& experiment) {
  if (experiment == "crb_vs_power" || experiment == "crb_vs_gamma") return Task::estimate;
  return Task::detect;
}

SceneConfig preset_config(const std::string& preset) {
  if (preset == "desk") return SceneConfig::desk();
  if (preset == "paper") return SceneConfig::paper();
  throw std::invalid_argument("preset must be desk or paper");
}

namespace {

std::vector<double> default_grid(const std::string& experiment) {
  if (experiment == "sinr_vs_power" || experiment == "crb_vs_power")
    return {14.0, 17.0, 20.0};  // dBW
  if (experiment == "sinr_vs_N" || experiment == "timing") return {8.0, 16.0, 32.0};
  if (experiment == "sinr_vs_gamma" || experiment == "crb_vs_gamma" ||
      experiment == "ser_vs_gamma")
    return {6.0, 10.0, 14.0};  // dB
  if (experiment == "roc") return {1e-4, 1e-3, 1e-2, 1e-1};
  return {};
}

void apply_sweep(SceneConfig& cfg, const std::string& experiment, double v) {
  if (experiment == "sinr_vs_power" || experiment == "crb_vs_power") {
    cfg.P = std::pow(10.0, v / 10.0);
  } else if (experiment == "sinr_vs_N" || experiment == "timing") {
    cfg.N = static_cast<int>(v);
  } else if (experiment == "sinr_vs_gamma" || experiment == "crb_vs_gamma" ||
             experiment == "ser_vs_gamma") {
    cfg.Gamma.assign(cfg.K, std::pow(10.0, v / 10.0));
  }
  // roc sweeps the false-alarm rate; the scene is unchanged.
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const SceneConfig& base) {
  spec.validate();
  const std::vector<double> grid = spec.grid.empty() ? default_grid(spec.experiment) : spec.grid;
  const Task task = experiment_task(spec.experiment);

  std::vector<ResultRow> rows;
  for (Scheme scheme : spec.schemes) {
    for (double v : grid) {
      for (int s = 0; s < spec.n_seeds; ++s) {
        SceneConfig cfg = base;
        apply_sweep(cfg, spec.experiment, v);
        cfg.seed = base.seed + static_cast<std::uint64_t>(s);
        cfg.validate();

        ResultRow row;
        row.experiment = spec.experiment;
        row.scheme = scheme_name(scheme);
        row.sweep = v;
        row.seed = cfg.seed;

        const auto t0 = std::chrono::steady_clock::now();
        try {
          Rng rng(cfg.seed);
          ChannelSet ch = synth_channels(cfg, rng);
          const SymbolFrame frame = draw_symbols(cfg, rng);

          UnfoldOptions opts;
          CVec x0, phi0;
          if (scheme == Scheme::no_ris) {
            ch = zero_ris(ch);
            opts.optimize_phi = false;
            std::tie(x0, phi0) = default_init(ch, cfg);
          } else if (scheme == Scheme::random_ris) {
            opts.optimize_phi = false;
            phi0.resize(cfg.N);
            std::uniform_real_distribution<double> ud(0.0, 2.0 * M_PI);
            for (int n = 0; n < cfg.N; ++n) phi0(n) = std::exp(kImag * ud(rng));
            // Matched per-slot beam under the frozen random phase.
            const CVec beff =
                ch.h_bt + ch.G.adjoint() * (phi0.conjugate().asDiagonal() * ch.h_rt);
            const CVec slot = project_x(beff, cfg.power_amp());
            x0.resize(static_cast<Eigen::Index>(cfg.M) * cfg.L);
            for (int l = 0; l < cfg.L; ++l) x0.segment(l * cfg.M, cfg.M) = slot;
          } else {
            if (scheme == Scheme::radar_only) opts.enforce_qos = false;
            std::tie(x0, phi0) = default_init(ch, cfg);
          }

          const StepSchedule sched =
              hand_tuned_schedule(task, cfg, ch, frame, spec.T, spec.J, spec.R);
          opts.rho = hand_tuned_rho(task, cfg, ch, frame);
          const SolveResult res = run_unfolded(task, cfg, ch, frame, sched, x0, phi0, opts);

          if (task == Task::estimate) {
            row.metric = res.objective;  // CRB on the DoAs, rad^2
          } else if (spec.experiment == "roc") {
            const CascadeOps ops = build_cascade(ch, res.phi, cfg);
            row.metric = detection_report(ops, res.x, cfg, v).pd;
          } else if (spec.experiment == "ser_vs_gamma") {
            row.metric = simulate_ser(res.x, res.phi, frame, ch, cfg, spec.ser_trials, rng).average;
          } else if (spec.experiment == "timing") {
            row.metric = 0.0;  // filled below from wall time
          } else {
            row.metric = 10.0 * std::log10(cfg.xi2_0 * (-res.objective));  // output SINR, dB
          }
        } catch (const std::exception&) {
          row.failed = true;
          row.metric = std::nan("");
        }
        row.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (spec.experiment == "timing" && !row.failed) row.metric = row.wall_time_s;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<TimingCell> timing_report(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, double>, std::vector<double>> cells;
  for (const auto& r : rows)
    if (!r.failed) cells[{r.scheme, r.sweep}].push_back(r.wall_time_s);
  std::vector<TimingCell> out;
  for (const auto& [key, times] : cells) {
    TimingCell c;
    c.scheme = key.first;
    c.sweep = key.second;
    c.reps = static_cast<int>(times.size());
    double sum = 0.0;
    for (double t : times) sum += t;
    c.mean_s = sum / c.reps;
    double ss = 0.0;
    for (double t : times) ss += (t - c.mean_s) * (t - c.mean_s);
    c.std_s = c.reps > 1 ? std::sqrt(ss / (c.reps - 1)) : 0.0;
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "experiment,scheme,sweep,metric,seed,wall_time_s\n";
  for (const auto& r : rows)
    os << r.experiment << ',' << r.scheme << ',' << fmt(r.sweep) << ',' << fmt(r.metric) << ','
       << r.seed << ',' << fmt(r.wall_time_s) << '\n';
}

void write_timing_csv(std::ostream& os, const std::vector<TimingCell>& cells) {
  os << "scheme,sweep,mean_s,std_s,reps\n";
  for (const auto& c : cells)
    os << c.scheme << ',' << fmt(c.sweep) << ',' << fmt(c.mean_s) << ',' << fmt(c.std_s) << ','
       << c.reps << '\n';
}

}  // namespace isacwave
