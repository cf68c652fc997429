#include "isacwave/learn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace isacwave {

namespace {

double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }
double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

constexpr int kIn = 2;

}  // namespace

Eigen::Index MlpWeights::n_params() const {
  return w1.size() + b1.size() + w2.size() + 1;
}

RVec MlpWeights::flatten() const {
  RVec out(n_params());
  Eigen::Index o = 0;
  for (Eigen::Index i = 0; i < w1.rows(); ++i)
    for (Eigen::Index j = 0; j < w1.cols(); ++j) out(o++) = w1(i, j);
  out.segment(o, b1.size()) = b1;
  o += b1.size();
  out.segment(o, w2.size()) = w2;
  o += w2.size();
  out(o) = b2;
  return out;
}

void MlpWeights::unflatten(const RVec& w) {
  if (w.size() != n_params()) throw std::invalid_argument("MlpWeights: size mismatch");
  Eigen::Index o = 0;
  for (Eigen::Index i = 0; i < w1.rows(); ++i)
    for (Eigen::Index j = 0; j < w1.cols(); ++j) w1(i, j) = w(o++);
  b1 = w.segment(o, b1.size());
  o += b1.size();
  w2 = w.segment(o, w2.size());
  o += w2.size();
  b2 = w(o);
}

StepProducer StepProducer::init(double base, double layer_fraction, Rng& rng) {
  if (!(base > 0.0)) throw std::invalid_argument("StepProducer: base step must be > 0");
  StepProducer p;
  p.frac = layer_fraction;
  // Xavier bound for the hidden layer; output layer starts at zero so that
  // value() == base exactly at init.
  const double bound = std::sqrt(6.0 / (kIn + kProducerHidden));
  std::uniform_real_distribution<double> ud(-bound, bound);
  p.w.w1.resize(kProducerHidden, kIn);
  for (int i = 0; i < kProducerHidden; ++i)
    for (int j = 0; j < kIn; ++j) p.w.w1(i, j) = ud(rng);
  p.w.b1 = RVec::Zero(kProducerHidden);
  p.w.w2 = RVec::Zero(kProducerHidden);
  p.w.b2 = 0.0;
  p.scale = base / softplus(0.0);
  return p;
}

double StepProducer::value() const {
  const Eigen::Vector2d in(1.0, frac);
  const RVec h = (w.w1 * in + w.b1).array().tanh();
  return scale * softplus(w.w2.dot(h) + w.b2);
}

RVec StepProducer::weight_grad() const {
  const Eigen::Vector2d in(1.0, frac);
  const RVec pre = w.w1 * in + w.b1;
  const RVec h = pre.array().tanh();
  const double out = w.w2.dot(h) + w.b2;
  const double dval = scale * sigmoid(out);

  MlpWeights g;
  const RVec dh = (w.w2.array() * (1.0 - h.array().square())).matrix();  // dout/dpre
  g.w1 = dval * dh * in.transpose();
  g.b1 = dval * dh;
  g.w2 = dval * h;
  g.b2 = dval;
  return g.flatten();
}

ProducerBank ProducerBank::init(Task task, const StepSchedule& base, Rng& rng) {
  ProducerBank b;
  b.task = task;
  b.T = base.T;
  b.J = base.J;
  b.R = base.R;
  b.KL = base.KL;
  const int tj = base.T * base.J;
  const int tjr = tj * base.R;
  const double denom_tj = std::max(1, tj - 1);
  const double denom_tjr = std::max(1, tjr - 1);
  for (int i = 0; i < tj; ++i) {
    // eta slots are per-constraint in principle; one producer per layer is
    // broadcast across the K*L entries.
    b.eta.push_back(StepProducer::init(base.eta[i](0), i / denom_tj, rng));
    b.kappa.push_back(StepProducer::init(base.kappa[i](0), i / denom_tj, rng));
  }
  for (int i = 0; i < tjr; ++i) {
    b.tau.push_back(StepProducer::init(base.tau[i], i / denom_tjr, rng));
    b.zeta.push_back(StepProducer::init(base.zeta[i], i / denom_tjr, rng));
  }
  return b;
}

StepSchedule ProducerBank::schedule() const {
  StepSchedule s;
  s.T = T;
  s.J = J;
  s.R = R;
  s.KL = KL;
  for (const auto& p : eta) s.eta.push_back(RVec::Constant(KL, p.value()));
  for (const auto& p : kappa) s.kappa.push_back(RVec::Constant(KL, p.value()));
  for (const auto& p : tau) s.tau.push_back(p.value());
  for (const auto& p : zeta) s.zeta.push_back(p.value());
  return s;
}

StepSchedule produce_schedule(const ProducerBank& bank) { return bank.schedule(); }

namespace {

std::vector<const std::vector<StepProducer>*> groups_of(const ProducerBank& b) {
  return {&b.eta, &b.kappa, &b.tau, &b.zeta};
}
std::vector<std::vector<StepProducer>*> groups_of(ProducerBank& b) {
  return {&b.eta, &b.kappa, &b.tau, &b.zeta};
}

}  // namespace

RVec flatten_weights(const ProducerBank& bank) {
  std::vector<double> buf;
  for (const auto* g : groups_of(bank))
    for (const auto& p : *g) {
      const RVec w = p.w.flatten();
      buf.insert(buf.end(), w.data(), w.data() + w.size());
    }
  return Eigen::Map<RVec>(buf.data(), static_cast<Eigen::Index>(buf.size()));
}

void unflatten_weights(ProducerBank& bank, const RVec& w) {
  Eigen::Index o = 0;
  for (auto* g : groups_of(bank))
    for (auto& p : *g) {
      const Eigen::Index n = p.w.n_params();
      if (o + n > w.size()) throw std::invalid_argument("unflatten_weights: size mismatch");
      p.w.unflatten(w.segment(o, n));
      o += n;
    }
  if (o != w.size()) throw std::invalid_argument("unflatten_weights: size mismatch");
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

constexpr char kMagic[4] = {'I', 'S', 'W', 'B'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void ProducerBank::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write weights file " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, task == Task::detect ? 0 : 1);
  put_u32(os, T);
  put_u32(os, J);
  put_u32(os, R);
  put_u32(os, KL);
  put_u32(os, kProducerHidden);
  for (const auto* g : groups_of(*this))
    for (const auto& p : *g) {
      put_f64(os, p.scale);
      put_f64(os, p.frac);
      const RVec w = p.w.flatten();
      for (Eigen::Index i = 0; i < w.size(); ++i) put_f64(os, w(i));
    }
}

ProducerBank ProducerBank::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open weights file " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad weights file magic in " + path);
  if (get_u32(is) != kVersion) throw std::runtime_error("unsupported weights version in " + path);
  ProducerBank b;
  b.task = get_u32(is) == 0 ? Task::detect : Task::estimate;
  b.T = static_cast<int>(get_u32(is));
  b.J = static_cast<int>(get_u32(is));
  b.R = static_cast<int>(get_u32(is));
  b.KL = static_cast<int>(get_u32(is));
  if (get_u32(is) != static_cast<std::uint32_t>(kProducerHidden))
    throw std::runtime_error("hidden-width mismatch in " + path);
  const int tj = b.T * b.J;
  const int tjr = tj * b.R;
  auto read_producer = [&]() {
    StepProducer p;
    p.scale = get_f64(is);
    p.frac = get_f64(is);
    p.w.w1.resize(kProducerHidden, kIn);
    p.w.b1.resize(kProducerHidden);
    p.w.w2.resize(kProducerHidden);
    RVec w(p.w.n_params());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = get_f64(is);
    p.w.unflatten(w);
    return p;
  };
  for (int i = 0; i < tj; ++i) b.eta.push_back(read_producer());
  for (int i = 0; i < tj; ++i) b.kappa.push_back(read_producer());
  for (int i = 0; i < tjr; ++i) b.tau.push_back(read_producer());
  for (int i = 0; i < tjr; ++i) b.zeta.push_back(read_producer());
  if (!is) throw std::runtime_error("truncated weights file " + path);
  return b;
}

double schedule_loss(Task task, const SceneConfig& cfg, const std::vector<ChannelSet>& chans,
                     const std::vector<SymbolFrame>& frames, const StepSchedule& schedule,
                     const UnfoldOptions& opts, int truncate_t) {
  if (chans.empty() || chans.size() != frames.size())
    throw std::invalid_argument("schedule_loss: dataset and frames must be nonempty and equal");
  const StepSchedule s = truncate_t < 0 ? schedule : truncate_schedule(schedule, truncate_t);
  double sum = 0.0;
  for (std::size_t b = 0; b < chans.size(); ++b) {
    const auto [x0, phi0] = default_init(chans[b], cfg);
    sum += run_unfolded(task, cfg, chans[b], frames[b], s, x0, phi0, opts).objective;
  }
  return sum / static_cast<double>(chans.size());
}

TrainHistory train_layerwise(Task task, const SceneConfig& cfg,
                             const std::vector<ChannelSet>& chans,
                             const std::vector<SymbolFrame>& frames, ProducerBank& bank,
                             const TrainOptions& opts) {
  TrainHistory hist;
  const auto eval = [&](int truncate_t) {
    return schedule_loss(task, cfg, chans, frames, bank.schedule(), opts.solver, truncate_t);
  };
  hist.initial_loss = eval(-1);
  RVec best_full_w = flatten_weights(bank);
  double best_full = hist.initial_loss;

  Rng rng(opts.seed);
  std::uniform_int_distribution<int> coin(0, 1);

  for (int t = 0; t < bank.T; ++t) {
    // Stage t: producers of outer layer t only, unroll truncated after t.
    std::vector<StepProducer*> stage;
    for (int j = 0; j < bank.J; ++j) {
      stage.push_back(&bank.eta[t * bank.J + j]);
      stage.push_back(&bank.kappa[t * bank.J + j]);
      for (int r = 0; r < bank.R; ++r) {
        stage.push_back(&bank.tau[(t * bank.J + j) * bank.R + r]);
        stage.push_back(&bank.zeta[(t * bank.J + j) * bank.R + r]);
      }
    }
    auto get_stage_w = [&]() {
      std::vector<double> buf;
      for (auto* p : stage) {
        const RVec w = p->w.flatten();
        buf.insert(buf.end(), w.data(), w.data() + w.size());
      }
      return Eigen::Map<RVec>(buf.data(), static_cast<Eigen::Index>(buf.size())).eval();
    };
    auto set_stage_w = [&](const RVec& w) {
      Eigen::Index o = 0;
      for (auto* p : stage) {
        p->w.unflatten(w.segment(o, p->w.n_params()));
        o += p->w.n_params();
      }
    };

    RVec w = get_stage_w();
    double best = eval(t + 1);
    hist.rows.push_back({t, 0, best, best});
    for (int it = 1; it <= opts.spsa_iters; ++it) {
      RVec delta(w.size());
      for (Eigen::Index i = 0; i < w.size(); ++i) delta(i) = coin(rng) ? 1.0 : -1.0;
      set_stage_w(w + opts.spsa_step * delta);
      const double lp = eval(t + 1);
      set_stage_w(w - opts.spsa_step * delta);
      const double lm = eval(t + 1);
      // Sign-SPSA move: scale-free in the loss, accepted only on improvement.
      const RVec cand = w - opts.lr * opts.spsa_step * ((lp < lm) ? -1.0 : 1.0) * delta;
      set_stage_w(cand);
      const double lc = eval(t + 1);
      if (lc < best) {
        best = lc;
        w = cand;
      } else {
        set_stage_w(w);
      }
      hist.rows.push_back({t, it, lc, best});
    }
    const double full = eval(-1);
    if (full < best_full) {
      best_full = full;
      best_full_w = flatten_weights(bank);
    }
  }

  const double final_full = eval(-1);
  if (final_full > best_full) {
    unflatten_weights(bank, best_full_w);
    hist.rolled_back = true;
    hist.final_loss = best_full;
  } else {
    hist.final_loss = final_full;
  }
  return hist;
}

RVec grad_of_loss_wrt_weights(Task task, const SceneConfig& cfg,
                              const std::vector<ChannelSet>& chans,
                              const std::vector<SymbolFrame>& frames, const ProducerBank& bank,
                              const UnfoldOptions& opts, double rel_step) {
  const StepSchedule base = bank.schedule();
  const auto loss_of = [&](const StepSchedule& s) {
    return schedule_loss(task, cfg, chans, frames, s, opts, -1);
  };

  std::vector<double> grad;
  const auto groups = groups_of(bank);
  int group_idx = 0;
  for (const auto* g : groups) {
    for (std::size_t i = 0; i < g->size(); ++i) {
      const StepProducer& p = (*g)[i];
      const double v = p.value();
      const double h = rel_step * v;
      StepSchedule sp = base, sm = base;
      switch (group_idx) {
        case 0:
          sp.eta[i] = RVec::Constant(bank.KL, v + h);
          sm.eta[i] = RVec::Constant(bank.KL, v - h);
          break;
        case 1:
          sp.kappa[i] = RVec::Constant(bank.KL, v + h);
          sm.kappa[i] = RVec::Constant(bank.KL, v - h);
          break;
        case 2:
          sp.tau[i] = v + h;
          sm.tau[i] = v - h;
          break;
        default:
          sp.zeta[i] = v + h;
          sm.zeta[i] = v - h;
          break;
      }
      const double dloss_dstep = (loss_of(sp) - loss_of(sm)) / (2.0 * h);
      const RVec wg = dloss_dstep * p.weight_grad();
      grad.insert(grad.end(), wg.data(), wg.data() + wg.size());
    }
    ++group_idx;
  }
  return Eigen::Map<RVec>(grad.data(), static_cast<Eigen::Index>(grad.size()));
}

void write_history_csv(std::ostream& os, const TrainHistory& h) {
  os << "stage,step,loss,best\n";
  for (const auto& r : h.rows)
    os << r.stage << ',' << r.step << ',' << r.loss << ',' << r.best << '\n';
}

}  // namespace isacwave
