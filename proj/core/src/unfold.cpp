#include "isacwave/unfold.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "isacwave/detect.hpp"

namespace isacwave {

StepSchedule StepSchedule::constant(int T, int J, int R, int KL, double eta0, double kappa0,
                                    double tau0, double zeta0) {
  StepSchedule s;
  s.T = T;
  s.J = J;
  s.R = R;
  s.KL = KL;
  s.eta.assign(static_cast<std::size_t>(T) * J, RVec::Constant(KL, eta0));
  s.kappa.assign(static_cast<std::size_t>(T) * J, RVec::Constant(KL, kappa0));
  s.tau.assign(static_cast<std::size_t>(T) * J * R, tau0);
  s.zeta.assign(static_cast<std::size_t>(T) * J * R, zeta0);
  return s;
}

RVec alm_dual_update(const RVec& beta, const RVec& eta_layer, const RMat& g) {
  const int kk = static_cast<int>(g.rows());
  const int ll = static_cast<int>(g.cols());
  RVec out(beta.size());
  for (int k = 0; k < kk; ++k)
    for (int l = 0; l < ll; ++l)
      out(k * ll + l) = std::max(beta(k * ll + l) + eta_layer(k * ll + l) * g(k, l), 0.0);
  return out;
}

RVec phr_dual_update(const RVec& beta, const RVec& eta_layer, const RMat& g) {
  return alm_dual_update(beta, eta_layer, g);
}

double lagrangian_value(Task task, DualMode mode, double objective_value, const RMat& g,
                        const RVec& beta, const RVec& eta_layer, double rho,
                        const CVec& z, const CVec& aux, const CVec& mu) {
  (void)task;
  double val = objective_value + 0.5 * rho * (z - aux + mu / rho).squaredNorm();
  const int ll = static_cast<int>(g.cols());
  for (int k = 0; k < g.rows(); ++k) {
    for (int l = 0; l < ll; ++l) {
      const int i = k * ll + l;
      if (mode == DualMode::alm) {
        val += beta(i) * g(k, l);
      } else {
        const double e = eta_layer(i);
        if (e > 0.0) {
          const double h = std::max(e * g(k, l) + beta(i), 0.0);
          val += h * h / (2.0 * e);
        }
      }
    }
  }
  return val;
}

namespace {

Complex unit_phase(Complex z) {
  const double a = std::abs(z);
  return a > 0.0 ? z / a : Complex(1.0, 0.0);
}

}  // namespace

CVec project_x(const CVec& x, double amp) {
  CVec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = amp * unit_phase(x(i));
  return out;
}

CVec project_phi(const CVec& phi) {
  CVec out(phi.size());
  for (Eigen::Index i = 0; i < phi.size(); ++i) out(i) = unit_phase(phi(i));
  return out;
}

CVec closed_form_v(const CVec& x, const CVec& mu1, double rho, double amp) {
  return project_x(rho * x + mu1, amp);
}

CVec closed_form_varphi(const CVec& phi, const CVec& mu2, double rho) {
  return project_phi(rho * phi + mu2);
}

RVec dfp_step(const DfpState& state, const RVec& grad, double step, const RVec& iterate) {
  return iterate - step * (state.b * grad);
}

void dfp_matrix_update(DfpState& state, const RVec& y, const RVec& delta_step, double grad_norm) {
  const double dd = delta_step.squaredNorm();
  if (dd <= 0.0) return;
  const double yd = y.dot(delta_step);
  // Curvature safeguard: a flat or indefinite secant pair keeps the previous B.
  if (yd / dd <= grad_norm) return;
  const RVec by = state.b * y;
  const double yby = y.dot(by);
  if (yby < 1e-30 || yd * yd < 1e-30) return;
  state.b -= (by * by.transpose()) / yby;
  state.b += (delta_step * delta_step.transpose()) / yd;
  state.b = 0.5 * (state.b + state.b.transpose()).eval();
}

namespace {

class DetectionObjective : public TaskObjective {
 public:
  DetectionObjective(const ChannelSet& ch, const SceneConfig& cfg) : ch_(ch), cfg_(cfg) {}

  void set_phi(const CVec& phi) override { ops_ = build_cascade(ch_, phi, cfg_); }

  double value(const CVec& x) const override { return -f1_value(ops_, x, cfg_); }

  RealGradPair grad(const CVec& x) const override {
    RealGradPair g = f1_grad(ops_, x, cfg_);
    g.x = -g.x;
    g.phi = -g.phi;
    return g;
  }

 private:
  const ChannelSet& ch_;
  const SceneConfig& cfg_;
  CascadeOps ops_;
};

class EstimationObjective : public TaskObjective {
 public:
  EstimationObjective(const ChannelSet& ch, const SceneConfig& cfg)
      : ch_(ch), cfg_(cfg), alpha0_(nominal_alpha0(cfg)) {}

  void set_phi(const CVec& phi) override {
    ops_ = build_cascade(ch_, phi, cfg_);
    derivs_ = cascade_derivs(ch_, phi, cfg_);
  }

  double value(const CVec& x) const override {
    return f2_value(ops_, derivs_, x, cfg_, alpha0_);
  }

  RealGradPair grad(const CVec& x) const override {
    return f2_grad(ops_, derivs_, x, cfg_, alpha0_);
  }

 private:
  const ChannelSet& ch_;
  const SceneConfig& cfg_;
  Complex alpha0_;
  CascadeOps ops_;
  CascadeDerivs derivs_;
};

}  // namespace

std::unique_ptr<TaskObjective> make_objective(Task task, const ChannelSet& ch,
                                              const SceneConfig& cfg) {
  if (task == Task::detect) return std::make_unique<DetectionObjective>(ch, cfg);
  return std::make_unique<EstimationObjective>(ch, cfg);
}

std::pair<CVec, CVec> default_init(const ChannelSet& ch, const SceneConfig& cfg) {
  // phi_n cancels the phase of the n-th cascaded BS-RIS-target term so the
  // reflected path adds coherently with the direct one.
  CVec phi(cfg.N);
  for (int n = 0; n < cfg.N; ++n) {
    const CVec g_n = ch.G.row(n).conjugate().transpose() * ch.h_rt(n);
    phi(n) = std::conj(unit_phase(ch.h_bt.dot(g_n)));
  }
  // Matched per-slot beam toward the target under that phi.
  const CVec beff = ch.h_bt + ch.G.adjoint() * (phi.conjugate().asDiagonal() * ch.h_rt);
  const CVec slot = project_x(beff, cfg.power_amp());
  CVec x(static_cast<Eigen::Index>(cfg.M) * cfg.L);
  for (int l = 0; l < cfg.L; ++l) x.segment(l * cfg.M, cfg.M) = slot;
  return {x, phi};
}

namespace {

struct LoopContext {
  Task task;
  DualMode mode;
  const SceneConfig& cfg;
  const ChannelSet& ch;
  const SymbolFrame& frame;
  const UnfoldOptions& opts;
  TaskObjective* obj;
  std::vector<TraceEntry>* trace;
};

/// ALM weight is beta itself; PHR weight is max{eta*g + beta, 0}.
double constraint_weight(DualMode mode, double beta, double eta, double g) {
  if (mode == DualMode::alm) return beta;
  return std::max(eta * g + beta, 0.0);
}

void add_constraint_grad_x(RVec& grad, const CiGradients& cig, const RMat& g, const RVec& beta,
                           const RVec& eta_layer, DualMode mode, int m, int big_l) {
  const int ml = m * big_l;
  for (int k = 0; k < g.rows(); ++k) {
    for (int l = 0; l < big_l; ++l) {
      const int i = k * big_l + l;
      const double w = constraint_weight(mode, beta(i), eta_layer(i), g(k, l));
      if (w == 0.0) continue;
      const CVec& c = cig.dx_coef[k][l];
      grad.segment(l * m, m) += w * c.real();
      grad.segment(ml + l * m, m) -= w * c.imag();
    }
  }
}

void add_constraint_grad_phi(RVec& grad, const CiGradients& cig, const RMat& g, const RVec& beta,
                             const RVec& eta_layer, DualMode mode, int n, int big_l) {
  for (int k = 0; k < g.rows(); ++k) {
    for (int l = 0; l < big_l; ++l) {
      const int i = k * big_l + l;
      const double w = constraint_weight(mode, beta(i), eta_layer(i), g(k, l));
      if (w == 0.0) continue;
      const CVec& c = cig.dphi_coef[k][l];
      grad.head(n) += w * c.real();
      grad.tail(n) -= w * c.imag();
    }
  }
}

}  // namespace

RealGradPair lagrangian_grad(Task task, DualMode mode, TaskObjective& obj, const AdmmState& st,
                             const SymbolFrame& frame, const ChannelSet& ch,
                             const SceneConfig& cfg, const RVec& eta_layer, bool enforce_qos) {
  (void)task;
  obj.set_phi(st.phi);
  RealGradPair grad = obj.grad(st.x);
  grad.x += st.rho * to_real(st.x - st.v + st.mu1 / st.rho);
  grad.phi += st.rho * to_real(st.phi - st.varphi + st.mu2 / st.rho);
  if (enforce_qos) {
    const QosMargins q = ci_margin(st.x, st.phi, frame, ch, cfg);
    const CiGradients cig = ci_margin_grad(st.x, st.phi, frame, ch, cfg);
    add_constraint_grad_x(grad.x, cig, q.g, st.beta, eta_layer, mode, cfg.M, cfg.L);
    add_constraint_grad_phi(grad.phi, cig, q.g, st.beta, eta_layer, mode, cfg.N, cfg.L);
  }
  return grad;
}

namespace {

void record(const LoopContext& ctx, const AdmmState& st, int t, Phase phase, int j, int r,
            double objective) {
  if (!std::isfinite(objective)) {
    std::ostringstream msg;
    msg << "unfolded solver: non-finite objective " << objective << " at layer t=" << t
        << " phase=" << static_cast<int>(phase) << " j=" << j << " r=" << r;
    throw UnfoldAbort(msg.str(), ctx.trace ? *ctx.trace : std::vector<TraceEntry>{});
  }
  if (!ctx.trace) return;
  TraceEntry e;
  e.t = t;
  e.phase = phase;
  e.j = j;
  e.r = r;
  e.objective = objective;
  e.residual_x = (st.x - st.v).norm();
  e.residual_phi = (st.phi - st.varphi).norm();
  if (ctx.opts.enforce_qos) {
    const QosMargins q = ci_margin(st.x, st.phi, ctx.frame, ctx.ch, ctx.cfg);
    e.max_violation = q.g.maxCoeff();
  }
  ctx.trace->push_back(e);
}

}  // namespace

SolveResult run_unfolded(Task task, const SceneConfig& cfg, const ChannelSet& ch,
                         const SymbolFrame& frame, const StepSchedule& schedule,
                         const CVec& x0, const CVec& phi0, const UnfoldOptions& opts) {
  const int m = cfg.M, n = cfg.N, big_l = cfg.L;
  const int ml = m * big_l;
  const int kl = cfg.K * big_l;
  if (schedule.KL != kl) throw std::invalid_argument("run_unfolded: schedule KL mismatch");
  if (x0.size() != ml || phi0.size() != n)
    throw std::invalid_argument("run_unfolded: initial point dimension mismatch");
  const DualMode mode =
      opts.dual_mode.value_or(task == Task::detect ? DualMode::alm : DualMode::phr);
  const double amp = cfg.power_amp();

  AdmmState st;
  st.x = project_x(x0, amp);
  st.phi = project_phi(phi0);
  st.v = st.x;
  st.varphi = st.phi;
  st.mu1 = CVec::Zero(ml);
  st.mu2 = CVec::Zero(n);
  st.beta = RVec::Zero(kl);
  st.rho = opts.rho;

  std::vector<TraceEntry> trace;
  auto obj = make_objective(task, ch, cfg);
  LoopContext ctx{task, mode, cfg, ch, frame, opts,
                  obj.get(), opts.record_trace ? &trace : nullptr};
  const RVec zero_eta = RVec::Zero(kl);

  for (int t = 0; t < schedule.T; ++t) {
    // --- x subproblem ---
    obj->set_phi(st.phi);
    if (!opts.beta_carry_over) st.beta.setZero();
    for (int j = 0; j < schedule.J; ++j) {
      const RVec& eta = opts.enforce_qos ? schedule.eta_at(t, j) : zero_eta;
      if (opts.enforce_qos) {
        const QosMargins q = ci_margin(st.x, st.phi, frame, ch, cfg);
        st.beta = alm_dual_update(st.beta, eta, q.g);
      }
      DfpState dfp(2 * ml);
      RVec prev_z, prev_grad;
      for (int r = 0; r < schedule.R; ++r) {
        const RVec z = to_real(st.x);
        const RVec grad =
            lagrangian_grad(task, mode, *obj, st, frame, ch, cfg, eta, opts.enforce_qos).x;
        if (r > 0) dfp_matrix_update(dfp, grad - prev_grad, z - prev_z, prev_grad.norm());
        st.x = project_x(from_real(dfp_step(dfp, grad, schedule.tau_at(t, j, r), z)), amp);
        prev_z = z;
        prev_grad = grad;
        record(ctx, st, t, Phase::x_update, j, r, obj->value(st.x));
      }
    }
    st.v = closed_form_v(st.x, st.mu1, st.rho, amp);
    record(ctx, st, t, Phase::v_update, -1, -1, obj->value(st.x));

    // --- phi subproblem ---
    if (opts.optimize_phi) {
      if (!opts.beta_carry_over) st.beta.setZero();
      for (int j = 0; j < schedule.J; ++j) {
        const RVec& kap = opts.enforce_qos ? schedule.kappa_at(t, j) : zero_eta;
        if (opts.enforce_qos) {
          const QosMargins q = ci_margin(st.x, st.phi, frame, ch, cfg);
          st.beta = alm_dual_update(st.beta, kap, q.g);
        }
        DfpState dfp(2 * n);
        RVec prev_z, prev_grad;
        for (int r = 0; r < schedule.R; ++r) {
          const RVec z = to_real(st.phi);
          const RVec grad =
              lagrangian_grad(task, mode, *obj, st, frame, ch, cfg, kap, opts.enforce_qos).phi;
          if (r > 0) dfp_matrix_update(dfp, grad - prev_grad, z - prev_z, prev_grad.norm());
          st.phi = project_phi(from_real(dfp_step(dfp, grad, schedule.zeta_at(t, j, r), z)));
          prev_z = z;
          prev_grad = grad;
          obj->set_phi(st.phi);
          record(ctx, st, t, Phase::phi_update, j, r, obj->value(st.x));
        }
      }
      st.varphi = closed_form_varphi(st.phi, st.mu2, st.rho);
      record(ctx, st, t, Phase::varphi_update, -1, -1, obj->value(st.x));
    }

    st.mu1 += st.rho * (st.x - st.v);
    st.mu2 += st.rho * (st.phi - st.varphi);
    record(ctx, st, t, Phase::mu_update, -1, -1, obj->value(st.x));
  }

  SolveResult res;
  res.x = st.x;
  res.phi = st.phi;
  obj->set_phi(st.phi);
  res.objective = obj->value(res.x);
  res.residual_x = (st.x - st.v).cwiseAbs().maxCoeff();
  res.residual_phi = (st.phi - st.varphi).cwiseAbs().maxCoeff();
  if (opts.enforce_qos)
    res.max_violation = ci_margin(st.x, st.phi, frame, ch, cfg).g.maxCoeff();
  res.trace = std::move(trace);
  return res;
}

namespace {

struct ProbeScales {
  double gx = 0.0, gphi = 0.0;  // objective gradient norms at the warm start
  double xn = 0.0, phin = 0.0;  // iterate norms
};

ProbeScales probe_scales(Task task, const SceneConfig& cfg, const ChannelSet& ch) {
  const auto [x0, phi0] = default_init(ch, cfg);
  auto obj = make_objective(task, ch, cfg);
  obj->set_phi(phi0);
  const RealGradPair g = obj->grad(x0);
  ProbeScales p;
  p.gx = g.x.norm();
  p.gphi = g.phi.norm();
  p.xn = cfg.power_amp() * std::sqrt(static_cast<double>(cfg.M) * cfg.L);
  p.phin = std::sqrt(static_cast<double>(cfg.N));
  return p;
}

}  // namespace

double hand_tuned_rho(Task task, const SceneConfig& cfg, const ChannelSet& ch,
                      const SymbolFrame& frame, const HandTunedGains& gains) {
  (void)frame;
  const ProbeScales p = probe_scales(task, cfg, ch);
  const double rx = p.gx > 0.0 ? p.gx / p.xn : 1.0;
  const double rphi = p.gphi > 0.0 ? p.gphi / p.phin : 0.0;
  return gains.c_rho * (rphi > 0.0 ? std::sqrt(rx * rphi) : rx);
}

StepSchedule hand_tuned_schedule(Task task, const SceneConfig& cfg, const ChannelSet& ch,
                                 const SymbolFrame& frame, int T, int J, int R,
                                 const HandTunedGains& gains) {
  const auto [x0, phi0] = default_init(ch, cfg);
  const ProbeScales p = probe_scales(task, cfg, ch);
  const double gx = p.gx, gphi = p.gphi, xn = p.xn, phin = p.phin;

  const double c_tau = gains.c_tau, c_zeta = gains.c_zeta, c_eta = gains.c_eta;
  const double tau0 = gx > 0.0 ? c_tau * xn / gx : 1.0;
  const double zeta0 = gphi > 0.0 ? c_zeta * phin / gphi : 1.0;

  // Dual rate: one update at a typical-size violation should grow beta until
  // the summed constraint force competes with the objective gradient.
  const QosMargins q0 = ci_margin(x0, phi0, frame, ch, cfg);
  const CiGradients cig = ci_margin_grad(x0, phi0, frame, ch, cfg);
  double ggx = 0.0, ggphi = 0.0, viol = 0.0;
  for (int k = 0; k < cfg.K; ++k) {
    for (int l = 0; l < cfg.L; ++l) {
      ggx += cig.dx_coef[k][l].norm();
      ggphi += cig.dphi_coef[k][l].norm();
      viol += std::abs(q0.g(k, l));
    }
  }
  const int kl = cfg.K * cfg.L;
  ggx /= kl;
  ggphi /= kl;
  viol /= kl;
  const double eta0 = (ggx > 0.0 && viol > 0.0) ? c_eta * gx / (ggx * viol * kl) : 1.0;
  const double kappa0 = (ggphi > 0.0 && viol > 0.0) ? c_eta * gphi / (ggphi * viol * kl) : 1.0;
  StepSchedule s = StepSchedule::constant(T, J, R, kl, eta0, kappa0, tau0, zeta0);
  // Optional dual-rate growth, and primal step annealing over the second half
  // of the layers; the annealing shrinks the feasibility limit cycle.
  double dual_scale = 1.0;
  for (int t = 0; t < T; ++t, dual_scale *= gains.eta_growth) {
    const double prim_scale = t > T / 2 ? std::pow(gains.tau_decay, t - T / 2) : 1.0;
    for (int j = 0; j < J; ++j) {
      s.eta[static_cast<std::size_t>(t) * J + j] *= dual_scale;
      s.kappa[static_cast<std::size_t>(t) * J + j] *= dual_scale;
      for (int r = 0; r < R; ++r) {
        s.tau[(static_cast<std::size_t>(t) * J + j) * R + r] *= prim_scale;
        s.zeta[(static_cast<std::size_t>(t) * J + j) * R + r] *= prim_scale;
      }
    }
  }
  return s;
}

StepSchedule truncate_schedule(const StepSchedule& s, int t_keep) {
  if (t_keep < 0 || t_keep > s.T) throw std::invalid_argument("truncate_schedule: bad t_keep");
  StepSchedule out = s;
  out.T = t_keep;
  out.eta.resize(static_cast<std::size_t>(t_keep) * s.J);
  out.kappa.resize(static_cast<std::size_t>(t_keep) * s.J);
  out.tau.resize(static_cast<std::size_t>(t_keep) * s.J * s.R);
  out.zeta.resize(static_cast<std::size_t>(t_keep) * s.J * s.R);
  return out;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace) {
  static const char* names[] = {"x_update", "v_update", "phi_update", "varphi_update",
                                "mu_update"};
  os << "t,phase,j,r,objective,residual_x,residual_phi,max_violation\n";
  for (const auto& e : trace) {
    os << e.t << ',' << names[static_cast<int>(e.phase)] << ',' << e.j << ',' << e.r << ','
       << e.objective << ',' << e.residual_x << ',' << e.residual_phi << ','
       << e.max_violation << '\n';
  }
}

}  // namespace isacwave
