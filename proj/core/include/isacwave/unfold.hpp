#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isacwave/cascade.hpp"
#include "isacwave/estimate.hpp"
#include "isacwave/slp_comm.hpp"

namespace isacwave {

enum class Task { detect, estimate };
enum class DualMode { alm, phr };
enum class Phase { x_update, v_update, phi_update, varphi_update, mu_update };

/// Per-layer step sizes consumed by the unfolded solver.
struct StepSchedule {
  int T = 0, J = 0, R = 0, KL = 0;
  std::vector<RVec> eta;    // [t*J + j], each of length KL (x-phase dual steps)
  std::vector<RVec> kappa;  // [t*J + j], phi-phase dual steps
  std::vector<double> tau;  // [(t*J + j)*R + r], x DFP steps
  std::vector<double> zeta; // phi DFP steps

  const RVec& eta_at(int t, int j) const { return eta[t * J + j]; }
  const RVec& kappa_at(int t, int j) const { return kappa[t * J + j]; }
  double tau_at(int t, int j, int r) const { return tau[(t * J + j) * R + r]; }
  double zeta_at(int t, int j, int r) const { return zeta[(t * J + j) * R + r]; }

  static StepSchedule constant(int T, int J, int R, int KL, double eta0, double kappa0,
                               double tau0, double zeta0);
};

/// Full solver iterate.
struct AdmmState {
  CVec x;       // ML
  CVec v;       // ML auxiliary copy of x
  CVec phi;     // N
  CVec varphi;  // N auxiliary copy of phi
  CVec mu1;     // ML dual
  CVec mu2;     // N dual
  RVec beta;    // KL multipliers, flattened k-major: beta(k*L + l)
  double rho = 1.0;
};

/// DFP Hessian-inverse surrogate for one subproblem (real composite coords).
struct DfpState {
  RMat b;  // symmetric, initialized to identity
  explicit DfpState(Eigen::Index n) : b(RMat::Identity(n, n)) {}
};

struct TraceEntry {
  int t = 0;
  Phase phase = Phase::x_update;
  int j = -1;
  int r = -1;
  double objective = 0.0;
  double residual_x = 0.0;
  double residual_phi = 0.0;
  double max_violation = 0.0;
};

struct SolveResult {
  CVec x;
  CVec phi;
  std::vector<TraceEntry> trace;
  double objective = 0.0;       // task objective at the solution (-f1 or f2)
  double residual_x = 0.0;      // ||x - v||_inf at the final layer
  double residual_phi = 0.0;    // ||phi - varphi||_inf
  double max_violation = 0.0;   // max_kl g(k,l); 0 when QoS is not enforced
};

struct UnfoldOptions {
  double rho = 1.0;
  bool beta_carry_over = true;  // carry beta across layers and phases
  bool enforce_qos = true;       // radar-only drops the CI constraints
  bool optimize_phi = true;      // random/no-RIS schemes freeze phi
  std::optional<DualMode> dual_mode;  // default: alm for detect, phr for estimate
  bool record_trace = false;
};

/// Polymorphic objective handle (detection -f1 or estimation f2). Callers set
/// the RIS phase once per subproblem phase; value/grad then vary x cheaply.
class TaskObjective {
 public:
  virtual ~TaskObjective() = default;
  virtual void set_phi(const CVec& phi) = 0;
  virtual double value(const CVec& x) const = 0;
  virtual RealGradPair grad(const CVec& x) const = 0;
};

std::unique_ptr<TaskObjective> make_objective(Task task, const ChannelSet& ch,
                                              const SceneConfig& cfg);

/// Thrown when the objective turns non-finite mid-solve; carries the trace
/// collected so far.
struct UnfoldAbort : std::runtime_error {
  UnfoldAbort(const std::string& msg, std::vector<TraceEntry> t)
      : std::runtime_error(msg), trace(std::move(t)) {}
  std::vector<TraceEntry> trace;
};

// --- layer primitives -------------------------------------------------------

/// beta' = max{beta + eta .* g, 0}, shared by the ALM and PHR dual updates.
RVec alm_dual_update(const RVec& beta, const RVec& eta_layer, const RMat& g);
RVec phr_dual_update(const RVec& beta, const RVec& eta_layer, const RMat& g);

/// Augmented-objective value for one subproblem phase.
///   detect:   obj + (rho/2)||z - aux + mu/rho||^2 + sum beta*g
///   estimate: obj + quad + sum (eta/2) max{g + beta/eta, 0}^2
double lagrangian_value(Task task, DualMode mode, double objective_value, const RMat& g,
                        const RVec& beta, const RVec& eta_layer, double rho,
                        const CVec& z, const CVec& aux, const CVec& mu);

/// Gradient of the augmented objective at the current state; the .x block
/// pairs with the x-consensus term (z=x, aux=v, mu=mu1), the .phi block with
/// the phi-consensus term.
RealGradPair lagrangian_grad(Task task, DualMode mode, TaskObjective& obj, const AdmmState& st,
                             const SymbolFrame& frame, const ChannelSet& ch,
                             const SceneConfig& cfg, const RVec& eta_layer, bool enforce_qos);

CVec project_x(const CVec& x, double amp);
CVec project_phi(const CVec& phi);
CVec closed_form_v(const CVec& x, const CVec& mu1, double rho, double amp);
CVec closed_form_varphi(const CVec& phi, const CVec& mu2, double rho);

/// One quasi-Newton step z <- z - step * B * grad (real composite).
RVec dfp_step(const DfpState& state, const RVec& grad, double step, const RVec& iterate);

/// Safeguarded DFP matrix update; keeps B when y'd/||d||^2 <= ||grad||.
void dfp_matrix_update(DfpState& state, const RVec& y, const RVec& delta_step, double grad_norm);

/// Warm start: phi aligns the cascaded BS-RIS-target terms, x is the matched
/// per-slot beam toward the target under that phi.
std::pair<CVec, CVec> default_init(const ChannelSet& ch, const SceneConfig& cfg);

SolveResult run_unfolded(Task task, const SceneConfig& cfg, const ChannelSet& ch,
                         const SymbolFrame& frame, const StepSchedule& schedule,
                         const CVec& x0, const CVec& phi0, const UnfoldOptions& opts = {});

/// Dimensionless multipliers behind the hand-tuned step sizes; the defaults
/// are pinned on the desk preset.
struct HandTunedGains {
  double c_tau = 0.02;     // x step as a fraction of ||x|| per unit gradient
  double c_zeta = 0.02;    // phi step
  double c_eta = 3.0;      // dual ascent rate multiplier
  double c_rho = 0.3;      // consensus penalty vs objective gradient scale
  double eta_growth = 1.0; // geometric dual-rate growth per outer layer
  double tau_decay = 0.5;  // primal step decay per layer over the second half
};

/// Constant per-task step sizes, scaled from a gradient probe at the warm
/// start so one DFP step moves the iterate by a few percent of its norm.
StepSchedule hand_tuned_schedule(Task task, const SceneConfig& cfg, const ChannelSet& ch,
                                 const SymbolFrame& frame, int T, int J, int R,
                                 const HandTunedGains& gains = {});

/// Consensus penalty matched to the probed objective gradient scale, so the
/// quadratic term neither swamps nor vanishes against the objective.
double hand_tuned_rho(Task task, const SceneConfig& cfg, const ChannelSet& ch,
                      const SymbolFrame& frame, const HandTunedGains& gains = {});

/// First `t_keep` outer layers of a schedule (for layer-wise training).
StepSchedule truncate_schedule(const StepSchedule& s, int t_keep);

void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace);

}  // namespace isacwave
