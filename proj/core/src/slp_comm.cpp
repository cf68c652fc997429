#include "isacwave/slp_comm.hpp"

#include <cmath>

namespace isacwave {

namespace {

double sign0(double v) {
  // Subgradient convention at the |Im| kink: sign(0) = 0.
  if (v > 0.0) return 1.0;
  if (v < 0.0) return -1.0;
  return 0.0;
}

std::vector<CVec> effective_channels(const CVec& phi, const ChannelSet& ch,
                                     const SceneConfig& cfg) {
  std::vector<CVec> h_eff(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    // row vector h_k^H + h_rk^H Phi G, stored as its conjugate-transpose
    const CVec ris_part = (ch.h_rk[k].conjugate().asDiagonal() * ch.G).adjoint() * phi.conjugate();
    h_eff[k] = ch.h_k[k] + ris_part;
  }
  return h_eff;
}

}  // namespace

QosMargins ci_margin(const CVec& x, const CVec& phi, const SymbolFrame& frame,
                     const ChannelSet& ch, const SceneConfig& cfg) {
  QosMargins m;
  m.g.resize(cfg.K, cfg.L);
  m.y.resize(cfg.K, cfg.L);
  m.h_eff = effective_channels(phi, ch, cfg);
  const double theta = cfg.ci_angle();
  const double st = std::sin(theta), ct = std::cos(theta);
  for (int k = 0; k < cfg.K; ++k) {
    for (int l = 0; l < cfg.L; ++l) {
      const Complex y = m.h_eff[k].dot(x.segment(l * cfg.M, cfg.M));  // h_eff^H x[l]
      const Complex yr = y * std::exp(-kImag * frame.angle(k, l));
      m.y(k, l) = y;
      m.g(k, l) = cfg.gamma(k) - yr.real() * st + std::abs(yr.imag()) * ct;
    }
  }
  return m;
}

CiGradients ci_margin_grad(const CVec& x, const CVec& phi, const SymbolFrame& frame,
                           const ChannelSet& ch, const SceneConfig& cfg) {
  CiGradients g;
  g.dx_coef.assign(cfg.K, std::vector<CVec>(cfg.L));
  g.dphi_coef.assign(cfg.K, std::vector<CVec>(cfg.L));
  const auto h_eff = effective_channels(phi, ch, cfg);
  const double theta = cfg.ci_angle();
  const double st = std::sin(theta), ct = std::cos(theta);
  for (int k = 0; k < cfg.K; ++k) {
    // y = h_k^H x[l] + phi^T diag(conj h_rk) G x[l]; linear in both x and phi.
    const CMat dk_g = ch.h_rk[k].conjugate().asDiagonal() * ch.G;  // N x M
    for (int l = 0; l < cfg.L; ++l) {
      const Complex rot = std::exp(-kImag * frame.angle(k, l));
      const Complex y = h_eff[k].dot(x.segment(l * cfg.M, cfg.M));
      const Complex yr = y * rot;
      // dg = Re{ kappa dy }, with the |Im| branch resolved at the current point.
      const Complex kap = rot * (-st - kImag * sign0(yr.imag()) * ct);
      g.dx_coef[k][l] = kap * h_eff[k].conjugate();
      g.dphi_coef[k][l] = kap * (dk_g * x.segment(l * cfg.M, cfg.M));
    }
  }
  return g;
}

int demodulate_psk(Complex y, int omega) {
  // Decision regions are sectors centered on (2i+1)pi/Omega.
  double ang = std::arg(y);
  if (ang < 0) ang += 2.0 * M_PI;
  const int idx = static_cast<int>(std::floor(ang / (2.0 * M_PI / omega)));
  return ((idx % omega) + omega) % omega;
}

int symbol_index(Complex s, int omega) { return demodulate_psk(s, omega); }

SerResult simulate_ser(const CVec& x, const CVec& phi, const SymbolFrame& frame,
                       const ChannelSet& ch, const SceneConfig& cfg, long trials, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("simulate_ser: trials must be >= 1");
  const auto h_eff = effective_channels(phi, ch, cfg);
  SerResult res;
  res.per_user.assign(cfg.K, 0.0);
  std::vector<long> errors(cfg.K, 0);
  std::normal_distribution<double> nd(0.0, 1.0);
  long total = 0;
  for (long t = 0; t < trials; ++t) {
    const int l = static_cast<int>(t % cfg.L);
    for (int k = 0; k < cfg.K; ++k) {
      const double sd = std::sqrt(cfg.sigma2[k] / 2.0);
      const Complex noise(sd * nd(rng), sd * nd(rng));
      const Complex y = h_eff[k].dot(x.segment(l * cfg.M, cfg.M)) + noise;
      if (demodulate_psk(y, cfg.Omega) != symbol_index(frame.s(k, l), cfg.Omega)) ++errors[k];
    }
    ++total;
  }
  double sum = 0.0;
  for (int k = 0; k < cfg.K; ++k) {
    res.per_user[k] = static_cast<double>(errors[k]) / total;
    sum += res.per_user[k];
  }
  res.average = sum / cfg.K;
  res.trials = total;
  return res;
}

}  // namespace isacwave
