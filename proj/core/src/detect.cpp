#include "isacwave/detect.hpp"

#include <cmath>
#include <stdexcept>

namespace isacwave {

CVec mvdr_filter(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg) {
  if (x.norm() == 0.0) throw std::invalid_argument("mvdr_filter: x must be nonzero");
  const CMat c = clutter_covariance(ops, x, cfg);
  Eigen::LLT<CMat> llt(c);
  const CVec u0 = ops.target.apply(x);
  const CVec cu = llt.solve(u0);
  const Complex denom = u0.dot(cu);  // x^H H0~^H C^{-1} H0~ x, real positive
  return cu / denom.real();
}

double f1_value(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg) {
  const CMat c = clutter_covariance(ops, x, cfg);
  Eigen::LLT<CMat> llt(c);
  return quadform_value(ops, ops.target, ops.target, x, llt).real();
}

double f1_value(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg) {
  return f1_value(build_cascade(ch, phi, cfg), x, cfg);
}

RealGradPair f1_grad(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg) {
  const CMat c = clutter_covariance(ops, x, cfg);
  Eigen::LLT<CMat> llt(c);
  const QuadformGrad g = quadform_with_grad(ops, ops.target, ops.target, x, llt, cfg);
  return {g.dx.real_grad_of_re(), g.dphi.real_grad_of_re()};
}

RealGradPair f1_grad(const CVec& x, const CVec& phi, const ChannelSet& ch,
                     const SceneConfig& cfg) {
  return f1_grad(build_cascade(ch, phi, cfg), x, cfg);
}

double chi2_2_cdf(double t) {
  if (t < 0.0) throw std::domain_error("chi2_2_cdf: t must be >= 0");
  return 1.0 - std::exp(-t / 2.0);
}

double chi2_2_inv(double p) {
  if (p < 0.0 || p >= 1.0) throw std::domain_error("chi2_2_inv: p must lie in [0, 1)");
  return -2.0 * std::log1p(-p);
}

double detection_probability(double eps0, double eps1, double pfa) {
  if (!(eps1 >= eps0) || eps0 <= 0.0)
    throw std::domain_error("detection_probability: need eps1 >= eps0 > 0");
  if (pfa <= 0.0 || pfa >= 1.0)
    throw std::domain_error("detection_probability: pfa must lie in (0, 1)");
  return 1.0 - chi2_2_cdf((eps0 / eps1) * chi2_2_inv(1.0 - pfa));
}

DetectionReport detection_report(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg,
                                 double pfa) {
  DetectionReport rep;
  rep.w = mvdr_filter(ops, x, cfg);
  rep.eps0 = cfg.xi2_z * rep.w.squaredNorm();
  for (int q = 0; q < ops.Q; ++q) {
    const Complex s = rep.w.dot(ops.clutter[q].apply(x));
    rep.eps0 += cfg.xi2_q[q] * std::norm(s);
  }
  const Complex s0 = rep.w.dot(ops.target.apply(x));
  rep.eps1 = rep.eps0 + cfg.xi2_0 * std::norm(s0);
  rep.sinr = rep.eps1 / rep.eps0 - 1.0;
  rep.pfa = pfa;
  rep.pd = detection_probability(rep.eps0, rep.eps1, pfa);
  // |r_o|^2 is (eps0/2) * chi^2_2 under H0.
  rep.delta_thr = (rep.eps0 / 2.0) * chi2_2_inv(1.0 - pfa);
  return rep;
}

std::vector<std::pair<double, double>> roc_curve(const CascadeOps& ops, const CVec& x,
                                                 const SceneConfig& cfg,
                                                 const std::vector<double>& pfa_grid) {
  const CVec w = mvdr_filter(ops, x, cfg);
  double eps0 = cfg.xi2_z * w.squaredNorm();
  for (int q = 0; q < ops.Q; ++q) eps0 += cfg.xi2_q[q] * std::norm(w.dot(ops.clutter[q].apply(x)));
  const double eps1 = eps0 + cfg.xi2_0 * std::norm(w.dot(ops.target.apply(x)));
  std::vector<std::pair<double, double>> out;
  out.reserve(pfa_grid.size());
  for (double pfa : pfa_grid) out.emplace_back(pfa, detection_probability(eps0, eps1, pfa));
  return out;
}

}  // namespace isacwave
