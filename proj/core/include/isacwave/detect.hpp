#pragma once

#include <vector>

#include "isacwave/cascade.hpp"

namespace isacwave {

struct DetectionReport {
  CVec w;            // ML receive filter
  double sinr = 0.0; // linear
  double eps0 = 0.0; // |r_o|^2 variance under H0
  double eps1 = 0.0; // under H1
  double pfa = 0.0;
  double pd = 0.0;
  double delta_thr = 0.0;
};

/// MVDR receive filter w = C^{-1} H0~ x / (x^H H0~^H C^{-1} H0~ x).
CVec mvdr_filter(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg);

/// f1 = x^H H0~^H C^{-1} H0~ x; the output SINR at the MVDR filter is xi2_0 * f1.
double f1_value(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg);
double f1_value(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg);

RealGradPair f1_grad(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg);
RealGradPair f1_grad(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg);

/// Central chi-square with two degrees of freedom: F(t) = 1 - exp(-t/2).
double chi2_2_cdf(double t);
double chi2_2_inv(double p);

/// Pd = 1 - F((eps0/eps1) * F^{-1}(1 - Pfa)).
double detection_probability(double eps0, double eps1, double pfa);

/// Variances of the filter output under both hypotheses plus Pd at the given Pfa.
DetectionReport detection_report(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg,
                                 double pfa);

std::vector<std::pair<double, double>> roc_curve(const CascadeOps& ops, const CVec& x,
                                                 const SceneConfig& cfg,
                                                 const std::vector<double>& pfa_grid);

}  // namespace isacwave
