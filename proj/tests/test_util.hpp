#pragma once

#include <cmath>
#include <functional>

#include "isacwave/scene.hpp"

namespace isacwave::testutil {

/// Central finite-difference gradient of a scalar function over a real vector.
inline RVec fd_grad(const std::function<double(const RVec&)>& f, const RVec& z0, double h) {
  RVec g(z0.size());
  for (Eigen::Index i = 0; i < z0.size(); ++i) {
    RVec zp = z0, zm = z0;
    zp(i) += h;
    zm(i) -= h;
    g(i) = (f(zp) - f(zm)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const RVec& a, const RVec& b) {
  const double den = std::max(a.norm(), b.norm());
  return den > 0.0 ? (a - b).norm() / den : 0.0;
}

inline double rel_err(double a, double b) {
  const double den = std::max(std::abs(a), std::abs(b));
  return den > 0.0 ? std::abs(a - b) / den : 0.0;
}

/// Deterministic desk instance for a given seed.
struct DeskInstance {
  SceneConfig cfg;
  ChannelSet ch;
  SymbolFrame frame;
};

inline DeskInstance desk_instance(std::uint64_t seed) {
  DeskInstance d{SceneConfig::desk(), {}, {}};
  d.cfg.seed = seed;
  Rng rng(seed);
  d.ch = synth_channels(d.cfg, rng);
  d.frame = draw_symbols(d.cfg, rng);
  return d;
}

/// Random complex vector with i.i.d. standard normal parts.
inline CVec random_cvec(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> nd;
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(nd(rng), nd(rng));
  return v;
}

}  // namespace isacwave::testutil
