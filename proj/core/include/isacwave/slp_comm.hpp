#pragma once

#include <vector>

#include "isacwave/linalg.hpp"
#include "isacwave/scene.hpp"

namespace isacwave {

/// Constructive-interference QoS margins; g(k,l) <= 0 means the noise-free
/// sample of user k in slot l lies inside the CI sector.
struct QosMargins {
  RMat g;                       // K x L
  CMat y;                       // K x L noise-free received samples
  std::vector<CVec> h_eff;      // K effective channels: h_k + (h_rk^H Phi G)^H
};

/// Exact first-order coefficients of every margin:
///   dg_{k,l} = Re{ dx_coef[k][l]^T dx[l] } + Re{ dphi_coef[k][l]^T dphi }.
struct CiGradients {
  std::vector<std::vector<CVec>> dx_coef;    // [k][l], length M
  std::vector<std::vector<CVec>> dphi_coef;  // [k][l], length N
};

struct SerResult {
  std::vector<double> per_user;
  double average = 0.0;
  long trials = 0;
};

QosMargins ci_margin(const CVec& x, const CVec& phi, const SymbolFrame& frame,
                     const ChannelSet& ch, const SceneConfig& cfg);

CiGradients ci_margin_grad(const CVec& x, const CVec& phi, const SymbolFrame& frame,
                           const ChannelSet& ch, const SceneConfig& cfg);

SerResult simulate_ser(const CVec& x, const CVec& phi, const SymbolFrame& frame,
                       const ChannelSet& ch, const SceneConfig& cfg, long trials, Rng& rng);

/// Nearest-PSK decision by angular distance.
int demodulate_psk(Complex y, int omega);
/// Index of the constellation point (2i+1)pi/Omega closest to s.
int symbol_index(Complex s, int omega);

}  // namespace isacwave
