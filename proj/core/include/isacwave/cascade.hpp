#pragma once

#include <vector>

#include <Eigen/Cholesky>

#include "isacwave/linalg.hpp"
#include "isacwave/scene.hpp"

namespace isacwave {

/// RIS reflection vector; unit modulus after projection, |phi_n| <= 1 inside
/// the solver relaxation.
struct PhaseVector {
  CVec phi;
};

/// Stacked transmit signal for L slots; constant modulus sqrt(P/M) after
/// projection.
struct Waveform {
  CVec x;      // length M*L
  double amp;  // sqrt(P/M)
};

/// One slot-level cascade operator written as a sum of rank-one products
///   H(phi) = sum_i (a_i + A_i phi)(b_i + B_i conj(phi))^H,
/// which covers H0, Hq and their DoA derivatives.  Keeping the affine
/// structure explicit gives exact phi-differentials for every bilinear form
/// w^H H y without any finite differencing.
struct PhiOpTerm {
  CVec a_const;  // M
  CMat a_lin;    // M x N, may be zero
  CVec b_const;  // M
  CMat b_lin;    // M x N, may be zero
};

struct PhiOp {
  int m = 0;
  int n = 0;
  std::vector<PhiOpTerm> terms;

  CMat eval(const CVec& phi) const;
  /// Accumulates alpha * w^H dH(phi) y into `lin` (a form over dphi).
  void add_wh_dh_y(LinForm& lin, const CVec& phi, const CVec& w, const CVec& y,
                   Complex alpha) const;
};

/// A slot-block operator lifted to the ML-dim stacked signal, with an
/// optional clutter range delay: (Op x)[l] = H x[l - d].
struct StackedOp {
  PhiOp phi_op;
  CMat block;  // M x M, evaluated at the current phi
  int delay = 0;
  int M = 0;
  int L = 0;

  CVec apply(const CVec& x) const;
  CVec apply_adj(const CVec& y) const;
  CMat dense() const;  // ML x ML materialization, for oracle tests
};

struct CascadeOps {
  int M = 0, N = 0, L = 0, Q = 0;
  CVec phi;
  StackedOp target;                // I_L (x) H0
  std::vector<StackedOp> clutter;  // (I_L (x) Hq) J_q
};

/// DoA derivatives of the target cascade, as phi-structured operators.
struct CascadeDerivs {
  StackedOp d_theta0;    // I_L (x) dH0/dtheta0
  StackedOp d_thetaris;  // I_L (x) dH0/dthetaRIS
};

Eigen::MatrixXd shift_matrix(int d_q, int M, int L);

CascadeOps build_cascade(const ChannelSet& ch, const CVec& phi, const SceneConfig& cfg);
CascadeDerivs cascade_derivs(const ChannelSet& ch, const CVec& phi, const SceneConfig& cfg);

/// Clutter-plus-noise covariance C = sum_q xi2_q (Hq~ x)(Hq~ x)^H + xi2_z I.
CMat clutter_covariance(const CascadeOps& ops, const CVec& x, const SceneConfig& cfg);

/// Value and exact first-order differential of the quadratic form
///   G_AB(x, phi) = (A x)^H C(x, phi)^{-1} (B x),
/// including the dependence of C on both variables.
struct QuadformGrad {
  Complex value;
  LinForm dx;    // over the ML complex x
  LinForm dphi;  // over the N complex phi
};

QuadformGrad quadform_with_grad(const CascadeOps& ops, const StackedOp& A, const StackedOp& B,
                                const CVec& x, const Eigen::LLT<CMat>& c_llt,
                                const SceneConfig& cfg);

/// Value-only path (shared Cholesky solve).
Complex quadform_value(const CascadeOps& ops, const StackedOp& A, const StackedOp& B,
                       const CVec& x, const Eigen::LLT<CMat>& c_llt);

}  // namespace isacwave
