#pragma once

#include <stdexcept>

#include "isacwave/cascade.hpp"

namespace isacwave {

/// Signals an unidentifiable angle geometry (near-singular Schur complement).
struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FimBlocks {
  Eigen::Matrix2d f_tt;  // theta block
  Eigen::Matrix2d f_ta;  // theta-alpha cross block
  Eigen::Matrix2d f_aa;  // alpha block
  Eigen::Matrix4d full() const;
};

struct CrbReport {
  double crb_theta = 0.0;   // rad^2
  Eigen::Matrix2d e_tt;     // CRB sub-block for theta
};

FimBlocks fim_blocks(const CascadeOps& ops, const CascadeDerivs& derivs, const CVec& x,
                     const SceneConfig& cfg, Complex alpha0);
FimBlocks fim_blocks(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg,
                     Complex alpha0);

/// f2 = Tr{(F_tt - F_ta F_aa^{-1} F_ta^T)^{-1}}, the CRB on the two DoAs.
double f2_value(const CascadeOps& ops, const CascadeDerivs& derivs, const CVec& x,
                const SceneConfig& cfg, Complex alpha0);
double f2_value(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg,
                Complex alpha0);

RealGradPair f2_grad(const CascadeOps& ops, const CascadeDerivs& derivs, const CVec& x,
                     const SceneConfig& cfg, Complex alpha0);
RealGradPair f2_grad(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg,
                     Complex alpha0);

CrbReport crb_report(const CascadeOps& ops, const CascadeDerivs& derivs, const CVec& x,
                     const SceneConfig& cfg, Complex alpha0);

/// Default nominal RCS used when evaluating the bound: real, power-matched.
inline Complex nominal_alpha0(const SceneConfig& cfg) { return Complex(std::sqrt(cfg.xi2_0), 0.0); }

}  // namespace isacwave
