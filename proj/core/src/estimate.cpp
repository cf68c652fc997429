#include "isacwave/estimate.hpp"

#include <cmath>

namespace isacwave {

namespace {

struct FimContext {
  Eigen::LLT<CMat> llt;
  Complex g00, g11, g22, g12, g10, g20;
};

FimContext fim_context(const CascadeOps& ops, const CascadeDerivs& d, const CVec& x,
                       const SceneConfig& cfg) {
  FimContext c{Eigen::LLT<CMat>(clutter_covariance(ops, x, cfg)), {}, {}, {}, {}, {}, {}};
  const StackedOp& h0 = ops.target;
  c.g00 = quadform_value(ops, h0, h0, x, c.llt);
  c.g11 = quadform_value(ops, d.d_theta0, d.d_theta0, x, c.llt);
  c.g22 = quadform_value(ops, d.d_thetaris, d.d_thetaris, x, c.llt);
  c.g12 = quadform_value(ops, d.d_theta0, d.d_thetaris, x, c.llt);
  c.g10 = quadform_value(ops, d.d_theta0, h0, x, c.llt);
  c.g20 = quadform_value(ops, d.d_thetaris, h0, x, c.llt);
  return c;
}

FimBlocks assemble(const FimContext& c, const SceneConfig& cfg, Complex alpha0) {
  FimBlocks f;
  const double s = 2.0 * cfg.xi2_0;
  f.f_tt << s * c.g11.real(), s * c.g12.real(), s * c.g12.real(), s * c.g22.real();
  const Complex a = std::conj(alpha0);
  f.f_ta << 2.0 * (a * c.g10).real(), -2.0 * (a * c.g10).imag(),
            2.0 * (a * c.g20).real(), -2.0 * (a * c.g20).imag();
  f.f_aa << 2.0 * c.g00.real(), -2.0 * c.g00.imag(),
            2.0 * c.g00.imag(), 2.0 * c.g00.real();
  return f;
}

Eigen::Matrix2d schur_theta(const FimBlocks& f) {
  return f.f_tt - f.f_ta * f.f_aa.inverse() * f.f_ta.transpose();
}

void check_conditioning(const Eigen::Matrix2d& s) {
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(s);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(1);
  if (!(smax > 0.0) || smin / smax < 1e-12)
    throw DegenerateGeometryError("CRB Schur complement is numerically singular");
}

}  // namespace

Eigen::Matrix4d FimBlocks::full() const {
  Eigen::Matrix4d f;
  f.topLeftCorner<2, 2>() = f_tt;
  f.topRightCorner<2, 2>() = f_ta;
  f.bottomLeftCorner<2, 2>() = f_ta.transpose();
  f.bottomRightCorner<2, 2>() = f_aa;
  return f;
}

FimBlocks fim_blocks(const CascadeOps& ops, const CascadeDerivs& derivs, const CVec& x,
                     const SceneConfig& cfg, Complex alpha0) {
  return assemble(fim_context(ops, derivs, x, cfg), cfg, alpha0);
}

FimBlocks fim_blocks(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg,
                     Complex alpha0) {
  const CascadeOps ops = build_cascade(ch, phi, cfg);
  return fim_blocks(ops, cascade_derivs(ch, phi, cfg), x, cfg, alpha0);
}

double f2_value(const CascadeOps& ops, const CascadeDerivs& derivs, const CVec& x,
                const SceneConfig& cfg, Complex alpha0) {
  const FimBlocks f = fim_blocks(ops, derivs, x, cfg, alpha0);
  const Eigen::Matrix2d s = schur_theta(f);
  check_conditioning(s);
  return s.inverse().trace();
}

double f2_value(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg,
                Complex alpha0) {
  const CascadeOps ops = build_cascade(ch, phi, cfg);
  return f2_value(ops, cascade_derivs(ch, phi, cfg), x, cfg, alpha0);
}

RealGradPair f2_grad(const CascadeOps& ops, const CascadeDerivs& derivs, const CVec& x,
                     const SceneConfig& cfg, Complex alpha0) {
  const Eigen::LLT<CMat> llt(clutter_covariance(ops, x, cfg));
  const StackedOp& h0 = ops.target;
  const StackedOp& d1 = derivs.d_theta0;
  const StackedOp& d2 = derivs.d_thetaris;

  const QuadformGrad q00 = quadform_with_grad(ops, h0, h0, x, llt, cfg);
  const QuadformGrad q11 = quadform_with_grad(ops, d1, d1, x, llt, cfg);
  const QuadformGrad q22 = quadform_with_grad(ops, d2, d2, x, llt, cfg);
  const QuadformGrad q12 = quadform_with_grad(ops, d1, d2, x, llt, cfg);
  const QuadformGrad q10 = quadform_with_grad(ops, d1, h0, x, llt, cfg);
  const QuadformGrad q20 = quadform_with_grad(ops, d2, h0, x, llt, cfg);

  FimContext ctx;
  ctx.g00 = q00.value;
  ctx.g11 = q11.value;
  ctx.g22 = q22.value;
  ctx.g12 = q12.value;
  ctx.g10 = q10.value;
  ctx.g20 = q20.value;
  const FimBlocks f = assemble(ctx, cfg, alpha0);
  const Eigen::Matrix2d s = schur_theta(f);
  check_conditioning(s);

  // df2 = -Tr{S^{-1} dS S^{-1}} expanded into weights on the scalar forms.
  const Eigen::Matrix2d sinv = s.inverse();
  const Eigen::Matrix2d m = sinv * sinv;
  const Eigen::Matrix2d gm = f.f_aa.inverse() * f.f_ta.transpose();
  const Eigen::Matrix2d gmm = gm * m;
  const Eigen::Matrix2d w_aa = gm * m * gm.transpose();
  const Complex a = std::conj(alpha0);

  const double xi = 2.0 * cfg.xi2_0;
  const Complex a11 = -xi * m(0, 0);
  const Complex a22 = -xi * m(1, 1);
  const Complex a12 = -2.0 * xi * m(0, 1);
  const Complex a10 = 4.0 * a * (gmm(0, 0) + kImag * gmm(1, 0));
  const Complex a20 = 4.0 * a * (gmm(0, 1) + kImag * gmm(1, 1));
  const Complex a00 = -2.0 * w_aa.trace();

  LinForm dx(x.size()), dphi(ops.N);
  auto acc = [&](const QuadformGrad& q, Complex alpha) {
    dx.add_scaled(q.dx, alpha);
    dphi.add_scaled(q.dphi, alpha);
  };
  acc(q11, a11);
  acc(q22, a22);
  acc(q12, a12);
  acc(q10, a10);
  acc(q20, a20);
  acc(q00, a00);
  return {dx.real_grad_of_re(), dphi.real_grad_of_re()};
}

RealGradPair f2_grad(const CVec& x, const CVec& phi, const ChannelSet& ch, const SceneConfig& cfg,
                     Complex alpha0) {
  const CascadeOps ops = build_cascade(ch, phi, cfg);
  return f2_grad(ops, cascade_derivs(ch, phi, cfg), x, cfg, alpha0);
}

CrbReport crb_report(const CascadeOps& ops, const CascadeDerivs& derivs, const CVec& x,
                     const SceneConfig& cfg, Complex alpha0) {
  const FimBlocks f = fim_blocks(ops, derivs, x, cfg, alpha0);
  const Eigen::Matrix2d s = schur_theta(f);
  check_conditioning(s);
  CrbReport rep;
  rep.e_tt = s.inverse();
  rep.crb_theta = rep.e_tt.trace();
  return rep;
}

}  // namespace isacwave
