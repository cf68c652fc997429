#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "isacwave/cascade.hpp"
#include "test_util.hpp"

using namespace isacwave;
using namespace isacwave::testutil;

namespace {

CVec random_phase(int n, Rng& rng) {
  std::uniform_real_distribution<double> ud(0.0, 2.0 * M_PI);
  CVec phi(n);
  for (int i = 0; i < n; ++i) phi(i) = std::exp(kImag * ud(rng));
  return phi;
}

}  // namespace

TEST_CASE("shift matrix moves slots down by the range delay") {
  const int M = 2, L = 4;
  const RMat j0 = shift_matrix(0, M, L);
  CHECK((j0 - RMat::Identity(M * L, M * L)).norm() == 0.0);

  const RMat j1 = shift_matrix(1, M, L);
  RVec x(M * L);
  for (int i = 0; i < M * L; ++i) x(i) = i + 1;
  const RVec y = j1 * x;
  // Slot l receives slot l-1; slot 0 is zero.
  CHECK(y.head(M).norm() == 0.0);
  for (int l = 1; l < L; ++l) CHECK((y.segment(l * M, M) - x.segment((l - 1) * M, M)).norm() == 0.0);

  // Delay L pushes everything out.
  CHECK((shift_matrix(L, M, L) * x).norm() == 0.0);
}

TEST_CASE("stacked operators match their dense materialization") {
  const DeskInstance d = desk_instance(31);
  Rng rng(32);
  const CVec phi = random_phase(d.cfg.N, rng);
  const CascadeOps ops = build_cascade(d.ch, phi, d.cfg);
  const CVec x = random_cvec(d.cfg.M * d.cfg.L, rng);
  const CVec y = random_cvec(d.cfg.M * d.cfg.L, rng);

  const CMat t_dense = ops.target.dense();
  CHECK((ops.target.apply(x) - t_dense * x).norm() / (t_dense * x).norm() < 1e-12);
  CHECK((ops.target.apply_adj(y) - t_dense.adjoint() * y).norm() < 1e-12 * y.norm());

  for (const StackedOp& op : ops.clutter) {
    const CMat c_dense = op.dense();
    CHECK((op.apply(x) - c_dense * x).norm() < 1e-12 * x.norm());
    CHECK((op.apply_adj(y) - c_dense.adjoint() * y).norm() < 1e-12 * y.norm());
  }
}

TEST_CASE("target block is the rank-one round-trip cascade") {
  const DeskInstance d = desk_instance(33);
  Rng rng(34);
  const CVec phi = random_phase(d.cfg.N, rng);
  const CascadeOps ops = build_cascade(d.ch, phi, d.cfg);
  // H0 = a b^H: the inbound leg sees phi, the outbound leg its conjugate.
  const CVec a = d.ch.h_bt + d.ch.G.adjoint() * (phi.asDiagonal() * d.ch.h_rt);
  const CVec b = d.ch.h_bt + d.ch.G.adjoint() * (phi.conjugate().asDiagonal() * d.ch.h_rt);
  const CMat h0 = a * b.adjoint();
  CHECK((ops.target.block - h0).norm() / h0.norm() < 1e-12);
}

TEST_CASE("phi-affine form evaluates consistently under random phases") {
  const DeskInstance d = desk_instance(35);
  Rng rng(36);
  for (int trial = 0; trial < 3; ++trial) {
    const CVec phi = random_phase(d.cfg.N, rng);
    const CascadeOps ops = build_cascade(d.ch, phi, d.cfg);
    CHECK((ops.target.phi_op.eval(phi) - ops.target.block).norm() < 1e-12 * ops.target.block.norm());
  }
}

TEST_CASE("bilinear phi-differential matches finite differences") {
  const DeskInstance d = desk_instance(37);
  Rng rng(38);
  const CVec phi = random_phase(d.cfg.N, rng);
  const CascadeOps ops = build_cascade(d.ch, phi, d.cfg);
  const CVec w = random_cvec(d.cfg.M, rng);
  const CVec y = random_cvec(d.cfg.M, rng);

  LinForm lin(d.cfg.N);
  ops.target.phi_op.add_wh_dh_y(lin, phi, w, y, Complex(1.0, 0.0));
  const RVec analytic = lin.real_grad_of_re();

  const auto f = [&](const RVec& p) {
    const CVec ph = from_real(p);
    return (w.adjoint() * ops.target.phi_op.eval(ph) * y)(0).real();
  };
  const RVec fd = fd_grad(f, to_real(phi), 1e-6);
  CHECK(rel_err(analytic, fd) < 1e-6);
}

TEST_CASE("DoA derivative operators match finite differences over the angles") {
  for (std::uint64_t seed : {41, 42, 43}) {
    const DeskInstance d = desk_instance(seed);
    Rng rng(seed + 100);
    const CVec phi = random_phase(d.cfg.N, rng);
    const CascadeDerivs derivs = cascade_derivs(d.ch, phi, d.cfg);
    const double h = 1e-6;

    SceneConfig cp = d.cfg, cm = d.cfg;
    cp.theta_0 += h;
    cm.theta_0 -= h;
    Rng rp(seed), rm(seed);
    const CMat fd0 = (build_cascade(synth_channels(cp, rp), phi, cp).target.block -
                      build_cascade(synth_channels(cm, rm), phi, cm).target.block) /
                     (2.0 * h);
    CHECK((derivs.d_theta0.block - fd0).norm() / fd0.norm() < 1e-5);

    cp = d.cfg;
    cm = d.cfg;
    cp.theta_ris += h;
    cm.theta_ris -= h;
    Rng rp2(seed), rm2(seed);
    const CMat fdr = (build_cascade(synth_channels(cp, rp2), phi, cp).target.block -
                      build_cascade(synth_channels(cm, rm2), phi, cm).target.block) /
                     (2.0 * h);
    CHECK((derivs.d_thetaris.block - fdr).norm() / fdr.norm() < 1e-5);
  }
}

TEST_CASE("clutter covariance reduces to noise when Q = 0") {
  SceneConfig cfg = SceneConfig::desk();
  cfg.Q = 0;
  cfg.xi2_q.clear();
  cfg.theta_q.clear();
  cfg.theta_rq.clear();
  cfg.d_q.clear();
  cfg.geometry.bs_clutter_m.clear();
  cfg.geometry.ris_clutter_m.clear();
  Rng rng(51);
  const ChannelSet ch = synth_channels(cfg, rng);
  const CVec phi = random_phase(cfg.N, rng);
  const CascadeOps ops = build_cascade(ch, phi, cfg);
  const CVec x = random_cvec(cfg.M * cfg.L, rng);
  const CMat c = clutter_covariance(ops, x, cfg);
  CHECK((c - cfg.xi2_z * CMat::Identity(c.rows(), c.cols())).norm() < 1e-12);
}

TEST_CASE("clutter covariance is Hermitian with eigenvalues >= noise floor") {
  const DeskInstance d = desk_instance(53);
  Rng rng(54);
  const CVec phi = random_phase(d.cfg.N, rng);
  const CascadeOps ops = build_cascade(d.ch, phi, d.cfg);
  const CVec x = random_cvec(d.cfg.M * d.cfg.L, rng);
  const CMat c = clutter_covariance(ops, x, d.cfg);
  CHECK((c - c.adjoint()).norm() < 1e-12 * c.norm());
  Eigen::SelfAdjointEigenSolver<CMat> es(c);
  CHECK(es.eigenvalues().minCoeff() >= d.cfg.xi2_z * (1.0 - 1e-9));
}

TEST_CASE("clutter covariance matches the Monte-Carlo sample covariance") {
  const DeskInstance d = desk_instance(55);
  Rng rng(56);
  const CVec phi = random_phase(d.cfg.N, rng);
  const CascadeOps ops = build_cascade(d.ch, phi, d.cfg);
  // A physically scaled waveform keeps clutter and noise powers comparable.
  CVec x = random_cvec(d.cfg.M * d.cfg.L, rng);
  x *= d.cfg.power_amp() / std::sqrt(2.0);
  const CMat c = clutter_covariance(ops, x, d.cfg);

  const int ml = d.cfg.M * d.cfg.L;
  std::vector<CVec> u;
  for (const StackedOp& op : ops.clutter) u.push_back(op.apply(x));
  std::normal_distribution<double> nd;
  CMat acc = CMat::Zero(ml, ml);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    CVec r = CVec::Zero(ml);
    for (int q = 0; q < d.cfg.Q; ++q) {
      const Complex alpha = std::sqrt(d.cfg.xi2_q[q] / 2.0) * Complex(nd(rng), nd(rng));
      r += alpha * u[q];
    }
    for (int i2 = 0; i2 < ml; ++i2)
      r(i2) += std::sqrt(d.cfg.xi2_z / 2.0) * Complex(nd(rng), nd(rng));
    acc += r * r.adjoint();
  }
  acc /= draws;
  CHECK((acc - c).norm() / c.norm() < 0.02);
}

TEST_CASE("quadform gradient matches finite differences in x and phi") {
  const DeskInstance d = desk_instance(57);
  Rng rng(58);
  const CVec phi = random_phase(d.cfg.N, rng);
  CVec x = random_cvec(d.cfg.M * d.cfg.L, rng);
  x *= d.cfg.power_amp() / std::sqrt(2.0);

  const auto value_at = [&](const CVec& xx, const CVec& pp) {
    const CascadeOps ops = build_cascade(d.ch, pp, d.cfg);
    const CMat c = clutter_covariance(ops, xx, d.cfg);
    Eigen::LLT<CMat> llt(c);
    return quadform_value(ops, ops.target, ops.target, xx, llt).real();
  };

  const CascadeOps ops = build_cascade(d.ch, phi, d.cfg);
  const CMat c = clutter_covariance(ops, x, d.cfg);
  Eigen::LLT<CMat> llt(c);
  const QuadformGrad qg = quadform_with_grad(ops, ops.target, ops.target, x, llt, d.cfg);
  CHECK(rel_err(qg.value.real(), value_at(x, phi)) < 1e-12);

  const RVec gx = qg.dx.real_grad_of_re();
  const RVec gp = qg.dphi.real_grad_of_re();
  const double hx = 1e-3 * x.norm();
  const RVec fdx = fd_grad([&](const RVec& z) { return value_at(from_real(z), phi); },
                           to_real(x), hx);
  CHECK(rel_err(gx, fdx) < 1e-5);
  const RVec fdp = fd_grad([&](const RVec& z) { return value_at(x, from_real(z)); },
                           to_real(phi), 1e-6);
  CHECK(rel_err(gp, fdp) < 1e-5);
}
