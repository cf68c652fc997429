#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "isacwave/slp_comm.hpp"
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

/// Geometric sector membership: after rotating the sample onto the symbol, it
/// must lie on the inner side of both decision boundaries with distance >= gamma.
/// The boundaries are the rays at angles +-Theta; the distance from p to the
/// line spanned by (cos Theta, sin Theta) is the absolute cross product.
bool in_ci_region(Complex y, Complex s, double gamma, double theta) {
  const Complex yr = y * std::exp(-kImag * std::arg(s));
  const double px = yr.real(), py = yr.imag();
  const double ux = std::cos(theta), uy = std::sin(theta);
  const double cross_upper = px * uy - py * ux;       // signed distance to the +Theta ray
  const double cross_lower = px * (-uy) - py * ux;    // to the -Theta ray, flipped side
  return cross_upper >= gamma && -cross_lower >= gamma;
}

}  // namespace

TEST_CASE("CI margin sign agrees with the geometric sector test") {
  SceneConfig cfg = SceneConfig::desk();
  const double theta = cfg.ci_angle();
  const double gamma = cfg.gamma(0);
  Rng rng(61);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> pick(0, cfg.Omega - 1);
  int inside = 0;
  for (int i = 0; i < 10000; ++i) {
    // Samples at the gamma scale so both sides of the boundary are exercised.
    const Complex y = 3.0 * gamma * Complex(nd(rng), nd(rng));
    const Complex s = std::exp(kImag * ((2.0 * pick(rng) + 1.0) * M_PI / cfg.Omega));
    const Complex yr = y * std::exp(-kImag * std::arg(s));
    const double g =
        gamma - yr.real() * std::sin(theta) + std::abs(yr.imag()) * std::cos(theta);
    CHECK((g <= 0.0) == in_ci_region(y, s, gamma, theta));
    if (g <= 0.0) ++inside;
  }
  // The draw is wide enough that both outcomes occur.
  CHECK(inside > 100);
  CHECK(inside < 9900);
}

TEST_CASE("ci_margin matches a direct scalar recomputation") {
  const DeskInstance d = desk_instance(63);
  Rng rng(64);
  const CVec phi = random_phase(d.cfg.N, rng);
  CVec x = random_cvec(d.cfg.M * d.cfg.L, rng);
  x *= d.cfg.power_amp();
  const QosMargins m = ci_margin(x, phi, d.frame, d.ch, d.cfg);
  const double theta = d.cfg.ci_angle();
  for (int k = 0; k < d.cfg.K; ++k) {
    // Effective row channel h_k^H + phi^T diag(conj h_rk) G, recomputed entrywise.
    Eigen::RowVectorXcd row = d.ch.h_k[k].adjoint();
    for (int n = 0; n < d.cfg.N; ++n)
      row += phi(n) * std::conj(d.ch.h_rk[k](n)) * d.ch.G.row(n);
    for (int l = 0; l < d.cfg.L; ++l) {
      const Complex y = (row * x.segment(l * d.cfg.M, d.cfg.M))(0);
      CHECK(std::abs(y - m.y(k, l)) < 1e-12 * std::abs(y));
      const Complex yr = y * std::exp(-kImag * std::arg(d.frame.s(k, l)));
      const double g = d.cfg.gamma(k) - yr.real() * std::sin(theta) +
                       std::abs(yr.imag()) * std::cos(theta);
      CHECK(rel_err(g, m.g(k, l)) < 1e-9);
    }
  }
}

TEST_CASE("margin gradients match finite differences away from the kink") {
  const DeskInstance d = desk_instance(65);
  Rng rng(66);
  CVec phi, x;
  QosMargins m;
  // Retry until every rotated sample has |Im| clear of the kink.
  for (int attempt = 0;; ++attempt) {
    REQUIRE(attempt < 50);
    phi = random_phase(d.cfg.N, rng);
    x = random_cvec(d.cfg.M * d.cfg.L, rng) * d.cfg.power_amp();
    m = ci_margin(x, phi, d.frame, d.ch, d.cfg);
    double min_im = 1e300;
    for (int k = 0; k < d.cfg.K; ++k)
      for (int l = 0; l < d.cfg.L; ++l) {
        const Complex yr = m.y(k, l) * std::exp(-kImag * std::arg(d.frame.s(k, l)));
        min_im = std::min(min_im, std::abs(yr.imag()));
      }
    if (min_im > 1e-3 * std::abs(m.y(0, 0))) break;
  }

  const CiGradients cg = ci_margin_grad(x, phi, d.frame, d.ch, d.cfg);
  const double hx = 1e-5 * x.norm();
  for (int k = 0; k < d.cfg.K; ++k) {
    for (int l = 0; l < d.cfg.L; ++l) {
      // dg = Re{coef^T dz} as a real gradient over [Re z; Im z].
      RVec gx(2 * d.cfg.M);
      gx.head(d.cfg.M) = cg.dx_coef[k][l].real();
      gx.tail(d.cfg.M) = -cg.dx_coef[k][l].imag();
      const RVec fdx = fd_grad(
          [&](const RVec& z) {
            CVec xx = x;
            xx.segment(l * d.cfg.M, d.cfg.M) = from_real(z);
            return ci_margin(xx, phi, d.frame, d.ch, d.cfg).g(k, l);
          },
          to_real(CVec(x.segment(l * d.cfg.M, d.cfg.M))), hx);
      CHECK(rel_err(gx, fdx) < 1e-5);

      RVec gp(2 * d.cfg.N);
      gp.head(d.cfg.N) = cg.dphi_coef[k][l].real();
      gp.tail(d.cfg.N) = -cg.dphi_coef[k][l].imag();
      const RVec fdp = fd_grad(
          [&](const RVec& z) {
            return ci_margin(x, from_real(z), d.frame, d.ch, d.cfg).g(k, l);
          },
          to_real(phi), 1e-6);
      CHECK(rel_err(gp, fdp) < 1e-5);
    }
  }
}

TEST_CASE("gradient takes the sign-zero branch exactly at the kink") {
  const DeskInstance d = desk_instance(67);
  Rng rng(68);
  const CVec phi = random_phase(d.cfg.N, rng);
  // Construct x so the rotated sample of user 0 slot 0 is exactly real:
  // put all energy on antenna 0 with the symbol's own phase.
  CVec x = CVec::Zero(d.cfg.M * d.cfg.L);
  const QosMargins probe = ci_margin(x, phi, d.frame, d.ch, d.cfg);
  const Complex h0 = probe.h_eff[0](0);
  x(0) = d.frame.s(0, 0) / std::conj(h0 / std::abs(h0)) / std::abs(h0);
  const QosMargins m = ci_margin(x, phi, d.frame, d.ch, d.cfg);
  const Complex yr = m.y(0, 0) * std::exp(-kImag * std::arg(d.frame.s(0, 0)));
  REQUIRE(std::abs(yr.imag()) < 1e-12);

  const CiGradients cg = ci_margin_grad(x, phi, d.frame, d.ch, d.cfg);
  // sign(0) = 0 drops the |Im| term: coef = -sin(Theta) * rot * conj(h_eff).
  const Complex rot = std::exp(-kImag * std::arg(d.frame.s(0, 0)));
  const CVec expect = -std::sin(d.cfg.ci_angle()) * rot * probe.h_eff[0].conjugate();
  CHECK((cg.dx_coef[0][0] - expect).norm() < 1e-9 * expect.norm());
}

TEST_CASE("phi gradient vanishes when the RIS is disconnected from the users") {
  const DeskInstance d = desk_instance(69);
  ChannelSet ch = d.ch;
  ch.G.setZero();
  for (auto& h : ch.h_rk) h.setZero();
  Rng rng(70);
  const CVec phi = random_phase(d.cfg.N, rng);
  const CVec x = random_cvec(d.cfg.M * d.cfg.L, rng) * d.cfg.power_amp();
  const CiGradients cg = ci_margin_grad(x, phi, d.frame, ch, d.cfg);
  for (int k = 0; k < d.cfg.K; ++k)
    for (int l = 0; l < d.cfg.L; ++l) CHECK(cg.dphi_coef[k][l].norm() == 0.0);
}

TEST_CASE("margins are invariant under a common rotation of x and symbols") {
  const DeskInstance d = desk_instance(71);
  Rng rng(72);
  const CVec phi = random_phase(d.cfg.N, rng);
  const CVec x = random_cvec(d.cfg.M * d.cfg.L, rng) * d.cfg.power_amp();
  const QosMargins m0 = ci_margin(x, phi, d.frame, d.ch, d.cfg);

  const Complex rot = std::exp(kImag * 0.9);
  SymbolFrame f2 = d.frame;
  f2.s *= rot;
  const QosMargins m1 = ci_margin(rot * x, phi, f2, d.ch, d.cfg);
  CHECK((m0.g - m1.g).norm() < 1e-9 * m0.g.norm());
}

TEST_CASE("PSK demodulation partitions the plane into symbol sectors") {
  for (int omega : {2, 4, 8}) {
    for (int i = 0; i < omega; ++i) {
      const Complex s = std::exp(kImag * ((2.0 * i + 1.0) * M_PI / omega));
      CHECK(symbol_index(s, omega) == i);
      CHECK(demodulate_psk(s * 100.0, omega) == i);
      // A small rotation inside the sector keeps the decision.
      CHECK(demodulate_psk(s * std::exp(kImag * (0.9 * M_PI / omega)), omega) == i);
    }
  }
}

TEST_CASE("SER collapses to zero at negligible noise and is near chance at huge noise") {
  const DeskInstance d = desk_instance(73);
  Rng rng(74);
  const CVec phi = random_phase(d.cfg.N, rng);
  // Matched beam gives comfortably feasible margins for user 0 at slot level.
  CVec x(d.cfg.M * d.cfg.L);
  for (int l = 0; l < d.cfg.L; ++l) {
    const QosMargins probe = ci_margin(CVec::Zero(x.size()), phi, d.frame, d.ch, d.cfg);
    const CVec beam = probe.h_eff[0] / probe.h_eff[0].norm();
    x.segment(l * d.cfg.M, d.cfg.M) = beam * d.frame.s(0, l) * d.cfg.power_amp();
  }
  SceneConfig quiet = d.cfg;
  quiet.sigma2.assign(d.cfg.K, 1e-30);
  const SerResult low = simulate_ser(x, phi, d.frame, d.ch, quiet, 2000, rng);
  CHECK(low.per_user[0] == 0.0);

  SceneConfig loud = d.cfg;
  loud.sigma2.assign(d.cfg.K, 1e6);
  const SerResult high = simulate_ser(x, phi, d.frame, d.ch, loud, 20000, rng);
  const double chance = 1.0 - 1.0 / d.cfg.Omega;
  CHECK(std::abs(high.average - chance) < 0.02);
}
