#pragma once

#include <complex>

#include <Eigen/Dense>

namespace isacwave {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

constexpr Complex kImag{0.0, 1.0};

/// Stacks a complex vector into its real composite [Re; Im].
inline RVec to_real(const CVec& z) {
  RVec out(2 * z.size());
  out.head(z.size()) = z.real();
  out.tail(z.size()) = z.imag();
  return out;
}

inline CVec from_real(const RVec& r) {
  const Eigen::Index n = r.size() / 2;
  CVec out(n);
  out.real() = r.head(n);
  out.imag() = r.tail(n);
  return out;
}

/// First-order differential of a complex-valued scalar in a complex vector
/// variable z, kept as dF = c^T dz + cbar^T d(conj z).
///
/// Accumulating in this form keeps the chain rule for holomorphic and
/// anti-holomorphic pieces uniform; real_grad_of_re() collapses it into the
/// gradient of Re{F} over the real composite [Re z; Im z].
class LinForm {
 public:
  explicit LinForm(Eigen::Index n) : c_(CVec::Zero(n)), cbar_(CVec::Zero(n)) {}

  Eigen::Index dim() const { return c_.size(); }
  CVec& c() { return c_; }
  CVec& cbar() { return cbar_; }
  const CVec& c() const { return c_; }
  const CVec& cbar() const { return cbar_; }

  /// alpha * m^H dz
  void add_inner(const CVec& m, Complex alpha) { c_ += alpha * m.conjugate(); }
  /// alpha * dz^H m
  void add_inner_conj(const CVec& m, Complex alpha) { cbar_ += alpha * m; }
  /// alpha * r^T dz
  void add_linear(const CVec& r, Complex alpha) { c_ += alpha * r; }

  void add_scaled(const LinForm& o, Complex alpha) {
    c_ += alpha * o.c_;
    cbar_ += alpha * o.cbar_;
  }
  /// Adds alpha * conj(dF_o).
  void add_conj_scaled(const LinForm& o, Complex alpha) {
    c_ += alpha * o.cbar_.conjugate();
    cbar_ += alpha * o.c_.conjugate();
  }

  /// Gradient of Re{F} with respect to [Re z; Im z].
  RVec real_grad_of_re() const {
    const Eigen::Index n = c_.size();
    RVec g(2 * n);
    g.head(n) = (c_ + cbar_).real();
    g.tail(n) = (cbar_ - c_).imag();
    return g;
  }

 private:
  CVec c_;
  CVec cbar_;
};

/// Real-composite gradients of a scalar objective in (x, phi).
struct RealGradPair {
  RVec x;    // length 2*M*L
  RVec phi;  // length 2*N
};

}  // namespace isacwave
