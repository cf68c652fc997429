#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "isacwave/linalg.hpp"

namespace isacwave {

using Rng = std::mt19937_64;

enum class Link { BsRis = 0, RisTarget = 1, RisUser = 2, BsTarget = 3, BsUser = 4 };

struct PathLossLaw {
  double c0_db = -30.0;  // reference gain at d0
  double d0_m = 1.0;
  double exponent[5] = {2.3, 2.3, 2.5, 2.8, 3.0};  // indexed by Link
};

struct Geometry {
  double bs_ris_m = 10.0;
  double ris_target_m = 5.0;
  double bs_target_m = 60.0;
  std::vector<double> bs_user_m;       // size K
  std::vector<double> ris_user_m;      // size K
  std::vector<double> bs_clutter_m;    // size Q
  std::vector<double> ris_clutter_m;   // size Q
  double bs_ris_bearing_rad = 0.5;     // LoS bearing used for the Rician component of G
  double ris_bs_bearing_rad = -0.3;
};

/// All scalar system parameters. Powers and variances are stored in watts.
struct SceneConfig {
  int M = 4;   // BS antennas
  int N = 16;  // RIS elements
  int K = 2;   // users
  int L = 8;   // slots per pulse
  int Q = 2;   // clutter sources
  double P = 100.0;            // transmit power budget (W)
  int Omega = 4;               // PSK order
  std::vector<double> Gamma;   // per-user required SNR, linear
  std::vector<double> sigma2;  // per-user noise variance (W)
  double xi2_0 = 1.0;          // target RCS power
  std::vector<double> xi2_q;   // clutter RCS powers
  double xi2_z = 1e-11;        // radar noise variance (W)
  double theta_0 = 0.0;        // target DoA at BS (rad)
  double theta_ris = 0.6;      // target DoA at RIS (rad)
  std::vector<double> theta_q;  // clutter DoAs at BS (rad)
  std::vector<double> theta_rq; // clutter DoAs at RIS (rad)
  std::vector<int> d_q;         // clutter range bins, 0..L
  PathLossLaw pathloss;
  Geometry geometry;
  double rician_k = 10.0;  // linear Rician factor for G
  std::uint64_t seed = 1;

  double ci_angle() const;                  // Theta = pi/Omega
  double gamma(int k) const;                // sigma_k * sqrt(Gamma_k) * sin(Theta)
  double power_amp() const;                 // sqrt(P/M)
  void validate() const;                    // throws std::invalid_argument

  /// Desk-scale preset: dimensions small enough for dense oracles.
  static SceneConfig desk();
  /// Full-scale preset matching the published experiment defaults.
  static SceneConfig paper();

  static SceneConfig from_file(const std::string& path);
  void to_file(const std::string& path) const;
};

struct ChannelSet {
  CMat G;                    // N x M, BS -> RIS
  std::vector<CVec> h_k;     // K of length M, BS -> user
  std::vector<CVec> h_rk;    // K of length N, RIS -> user
  CVec h_bt;                 // M, BS <-> target LoS
  CVec h_rt;                 // N, RIS <-> target LoS
  std::vector<CVec> h_bq;    // Q of length M
  std::vector<CVec> h_rq;    // Q of length N

  void save_json(const std::string& path, const SceneConfig& cfg) const;
  static ChannelSet load_json(const std::string& path, SceneConfig* cfg_out = nullptr);
};

struct SymbolFrame {
  CMat s;  // K x L unit-modulus PSK symbols
  double angle(int k, int l) const { return std::arg(s(k, l)); }
};

/// ULA steering vector, half-wavelength spacing: entry m = exp(j*pi*(m-1)*sin(theta)).
CVec steering(double theta, int count);
/// Entry-wise derivative of steering() with respect to theta.
CVec steering_deriv(double theta, int count);

double pathloss_amplitude(double d_m, Link link, const PathLossLaw& law);

ChannelSet synth_channels(const SceneConfig& cfg, Rng& rng);
std::vector<ChannelSet> synth_dataset(const SceneConfig& cfg, int b_sz, Rng& rng);
SymbolFrame draw_symbols(const SceneConfig& cfg, Rng& rng);

}  // namespace isacwave
