#include "isacwave/scene.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace isacwave {

namespace {

double parse_power(const std::string& raw) {
  // Power values require a unit suffix: W, dBW, or dBm.
  auto ends_with = [&](const char* suf) {
    const std::size_t n = std::strlen(suf);
    return raw.size() > n && raw.compare(raw.size() - n, n, suf) == 0;
  };
  if (ends_with("dBm")) {
    const double v = std::stod(raw.substr(0, raw.size() - 3));
    return std::pow(10.0, (v - 30.0) / 10.0);
  }
  if (ends_with("dBW")) {
    const double v = std::stod(raw.substr(0, raw.size() - 3));
    return std::pow(10.0, v / 10.0);
  }
  if (ends_with("W")) {
    return std::stod(raw.substr(0, raw.size() - 1));
  }
  throw std::invalid_argument("power value '" + raw + "' needs a W/dBW/dBm suffix");
}

std::vector<double> parse_list(const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::string format_watts(double w) {
  std::ostringstream os;
  os << w << "W";
  return os.str();
}

CVec complex_gaussian(int n, double var, Rng& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(nd(rng), nd(rng));
  return v;
}

}  // namespace

double SceneConfig::ci_angle() const { return M_PI / static_cast<double>(Omega); }

double SceneConfig::gamma(int k) const {
  return std::sqrt(sigma2[k]) * std::sqrt(Gamma[k]) * std::sin(ci_angle());
}

double SceneConfig::power_amp() const { return std::sqrt(P / M); }

void SceneConfig::validate() const {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("SceneConfig: ") + what);
  };
  req(M >= 1 && N >= 1 && K >= 1 && L >= 1 && Q >= 0, "dimensions must be positive");
  req(P > 0 && xi2_0 > 0 && xi2_z > 0, "powers and variances must be positive");
  req(Omega >= 2 && (Omega & (Omega - 1)) == 0, "Omega must be a power of two");
  req(static_cast<int>(Gamma.size()) == K && static_cast<int>(sigma2.size()) == K,
      "per-user parameter lengths must equal K");
  req(static_cast<int>(xi2_q.size()) == Q && static_cast<int>(theta_q.size()) == Q &&
          static_cast<int>(theta_rq.size()) == Q && static_cast<int>(d_q.size()) == Q,
      "per-clutter parameter lengths must equal Q");
  for (double g : Gamma) req(g > 0, "Gamma_k must be positive");
  for (double s : sigma2) req(s > 0, "sigma2_k must be positive");
  for (double x : xi2_q) req(x > 0, "xi2_q must be positive");
  for (int d : d_q) req(d >= 0 && d <= L, "d_q must lie in [0, L]");
  req(static_cast<int>(geometry.bs_user_m.size()) == K &&
          static_cast<int>(geometry.ris_user_m.size()) == K,
      "user distances must have length K");
  req(static_cast<int>(geometry.bs_clutter_m.size()) == Q &&
          static_cast<int>(geometry.ris_clutter_m.size()) == Q,
      "clutter distances must have length Q");
}

SceneConfig SceneConfig::desk() {
  SceneConfig c;
  c.M = 4;
  c.N = 16;
  c.K = 2;
  c.L = 8;
  c.Q = 2;
  c.P = 100.0;  // 20 dBW
  c.Omega = 4;
  c.Gamma.assign(c.K, 10.0);       // 10 dB
  c.sigma2.assign(c.K, 1e-11);     // -80 dBm
  c.xi2_0 = 1.0;
  c.xi2_q.assign(c.Q, 1.0);
  c.xi2_z = 1e-11;
  c.theta_0 = 0.0;
  c.theta_ris = 0.6;
  c.theta_q = {-60.0 * M_PI / 180.0, -20.0 * M_PI / 180.0};
  c.theta_rq = {-0.9, 0.3};
  c.d_q = {0, 1};
  c.geometry.bs_user_m = {40.0, 50.0};
  c.geometry.ris_user_m = {30.0, 35.0};
  c.geometry.bs_clutter_m = {55.0, 65.0};
  c.geometry.ris_clutter_m = {25.0, 30.0};
  return c;
}

SceneConfig SceneConfig::paper() {
  SceneConfig c;
  c.M = 6;
  c.N = 64;
  c.K = 3;
  c.L = 20;
  c.Q = 3;
  c.P = 100.0;  // 20 dBW
  c.Omega = 4;
  c.Gamma.assign(c.K, 10.0);
  c.sigma2.assign(c.K, 1e-11);
  c.xi2_0 = 1.0;
  c.xi2_q.assign(c.Q, 1.0);
  c.xi2_z = 1e-11;
  c.theta_0 = 0.0;
  c.theta_ris = 0.6;
  c.theta_q = {-60.0 * M_PI / 180.0, -20.0 * M_PI / 180.0, 45.0 * M_PI / 180.0};
  c.theta_rq = {-0.9, 0.3, 1.0};
  c.d_q = {0, 1, 2};
  c.geometry.bs_user_m = {40.0, 50.0, 60.0};
  c.geometry.ris_user_m = {30.0, 35.0, 40.0};
  c.geometry.bs_clutter_m = {55.0, 65.0, 70.0};
  c.geometry.ris_clutter_m = {25.0, 30.0, 35.0};
  return c;
}

SceneConfig SceneConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  SceneConfig c = desk();
  auto geti = [&](const char* k, int def) {
    auto it = kv.find(k);
    return it == kv.end() ? def : std::stoi(it->second);
  };
  auto getd = [&](const char* k, double def) {
    auto it = kv.find(k);
    return it == kv.end() ? def : std::stod(it->second);
  };
  c.M = geti("M", c.M);
  c.N = geti("N", c.N);
  c.K = geti("K", c.K);
  c.L = geti("L", c.L);
  c.Q = geti("Q", c.Q);
  c.Omega = geti("Omega", c.Omega);
  c.seed = static_cast<std::uint64_t>(geti("seed", static_cast<int>(c.seed)));
  if (kv.count("P")) c.P = parse_power(kv["P"]);
  if (kv.count("xi2_z")) c.xi2_z = parse_power(kv["xi2_z"]);
  c.xi2_0 = getd("xi2_0", c.xi2_0);

  auto get_list = [&](const char* k, std::vector<double> def) {
    auto it = kv.find(k);
    return it == kv.end() ? def : parse_list(it->second);
  };
  auto resize_fill = [](std::vector<double> v, int n) {
    if (v.empty()) v.push_back(0.0);
    while (static_cast<int>(v.size()) < n) v.push_back(v.back());
    v.resize(n);
    return v;
  };
  if (kv.count("Gamma_dB")) {
    auto g = resize_fill(parse_list(kv["Gamma_dB"]), c.K);
    c.Gamma.resize(c.K);
    for (int k = 0; k < c.K; ++k) c.Gamma[k] = std::pow(10.0, g[k] / 10.0);
  } else {
    c.Gamma = resize_fill(c.Gamma, c.K);
  }
  if (kv.count("sigma2")) {
    c.sigma2.assign(c.K, parse_power(kv["sigma2"]));
  } else {
    c.sigma2 = resize_fill(c.sigma2, c.K);
  }
  c.xi2_q = resize_fill(get_list("xi2_q", c.xi2_q), c.Q);
  c.theta_0 = getd("theta_0_deg", c.theta_0 * 180.0 / M_PI) * M_PI / 180.0;
  c.theta_ris = getd("theta_ris_deg", c.theta_ris * 180.0 / M_PI) * M_PI / 180.0;
  {
    auto tq = get_list("theta_q_deg", {});
    if (!tq.empty()) {
      c.theta_q.clear();
      for (double v : tq) c.theta_q.push_back(v * M_PI / 180.0);
    }
    c.theta_q = resize_fill(c.theta_q, c.Q);
    auto trq = get_list("theta_rq_deg", {});
    if (!trq.empty()) {
      c.theta_rq.clear();
      for (double v : trq) c.theta_rq.push_back(v * M_PI / 180.0);
    }
    c.theta_rq = resize_fill(c.theta_rq, c.Q);
  }
  {
    auto dq = get_list("d_q", {});
    if (!dq.empty()) {
      c.d_q.clear();
      for (double v : dq) c.d_q.push_back(static_cast<int>(v));
    }
    while (static_cast<int>(c.d_q.size()) < c.Q) c.d_q.push_back(0);
    c.d_q.resize(c.Q);
  }
  c.pathloss.c0_db = getd("C0_dB", c.pathloss.c0_db);
  c.pathloss.d0_m = getd("d0_m", c.pathloss.d0_m);
  c.pathloss.exponent[0] = getd("rho_bs_ris", c.pathloss.exponent[0]);
  c.pathloss.exponent[1] = getd("rho_ris_target", c.pathloss.exponent[1]);
  c.pathloss.exponent[2] = getd("rho_ris_user", c.pathloss.exponent[2]);
  c.pathloss.exponent[3] = getd("rho_bs_target", c.pathloss.exponent[3]);
  c.pathloss.exponent[4] = getd("rho_bs_user", c.pathloss.exponent[4]);
  c.geometry.bs_ris_m = getd("bs_ris_m", c.geometry.bs_ris_m);
  c.geometry.ris_target_m = getd("ris_target_m", c.geometry.ris_target_m);
  c.geometry.bs_target_m = getd("bs_target_m", c.geometry.bs_target_m);
  c.geometry.bs_user_m = resize_fill(get_list("bs_user_m", c.geometry.bs_user_m), c.K);
  c.geometry.ris_user_m = resize_fill(get_list("ris_user_m", c.geometry.ris_user_m), c.K);
  c.geometry.bs_clutter_m = resize_fill(get_list("bs_clutter_m", c.geometry.bs_clutter_m), c.Q);
  c.geometry.ris_clutter_m = resize_fill(get_list("ris_clutter_m", c.geometry.ris_clutter_m), c.Q);
  c.rician_k = getd("rician_k", c.rician_k);
  c.validate();
  return c;
}

void SceneConfig::to_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file " + path);
  auto list = [](const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
  };
  out << "M=" << M << "\nN=" << N << "\nK=" << K << "\nL=" << L << "\nQ=" << Q << "\n";
  out << "Omega=" << Omega << "\nseed=" << seed << "\n";
  out << "P=" << format_watts(P) << "\n";
  out << "xi2_z=" << format_watts(xi2_z) << "\n";
  out << "sigma2=" << format_watts(sigma2[0]) << "\n";
  out << "xi2_0=" << xi2_0 << "\nxi2_q=" << list(xi2_q) << "\n";
  std::vector<double> gdb;
  for (double g : Gamma) gdb.push_back(10.0 * std::log10(g));
  out << "Gamma_dB=" << list(gdb) << "\n";
  out << "theta_0_deg=" << theta_0 * 180.0 / M_PI << "\n";
  out << "theta_ris_deg=" << theta_ris * 180.0 / M_PI << "\n";
  std::vector<double> tq, trq;
  for (double v : theta_q) tq.push_back(v * 180.0 / M_PI);
  for (double v : theta_rq) trq.push_back(v * 180.0 / M_PI);
  out << "theta_q_deg=" << list(tq) << "\ntheta_rq_deg=" << list(trq) << "\n";
  std::vector<double> dq(d_q.begin(), d_q.end());
  out << "d_q=" << list(dq) << "\n";
  out << "C0_dB=" << pathloss.c0_db << "\nd0_m=" << pathloss.d0_m << "\n";
  out << "rho_bs_ris=" << pathloss.exponent[0] << "\nrho_ris_target=" << pathloss.exponent[1]
      << "\nrho_ris_user=" << pathloss.exponent[2] << "\nrho_bs_target=" << pathloss.exponent[3]
      << "\nrho_bs_user=" << pathloss.exponent[4] << "\n";
  out << "bs_ris_m=" << geometry.bs_ris_m << "\nris_target_m=" << geometry.ris_target_m
      << "\nbs_target_m=" << geometry.bs_target_m << "\n";
  out << "bs_user_m=" << list(geometry.bs_user_m) << "\nris_user_m=" << list(geometry.ris_user_m)
      << "\n";
  out << "bs_clutter_m=" << list(geometry.bs_clutter_m)
      << "\nris_clutter_m=" << list(geometry.ris_clutter_m) << "\n";
  out << "rician_k=" << rician_k << "\n";
}

CVec steering(double theta, int count) {
  if (count < 1) throw std::invalid_argument("steering: count must be >= 1");
  CVec a(count);
  const double s = std::sin(theta);
  for (int m = 0; m < count; ++m) a(m) = std::exp(kImag * (M_PI * m * s));
  return a;
}

CVec steering_deriv(double theta, int count) {
  CVec a = steering(theta, count);
  const double c = std::cos(theta);
  for (int m = 0; m < count; ++m) a(m) *= kImag * (M_PI * m * c);
  return a;
}

double pathloss_amplitude(double d_m, Link link, const PathLossLaw& law) {
  if (d_m <= 0.0) throw std::domain_error("pathloss_amplitude: distance must be positive");
  const double c0 = std::pow(10.0, law.c0_db / 10.0);
  return std::sqrt(c0 * std::pow(law.d0_m / d_m, law.exponent[static_cast<int>(link)]));
}

ChannelSet synth_channels(const SceneConfig& cfg, Rng& rng) {
  cfg.validate();
  ChannelSet ch;
  const auto& geo = cfg.geometry;
  const auto& law = cfg.pathloss;

  // BS-RIS link: Rician, LoS component along the configured bearings.
  {
    const double amp = pathloss_amplitude(geo.bs_ris_m, Link::BsRis, law);
    const double kf = cfg.rician_k;
    const CVec ar = steering(geo.ris_bs_bearing_rad, cfg.N);
    const CVec ab = steering(geo.bs_ris_bearing_rad, cfg.M);
    CMat w(cfg.N, cfg.M);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    for (int i = 0; i < cfg.N; ++i)
      for (int j = 0; j < cfg.M; ++j) w(i, j) = Complex(nd(rng), nd(rng));
    ch.G = amp * (std::sqrt(kf / (1.0 + kf)) * ar * ab.adjoint() +
                  std::sqrt(1.0 / (1.0 + kf)) * w);
  }

  // User channels: Rayleigh scaled by path loss.
  ch.h_k.resize(cfg.K);
  ch.h_rk.resize(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    const double ab = pathloss_amplitude(geo.bs_user_m[k], Link::BsUser, law);
    const double ar = pathloss_amplitude(geo.ris_user_m[k], Link::RisUser, law);
    ch.h_k[k] = ab * complex_gaussian(cfg.M, 1.0, rng);
    ch.h_rk[k] = ar * complex_gaussian(cfg.N, 1.0, rng);
  }

  // Target and clutter: LoS steering scaled by path loss.
  ch.h_bt = pathloss_amplitude(geo.bs_target_m, Link::BsTarget, law) * steering(cfg.theta_0, cfg.M);
  ch.h_rt =
      pathloss_amplitude(geo.ris_target_m, Link::RisTarget, law) * steering(cfg.theta_ris, cfg.N);
  ch.h_bq.resize(cfg.Q);
  ch.h_rq.resize(cfg.Q);
  for (int q = 0; q < cfg.Q; ++q) {
    ch.h_bq[q] =
        pathloss_amplitude(geo.bs_clutter_m[q], Link::BsTarget, law) * steering(cfg.theta_q[q], cfg.M);
    ch.h_rq[q] = pathloss_amplitude(geo.ris_clutter_m[q], Link::RisTarget, law) *
                 steering(cfg.theta_rq[q], cfg.N);
  }
  return ch;
}

std::vector<ChannelSet> synth_dataset(const SceneConfig& cfg, int b_sz, Rng& rng) {
  if (b_sz < 1) throw std::invalid_argument("synth_dataset: b_sz must be >= 1");
  std::vector<ChannelSet> out;
  out.reserve(b_sz);
  for (int b = 0; b < b_sz; ++b) out.push_back(synth_channels(cfg, rng));
  return out;
}

SymbolFrame draw_symbols(const SceneConfig& cfg, Rng& rng) {
  SymbolFrame f;
  f.s.resize(cfg.K, cfg.L);
  std::uniform_int_distribution<int> pick(0, cfg.Omega - 1);
  for (int k = 0; k < cfg.K; ++k) {
    for (int l = 0; l < cfg.L; ++l) {
      // Constellation points at (2i+1)*pi/Omega, e.g. e^{j pi/4} for QPSK.
      const double ang = (2.0 * pick(rng) + 1.0) * M_PI / cfg.Omega;
      f.s(k, l) = std::exp(kImag * ang);
    }
  }
  return f;
}

namespace {

nlohmann::json vec_to_json(const CVec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    j.push_back(v(i).real());
    j.push_back(v(i).imag());
  }
  return j;
}

CVec vec_from_json(const nlohmann::json& j) {
  CVec v(j.size() / 2);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = Complex(j[2 * i].get<double>(), j[2 * i + 1].get<double>());
  return v;
}

}  // namespace

void ChannelSet::save_json(const std::string& path, const SceneConfig& cfg) const {
  nlohmann::json j;
  j["header"] = {{"M", cfg.M}, {"N", cfg.N}, {"K", cfg.K},
                 {"L", cfg.L}, {"Q", cfg.Q}, {"seed", cfg.seed}};
  CMat gt = G.transpose();  // row-major serialization
  j["G"] = vec_to_json(Eigen::Map<const CVec>(gt.data(), gt.size()));
  for (int k = 0; k < cfg.K; ++k) {
    j["h_k"].push_back(vec_to_json(h_k[k]));
    j["h_rk"].push_back(vec_to_json(h_rk[k]));
  }
  j["h_bt"] = vec_to_json(h_bt);
  j["h_rt"] = vec_to_json(h_rt);
  for (int q = 0; q < cfg.Q; ++q) {
    j["h_bq"].push_back(vec_to_json(h_bq[q]));
    j["h_rq"].push_back(vec_to_json(h_rq[q]));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write channel file " + path);
  out << j.dump(2) << "\n";
}

ChannelSet ChannelSet::load_json(const std::string& path, SceneConfig* cfg_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open channel file " + path);
  nlohmann::json j;
  in >> j;
  const int M = j["header"]["M"], N = j["header"]["N"], K = j["header"]["K"],
            Q = j["header"]["Q"];
  ChannelSet ch;
  CVec g = vec_from_json(j["G"]);
  ch.G = Eigen::Map<CMat>(g.data(), M, N).transpose();
  for (int k = 0; k < K; ++k) {
    ch.h_k.push_back(vec_from_json(j["h_k"][k]));
    ch.h_rk.push_back(vec_from_json(j["h_rk"][k]));
  }
  ch.h_bt = vec_from_json(j["h_bt"]);
  ch.h_rt = vec_from_json(j["h_rt"]);
  for (int q = 0; q < Q; ++q) {
    ch.h_bq.push_back(vec_from_json(j["h_bq"][q]));
    ch.h_rq.push_back(vec_from_json(j["h_rq"][q]));
  }
  if (cfg_out) {
    cfg_out->M = M;
    cfg_out->N = N;
    cfg_out->K = K;
    cfg_out->L = j["header"]["L"];
    cfg_out->Q = Q;
    cfg_out->seed = j["header"]["seed"];
  }
  return ch;
}

}  // namespace isacwave
