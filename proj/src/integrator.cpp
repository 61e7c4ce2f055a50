#include "eltori/integrator.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace eltori {

namespace {

int step_count(double T, double h) {
  if (!(h > 0)) throw std::invalid_argument("integrator: timestep must be positive");
  if (T < 0) throw std::invalid_argument("integrator: negative duration");
  return static_cast<int>(std::ceil(T / h - 1e-9));
}

bool finite(const FpuFlow<Real>::State& s) { return s.X.allFinite() && s.Y.allFinite(); }

}  // namespace

Scheme parse_scheme(const std::string& s) {
  if (s == "leapfrog") return Scheme::Leapfrog;
  if (s == "sbab3") return Scheme::SBAB3;
  if (s == "sbab3c") return Scheme::SBAB3C;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Leapfrog:
      return "leapfrog";
    case Scheme::SBAB3:
      return "sbab3";
    case Scheme::SBAB3C:
      return "sbab3c";
  }
  return "?";
}

int IntegratorConfig::steps_per_sample() const {
  if (!(h > 0) || !(delta > 0)) throw std::invalid_argument("integrator: h and delta must be positive");
  const long m = std::lround(delta / h);
  if (m < 1 || std::abs(m * h - delta) > 1e-12 * delta)
    throw std::invalid_argument("integrator: delta must be an integer multiple of h");
  return static_cast<int>(m);
}

Signals integrate(const ChainConfig& cfg, const IntegratorConfig& icfg, const ModeState& s0) {
  const int m = icfg.steps_per_sample();
  const long ns = icfg.sample_count();
  Stepper<Real> st(cfg, icfg.scheme, icfg.h);
  auto s = st.flow().from_modes(s0);
  const int n = st.flow().dof();
  Signals out;
  out.delta = icfg.delta;
  out.modes.assign(n, std::vector<std::complex<double>>(ns));
  for (long i = 0; i < ns; ++i) {
    if (i > 0)
      for (int k = 0; k < m; ++k) st.step(s);
    if (!finite(s)) {
      std::ostringstream os;
      os << "non-finite state at t = " << i * icfg.delta;
      throw BlowUp(os.str(), i * icfg.delta);
    }
    for (int j = 0; j < n; ++j)
      out.modes[j][i] = std::complex<double>(static_cast<double>(s.Y[j]), static_cast<double>(s.X[j]));
  }
  return out;
}

ModeState evolve(const ChainConfig& cfg, const IntegratorConfig& icfg, const ModeState& s0, double T) {
  const int n = step_count(T, icfg.h);
  if (n == 0) return s0;
  Stepper<Real> st(cfg, icfg.scheme, T / n);
  auto s = st.flow().from_modes(s0);
  for (int k = 0; k < n; ++k) st.step(s);
  if (!finite(s)) throw BlowUp("non-finite state", T);
  return st.flow().to_modes(s);
}

TangentResult evolve_tangent(const ChainConfig& cfg, const IntegratorConfig& icfg, const ModeState& s0, double T) {
  const int n = step_count(T, icfg.h);
  const int d = cfg.N - 1;
  Stepper<Real> st(cfg, icfg.scheme, n > 0 ? T / n : icfg.h);
  auto s = st.flow().from_modes(s0);
  Stepper<Real>::Mat V = Stepper<Real>::Mat::Identity(2 * d, 2 * d);
  for (int k = 0; k < n; ++k) st.step(s, V);
  if (!finite(s) || !V.allFinite()) throw BlowUp("non-finite state", T);
  return TangentResult{st.flow().to_modes(s), V.cast<double>()};
}

void write_signals(std::ostream& os, const ChainConfig& cfg, const IntegratorConfig& icfg, const Signals& s) {
  os << "# N=" << cfg.N << " alpha=" << std::hexfloat << cfg.alpha << " beta=" << cfg.beta << " h=" << icfg.h
     << " delta=" << s.delta << " T=" << icfg.T << std::defaultfloat << '\n';
  os << "t";
  for (std::size_t j = 0; j < s.modes.size(); ++j) os << ",Y" << j + 1 << ",X" << j + 1;
  os << '\n' << std::hexfloat;
  for (std::size_t i = 0; i < s.length(); ++i) {
    os << i * s.delta;
    for (const auto& m : s.modes) os << ',' << m[i].real() << ',' << m[i].imag();
    os << '\n';
  }
  os << std::defaultfloat;
}

Signals read_signals(std::istream& is) {
  std::string line;
  Signals s;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw std::runtime_error("read_signals: missing header");
  auto pos = line.find("delta=");
  if (pos == std::string::npos) throw std::runtime_error("read_signals: header lacks delta");
  s.delta = std::strtod(line.c_str() + pos + 6, nullptr);
  if (!std::getline(is, line)) throw std::runtime_error("read_signals: missing column line");
  const std::size_t nm = (std::count(line.begin(), line.end(), ',')) / 2;
  s.modes.assign(nm, {});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    std::getline(ss, f, ',');
    for (std::size_t j = 0; j < nm; ++j) {
      std::string a, b;
      if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) throw std::runtime_error("read_signals: short row");
      s.modes[j].emplace_back(std::strtod(a.c_str(), nullptr), std::strtod(b.c_str(), nullptr));
    }
  }
  return s;
}

}  // namespace eltori
