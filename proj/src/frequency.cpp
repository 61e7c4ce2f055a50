#include "eltori/frequency.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace eltori {

namespace {

using cplx = std::complex<double>;
constexpr int kReanchor = 256;

double span(const Signal& s, double delta) {
  if (s.size() < 2) throw std::invalid_argument("frequency analysis needs at least two samples");
  return (s.size() - 1) * delta;
}

std::vector<double> window_weights(std::size_t n) {
  std::vector<double> w(n);
  const long double m = static_cast<long double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(1.0L - std::cos(2.0L * std::numbers::pi_v<long double> * i / m));
  return w;
}

// e^{i v t_i}, argument reduced in extended precision at each anchor
cplx unit(double v, double delta, std::size_t i) {
  long double a = std::fmod(static_cast<long double>(v) * delta * static_cast<long double>(i), 2.0L * std::numbers::pi_v<long double>);
  return std::polar(1.0, static_cast<double>(a));
}

// Calls f(i, e^{i v t_i}) with a recurrence that is re-anchored periodically.
template <class F>
void sweep(std::size_t n, double delta, double v, F&& f) {
  const cplx step = unit(v, delta, 1);
  cplx z(1.0, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i % kReanchor == 0) z = unit(v, delta, i);
    f(i, z);
    z *= step;
  }
}

std::vector<cplx> basis(std::size_t n, double delta, double v) {
  std::vector<cplx> e(n);
  sweep(n, delta, v, [&](std::size_t i, cplx z) { e[i] = z; });
  return e;
}

struct Moments {
  cplx F, F1, F2;  // transform and its first two derivatives in v
};

Moments moments(const Signal& s, const std::vector<double>& w, double delta, double v) {
  Moments m{};
  sweep(s.size(), delta, -v, [&](std::size_t i, cplx e) {
    const cplx a = s[i] * e * w[i];
    const double t = static_cast<double>(i) * delta;
    m.F += a;
    m.F1 += cplx(0, -t) * a;
    m.F2 += -t * t * a;
  });
  const double norm = 1.0 / (s.size() - 1);
  m.F *= norm;
  m.F1 *= norm;
  m.F2 *= norm;
  return m;
}

cplx transform(const Signal& s, const std::vector<double>& w, double delta, double v) {
  cplx F = 0;
  sweep(s.size(), delta, -v, [&](std::size_t i, cplx e) { F += s[i] * e * w[i]; });
  return F / static_cast<double>(s.size() - 1);
}

// g = d|F|^2/dv / 2 and its derivative
std::pair<double, double> slope(const Signal& s, const std::vector<double>& w, double delta, double v) {
  Moments m = moments(s, w, delta, v);
  const double g = (std::conj(m.F) * m.F1).real();
  const double dg = std::norm(m.F1) + (std::conj(m.F) * m.F2).real();
  return {g, dg};
}

double refine(const Signal& s, const std::vector<double>& w, double delta, double v0) {
  const double T = span(s, delta);
  double h = std::numbers::pi / T;
  double lo = v0 - h, hi = v0 + h;
  auto glo = slope(s, w, delta, lo).first, ghi = slope(s, w, delta, hi).first;
  if (!(glo > 0 && ghi < 0)) {
    lo = v0 - 2 * h;
    hi = v0 + 2 * h;
    glo = slope(s, w, delta, lo).first;
    ghi = slope(s, w, delta, hi).first;
    if (!(glo > 0 && ghi < 0)) throw NoPeak("no interior maximum of the tuning function");
  }
  double v = v0;
  for (int it = 0; it < 100; ++it) {
    auto [g, dg] = slope(s, w, delta, v);
    if (g == 0) break;
    const double tol = 1e-15 * std::max(1.0, std::abs(v));
    if (dg < 0 && std::abs(g / dg) <= tol) return v - g / dg;
    if (g > 0)
      lo = v;
    else
      hi = v;
    double next = dg < 0 ? v - g / dg : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= tol) return next;
    v = next;
  }
  return v;
}

// FFT of the windowed signal zero-padded to a power of two: bin spacing <= 2 pi/T,
// so the top bin lies within the +-pi/T bracket that refine() searches first.
double coarse_peak(const Signal& s, const std::vector<double>& w, double delta, double* peak_abs) {
  std::size_t M = 1;
  while (M < s.size() - 1) M <<= 1;
  std::vector<cplx> in(M, 0.0), out;
  // indices >= M fold back exactly, since the bins are multiples of 2 pi/M
  for (std::size_t i = 0; i < s.size(); ++i) in[i % M] += s[i] * w[i];
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  std::size_t best = 0;
  double bv = -1;
  for (std::size_t k = 0; k < M; ++k)
    if (std::abs(out[k]) > bv) {
      bv = std::abs(out[k]);
      best = k;
    }
  if (peak_abs) *peak_abs = bv / (s.size() - 1);
  const long kk = best < M / 2 ? static_cast<long>(best) : static_cast<long>(best) - static_cast<long>(M);
  return 2.0 * std::numbers::pi * kk / (M * delta);
}

double wrap_phase(double p) {
  p = std::fmod(p, 2 * std::numbers::pi);
  if (p < 0) p += 2 * std::numbers::pi;
  return p;
}

void enumerate_k(int n, int budget, std::vector<int>& k, int pos, const std::function<void(const std::vector<int>&)>& f) {
  if (pos == n) {
    f(k);
    return;
  }
  for (int v = -budget; v <= budget; ++v) {
    k[pos] = v;
    enumerate_k(n, budget - std::abs(v), k, pos + 1, f);
  }
  k[pos] = 0;
}

}  // namespace

double hanning(double t, double T) { return 1.0 + std::cos(std::numbers::pi * (2.0 * t / T - 1.0)); }

std::complex<double> windowed_transform(const Signal& s, double delta, double v) {
  span(s, delta);
  return transform(s, window_weights(s.size()), delta, v);
}

double tuning(const Signal& s, double delta, double v) { return std::abs(windowed_transform(s, delta, v)); }

double find_peak(const Signal& s, double delta, double lo, double hi) {
  const double T = span(s, delta);
  if (!(hi > lo)) throw std::invalid_argument("find_peak: empty bracket");
  const std::vector<double> w = window_weights(s.size());
  const double h = std::numbers::pi / T;
  const int n = std::max(2, static_cast<int>(std::ceil((hi - lo) / h)));
  std::vector<double> val(n + 1);
  for (int i = 0; i <= n; ++i) val[i] = std::abs(transform(s, w, delta, lo + (hi - lo) * i / n));
  int best = -1;
  for (int i = 1; i < n; ++i)
    if (val[i] >= val[i - 1] && val[i] >= val[i + 1] && (best < 0 || val[i] > val[best])) best = i;
  if (best < 0) throw NoPeak("find_peak: no interior maximum in the bracket");
  return refine(s, w, delta, lo + (hi - lo) * best / n);
}

double refine_peak(const Signal& s, double delta, double v0) { return refine(s, window_weights(s.size()), delta, v0); }

double dominant_frequency(const Signal& s, double delta) {
  span(s, delta);
  const std::vector<double> w = window_weights(s.size());
  double amp = 0;
  const double v0 = coarse_peak(s, w, delta, &amp);
  if (amp == 0) throw NoPeak("dominant_frequency: zero signal");
  return refine(s, w, delta, v0);
}

namespace {

// Windowed least squares on the basis e^{i v_k t}: G(k, l) = <e_l, e_k>, b_k = <s, e_k>.
struct Gram {
  Eigen::MatrixXcd G;
  Eigen::VectorXcd b;

  void set(int k, const Signal& s, const std::vector<double>& w, double delta, double v,
           const std::vector<std::vector<cplx>>& E) {
    const std::size_t n = s.size();
    const double norm = 1.0 / (n - 1);
    for (int l = 0; l < static_cast<int>(E.size()); ++l) {
      cplx g = 0;
      for (std::size_t i = 0; i < n; ++i) g += std::conj(E[l][i]) * E[k][i] * w[i];
      G(l, k) = g * norm;
      G(k, l) = std::conj(G(l, k));
    }
    G(k, k) = G(k, k).real();
    b[k] = transform(s, w, delta, v);
  }

  void grow(const Signal& s, const std::vector<double>& w, double delta, double v, const std::vector<std::vector<cplx>>& E) {
    const int m = static_cast<int>(E.size());
    G.conservativeResize(m, m);
    b.conservativeResize(m);
    set(m - 1, s, w, delta, v, E);
  }

  Eigen::VectorXcd solve() const { return G.ldlt().solve(b); }
};

Signal residual(const Signal& s, const std::vector<std::vector<cplx>>& E, const Eigen::VectorXcd& a) {
  Signal r = s;
  for (std::size_t k = 0; k < E.size(); ++k)
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= a[k] * E[k][i];
  return r;
}

}  // namespace

Decomposition decompose(const Signal& s, double delta, const FAConfig& cfg) {
  const double T = span(s, delta);
  const std::vector<double> w = window_weights(s.size());
  const std::size_t n = s.size();
  Decomposition out;
  std::vector<double> freqs;
  std::vector<std::vector<cplx>> E;  // e^{i v_k t_i}
  Gram gram;
  Eigen::VectorXcd a(0);
  Signal r = s;
  auto duplicate = [&](double v, std::size_t self) {
    for (std::size_t l = 0; l < freqs.size(); ++l)
      if (l != self && std::abs(freqs[l] - v) < 0.25 * std::numbers::pi / T) return true;
    return false;
  };
  for (int step = 0; step < cfg.NC; ++step) {
    double amp = 0;
    double v = coarse_peak(r, w, delta, &amp);
    if (amp == 0) break;
    try {
      v = refine(r, w, delta, v);
    } catch (const NoPeak&) {
    }
    if (duplicate(v, freqs.size())) {
      // the residual keeps returning the same peak; further extraction is degenerate
      ++out.skipped;
      break;
    }
    freqs.push_back(v);
    E.push_back(basis(n, delta, v));
    gram.grow(s, w, delta, v, E);
    a = gram.solve();
    r = residual(s, E, a);
  }
  // Each peak was refined before the weaker ones were known, so its position
  // still carries their leakage. Re-refine against s minus all the others.
  for (int pass = 0; pass < cfg.polish && !freqs.empty(); ++pass) {
    bool moved = false;
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      Signal rk = r;  // r = s - sum_l a_l e_l throughout the pass
      for (std::size_t i = 0; i < n; ++i) rk[i] += a[k] * E[k][i];
      double v = freqs[k];
      try {
        v = refine(rk, w, delta, freqs[k]);
      } catch (const NoPeak&) {
        continue;
      }
      if (v == freqs[k] || duplicate(v, k)) continue;
      moved = true;
      freqs[k] = v;
      E[k] = basis(n, delta, v);
      for (std::size_t i = 0; i < n; ++i) r[i] = rk[i] - a[k] * E[k][i];
      gram.set(static_cast<int>(k), s, w, delta, v, E);
    }
    if (!moved) break;
    a = gram.solve();
    r = residual(s, E, a);
  }
  for (std::size_t k = 0; k < freqs.size(); ++k)
    out.comps.push_back(Component{std::abs(a[k]), freqs[k], wrap_phase(std::arg(a[k]))});
  std::stable_sort(out.comps.begin(), out.comps.end(), [](const Component& x, const Component& y) { return x.A > y.A; });
  return out;
}

std::complex<double> reconstruct(const std::vector<Component>& comps, double t) {
  std::complex<double> z = 0;
  for (const Component& c : comps) z += std::polar(c.A, c.freq * t + c.phase);
  return z;
}

double reconstruction_error(const Signal& s, double delta, const std::vector<Component>& comps) {
  std::vector<cplx> acc(s.size(), 0.0);
  for (const Component& c : comps) {
    const cplx a = std::polar(c.A, c.phase);
    sweep(s.size(), delta, c.freq, [&](std::size_t i, cplx e) { acc[i] += a * e; });
  }
  double worst = 0;
  for (std::size_t i = 0; i < s.size(); ++i) worst = std::max(worst, std::abs(s[i] - acc[i]));
  return worst;
}

double nearest_combination(double v, const Eigen::VectorXd& omega, int KM, std::vector<int>* kout, double period) {
  const int n = static_cast<int>(omega.size());
  std::vector<int> k(n, 0);
  auto dist = [period](long double x) {
    return static_cast<double>(period > 0 ? std::abs(std::remainder(x, static_cast<long double>(period))) : std::abs(x));
  };
  double best = dist(v);
  if (kout) *kout = k;
  enumerate_k(n, KM, k, 0, [&](const std::vector<int>& kk) {
    long double c = 0;
    for (int j = 0; j < n; ++j) c += static_cast<long double>(kk[j]) * omega[j];
    const double d = dist(v - c);
    if (d < best) {
      best = d;
      if (kout) *kout = kk;
    }
  });
  return best;
}

FundamentalSet fundamental_frequencies(const std::vector<Decomposition>& d, int n1, const Eigen::VectorXd& prior,
                                       const FAConfig& cfg, double period) {
  if (d.empty() || d[0].comps.empty()) throw std::invalid_argument("fundamental_frequencies: empty decomposition");
  if (n1 < 1 || n1 > static_cast<int>(d.size())) throw std::invalid_argument("fundamental_frequencies: bad dimension");
  FundamentalSet fs;
  std::vector<double> om{d[0].comps[0].freq};
  fs.sbar.push_back(0);
  fs.kbar.push_back({1});
  for (int j = 1; j < n1; ++j) {
    Eigen::VectorXd cur = Eigen::Map<Eigen::VectorXd>(om.data(), om.size());
    int sbar = -1;
    for (std::size_t s = 0; s < d[j].comps.size(); ++s)
      if (nearest_combination(d[j].comps[s].freq, cur, cfg.KM, nullptr, period) > cfg.eps_tol) {
        sbar = static_cast<int>(s);
        break;
      }
    if (sbar < 0) {
      fs.reduced = true;
      fs.note = "signal " + std::to_string(j + 1) + " has no independent component";
      break;
    }
    const double ups = d[j].comps[sbar].freq;
    std::vector<int> kb(j + 1, 0);
    double wj = ups;
    kb[j] = 1;
    if (prior.size() > j) {
      // min |k_j ups + sum k_i omega_i - nu_j| over |k|_1 <= KM, k_j != 0
      double best = INFINITY;
      for (int kj = -cfg.KM; kj <= cfg.KM; ++kj) {
        if (kj == 0) continue;
        std::vector<int> rest;
        const double dist = nearest_combination(prior[j] - kj * ups, cur, cfg.KM - std::abs(kj), &rest);
        if (dist < best) {
          best = dist;
          for (int i = 0; i < j; ++i) kb[i] = rest[i];
          kb[j] = kj;
        }
      }
      long double c = static_cast<long double>(kb[j]) * ups;
      for (int i = 0; i < j; ++i) c += static_cast<long double>(kb[i]) * om[i];
      wj = static_cast<double>(c);
    }
    om.push_back(wj);
    fs.sbar.push_back(sbar);
    fs.kbar.push_back(kb);
  }
  fs.omega = Eigen::Map<Eigen::VectorXd>(om.data(), om.size());
  return fs;
}

double frequency_variation(const ChainConfig& chain, const ModeState& s0, const IntegratorConfig& icfg) {
  IntegratorConfig c2 = icfg;
  c2.T = 2 * icfg.T;
  Signals sig = integrate(chain, c2, s0);
  const std::size_t half = static_cast<std::size_t>(std::llround(icfg.T / icfg.delta));
  const Signal& m = sig.modes[0];
  Signal a(m.begin(), m.begin() + half + 1), b(m.begin() + half, m.end());
  return std::abs(dominant_frequency(a, icfg.delta) - dominant_frequency(b, icfg.delta));
}

LocateResult locate_torus(const ChainConfig& chain, const ModeState& ic0, int n1, const IntegratorConfig& icfg,
                          const FAConfig& cfg) {
  LocateResult res;
  res.ic = ic0;
  const Eigen::VectorXd nu = mode_frequencies(chain);
  const int nm = chain.N - 1;
  // sampled frequencies are only defined modulo 2 pi / delta; harmonics past it alias
  const double period = 2 * std::numbers::pi / icfg.delta;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    res.iterations = it;
    Signals sig;
    try {
      sig = integrate(chain, icfg, res.ic);
    } catch (const BlowUp& e) {
      res.note = e.what();
      return res;
    }
    std::vector<std::future<Decomposition>> jobs;
    for (int j = 0; j < nm; ++j)
      jobs.push_back(std::async(std::launch::async, [&, j] { return decompose(sig.modes[j], icfg.delta, cfg); }));
    std::vector<Decomposition> dec;
    for (auto& f : jobs) dec.push_back(f.get());
    if (dec[0].comps.empty()) {
      res.note = "mode 1 signal vanishes";
      return res;
    }
    FundamentalSet fs = fundamental_frequencies(dec, n1, nu, cfg, period);
    res.omega = fs.omega;
    if (fs.reduced) {
      res.note = fs.note;
      return res;
    }
    // keep only components at integer combinations of omega_f
    ModeState next{Eigen::VectorXd::Zero(nm), Eigen::VectorXd::Zero(nm)};
    double err = 0;
    const double A11 = dec[0].comps[0].A;
    for (int j = 0; j < nm; ++j) {
      std::vector<Component> kept;
      for (const Component& c : dec[j].comps)
        if (nearest_combination(c.freq, fs.omega, cfg.KM, nullptr, period) <= cfg.eps_tol) kept.push_back(c);
      std::complex<double> z0 = reconstruct(kept, 0.0);
      next.Y[j] = z0.real();
      next.X[j] = z0.imag();
      err = std::max(err, reconstruction_error(sig.modes[j], icfg.delta, kept) / A11);
    }
    res.ic = next;
    res.error = err;
    // stop once every mode is reproduced to mu_tol relative to the leading amplitude
    if (err <= cfg.mu_tol) {
      res.converged = true;
      return res;
    }
  }
  res.note = "iteration cap reached";
  return res;
}

std::vector<TorusFamilyPoint> continue_family(const ChainConfig& chain, int n1, const IntegratorConfig& icfg,
                                              const FAConfig& cfg, const ContinuationConfig& cc,
                                              const FamilyCallback& on_point) {
  std::vector<TorusFamilyPoint> family;
  ModeState ic = modes_forward(chain, semi_sinusoidal_ic(chain, cc.A0));
  ModeState last;
  double zeta = cc.zeta0;
  while (static_cast<int>(family.size()) < cc.max_points) {
    LocateResult r = locate_torus(chain, ic, n1, icfg, cfg);
    double E = r.converged ? total_energy(chain, r.ic) : 0.0;
    // a located torus below the previous energy is not progress along the family
    const bool ok = r.converged && std::isfinite(E) && (family.empty() || E >= family.back().energy);
    if (ok) {
      TorusFamilyPoint p{E, specific_energy(chain, E), r.omega, r.ic, r.iterations};
      family.push_back(p);
      if (on_point) on_point(p);
      last = r.ic;
    } else {
      if (family.empty() || zeta <= cc.zeta_min) break;
      zeta *= 0.5;
    }
    ic = ModeState{(1 + zeta) * last.Y, (1 + zeta) * last.X};
  }
  return family;
}

}  // namespace eltori
