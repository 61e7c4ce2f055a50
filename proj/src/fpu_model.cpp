#include "eltori/fpu_model.hpp"

#include <cmath>
#include <numbers>

namespace eltori {

namespace {

void check_chain(const ChainConfig& cfg) {
  if (cfg.N < 2) throw ModelError("chain needs N >= 2");
}

// chi(m) = sum_{l=0}^{N-1} cos(m (2l+1) pi / 2N) / N
int cosine_selection(int N, int m) {
  m = std::abs(m);
  if (m % (2 * N) != 0) return 0;
  return (m / (2 * N)) % 2 == 0 ? 1 : -1;
}

}  // namespace

GradedHamiltonian::GradedHamiltonian(Dims d, Caps c, int K_) : dims(d), caps(c), K(K_) {
  omega = Eigen::VectorXd::Zero(d.n1);
  Omega = Eigen::VectorXd::Zero(d.n2);
  blocks.assign(c.max_degree + 1, std::vector<TrigSeries>(max_s() + 1, TrigSeries(d, c)));
}

void GradedHamiltonian::add_graded(const TrigSeries& f) {
  for (const auto& [ci, part] : grade(f, K)) {
    if (ci.degree > max_degree() || ci.s > max_s()) continue;
    blocks[ci.degree][ci.s] += part;
  }
}

TrigSeries GradedHamiltonian::normal_part() const {
  TrigSeries h = constant(dims, caps, energy);
  for (int j = 0; j < dims.n1; ++j) h += action(dims, caps, j, omega[j]);
  for (int j = 0; j < dims.n2; ++j) {
    TrigSeries x = xi_var(dims, caps, j), e = eta_var(dims, caps, j);
    h += (0.5 * Omega[j]) * (mul(x, x) + mul(e, e));
  }
  return h;
}

TrigSeries GradedHamiltonian::perturbation() const {
  TrigSeries f(dims, caps);
  for (const auto& row : blocks)
    for (const auto& b : row) f += b;
  return f;
}

TrigSeries GradedHamiltonian::total() const { return normal_part() + perturbation(); }

double GradedHamiltonian::perturbation_norm() const {
  double s = 0.0;
  for (const auto& row : blocks)
    for (const auto& b : row) s += l1_norm(b);
  return s;
}

Eigen::VectorXd mode_frequencies(const ChainConfig& cfg) {
  check_chain(cfg);
  Eigen::VectorXd nu(cfg.N - 1);
  for (int j = 1; j < cfg.N; ++j) nu[j - 1] = 2.0 * std::sin(j * std::numbers::pi / (2.0 * cfg.N));
  return nu;
}

Eigen::MatrixXd sine_basis(int N) {
  Eigen::MatrixXd S(N - 1, N - 1);
  const double c = std::sqrt(2.0 / N);
  for (int l = 1; l < N; ++l)
    for (int j = 1; j < N; ++j) S(l - 1, j - 1) = c * std::sin(j * l * std::numbers::pi / N);
  return S;
}

ModeState modes_forward(const ChainConfig& cfg, const CartesianState& s) {
  Eigen::VectorXd nu = mode_frequencies(cfg);
  Eigen::MatrixXd S = sine_basis(cfg.N);
  Eigen::ArrayXd r = nu.array().sqrt();
  return ModeState{((S * s.y).array() / r).matrix(), ((S * s.x).array() * r).matrix()};
}

CartesianState modes_backward(const ChainConfig& cfg, const ModeState& m) {
  Eigen::VectorXd nu = mode_frequencies(cfg);
  Eigen::MatrixXd S = sine_basis(cfg.N);
  Eigen::ArrayXd r = nu.array().sqrt();
  return CartesianState{S * (m.Y.array() * r).matrix(), S * (m.X.array() / r).matrix()};
}

double cosine_product_sum(int N, const std::vector<int>& j) {
  if (j.empty()) return N;
  const int n = static_cast<int>(j.size());
  long total = 0;
  for (int mask = 0; mask < (1 << (n - 1)); ++mask) {
    int m = j[0];
    for (int i = 1; i < n; ++i) m += (mask >> (i - 1) & 1) ? -j[i] : j[i];
    total += cosine_selection(N, m);
  }
  return static_cast<double>(total) * N / static_cast<double>(1L << (n - 1));
}

TrigSeries anharmonic_in_modes(const ChainConfig& cfg) {
  check_chain(cfg);
  const int n = cfg.N - 1;
  const Dims d{0, n};
  const Caps caps{4, 0};
  Eigen::VectorXd nu = mode_frequencies(cfg);
  TrigSeries h(d, caps);
  // d_l = sqrt(2/N) sum_j sqrt(nu_j) cos(j (2l+1) pi / 2N) X_j
  auto add_order = [&](int order, double coupling) {
    if (coupling == 0.0) return;
    std::vector<int> idx(order, 1);
    const double pref = coupling * std::pow(2.0 / cfg.N, order / 2.0);
    while (true) {
      double w = cosine_product_sum(cfg.N, idx);
      if (w != 0.0) {
        Monomial mo;
        mo.l.assign(n, 0);
        mo.lbar.assign(n, 0);
        double c = pref * w;
        for (int a : idx) {
          c *= std::sqrt(nu[a - 1]);
          ++mo.lbar[a - 1];
        }
        TrigSeries t(d, caps);
        t.add_term(mo, c);
        h += t;
      }
      int pos = order - 1;
      while (pos >= 0 && idx[pos] == n) idx[pos--] = 1;
      if (pos < 0) break;
      ++idx[pos];
    }
  };
  add_order(3, cfg.alpha / 3.0);
  add_order(4, cfg.beta / 4.0);
  return h;
}

TrigSeries hamiltonian_in_modes(const ChainConfig& cfg) {
  const int n = cfg.N - 1;
  const Dims d{0, n};
  const Caps caps{4, 0};
  Eigen::VectorXd nu = mode_frequencies(cfg);
  TrigSeries h = anharmonic_in_modes(cfg);
  for (int j = 0; j < n; ++j) {
    TrigSeries x = xi_var(d, caps, j), e = eta_var(d, caps, j);
    h += (0.5 * nu[j]) * (mul(x, x) + mul(e, e));
  }
  return h;
}

double total_energy(const ChainConfig& cfg, const CartesianState& s) {
  check_chain(cfg);
  long double E = 0.0L;
  for (int l = 0; l < cfg.N - 1; ++l) E += 0.5L * s.y[l] * s.y[l];
  for (int l = 0; l < cfg.N; ++l) {
    long double xl = l == 0 ? 0.0 : s.x[l - 1];
    long double xr = l == cfg.N - 1 ? 0.0 : s.x[l];
    long double dd = xr - xl;
    E += 0.5L * dd * dd + cfg.alpha / 3.0L * dd * dd * dd + cfg.beta / 4.0L * dd * dd * dd * dd;
  }
  return static_cast<double>(E);
}

double total_energy(const ChainConfig& cfg, const ModeState& m) { return total_energy(cfg, modes_backward(cfg, m)); }

CartesianState semi_sinusoidal_ic(const ChainConfig& cfg, double A) {
  check_chain(cfg);
  if (A < 0) throw ModelError("amplitude must be non-negative");
  const double nu1 = mode_frequencies(cfg)[0];
  CartesianState s{Eigen::VectorXd::Zero(cfg.N - 1), Eigen::VectorXd::Zero(cfg.N - 1)};
  for (int l = 1; l < cfg.N; ++l)
    s.x[l - 1] = std::sqrt(2.0 / cfg.N) * A / std::sqrt(nu1) * std::sin(l * std::numbers::pi / cfg.N);
  return s;
}

double semi_sinusoidal_amplitude(const ChainConfig& cfg, double E) {
  return std::sqrt(2.0 * E / mode_frequencies(cfg)[0]);
}

GradedHamiltonian assemble_H0(const ChainConfig& cfg, const TorusSeed& seed, Caps caps, int K) {
  check_chain(cfg);
  const int n = cfg.N - 1;
  const int n1 = seed.n1;
  if (n1 < 1 || n1 > n) throw ModelError("torus dimension out of range");
  if (seed.Istar.size() != n1) throw ModelError("I* length differs from n1");
  for (int j = 0; j < n1; ++j)
    if (!(seed.Istar[j] > 0.0)) throw ModelError("I* must be positive");
  const Dims d{n1, n - n1};
  Eigen::VectorXd nu = mode_frequencies(cfg);
  GradedHamiltonian H(d, caps, K);
  H.omega = nu.head(n1);
  H.Omega = nu.tail(n - n1);
  for (int j = 0; j < n1; ++j) H.energy += nu[j] * seed.Istar[j];

  // X_j = sqrt(2 I*) sqrt(1 + p/I*) sin q_j, binomially expanded.
  std::vector<TrigSeries> Xs;
  for (int j = 0; j < n; ++j) {
    if (j < n1) {
      const double I = seed.Istar[j];
      TrigSeries root(d, caps);
      double b = 1.0;
      TrigSeries pw = constant(d, caps, 1.0);
      TrigSeries pj = action(d, caps, j, 1.0 / I);
      for (int k = 0; 2 * k <= caps.max_degree; ++k) {
        root += b * pw;
        b *= (0.5 - k) / (k + 1);
        pw = mul(pw, pj, caps);
      }
      std::vector<int> kv(n1, 0);
      kv[j] = 1;
      Xs.push_back(mul(std::sqrt(2.0 * I) * root, trig(d, caps, kv, Parity::Sin), caps));
    } else {
      Xs.push_back(eta_var(d, caps, j - n1));
    }
  }
  std::vector<std::vector<TrigSeries>> powers(n);
  TrigSeries f(d, caps);
  const TrigSeries model = anharmonic_in_modes(cfg);
  KeyView mv{Dims{0, n}};
  for (const Term& t : model.terms()) {
    TrigSeries prod = constant(d, caps, t.c);
    for (int j = 0; j < n; ++j) {
      const int e = mv.lbar(t.key, j);
      if (e == 0) continue;
      auto& pw = powers[j];
      if (pw.empty()) pw.push_back(constant(d, caps, 1.0));
      while (static_cast<int>(pw.size()) <= e) pw.push_back(mul(pw.back(), Xs[j], caps));
      prod = mul(prod, pw[e], caps);
    }
    f += prod;
  }

  // Angle-independent terms of degree <= 2 go to the normal part; whatever is
  // not of the form omega.p, Omega (xi^2+eta^2)/2 or a constant is handed to
  // the first normalization step.
  KeyView kv{d};
  TrigSeries residual(d, caps);
  std::vector<double> xx(d.n2, 0.0), ee(d.n2, 0.0);
  std::vector<Term> rest;
  for (const Term& t : f.terms()) {
    const int deg = kv.degree(t.key), tr = kv.trig(t.key);
    if (tr != 0 || deg > 2) {
      rest.push_back(t);
      continue;
    }
    if (deg == 0) {
      H.energy += t.c;
    } else if (kv.action_degree(t.key) == 1) {
      for (int j = 0; j < n1; ++j)
        if (kv.m(t.key, j) == 1) H.omega[j] += t.c;
    } else {
      bool diag = false;
      for (int j = 0; j < d.n2; ++j) {
        if (kv.l(t.key, j) == 2) xx[j] = t.c, diag = true;
        if (kv.lbar(t.key, j) == 2) ee[j] = t.c, diag = true;
      }
      if (!diag) residual.add_term(t.key, t.c);
    }
  }
  for (int j = 0; j < d.n2; ++j) {
    H.Omega[j] += xx[j] + ee[j];
    const double half = 0.5 * (xx[j] - ee[j]);
    Monomial mx, me;
    mx.l.assign(d.n2, 0);
    mx.lbar.assign(d.n2, 0);
    me = mx;
    mx.l[j] = 2;
    me.lbar[j] = 2;
    residual.add_term(mx, half);
    residual.add_term(me, -half);
  }
  H.add_graded(TrigSeries::from_terms(d, caps, std::move(rest)));
  for (const Term& t : residual.terms()) {
    const int deg = kv.degree(t.key);
    TrigSeries one(d, caps);
    one.add_term(t.key, t.c);
    H.block(deg, 1) += one;
  }
  return H;
}

ModeState from_torus_coordinates(const TorusSeed& seed, const PhasePoint& z) {
  const int n1 = seed.n1, n2 = static_cast<int>(z.xi.size());
  ModeState m{Eigen::VectorXd(n1 + n2), Eigen::VectorXd(n1 + n2)};
  for (int j = 0; j < n1; ++j) {
    const double I = seed.Istar[j] + z.p[j];
    if (I < 0.0) throw ModelError("negative action while leaving torus coordinates");
    const double r = std::sqrt(2.0 * I);
    m.X[j] = r * std::sin(z.q[j]);
    m.Y[j] = r * std::cos(z.q[j]);
  }
  for (int j = 0; j < n2; ++j) {
    m.Y[n1 + j] = z.xi[j];
    m.X[n1 + j] = z.eta[j];
  }
  return m;
}

PhasePoint to_torus_coordinates(const TorusSeed& seed, const ModeState& m) {
  const int n1 = seed.n1, n2 = static_cast<int>(m.X.size()) - n1;
  PhasePoint z = PhasePoint::zero(Dims{n1, n2});
  for (int j = 0; j < n1; ++j) {
    z.p[j] = 0.5 * (m.X[j] * m.X[j] + m.Y[j] * m.Y[j]) - seed.Istar[j];
    z.q[j] = std::atan2(m.X[j], m.Y[j]);
  }
  for (int j = 0; j < n2; ++j) {
    z.xi[j] = m.Y[n1 + j];
    z.eta[j] = m.X[n1 + j];
  }
  return z;
}

}  // namespace eltori
