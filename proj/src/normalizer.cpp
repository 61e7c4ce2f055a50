#include "eltori/normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace eltori {

namespace {

TrigSeries normal_generator(Dims d, Caps c, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega) {
  TrigSeries h(d, c);
  for (int j = 0; j < d.n1; ++j) h += action(d, c, j, omega[j]);
  for (int j = 0; j < d.n2; ++j) {
    TrigSeries x = xi_var(d, c, j), e = eta_var(d, c, j);
    h += (0.5 * Omega[j]) * (mul(x, x, c) + mul(e, e, c));
  }
  return h;
}

double max_abs_coeff(const TrigSeries& f) {
  double m = 0.0;
  for (const Term& t : f.terms()) m = std::max(m, std::abs(t.c));
  return m;
}

template <class Pred>
TrigSeries select(const TrigSeries& f, Pred keep) {
  std::vector<Term> out;
  KeyView kv = f.view();
  for (const Term& t : f.terms())
    if (keep(kv, t.key)) out.push_back(t);
  return TrigSeries::from_terms(f.dims(), f.caps(), std::move(out));
}

bool angle_free(const KeyView& kv, const TermKey& key) { return kv.trig(key) == 0; }

// One block of the homological operator: fixed p-exponent, harmonic k and
// per-pair transverse degree d_j. Basis is prod_j (d_j + 1) monomials times parity.
struct Group {
  TermKey base;  // m and k set, l/lbar zero, parity Cos
  std::vector<int> deg;
  bool has_k = false;
  std::vector<Term> terms;
};

struct GroupIndex {
  const Group& g;
  int n2;
  int nparity() const { return g.has_k ? 2 : 1; }
  int size() const {
    int s = 1;
    for (int d : g.deg) s *= d + 1;
    return s * nparity();
  }
  // l_j exponents (lbar_j = d_j - l_j) and parity -> index.
  int index(const std::vector<int>& l, int par) const {
    int idx = 0;
    for (int j = 0; j < n2; ++j) idx = idx * (g.deg[j] + 1) + l[j];
    return idx * nparity() + par;
  }
  void decode(int idx, std::vector<int>& l, int& par) const {
    par = idx % nparity();
    idx /= nparity();
    l.assign(n2, 0);
    for (int j = n2 - 1; j >= 0; --j) {
      l[j] = idx % (g.deg[j] + 1);
      idx /= g.deg[j] + 1;
    }
  }
};

double group_min_divisor(const Group& g, const KeyView& kv, const Eigen::VectorXd& omega,
                         const Eigen::VectorXd& Omega, bool* has_kernel) {
  const int n1 = kv.d.n1, n2 = kv.d.n2;
  double kw = 0.0;
  for (int j = 0; j < n1; ++j) kw += kv.k(g.base, j) * omega[j];
  double best = std::numeric_limits<double>::infinity();
  *has_kernel = false;
  std::vector<int> n(n2);
  for (int j = 0; j < n2; ++j) n[j] = -g.deg[j];
  while (true) {
    double v = kw;
    bool zero_n = true;
    for (int j = 0; j < n2; ++j) {
      v += n[j] * Omega[j];
      zero_n = zero_n && n[j] == 0;
    }
    if (!g.has_k && zero_n)
      *has_kernel = true;
    else
      best = std::min(best, std::abs(v));
    int j = 0;
    for (; j < n2; ++j) {
      if (n[j] + 2 <= g.deg[j]) {
        n[j] += 2;
        break;
      }
      n[j] = -g.deg[j];
    }
    if (j == n2) break;
  }
  return best;
}

std::string describe_group(const Group& g, const KeyView& kv, double value) {
  std::ostringstream os;
  os << "small divisor " << value << " at k = (";
  for (int j = 0; j < kv.d.n1; ++j) os << (j ? "," : "") << int(kv.k(g.base, j));
  os << "), transverse degrees (";
  for (std::size_t j = 0; j < g.deg.size(); ++j) os << (j ? "," : "") << g.deg[j];
  os << ")";
  return os.str();
}

}  // namespace

NormalizerConfig NormalizerConfig::for_chain(int N) {
  NormalizerConfig c;
  if (N >= 8) {
    c.rbar = 8;
    c.caps = Caps{4, 16};
  }
  return c;
}

Eigen::MatrixXd symplectic_J(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  J.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  J.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  return J;
}

TrigSeries homological_operator(const TrigSeries& chi, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega) {
  return poisson(normal_generator(chi.dims(), chi.caps(), omega, Omega), chi, chi.caps());
}

HomologicalSolution solve_homological(const TrigSeries& f, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega,
                                      double divisor_floor) {
  const Dims dims = f.dims();
  const KeyView kv = f.view();
  HomologicalSolution out;
  out.chi = TrigSeries(dims, f.caps());
  if (f.empty()) return out;

  std::map<TermKey, Group> groups;
  for (const Term& t : f.terms()) {
    TermKey base = t.key;
    base.set_parity(Parity::Cos);
    std::vector<int> deg(dims.n2);
    for (int j = 0; j < dims.n2; ++j) {
      deg[j] = kv.l(t.key, j) + kv.lbar(t.key, j);
      base.v[kv.l_slot(j)] = static_cast<std::int8_t>(deg[j]);
      base.v[kv.lbar_slot(j)] = 0;
    }
    Group& g = groups[base];
    if (g.terms.empty()) {
      g.base = base;
      for (int j = 0; j < dims.n2; ++j) g.base.v[kv.l_slot(j)] = 0;
      g.deg = deg;
      g.has_k = kv.trig(t.key) != 0;
    }
    g.terms.push_back(t);
  }

  std::vector<Term> chi_terms;
  for (auto& [_, g] : groups) {
    bool kernel = false;
    const double dmin = group_min_divisor(g, kv, omega, Omega, &kernel);
    out.min_divisor = std::min(out.min_divisor, dmin);
    if (dmin <= divisor_floor) throw SmallDivisor(describe_group(g, kv, dmin), dmin);

    GroupIndex gi{g, dims.n2};
    const int n = gi.size();
    double kw = 0.0;
    for (int j = 0; j < dims.n1; ++j) kw += kv.k(g.base, j) * omega[j];

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    std::vector<int> l;
    int par;
    for (int col = 0; col < n; ++col) {
      gi.decode(col, l, par);
      // -omega . d/dq: cos -> (k.w) sin, sin -> -(k.w) cos
      if (g.has_k) T(gi.index(l, 1 - par), col) += par == 0 ? kw : -kw;
      // Omega_j (eta d/dxi - xi d/deta)
      for (int j = 0; j < dims.n2; ++j) {
        const int a = l[j], b = g.deg[j] - l[j];
        if (a > 0) {
          std::vector<int> l2 = l;
          --l2[j];
          T(gi.index(l2, par), col) += Omega[j] * a;
        }
        if (b > 0) {
          std::vector<int> l2 = l;
          ++l2[j];
          T(gi.index(l2, par), col) -= Omega[j] * b;
        }
      }
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (const Term& t : g.terms) {
      for (int j = 0; j < dims.n2; ++j) l[j] = kv.l(t.key, j);
      rhs[gi.index(l, t.key.parity() == Parity::Sin ? 1 : 0)] -= t.c;
    }
    Eigen::VectorXd x = kernel ? Eigen::VectorXd(T.completeOrthogonalDecomposition().solve(rhs))
                               : Eigen::VectorXd(T.partialPivLu().solve(rhs));
    for (int idx = 0; idx < n; ++idx) {
      if (x[idx] == 0.0) continue;
      gi.decode(idx, l, par);
      TermKey key = g.base;
      for (int j = 0; j < dims.n2; ++j) {
        key.v[kv.l_slot(j)] = static_cast<std::int8_t>(l[j]);
        key.v[kv.lbar_slot(j)] = static_cast<std::int8_t>(g.deg[j] - l[j]);
      }
      key.set_parity(par == 1 ? Parity::Sin : Parity::Cos);
      chi_terms.push_back(Term{key, x[idx]});
    }
  }
  out.chi = TrigSeries::from_terms(dims, f.caps(), std::move(chi_terms));
  // The kernel (angle-free, rotation-invariant) part of chi is fixed to zero.
  TrigSeries ker = average_over_transverse(average_over_angles(out.chi));
  if (!ker.empty()) out.chi = prune(out.chi - ker);

  const double fn = l1_norm(f);
  TrigSeries res = homological_operator(out.chi, omega, Omega) + f;
  out.residual = fn > 0 ? max_abs_coeff(res) / fn : 0.0;
  return out;
}

Chi0Solution solve_chi0(const GradedHamiltonian& H, int r, double divisor_floor) {
  const TrigSeries& f0 = H.block(0, r);
  Chi0Solution out;
  TrigSeries avg = average_over_angles(f0);
  for (const Term& t : avg.terms()) out.energy_increment += t.c;
  out.sol = solve_homological(prune(f0 - avg), H.omega, H.Omega, divisor_floor);
  return out;
}

HomologicalSolution solve_chi1(const GradedHamiltonian& H, int r, double divisor_floor) {
  return solve_homological(H.block(1, r), H.omega, H.Omega, divisor_floor);
}

HomologicalSolution solve_X2(const GradedHamiltonian& H, int r, double divisor_floor) {
  TrigSeries f = select(H.block(2, r), [](const KeyView& kv, const TermKey& k) {
    return kv.action_degree(k) == 1 && kv.trig(k) != 0;
  });
  return solve_homological(f, H.omega, H.Omega, divisor_floor);
}

HomologicalSolution solve_Y2(const GradedHamiltonian& H, int r, double divisor_floor) {
  TrigSeries f = select(H.block(2, r), [](const KeyView& kv, const TermKey& k) {
    return kv.transverse_degree(k) == 2 && kv.trig(k) != 0;
  });
  return solve_homological(f, H.omega, H.Omega, divisor_floor);
}

GradedHamiltonian apply_generator(const GradedHamiltonian& H, const TrigSeries& chi, int drop, int r,
                                  const TrigSeries& Lh, double prune_rel) {
  GradedHamiltonian out = H;
  if (chi.empty()) return out;
  const int smax = H.max_s();
  std::vector<std::vector<bool>> touched(H.blocks.size(), std::vector<bool>(smax + 1, false));
  auto push = [&](int l, int s, TrigSeries t) {
    for (int i = 1;; ++i) {
      const int l2 = l - i * drop, s2 = s + i * r;
      if (l2 < 0 || s2 > smax) break;
      t = poisson(t, chi, H.caps);
      t *= 1.0 / i;
      if (t.empty()) break;
      out.block(l2, s2) += t;
      touched[l2][s2] = true;
    }
  };
  for (int l = 0; l <= H.max_degree(); ++l)
    for (int s = 0; s <= smax; ++s)
      if (!H.block(l, s).empty()) push(l, s, H.block(l, s));
  // Normal part sits in block (2, 0); its first bracket is supplied exactly.
  if (!Lh.empty() && 2 - drop >= 0 && r <= smax) {
    out.block(2 - drop, r) += Lh;
    touched[2 - drop][r] = true;
    TrigSeries t = Lh;
    for (int i = 2;; ++i) {
      const int l2 = 2 - i * drop, s2 = i * r;
      if (l2 < 0 || s2 > smax) break;
      t = poisson(t, chi, H.caps);
      t *= 1.0 / i;
      if (t.empty()) break;
      out.block(l2, s2) += t;
      touched[l2][s2] = true;
    }
  }
  for (int l = 0; l <= H.max_degree(); ++l)
    for (int s = 0; s <= smax; ++s)
      if (touched[l][s]) out.block(l, s) = prune(out.block(l, s), prune_rel * l1_norm(out.block(l, s)));
  return out;
}

GradedHamiltonian apply_stage1(const GradedHamiltonian& H, const Chi0Solution& chi0, int r, double prune_rel) {
  GradedHamiltonian out = apply_generator(H, chi0.sol.chi, 2, r, -1.0 * prune(H.block(0, r) - average_over_angles(H.block(0, r))),
                                          prune_rel);
  out.energy += chi0.energy_increment;
  out.block(0, r) = TrigSeries(H.dims, H.caps);
  return out;
}

Diagonalization diagonalize(const TrigSeries& quad, const Eigen::VectorXd& Omega_prev, double divisor_floor) {
  const int n = static_cast<int>(Omega_prev.size());
  Diagonalization out;
  out.M = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  out.Omega = Omega_prev;
  if (n == 0) return out;
  const KeyView kv = quad.view();
  if (kv.d.n2 != n) throw DimensionMismatch("diagonalize: transverse dimension");

  // H = z^T S z / 2 with z = (eta; xi)
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) S(j, j) = S(n + j, n + j) = Omega_prev[j];
  for (const Term& t : quad.terms()) {
    if (kv.trig(t.key) != 0 || kv.action_degree(t.key) != 0 || kv.transverse_degree(t.key) != 2)
      throw std::invalid_argument("diagonalize: input must be an angle-free transverse quadratic");
    std::vector<int> idx;
    for (int j = 0; j < n; ++j) {
      for (int e = 0; e < kv.lbar(t.key, j); ++e) idx.push_back(j);
      for (int e = 0; e < kv.l(t.key, j); ++e) idx.push_back(n + j);
    }
    if (idx[0] == idx[1]) {
      S(idx[0], idx[0]) += 2.0 * t.c;
    } else {
      S(idx[0], idx[1]) += t.c;
      S(idx[1], idx[0]) += t.c;
    }
  }
  const Eigen::MatrixXd J = symplectic_J(n);
  const Eigen::MatrixXd A = J * S;
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw EllipticityLost("diagonalize: eigen-decomposition failed");
  const double scale = std::max(1.0, A.norm());
  struct Pair {
    double freq;
    Eigen::VectorXd a, b;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < 2 * n; ++i) {
    std::complex<double> lam = es.eigenvalues()[i];
    if (std::abs(lam.real()) > 1e-9 * scale) {
      std::ostringstream os;
      os << "eigenvalue " << lam.real() << (lam.imag() < 0 ? "" : "+") << lam.imag() << "i is not imaginary";
      throw EllipticityLost(os.str());
    }
    if (std::abs(lam.imag()) <= divisor_floor) throw EllipticityLost("diagonalize: zero frequency");
    if (lam.imag() < 0) continue;
    Eigen::VectorXcd v = es.eigenvectors().col(i);
    Eigen::VectorXd a = v.real(), b = v.imag();
    double c = a.dot(J * b);
    Pair p;
    if (c > 0) {
      p = Pair{lam.imag(), a / std::sqrt(c), b / std::sqrt(c)};
    } else {
      p = Pair{-lam.imag(), a / std::sqrt(-c), -b / std::sqrt(-c)};
    }
    pairs.push_back(std::move(p));
  }
  if (static_cast<int>(pairs.size()) != n) throw EllipticityLost("diagonalize: eigenvalue pairing failed");

  std::vector<bool> used(n, false);
  for (int j = 0; j < n; ++j) {
    int best = -1;
    double wbest = -1.0;
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      const Pair& p = pairs[i];
      double w = p.a[j] * p.a[j] + p.b[j] * p.b[j] + p.a[n + j] * p.a[n + j] + p.b[n + j] * p.b[n + j];
      if (w > wbest) {
        wbest = w;
        best = i;
      }
    }
    used[best] = true;
    Pair& p = pairs[best];
    const double th = std::atan2(-p.b[j], p.a[j]);
    Eigen::VectorXd a2 = p.a * std::cos(th) - p.b * std::sin(th);
    Eigen::VectorXd b2 = p.a * std::sin(th) + p.b * std::cos(th);
    out.M.col(j) = a2;
    out.M.col(n + j) = b2;
    out.Omega[j] = p.freq;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(out.Omega[i] - out.Omega[j]) <= divisor_floor)
        throw DegenerateFrequencies("diagonalize: transverse frequencies coincide");
  return out;
}

StepResult normalization_step(const GradedHamiltonian& H, const NormalizerConfig& cfg, int r) {
  if (r < 1 || r > H.max_s()) throw std::invalid_argument("normalization_step: r outside the block range");
  StepResult res;
  res.transform.r = r;
  res.report.r = r;
  double min_div = std::numeric_limits<double>::infinity(), max_res = 0.0;
  auto note = [&](const HomologicalSolution& s) {
    min_div = std::min(min_div, s.min_divisor);
    max_res = std::max(max_res, s.residual);
  };

  Chi0Solution c0 = solve_chi0(H, r, cfg.divisor_floor);
  note(c0.sol);
  GradedHamiltonian H1 = apply_stage1(H, c0, r, cfg.prune_rel);

  HomologicalSolution c1 = solve_chi1(H1, r, cfg.divisor_floor);
  note(c1);
  GradedHamiltonian H2 = apply_generator(H1, c1.chi, 1, r, -1.0 * H1.block(1, r), cfg.prune_rel);
  H2.block(1, r) = TrigSeries(H.dims, H.caps);

  const TrigSeries f2 = H2.block(2, r);
  HomologicalSolution x2 = solve_X2(H2, r, cfg.divisor_floor);
  HomologicalSolution y2 = solve_Y2(H2, r, cfg.divisor_floor);
  note(x2);
  note(y2);
  auto removed = [&](auto pred) { return -1.0 * select(f2, pred); };
  GradedHamiltonian H3 = apply_generator(H2, x2.chi, 0, r, removed([](const KeyView& kv, const TermKey& k) {
    return kv.action_degree(k) == 1 && kv.trig(k) != 0;
  }), cfg.prune_rel);
  H3 = apply_generator(H3, y2.chi, 0, r, removed([](const KeyView& kv, const TermKey& k) {
    return kv.transverse_degree(k) == 2 && kv.trig(k) != 0;
  }), cfg.prune_rel);

  // What survives in block (2, r) is its angle-free part: frequency corrections.
  const TrigSeries kept = select(f2, angle_free);
  const KeyView kv = f2.view();
  TrigSeries quad(H.dims, H.caps);
  std::vector<Term> qterms;
  for (const Term& t : kept.terms()) {
    if (kv.action_degree(t.key) == 1) {
      for (int j = 0; j < H.dims.n1; ++j)
        if (kv.m(t.key, j) == 1) H3.omega[j] += t.c;
    } else {
      qterms.push_back(t);
    }
  }
  quad = TrigSeries::from_terms(H.dims, H.caps, std::move(qterms));
  H3.block(2, r) = TrigSeries(H.dims, H.caps);

  Diagonalization D = diagonalize(quad, H3.Omega, cfg.divisor_floor);
  H3.Omega = D.Omega;
  const Eigen::MatrixXd Id = Eigen::MatrixXd::Identity(D.M.rows(), D.M.cols());
  if (D.M.size() > 0 && (D.M - Id).norm() != 0.0) {
    for (auto& row : H3.blocks)
      for (auto& b : row)
        if (!b.empty()) b = prune(linear_substitute(b, D.M), cfg.prune_rel * l1_norm(b));
  }

  res.report.norms = StepNorms{l1_norm(c0.sol.chi), l1_norm(c1.chi), l1_norm(x2.chi), l1_norm(y2.chi),
                               D.M.size() > 0 ? (D.M - Id).norm() : 0.0};
  res.report.omega = H3.omega;
  res.report.Omega = H3.Omega;
  res.report.energy = H3.energy;
  res.report.min_divisor = min_div;
  res.report.max_residual = max_res;
  res.transform.chi0 = c0.sol.chi;
  res.transform.chi1 = c1.chi;
  res.transform.X2 = x2.chi;
  res.transform.Y2 = y2.chi;
  res.transform.D = D.M;
  res.H = std::move(H3);
  return res;
}

bool convergence_rules(const std::vector<double>& x2, const NormalizerConfig& cfg, std::string* reason) {
  auto fail = [&](const std::string& why) {
    if (reason) *reason = why;
    return false;
  };
  if (x2.empty()) return fail("no steps");
  if (std::all_of(x2.begin(), x2.end(), [](double v) { return v == 0.0; })) return true;
  const double den = x2[0] + (x2.size() > 1 ? x2[1] : 0.0);
  for (std::size_t i = 2; i < x2.size(); ++i) {
    const int r = static_cast<int>(i) + 1;
    if (!(x2[i] < std::pow(cfg.ruleA_base, r - 1) * den)) {
      std::ostringstream os;
      os << "rule A fails at r = " << r;
      return fail(os.str());
    }
  }
  if (!(x2.back() < cfg.ruleB_ratio * x2[0])) {
    std::ostringstream os;
    os << "rule B fails: ratio " << (x2[0] > 0 ? x2.back() / x2[0] : INFINITY);
    return fail(os.str());
  }
  return true;
}

RunResult run(const GradedHamiltonian& H0, const TorusSeed& seed, const NormalizerConfig& cfg) {
  if (cfg.rbar < 1 || cfg.divisor_floor <= 0) throw std::invalid_argument("run: invalid normalizer config");
  RunResult out;
  out.H = H0;
  out.stack.seed = seed;
  out.stack.dims = H0.dims;
  out.stack.caps = H0.caps;
  const int last = std::min(cfg.rbar, H0.max_s());
  std::vector<double> x2;
  for (int r = 1; r <= last; ++r) {
    try {
      StepResult s = normalization_step(out.H, cfg, r);
      out.H = std::move(s.H);
      x2.push_back(s.report.norms.X2);
      out.reports.push_back(std::move(s.report));
      out.stack.steps.push_back(std::move(s.transform));
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "step " << r << ": " << e.what();
      out.reason = os.str();
      out.converged = false;
      return out;
    }
  }
  out.converged = convergence_rules(x2, cfg, &out.reason);
  return out;
}

LieMap::LieMap(const TrigSeries& chi, Caps caps, double tol) : dims_(chi.dims()) {
  if (chi.empty()) return;
  TrigSeries c = truncate(chi, caps);
  c.set_caps(caps);
  auto series = [&](const TrigSeries& first) {
    TrigSeries sum = prune(truncate(first, caps));
    sum.set_caps(caps);
    TrigSeries term = sum;
    const double ref = l1_norm(term);
    for (int n = 2; n <= 400 && !term.empty(); ++n) {
      term = poisson(term, c, caps);
      term *= 1.0 / n;
      if (l1_norm(term) <= tol * ref) break;
      sum += term;
    }
    return sum;
  };
  for (int j = 0; j < dims_.n1; ++j) shifts_.push_back(series(-1.0 * derivative(c, VarKind::Q, j)));
  for (int j = 0; j < dims_.n1; ++j) shifts_.push_back(series(derivative(c, VarKind::P, j)));
  for (int j = 0; j < dims_.n2; ++j) shifts_.push_back(series(-1.0 * derivative(c, VarKind::Eta, j)));
  for (int j = 0; j < dims_.n2; ++j) shifts_.push_back(series(derivative(c, VarKind::Xi, j)));
}

PhasePoint LieMap::operator()(const PhasePoint& z) const {
  if (shifts_.empty()) return z;
  PhasePoint w = z;
  int i = 0;
  for (int j = 0; j < dims_.n1; ++j) w.p[j] += evaluate(shifts_[i++], z);
  for (int j = 0; j < dims_.n1; ++j) w.q[j] += evaluate(shifts_[i++], z);
  for (int j = 0; j < dims_.n2; ++j) w.xi[j] += evaluate(shifts_[i++], z);
  for (int j = 0; j < dims_.n2; ++j) w.eta[j] += evaluate(shifts_[i++], z);
  return w;
}

PhasePoint apply_linear(const Eigen::MatrixXd& M, const PhasePoint& z) {
  const int n = static_cast<int>(z.xi.size());
  if (n == 0 || M.size() == 0) return z;
  Eigen::VectorXd v(2 * n);
  v << z.eta, z.xi;
  Eigen::VectorXd w = M * v;
  PhasePoint out = z;
  out.eta = w.head(n);
  out.xi = w.tail(n);
  return out;
}

StackMap::StackMap(const TransformStack& stack, double tol) : stack_(stack) {
  Caps c{stack.caps.max_degree + 2, 2 * stack.caps.max_trig};
  for (const StepTransform& t : stack.steps) {
    Step s;
    s.chi0 = LieMap(t.chi0, c, tol);
    s.chi1 = LieMap(t.chi1, c, tol);
    s.X2 = LieMap(t.X2, c, tol);
    s.Y2 = LieMap(t.Y2, c, tol);
    s.chi0_inv = LieMap(-1.0 * t.chi0, c, tol);
    s.chi1_inv = LieMap(-1.0 * t.chi1, c, tol);
    s.X2_inv = LieMap(-1.0 * t.X2, c, tol);
    s.Y2_inv = LieMap(-1.0 * t.Y2, c, tol);
    s.D = t.D;
    if (t.D.size() > 0) s.D_inv = -symplectic_J(t.D.rows() / 2) * t.D.transpose() * symplectic_J(t.D.rows() / 2);
    steps_.push_back(std::move(s));
  }
}

PhasePoint StackMap::step_to_previous(int i, const PhasePoint& z) const {
  const Step& s = steps_.at(i);
  return s.chi0(s.chi1(s.X2(s.Y2(apply_linear(s.D, z)))));
}

PhasePoint StackMap::step_to_next(int i, const PhasePoint& z) const {
  const Step& s = steps_.at(i);
  return apply_linear(s.D_inv, s.Y2_inv(s.X2_inv(s.chi1_inv(s.chi0_inv(z)))));
}

PhasePoint StackMap::to_original(const PhasePoint& z) const {
  PhasePoint w = z;
  for (int i = static_cast<int>(steps_.size()) - 1; i >= 0; --i) w = step_to_previous(i, w);
  return w;
}

PhasePoint StackMap::from_original(const PhasePoint& z) const {
  PhasePoint w = z;
  for (int i = 0; i < static_cast<int>(steps_.size()); ++i) w = step_to_next(i, w);
  return w;
}

ModeState map_to_original(const StackMap& map, const PhasePoint& z) {
  return from_torus_coordinates(map.stack().seed, map.to_original(z));
}

ModeState map_to_original(const TransformStack& stack, const PhasePoint& z) {
  return map_to_original(StackMap(stack), z);
}

PhasePoint map_from_original(const StackMap& map, const ModeState& m) {
  return map.from_original(to_torus_coordinates(map.stack().seed, m));
}

void write_stack(std::ostream& os, const TransformStack& stack) {
  const Dims d = stack.dims;
  os << "transformstack " << d.n1 << ' ' << d.n2 << ' ' << stack.caps.max_degree << ' ' << stack.caps.max_trig << ' '
     << stack.steps.size() << '\n';
  os << "seed " << stack.seed.n1;
  os << std::hexfloat;
  for (int j = 0; j < stack.seed.Istar.size(); ++j) os << ' ' << stack.seed.Istar[j];
  os << std::defaultfloat << '\n';
  for (const StepTransform& t : stack.steps) {
    os << "step " << t.r << '\n';
    for (const TrigSeries* f : {&t.chi0, &t.chi1, &t.X2, &t.Y2}) {
      TrigSeries g = f->dims() == d ? *f : TrigSeries(d, stack.caps);
      write_series(os, g);
    }
    os << "matrix " << t.D.rows() << ' ' << t.D.cols() << '\n' << std::hexfloat;
    for (int i = 0; i < t.D.rows(); ++i) {
      for (int j = 0; j < t.D.cols(); ++j) os << (j ? " " : "") << t.D(i, j);
      os << '\n';
    }
    os << std::defaultfloat;
  }
}

TransformStack read_stack(std::istream& is) {
  auto expect = [&](const std::string& tag) {
    std::string s;
    if (!(is >> s) || s != tag) throw std::runtime_error("read_stack: expected '" + tag + "'");
  };
  auto number = [&]() {
    std::string s;
    if (!(is >> s)) throw std::runtime_error("read_stack: truncated input");
    return std::strtod(s.c_str(), nullptr);
  };
  TransformStack st;
  std::size_t nsteps = 0;
  expect("transformstack");
  is >> st.dims.n1 >> st.dims.n2 >> st.caps.max_degree >> st.caps.max_trig >> nsteps;
  expect("seed");
  is >> st.seed.n1;
  st.seed.Istar = Eigen::VectorXd(st.seed.n1);
  for (int j = 0; j < st.seed.n1; ++j) st.seed.Istar[j] = number();
  for (std::size_t n = 0; n < nsteps; ++n) {
    StepTransform t;
    expect("step");
    is >> t.r;
    t.chi0 = read_series(is);
    t.chi1 = read_series(is);
    t.X2 = read_series(is);
    t.Y2 = read_series(is);
    expect("matrix");
    int rows = 0, cols = 0;
    is >> rows >> cols;
    t.D = Eigen::MatrixXd(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t.D(i, j) = number();
    st.steps.push_back(std::move(t));
  }
  if (!is) throw std::runtime_error("read_stack: malformed input");
  return st;
}

}  // namespace eltori
