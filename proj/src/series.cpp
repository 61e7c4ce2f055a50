#include "eltori/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace eltori {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Open-addressing accumulator; extraction keeps first-insertion order so
// results do not depend on the table size.
class Accumulator {
 public:
  explicit Accumulator(std::size_t hint = 16) {
    std::size_t cap = 32;
    while (cap < 2 * hint) cap <<= 1;
    table_.assign(cap, 0);
    mask_ = cap - 1;
    entries_.reserve(hint);
  }

  void add(const TermKey& key, double c) {
    std::size_t i = TermKeyHash{}(key) & mask_;
    while (true) {
      std::uint32_t slot = table_[i];
      if (slot == 0) {
        entries_.push_back(Term{key, c});
        table_[i] = static_cast<std::uint32_t>(entries_.size());
        if (2 * entries_.size() > table_.size()) grow();
        return;
      }
      Term& t = entries_[slot - 1];
      if (t.key == key) {
        t.c += c;
        return;
      }
      i = (i + 1) & mask_;
    }
  }

  std::vector<Term> take() {
    std::vector<Term> out;
    out.reserve(entries_.size());
    for (const Term& t : entries_)
      if (t.c != 0.0) out.push_back(t);
    return out;
  }

 private:
  void grow() {
    std::vector<std::uint32_t> fresh(table_.size() * 2, 0);
    mask_ = fresh.size() - 1;
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      std::size_t i = TermKeyHash{}(entries_[e].key) & mask_;
      while (fresh[i] != 0) i = (i + 1) & mask_;
      fresh[i] = static_cast<std::uint32_t>(e + 1);
    }
    table_.swap(fresh);
  }

  std::vector<Term> entries_;
  std::vector<std::uint32_t> table_;
  std::size_t mask_ = 0;
};

void check_dims(const TrigSeries& a, const TrigSeries& b) {
  if (!(a.dims() == b.dims())) throw DimensionMismatch("series dimensions differ");
}

// Product-to-sum coefficients for P_a(x) * P_b(y) = cp * P(x+y) + cm * P(x-y).
struct TrigProduct {
  double plus, minus;
  Parity out;
};

constexpr TrigProduct trig_product(Parity a, Parity b) {
  if (a == Parity::Cos && b == Parity::Cos) return {0.5, 0.5, Parity::Cos};
  if (a == Parity::Sin && b == Parity::Sin) return {-0.5, 0.5, Parity::Cos};
  if (a == Parity::Sin && b == Parity::Cos) return {0.5, 0.5, Parity::Sin};
  return {0.5, -0.5, Parity::Sin};
}

constexpr Parity flip(Parity p) { return p == Parity::Cos ? Parity::Sin : Parity::Cos; }
// d/dx cos = -sin, d/dx sin = +cos
constexpr double deriv_sign(Parity p) { return p == Parity::Cos ? -1.0 : 1.0; }

struct Layout {
  int n_exp;   // exponent slots
  int k0;      // first harmonic slot
  int n1;
  explicit Layout(Dims d) : n_exp(d.n1 + 2 * d.n2), k0(d.n1 + 2 * d.n2), n1(d.n1) {}
};

// Emits c * P(k) onto key (exponents already set) after canonicalization.
inline void emit(Accumulator& acc, const Layout& lay, TermKey key, const std::int8_t* k, Parity par,
                 double c, int max_trig) {
  if (c == 0.0) return;
  int first = 0;
  int norm = 0;
  for (int j = 0; j < lay.n1; ++j) {
    int kj = k[j];
    if (first == 0 && kj != 0) first = kj > 0 ? 1 : -1;
    norm += kj < 0 ? -kj : kj;
  }
  if (norm > max_trig) return;
  if (first == 0 && par == Parity::Sin) return;
  if (first < 0) {
    for (int j = 0; j < lay.n1; ++j) key.v[lay.k0 + j] = static_cast<std::int8_t>(-k[j]);
    if (par == Parity::Sin) c = -c;
  } else {
    for (int j = 0; j < lay.n1; ++j) key.v[lay.k0 + j] = k[j];
  }
  key.set_parity(par);
  acc.add(key, c);
}

std::vector<std::vector<int>> bucket_by_degree(const TrigSeries& f, int max_deg) {
  std::vector<std::vector<int>> buckets(std::max(max_deg, 0) + 1);
  KeyView kv = f.view();
  const auto& ts = f.terms();
  for (int i = 0; i < static_cast<int>(ts.size()); ++i) {
    int d = kv.degree(ts[i].key);
    if (d >= static_cast<int>(buckets.size())) buckets.resize(d + 1);
    buckets[d].push_back(i);
  }
  return buckets;
}

long double double_factorial(int n) {
  long double r = 1;
  for (int i = n; i > 1; i -= 2) r *= i;
  return r;
}

}  // namespace

Caps max(const Caps& a, const Caps& b) {
  return Caps{std::max(a.max_degree, b.max_degree), std::max(a.max_trig, b.max_trig)};
}

std::size_t TermKeyHash::operator()(const TermKey& k) const noexcept {
  std::uint64_t w[2];
  std::memcpy(w, k.v.data(), 16);
  return static_cast<std::size_t>(mix64(w[0] ^ mix64(w[1] + 0x9e3779b97f4a7c15ULL)));
}

int KeyView::degree(const TermKey& t) const { return 2 * action_degree(t) + transverse_degree(t); }

int KeyView::trig(const TermKey& t) const {
  int s = 0;
  for (int j = 0; j < d.n1; ++j) s += std::abs(k(t, j));
  return s;
}

int KeyView::action_degree(const TermKey& t) const {
  int s = 0;
  for (int j = 0; j < d.n1; ++j) s += m(t, j);
  return s;
}

int KeyView::transverse_degree(const TermKey& t) const {
  int s = 0;
  for (int j = 0; j < d.n2; ++j) s += l(t, j) + lbar(t, j);
  return s;
}

TermKey make_key(Dims d, const Monomial& mono) {
  KeyView kv{d};
  TermKey key;
  auto get = [](const std::vector<int>& v, int j) { return j < static_cast<int>(v.size()) ? v[j] : 0; };
  if (static_cast<int>(mono.m.size()) > d.n1 || static_cast<int>(mono.k.size()) > d.n1 ||
      static_cast<int>(mono.l.size()) > d.n2 || static_cast<int>(mono.lbar.size()) > d.n2)
    throw DimensionMismatch("monomial exceeds series dimensions");
  for (int j = 0; j < d.n1; ++j) {
    if (get(mono.m, j) < 0) throw std::invalid_argument("negative exponent");
    key.v[kv.m_slot(j)] = static_cast<std::int8_t>(get(mono.m, j));
    key.v[kv.k_slot(j)] = static_cast<std::int8_t>(get(mono.k, j));
  }
  for (int j = 0; j < d.n2; ++j) {
    if (get(mono.l, j) < 0 || get(mono.lbar, j) < 0) throw std::invalid_argument("negative exponent");
    key.v[kv.l_slot(j)] = static_cast<std::int8_t>(get(mono.l, j));
    key.v[kv.lbar_slot(j)] = static_cast<std::int8_t>(get(mono.lbar, j));
  }
  key.set_parity(mono.parity);
  return key;
}

int canonicalize(Dims d, TermKey& key) {
  KeyView kv{d};
  int first = 0;
  for (int j = 0; j < d.n1 && first == 0; ++j) {
    int kj = kv.k(key, j);
    if (kj != 0) first = kj > 0 ? 1 : -1;
  }
  if (first == 0) return key.parity() == Parity::Sin ? 0 : 1;
  if (first > 0) return 1;
  for (int j = 0; j < d.n1; ++j) key.v[kv.k_slot(j)] = static_cast<std::int8_t>(-kv.k(key, j));
  return key.parity() == Parity::Sin ? -1 : 1;
}

void TrigSeries::add_term(TermKey key, double c) {
  if (c == 0.0) return;
  int sign = canonicalize(dims_, key);
  if (sign == 0) return;
  KeyView kv = view();
  if (kv.degree(key) > caps_.max_degree || kv.trig(key) > caps_.max_trig) return;
  c *= sign;
  for (auto it = terms_.begin(); it != terms_.end(); ++it) {
    if (it->key == key) {
      it->c += c;
      if (it->c == 0.0) terms_.erase(it);
      return;
    }
  }
  terms_.push_back(Term{key, c});
}

void TrigSeries::add_term(const Monomial& mono, double c) { add_term(make_key(dims_, mono), c); }

double TrigSeries::coeff(TermKey key) const {
  int sign = canonicalize(dims_, key);
  if (sign == 0) return 0.0;
  for (const Term& t : terms_)
    if (t.key == key) return sign * t.c;
  return 0.0;
}

double TrigSeries::coeff(const Monomial& mono) const { return coeff(make_key(dims_, mono)); }

TrigSeries& TrigSeries::operator+=(const TrigSeries& o) {
  *this = add(*this, o);
  return *this;
}

TrigSeries& TrigSeries::operator-=(const TrigSeries& o) {
  *this = add(*this, -1.0 * o);
  return *this;
}

TrigSeries& TrigSeries::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (Term& t : terms_) t.c *= s;
  return *this;
}

std::vector<Term> TrigSeries::sorted_terms() const {
  std::vector<Term> out = terms_;
  std::sort(out.begin(), out.end(), [](const Term& a, const Term& b) { return a.key < b.key; });
  return out;
}

TrigSeries TrigSeries::from_terms(Dims d, Caps c, std::vector<Term> terms) {
  TrigSeries s(d, c);
  s.terms_ = std::move(terms);
  return s;
}

TrigSeries operator+(const TrigSeries& a, const TrigSeries& b) { return add(a, b); }

TrigSeries operator-(const TrigSeries& a, const TrigSeries& b) { return add(a, -1.0 * b); }

TrigSeries operator*(double s, const TrigSeries& a) {
  TrigSeries r = a;
  r *= s;
  return r;
}

TrigSeries add(const TrigSeries& a, const TrigSeries& b) {
  check_dims(a, b);
  Caps caps = max(a.caps(), b.caps());
  if (a.empty()) return TrigSeries::from_terms(a.dims(), caps, b.terms());
  if (b.empty()) return TrigSeries::from_terms(a.dims(), caps, a.terms());
  Accumulator acc(a.size() + b.size());
  for (const Term& t : a.terms()) acc.add(t.key, t.c);
  for (const Term& t : b.terms()) acc.add(t.key, t.c);
  return TrigSeries::from_terms(a.dims(), caps, acc.take());
}

TrigSeries mul(const TrigSeries& a, const TrigSeries& b) { return mul(a, b, max(a.caps(), b.caps())); }

TrigSeries mul(const TrigSeries& a, const TrigSeries& b, Caps caps) {
  check_dims(a, b);
  const Dims d = a.dims();
  const Layout lay(d);
  KeyView kv{d};
  Accumulator acc(a.size() + b.size());
  auto bb = bucket_by_degree(b, caps.max_degree);
  std::int8_t kp[16], km[16];
  for (const Term& ta : a.terms()) {
    int da = kv.degree(ta.key);
    for (int db = 0; db < static_cast<int>(bb.size()) && da + db <= caps.max_degree; ++db) {
      for (int ib : bb[db]) {
        const Term& tb = b.terms()[ib];
        TermKey key;
        for (int i = 0; i < lay.n_exp; ++i) key.v[i] = static_cast<std::int8_t>(ta.key.v[i] + tb.key.v[i]);
        for (int j = 0; j < lay.n1; ++j) {
          kp[j] = static_cast<std::int8_t>(ta.key.v[lay.k0 + j] + tb.key.v[lay.k0 + j]);
          km[j] = static_cast<std::int8_t>(ta.key.v[lay.k0 + j] - tb.key.v[lay.k0 + j]);
        }
        TrigProduct tp = trig_product(ta.key.parity(), tb.key.parity());
        double c = ta.c * tb.c;
        emit(acc, lay, key, kp, tp.out, c * tp.plus, caps.max_trig);
        emit(acc, lay, key, km, tp.out, c * tp.minus, caps.max_trig);
      }
    }
  }
  return TrigSeries::from_terms(d, caps, acc.take());
}

TrigSeries poisson(const TrigSeries& f, const TrigSeries& g) { return poisson(f, g, max(f.caps(), g.caps())); }

TrigSeries poisson(const TrigSeries& f, const TrigSeries& g, Caps caps) {
  check_dims(f, g);
  const Dims d = f.dims();
  const Layout lay(d);
  KeyView kv{d};
  Accumulator acc(f.size() + g.size());
  auto gb = bucket_by_degree(g, caps.max_degree + 2);
  std::int8_t kp[16], km[16];
  for (const Term& ta : f.terms()) {
    const int da = kv.degree(ta.key);
    const Parity pa = ta.key.parity();
    for (int db = 0; db < static_cast<int>(gb.size()) && da + db - 2 <= caps.max_degree; ++db) {
      for (int ib : gb[db]) {
        const Term& tb = g.terms()[ib];
        const Parity pb = tb.key.parity();
        const double c = ta.c * tb.c;
        TermKey sum;
        for (int i = 0; i < lay.n_exp; ++i) sum.v[i] = static_cast<std::int8_t>(ta.key.v[i] + tb.key.v[i]);
        for (int j = 0; j < lay.n1; ++j) {
          kp[j] = static_cast<std::int8_t>(ta.key.v[lay.k0 + j] + tb.key.v[lay.k0 + j]);
          km[j] = static_cast<std::int8_t>(ta.key.v[lay.k0 + j] - tb.key.v[lay.k0 + j]);
        }
        // (q_j, p_j) pairs
        const TrigProduct t1 = trig_product(flip(pa), pb);
        const TrigProduct t2 = trig_product(pa, flip(pb));
        for (int j = 0; j < d.n1; ++j) {
          const int ka = ta.key.v[lay.k0 + j], kb = tb.key.v[lay.k0 + j];
          const int ma = ta.key.v[j], mb = tb.key.v[j];
          const double f1 = (ka != 0 && mb > 0) ? deriv_sign(pa) * ka * mb : 0.0;
          const double f2 = (ma > 0 && kb != 0) ? -ma * deriv_sign(pb) * kb : 0.0;
          if (f1 == 0.0 && f2 == 0.0) continue;
          TermKey key = sum;
          key.v[j] = static_cast<std::int8_t>(key.v[j] - 1);
          emit(acc, lay, key, kp, t1.out, c * (f1 * t1.plus + f2 * t2.plus), caps.max_trig);
          emit(acc, lay, key, km, t1.out, c * (f1 * t1.minus + f2 * t2.minus), caps.max_trig);
        }
        // (eta_j, xi_j) pairs
        const TrigProduct t0 = trig_product(pa, pb);
        for (int j = 0; j < d.n2; ++j) {
          const int xs = kv.l_slot(j), es = kv.lbar_slot(j);
          const double w = double(ta.key.v[es]) * tb.key.v[xs] - double(ta.key.v[xs]) * tb.key.v[es];
          if (w == 0.0) continue;
          TermKey key = sum;
          key.v[xs] = static_cast<std::int8_t>(key.v[xs] - 1);
          key.v[es] = static_cast<std::int8_t>(key.v[es] - 1);
          emit(acc, lay, key, kp, t0.out, c * w * t0.plus, caps.max_trig);
          emit(acc, lay, key, km, t0.out, c * w * t0.minus, caps.max_trig);
        }
      }
    }
  }
  return TrigSeries::from_terms(d, caps, acc.take());
}

TrigSeries lie_series(const TrigSeries& f, const TrigSeries& chi) { return lie_series(f, chi, max(f.caps(), chi.caps())); }

TrigSeries lie_series(const TrigSeries& f, const TrigSeries& chi, Caps caps, int max_order) {
  check_dims(f, chi);
  TrigSeries sum = truncate(f, caps);
  if (chi.empty()) return sum;
  TrigSeries term = sum;
  for (int i = 1; i <= max_order; ++i) {
    term = poisson(term, chi, caps);
    if (term.empty()) return sum;
    term *= 1.0 / i;
    sum += term;
  }
  throw std::runtime_error("lie_series: expansion did not terminate within caps");
}

TrigSeries lie_series_converged(const TrigSeries& f, const TrigSeries& chi, Caps caps, double tol, int max_order) {
  check_dims(f, chi);
  TrigSeries sum = truncate(f, caps);
  if (chi.empty()) return sum;
  TrigSeries term = sum;
  for (int i = 1; i <= max_order; ++i) {
    term = poisson(term, chi, caps);
    term *= 1.0 / i;
    term = prune(term, tol * 1e-3);
    if (term.empty()) return sum;
    sum += term;
    if (l1_norm(term) < tol) return sum;
  }
  throw std::runtime_error("lie_series_converged: no convergence");
}

int trig_block(int trig_degree, int K) {
  if (trig_degree == 0) return 0;
  return (trig_degree + K - 1) / K;
}

std::map<ClassIndex, TrigSeries> grade(const TrigSeries& f, int K) {
  if (K < 1) throw std::invalid_argument("grade: K must be positive");
  KeyView kv = f.view();
  std::map<ClassIndex, std::vector<Term>> parts;
  for (const Term& t : f.terms()) parts[ClassIndex{kv.degree(t.key), trig_block(kv.trig(t.key), K)}].push_back(t);
  std::map<ClassIndex, TrigSeries> out;
  for (auto& [ci, ts] : parts) out.emplace(ci, TrigSeries::from_terms(f.dims(), f.caps(), std::move(ts)));
  return out;
}

double l1_norm(const TrigSeries& f) {
  double s = 0.0;
  for (const Term& t : f.terms()) s += std::abs(t.c);
  return s;
}

TrigSeries prune(const TrigSeries& f, double eps) {
  std::vector<Term> kept;
  kept.reserve(f.size());
  for (const Term& t : f.terms())
    if (std::abs(t.c) >= eps && t.c != 0.0) kept.push_back(t);
  return TrigSeries::from_terms(f.dims(), f.caps(), std::move(kept));
}

TrigSeries truncate(const TrigSeries& f, Caps caps) {
  KeyView kv = f.view();
  std::vector<Term> kept;
  kept.reserve(f.size());
  for (const Term& t : f.terms())
    if (kv.degree(t.key) <= caps.max_degree && kv.trig(t.key) <= caps.max_trig) kept.push_back(t);
  return TrigSeries::from_terms(f.dims(), caps, std::move(kept));
}

TrigSeries average_over_angles(const TrigSeries& f) {
  KeyView kv = f.view();
  std::vector<Term> kept;
  for (const Term& t : f.terms())
    if (kv.trig(t.key) == 0 && t.key.parity() == Parity::Cos) kept.push_back(t);
  return TrigSeries::from_terms(f.dims(), f.caps(), std::move(kept));
}

TrigSeries average_over_transverse(const TrigSeries& f) {
  const Dims d = f.dims();
  KeyView kv{d};
  Accumulator acc(f.size());
  for (const Term& t : f.terms()) {
    long double c = t.c;
    bool zero = false;
    for (int j = 0; j < d.n2 && !zero; ++j) {
      int a = kv.l(t.key, j), b = kv.lbar(t.key, j);
      if (a % 2 || b % 2) zero = true;
      else c *= double_factorial(a - 1) * double_factorial(b - 1) / double_factorial(a + b);
    }
    if (zero) continue;
    // (xi^2 + eta^2)^{n_j} expanded jointly over j.
    std::vector<std::pair<TermKey, long double>> partial{{t.key, c}};
    for (int j = 0; j < d.n2; ++j) {
      int n = (kv.l(t.key, j) + kv.lbar(t.key, j)) / 2;
      std::vector<std::pair<TermKey, long double>> next;
      long double binom = 1;
      for (int i = 0; i <= n; ++i) {
        for (const auto& [key, cc] : partial) {
          TermKey k2 = key;
          k2.v[kv.l_slot(j)] = static_cast<std::int8_t>(2 * i);
          k2.v[kv.lbar_slot(j)] = static_cast<std::int8_t>(2 * (n - i));
          next.emplace_back(k2, cc * binom);
        }
        binom = binom * (n - i) / (i + 1);
      }
      partial.swap(next);
    }
    for (const auto& [key, cc] : partial) acc.add(key, static_cast<double>(cc));
  }
  return TrigSeries::from_terms(d, f.caps(), acc.take());
}

TrigSeries derivative(const TrigSeries& f, VarKind kind, int j) {
  const Dims d = f.dims();
  KeyView kv{d};
  Accumulator acc(f.size());
  for (const Term& t : f.terms()) {
    TermKey key = t.key;
    double c = t.c;
    switch (kind) {
      case VarKind::P: {
        int e = kv.m(key, j);
        if (e == 0) continue;
        key.v[kv.m_slot(j)] = static_cast<std::int8_t>(e - 1);
        c *= e;
        break;
      }
      case VarKind::Xi: {
        int e = kv.l(key, j);
        if (e == 0) continue;
        key.v[kv.l_slot(j)] = static_cast<std::int8_t>(e - 1);
        c *= e;
        break;
      }
      case VarKind::Eta: {
        int e = kv.lbar(key, j);
        if (e == 0) continue;
        key.v[kv.lbar_slot(j)] = static_cast<std::int8_t>(e - 1);
        c *= e;
        break;
      }
      case VarKind::Q: {
        int kj = kv.k(key, j);
        if (kj == 0) continue;
        c *= deriv_sign(key.parity()) * kj;
        key.set_parity(flip(key.parity()));
        break;
      }
    }
    acc.add(key, c);
  }
  return TrigSeries::from_terms(d, f.caps(), acc.take());
}

PhasePoint PhasePoint::zero(Dims d) {
  return PhasePoint{Eigen::VectorXd::Zero(d.n1), Eigen::VectorXd::Zero(d.n1), Eigen::VectorXd::Zero(d.n2),
                    Eigen::VectorXd::Zero(d.n2)};
}

double evaluate(const TrigSeries& f, const PhasePoint& z) {
  const Dims d = f.dims();
  if (z.p.size() != d.n1 || z.q.size() != d.n1 || z.xi.size() != d.n2 || z.eta.size() != d.n2)
    throw DimensionMismatch("evaluate: point dimensions differ");
  KeyView kv{d};
  int emax = 0;
  for (const Term& t : f.terms())
    for (int i = 0; i < d.n1 + 2 * d.n2; ++i) emax = std::max(emax, int(t.key.v[i]));
  const int nvar = d.n1 + 2 * d.n2;
  std::vector<double> pw(static_cast<std::size_t>(nvar) * (emax + 1));
  for (int v = 0; v < nvar; ++v) {
    double x = v < d.n1 ? z.p[v] : (v < d.n1 + d.n2 ? z.xi[v - d.n1] : z.eta[v - d.n1 - d.n2]);
    double acc = 1.0;
    for (int e = 0; e <= emax; ++e) {
      pw[v * (emax + 1) + e] = acc;
      acc *= x;
    }
  }
  long double sum = 0.0L;
  for (const Term& t : f.terms()) {
    double val = t.c;
    for (int v = 0; v < nvar; ++v) val *= pw[v * (emax + 1) + t.key.v[v]];
    double arg = 0.0;
    for (int j = 0; j < d.n1; ++j) arg += kv.k(t.key, j) * z.q[j];
    val *= t.key.parity() == Parity::Cos ? std::cos(arg) : std::sin(arg);
    sum += val;
  }
  return static_cast<double>(sum);
}

TrigSeries linear_substitute(const TrigSeries& f, const Eigen::MatrixXd& M) {
  const Dims d = f.dims();
  const int n2 = d.n2;
  if (M.rows() != 2 * n2 || M.cols() != 2 * n2) throw DimensionMismatch("linear_substitute: matrix size");
  if (n2 == 0) return f;
  KeyView kv{d};
  int emax = 0, dmax = 0;
  for (const Term& t : f.terms()) {
    for (int j = 0; j < n2; ++j) emax = std::max({emax, kv.l(t.key, j), kv.lbar(t.key, j)});
    dmax = std::max(dmax, kv.transverse_degree(t.key));
  }
  // Polynomials in the new transverse variables use dims (0, n2); substitution keeps the degree.
  const Dims pd{0, n2};
  const Caps pc{dmax, 0};
  // var index: eta_j -> row j, xi_j -> row n2 + j; columns [eta'; xi'].
  auto linear_form = [&](int row) {
    TrigSeries s(pd, pc);
    for (int c = 0; c < 2 * n2; ++c) {
      if (M(row, c) == 0.0) continue;
      Monomial mo;
      mo.l.assign(n2, 0);
      mo.lbar.assign(n2, 0);
      if (c < n2) mo.lbar[c] = 1;
      else mo.l[c - n2] = 1;
      s.add_term(mo, M(row, c));
    }
    return s;
  };
  std::vector<std::vector<TrigSeries>> powers(2 * n2);
  for (int v = 0; v < 2 * n2; ++v) {
    TrigSeries base = linear_form(v);
    powers[v].push_back(constant(pd, pc, 1.0));
    for (int e = 1; e <= emax; ++e) powers[v].push_back(mul(powers[v].back(), base, pc));
  }
  std::map<std::vector<int>, TrigSeries> cache;
  Accumulator acc(f.size());
  for (const Term& t : f.terms()) {
    std::vector<int> ex(2 * n2);
    for (int j = 0; j < n2; ++j) {
      ex[j] = kv.lbar(t.key, j);
      ex[n2 + j] = kv.l(t.key, j);
    }
    auto it = cache.find(ex);
    if (it == cache.end()) {
      TrigSeries poly = constant(pd, pc, 1.0);
      for (int v = 0; v < 2 * n2; ++v)
        if (ex[v] > 0) poly = mul(poly, powers[v][ex[v]], pc);
      it = cache.emplace(ex, std::move(poly)).first;
    }
    KeyView pv{pd};
    for (const Term& pt : it->second.terms()) {
      TermKey key = t.key;
      for (int j = 0; j < n2; ++j) {
        key.v[kv.l_slot(j)] = static_cast<std::int8_t>(pv.l(pt.key, j));
        key.v[kv.lbar_slot(j)] = static_cast<std::int8_t>(pv.lbar(pt.key, j));
      }
      acc.add(key, t.c * pt.c);
    }
  }
  return TrigSeries::from_terms(d, f.caps(), acc.take());
}

void write_series(std::ostream& os, const TrigSeries& f) {
  const Dims d = f.dims();
  KeyView kv{d};
  os << "trigseries " << d.n1 << ' ' << d.n2 << ' ' << f.caps().max_degree << ' ' << f.caps().max_trig << ' '
     << f.size() << '\n';
  auto group = [&os](const TermKey& key, int first, int n) {
    for (int i = 0; i < n; ++i) os << (i ? " " : "") << int(key.v[first + i]);
    os << " | ";
  };
  for (const Term& t : f.sorted_terms()) {
    group(t.key, kv.m_slot(0), d.n1);
    group(t.key, kv.l_slot(0), d.n2);
    group(t.key, kv.lbar_slot(0), d.n2);
    group(t.key, kv.k_slot(0), d.n1);
    os << (t.key.parity() == Parity::Cos ? "cos" : "sin") << " | " << std::hexfloat << t.c << std::defaultfloat
       << '\n';
  }
}

TrigSeries read_series(std::istream& is) {
  std::string tag;
  Dims d;
  Caps c;
  std::size_t count = 0;
  if (!(is >> tag >> d.n1 >> d.n2 >> c.max_degree >> c.max_trig >> count) || tag != "trigseries")
    throw std::runtime_error("read_series: bad header");
  std::string line;
  std::getline(is, line);
  KeyView kv{d};
  std::vector<Term> terms;
  terms.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    if (!std::getline(is, line)) throw std::runtime_error("read_series: truncated input");
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string fld;
    while (std::getline(ss, fld, '|')) fields.push_back(fld);
    if (fields.size() != 6) throw std::runtime_error("read_series: malformed term line");
    TermKey key;
    auto parse_group = [&](const std::string& s, int first, int len) {
      std::stringstream gs(s);
      for (int i = 0; i < len; ++i) {
        int v;
        if (!(gs >> v)) throw std::runtime_error("read_series: malformed exponent group");
        key.v[first + i] = static_cast<std::int8_t>(v);
      }
    };
    parse_group(fields[0], kv.m_slot(0), d.n1);
    parse_group(fields[1], kv.l_slot(0), d.n2);
    parse_group(fields[2], kv.lbar_slot(0), d.n2);
    parse_group(fields[3], kv.k_slot(0), d.n1);
    std::stringstream ps(fields[4]);
    std::string par;
    ps >> par;
    key.set_parity(par == "sin" ? Parity::Sin : Parity::Cos);
    std::stringstream cs(fields[5]);
    std::string num;
    cs >> num;
    terms.push_back(Term{key, std::strtod(num.c_str(), nullptr)});
  }
  return TrigSeries::from_terms(d, c, std::move(terms));
}

std::string to_string(const TrigSeries& f) {
  std::ostringstream os;
  write_series(os, f);
  return os.str();
}

TrigSeries series_from_string(const std::string& s) {
  std::istringstream is(s);
  return read_series(is);
}

std::string grade_norms_json(const std::map<ClassIndex, TrigSeries>& blocks) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [ci, s] : blocks)
    j.push_back({{"degree", ci.degree}, {"s", ci.s}, {"terms", s.size()}, {"l1", l1_norm(s)}});
  return j.dump(2);
}

TrigSeries constant(Dims d, Caps c, double v) {
  TrigSeries s(d, c);
  s.add_term(TermKey{}, v);
  return s;
}

TrigSeries action(Dims d, Caps c, int j, double coef) {
  TrigSeries s(d, c);
  TermKey key;
  key.v[KeyView{d}.m_slot(j)] = 1;
  s.add_term(key, coef);
  return s;
}

TrigSeries xi_var(Dims d, Caps c, int j, double coef) {
  TrigSeries s(d, c);
  TermKey key;
  key.v[KeyView{d}.l_slot(j)] = 1;
  s.add_term(key, coef);
  return s;
}

TrigSeries eta_var(Dims d, Caps c, int j, double coef) {
  TrigSeries s(d, c);
  TermKey key;
  key.v[KeyView{d}.lbar_slot(j)] = 1;
  s.add_term(key, coef);
  return s;
}

TrigSeries trig(Dims d, Caps c, const std::vector<int>& k, Parity par, double coef) {
  TrigSeries s(d, c);
  Monomial mo;
  mo.k = k;
  mo.parity = par;
  s.add_term(mo, coef);
  return s;
}

}  // namespace eltori
