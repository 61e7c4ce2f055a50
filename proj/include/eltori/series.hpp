#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace eltori {

// Real Fourier-Taylor series in (p, q, xi, eta):
//   sum c * p^m * xi^l * eta^lbar * {cos|sin}(k.q)
// with (q, p) and (eta, xi) canonical (coordinate, momentum) pairs.

enum class Parity : std::int8_t { Cos = 0, Sin = 1 };

struct Dims {
  int n1 = 0;  // angles / actions
  int n2 = 0;  // transverse pairs
  bool operator==(const Dims&) const = default;
  int slots() const { return 2 * n1 + 2 * n2; }
};

struct Caps {
  int max_degree = 8;   // 2|m| + |l| + |lbar|
  int max_trig = 24;    // |k|_1
  bool operator==(const Caps&) const = default;
};

Caps max(const Caps& a, const Caps& b);

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Slot layout: [m | l | lbar | k]; byte 15 holds the parity.
struct TermKey {
  static constexpr int kMaxSlots = 15;
  std::array<std::int8_t, 16> v{};

  Parity parity() const { return static_cast<Parity>(v[15]); }
  void set_parity(Parity p) { v[15] = static_cast<std::int8_t>(p); }
  bool operator==(const TermKey&) const = default;
  bool operator<(const TermKey& o) const { return v < o.v; }
};

struct TermKeyHash {
  std::size_t operator()(const TermKey& k) const noexcept;
};

// Accessors for a key under given dims.
struct KeyView {
  Dims d;
  int m(const TermKey& t, int j) const { return t.v[j]; }
  int l(const TermKey& t, int j) const { return t.v[d.n1 + j]; }
  int lbar(const TermKey& t, int j) const { return t.v[d.n1 + d.n2 + j]; }
  int k(const TermKey& t, int j) const { return t.v[d.n1 + 2 * d.n2 + j]; }
  int m_slot(int j) const { return j; }
  int l_slot(int j) const { return d.n1 + j; }
  int lbar_slot(int j) const { return d.n1 + d.n2 + j; }
  int k_slot(int j) const { return d.n1 + 2 * d.n2 + j; }
  int degree(const TermKey& t) const;  // 2|m| + |l| + |lbar|
  int trig(const TermKey& t) const;    // |k|_1
  int action_degree(const TermKey& t) const;      // |m|
  int transverse_degree(const TermKey& t) const;  // |l| + |lbar|
};

struct Term {
  TermKey key;
  double c = 0.0;
};

// Builder for a single key; k is canonicalized by TrigSeries::add_term.
struct Monomial {
  std::vector<int> m, l, lbar, k;
  Parity parity = Parity::Cos;
};

class TrigSeries {
 public:
  TrigSeries() = default;
  TrigSeries(Dims d, Caps c) : dims_(d), caps_(c) {
    if (d.slots() > TermKey::kMaxSlots) throw std::invalid_argument("series dimension exceeds key capacity");
  }

  Dims dims() const { return dims_; }
  Caps caps() const { return caps_; }
  void set_caps(Caps c) { caps_ = c; }
  KeyView view() const { return KeyView{dims_}; }

  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  // Accumulates c into the canonicalized key; terms beyond caps are dropped.
  void add_term(TermKey key, double c);
  void add_term(const Monomial& mono, double c);
  double coeff(TermKey key) const;
  double coeff(const Monomial& mono) const;

  TrigSeries& operator+=(const TrigSeries& o);
  TrigSeries& operator-=(const TrigSeries& o);
  TrigSeries& operator*=(double s);

  // Terms sorted by key; the only place an ordering is materialized.
  std::vector<Term> sorted_terms() const;

  // Trusted bulk construction: keys canonical, unique, nonzero, within caps.
  static TrigSeries from_terms(Dims d, Caps c, std::vector<Term> terms);

 private:
  Dims dims_{};
  Caps caps_{};
  std::vector<Term> terms_;
};

TermKey make_key(Dims d, const Monomial& mono);
// Canonical sign: first nonzero harmonic positive. Returns the coefficient
// sign factor, or 0 when the term vanishes identically (sin with k = 0).
int canonicalize(Dims d, TermKey& key);

TrigSeries operator+(const TrigSeries& a, const TrigSeries& b);
TrigSeries operator-(const TrigSeries& a, const TrigSeries& b);
TrigSeries operator*(double s, const TrigSeries& a);

TrigSeries add(const TrigSeries& a, const TrigSeries& b);
TrigSeries mul(const TrigSeries& a, const TrigSeries& b, Caps caps);
TrigSeries mul(const TrigSeries& a, const TrigSeries& b);

// {f,g} = f_q g_p - f_p g_q + f_eta g_xi - f_xi g_eta
TrigSeries poisson(const TrigSeries& f, const TrigSeries& g, Caps caps);
TrigSeries poisson(const TrigSeries& f, const TrigSeries& g);

// exp(L_chi) f with L_chi f = {f, chi}; stops when a contribution is empty.
TrigSeries lie_series(const TrigSeries& f, const TrigSeries& chi, Caps caps, int max_order = 200);
TrigSeries lie_series(const TrigSeries& f, const TrigSeries& chi);

// Lie series summed until the l1 norm of a contribution falls below tol.
TrigSeries lie_series_converged(const TrigSeries& f, const TrigSeries& chi, Caps caps, double tol,
                                int max_order = 400);

struct ClassIndex {
  int degree = 0;  // total degree in the square roots of the actions
  int s = 0;       // trig block: 0 for k = 0, else ceil(|k|/K)
  auto operator<=>(const ClassIndex&) const = default;
};

int trig_block(int trig_degree, int K);
std::map<ClassIndex, TrigSeries> grade(const TrigSeries& f, int K);

double l1_norm(const TrigSeries& f);
TrigSeries prune(const TrigSeries& f, double eps = 0.0);
TrigSeries truncate(const TrigSeries& f, Caps caps);

// Average over q: keeps k = 0 terms.
TrigSeries average_over_angles(const TrigSeries& f);
// Average over the rotations of every (xi_j, eta_j) plane.
TrigSeries average_over_transverse(const TrigSeries& f);

enum class VarKind { P, Q, Xi, Eta };
TrigSeries derivative(const TrigSeries& f, VarKind kind, int j);

struct PhasePoint {
  Eigen::VectorXd p, q, xi, eta;
  static PhasePoint zero(Dims d);
};

double evaluate(const TrigSeries& f, const PhasePoint& z);

// Substitutes (eta, xi) = M (eta', xi') with M acting on [eta; xi].
TrigSeries linear_substitute(const TrigSeries& f, const Eigen::MatrixXd& M);

// Text format: header line then one term per line
//   m.. | l.. | lbar.. | k.. | cos|sin | coeff(hexfloat)
void write_series(std::ostream& os, const TrigSeries& f);
TrigSeries read_series(std::istream& is);
std::string to_string(const TrigSeries& f);
TrigSeries series_from_string(const std::string& s);

std::string grade_norms_json(const std::map<ClassIndex, TrigSeries>& blocks);

// Elementary series.
TrigSeries constant(Dims d, Caps c, double v);
TrigSeries action(Dims d, Caps c, int j, double coef = 1.0);
TrigSeries xi_var(Dims d, Caps c, int j, double coef = 1.0);
TrigSeries eta_var(Dims d, Caps c, int j, double coef = 1.0);
TrigSeries trig(Dims d, Caps c, const std::vector<int>& k, Parity par, double coef = 1.0);

}  // namespace eltori
