#pragma once

#include <cmath>
#include <type_traits>
#include <complex>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eltori/fpu_model.hpp"

namespace eltori {

enum class Scheme { Leapfrog, SBAB3, SBAB3C };

Scheme parse_scheme(const std::string& s);
std::string scheme_name(Scheme s);

struct IntegratorConfig {
  double h = 0.125;
  Scheme scheme = Scheme::SBAB3C;
  double delta = 0.5;  // sampling interval, integer multiple of h
  double T = 65536.0;

  int steps_per_sample() const;
  long sample_count() const { return static_cast<long>(std::llround(T / delta)) + 1; }
};

class BlowUp : public std::runtime_error {
 public:
  BlowUp(const std::string& what, double t) : std::runtime_error(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

// One complex series Y_j + i X_j per mode, sampled every delta from t = 0.
struct Signals {
  double delta = 0.5;
  std::vector<std::vector<std::complex<double>>> modes;
  std::size_t length() const { return modes.empty() ? 0 : modes[0].size(); }
};

// Splitting H = A + B: A is the harmonic chain, exactly a rotation of each
// (Y_j, X_j) by nu_j t; B is the bond potential alpha d^3/3 + beta d^4/4.
template <class Scalar>
class FpuFlow {
 public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct State {
    Vec Y, X;
  };

  explicit FpuFlow(const ChainConfig& cfg) : cfg_(cfg), n_(cfg.N - 1) {
    Eigen::VectorXd nu = mode_frequencies(cfg);
    Eigen::MatrixXd S = sine_basis(cfg.N);
    nu_ = nu.cast<Scalar>();
    S_ = S.cast<Scalar>();
    // S is orthogonal and symmetric; keep it exact in the working precision
    if constexpr (!std::is_same_v<Scalar, double>) {
      const Scalar pi = std::acos(Scalar(-1));
      const Scalar c = std::sqrt(Scalar(2) / Scalar(cfg.N));
      for (int l = 1; l < cfg.N; ++l)
        for (int j = 1; j < cfg.N; ++j) S_(l - 1, j - 1) = c * std::sin(Scalar(j * l) * pi / Scalar(cfg.N));
      for (int j = 1; j < cfg.N; ++j) nu_[j - 1] = 2 * std::sin(Scalar(j) * pi / Scalar(2 * cfg.N));
    }
    sqrt_nu_ = nu_.array().sqrt().matrix();
  }

  int dof() const { return n_; }
  const ChainConfig& chain() const { return cfg_; }
  const Vec& nu() const { return nu_; }

  State from_modes(const ModeState& m) const { return State{m.Y.template cast<Scalar>(), m.X.template cast<Scalar>()}; }
  ModeState to_modes(const State& s) const { return ModeState{s.Y.template cast<double>(), s.X.template cast<double>()}; }

  Vec positions(const Vec& X) const { return S_ * (X.array() / sqrt_nu_.array()).matrix(); }

  // d_i = x_{i+1} - x_i for i = 0..N-1 with fixed ends.
  Vec bonds(const Vec& x) const {
    Vec d(n_ + 1);
    for (int i = 0; i <= n_; ++i) d[i] = (i < n_ ? x[i] : Scalar(0)) - (i > 0 ? x[i - 1] : Scalar(0));
    return d;
  }

  Scalar b1(Scalar d) const { return Scalar(cfg_.alpha) * d * d + Scalar(cfg_.beta) * d * d * d; }
  Scalar b2(Scalar d) const { return 2 * Scalar(cfg_.alpha) * d + 3 * Scalar(cfg_.beta) * d * d; }
  Scalar b3(Scalar d) const { return 2 * Scalar(cfg_.alpha) + 6 * Scalar(cfg_.beta) * d; }

  // dB/dx_l = b'(d_{l-1}) - b'(d_l)
  Vec grad_B(const Vec& x) const {
    Vec d = bonds(x), g(n_);
    for (int l = 0; l < n_; ++l) g[l] = b1(d[l]) - b1(d[l + 1]);
    return g;
  }

  // H_B v with H_B = sum_i b''(d_i) w_i w_i^T, w_i the bond-difference row
  Vec hess_B_times(const Vec& d, const Vec& v) const {
    Vec dv = bonds(v), out = Vec::Zero(n_);
    for (int i = 0; i <= n_; ++i) {
      const Scalar w = b2(d[i]) * dv[i];
      if (i < n_) out[i] += w;
      if (i > 0) out[i - 1] -= w;
    }
    return out;
  }

  Scalar potential_B(const Vec& x) const {
    Vec d = bonds(x);
    Scalar B = 0;
    for (int i = 0; i <= n_; ++i)
      B += Scalar(cfg_.alpha) / 3 * d[i] * d[i] * d[i] + Scalar(cfg_.beta) / 4 * d[i] * d[i] * d[i] * d[i];
    return B;
  }

  Scalar energy(const State& s) const {
    Scalar A = 0;
    for (int j = 0; j < n_; ++j) A += nu_[j] * (s.X[j] * s.X[j] + s.Y[j] * s.Y[j]) / 2;
    return A + potential_B(positions(s.X));
  }

  // Cartesian momentum change dy maps to dY = S dy / sqrt(nu).
  Vec momentum_to_modes(const Vec& dy) const { return ((S_ * dy).array() / sqrt_nu_.array()).matrix(); }

  void rotate(State& s, const Vec& c, const Vec& sn) const {
    for (int j = 0; j < n_; ++j) {
      const Scalar y = s.Y[j], x = s.X[j];
      s.X[j] = x * c[j] + y * sn[j];
      s.Y[j] = y * c[j] - x * sn[j];
    }
  }

  void kick(State& s, Scalar tau) const { s.Y -= tau * momentum_to_modes(grad_B(positions(s.X))); }

  // Kick by the Hamiltonian tau |grad B|^2.
  void corrector(State& s, Scalar tau) const {
    Vec x = positions(s.X);
    Vec d = bonds(x);
    Vec g = grad_B(x);
    s.Y -= (2 * tau) * momentum_to_modes(hess_B_times(d, g));
  }

  // Tangent vectors: columns of (dX; dY).
  void rotate_tangent(Mat& V, const Vec& c, const Vec& sn) const {
    for (int k = 0; k < V.cols(); ++k)
      for (int j = 0; j < n_; ++j) {
        const Scalar x = V(j, k), y = V(n_ + j, k);
        V(j, k) = x * c[j] + y * sn[j];
        V(n_ + j, k) = y * c[j] - x * sn[j];
      }
  }

  void kick_tangent(const State& s, Mat& V, Scalar tau) const {
    Vec d = bonds(positions(s.X));
    for (int k = 0; k < V.cols(); ++k) {
      Vec dx = positions(V.col(k).head(n_));
      V.col(k).tail(n_) -= tau * momentum_to_modes(hess_B_times(d, dx));
    }
  }

  // Hess C = 2 H_B H_B + 2 sum_i b'''(d_i) (v_i . g) v_i v_i^T
  void corrector_tangent(const State& s, Mat& V, Scalar tau) const {
    Vec x = positions(s.X);
    Vec d = bonds(x);
    Vec g = grad_B(x);
    Vec dg = bonds(g);
    for (int k = 0; k < V.cols(); ++k) {
      Vec dx = positions(V.col(k).head(n_));
      Vec hv = hess_B_times(d, hess_B_times(d, dx));
      Vec ddx = bonds(dx);
      for (int i = 0; i <= n_; ++i) {
        const Scalar w = b3(d[i]) * dg[i] * ddx[i];
        if (i < n_) hv[i] += w;
        if (i > 0) hv[i - 1] -= w;
      }
      V.col(k).tail(n_) -= (2 * tau) * momentum_to_modes(hv);
    }
  }

 private:
  ChainConfig cfg_;
  int n_;
  Vec nu_, sqrt_nu_;
  Mat S_;
};

template <class Scalar>
class Stepper {
 public:
  using Flow = FpuFlow<Scalar>;
  using State = typename Flow::State;
  using Vec = typename Flow::Vec;
  using Mat = typename Flow::Mat;

  Stepper(const ChainConfig& cfg, Scheme scheme, double h) : flow_(cfg) { set_step(scheme, h); }

  void set_step(Scheme scheme, double h) {
    h_ = h;
    const Scalar hs = Scalar(h);
    kicks_.clear();
    for (Scalar k : kick_fractions<Scalar>(scheme)) kicks_.push_back(k * hs);
    std::vector<Scalar> drifts = drift_fractions<Scalar>(scheme);
    cos_.clear();
    sin_.clear();
    for (Scalar c : drifts) {
      Vec a = flow_.nu() * (c * hs);
      cos_.push_back(a.array().cos().matrix());
      sin_.push_back(a.array().sin().matrix());
    }
    use_corr_ = scheme == Scheme::SBAB3C;
    corr_ = use_corr_ ? -(13 - 5 * std::sqrt(Scalar(5))) / 576 * hs * hs * hs : Scalar(0);
  }

  const Flow& flow() const { return flow_; }
  double h() const { return h_; }

  // Kicks d_i and drifts c_i interleave as B A B A ... B; SBAB3 uses the
  // 4-point Lobatto nodes. SBAB3C adds a kick by tau h^3 |grad B|^2 at both ends.
  void step(State& s) const {
    if (use_corr_) flow_.corrector(s, corr_);
    for (std::size_t i = 0; i < kicks_.size(); ++i) {
      flow_.kick(s, kicks_[i]);
      if (i < cos_.size()) flow_.rotate(s, cos_[i], sin_[i]);
    }
    if (use_corr_) flow_.corrector(s, corr_);
  }

  // Steps the state and the tangent columns together.
  void step(State& s, Mat& V) const {
    if (use_corr_) {
      flow_.corrector_tangent(s, V, corr_);
      flow_.corrector(s, corr_);
    }
    for (std::size_t i = 0; i < kicks_.size(); ++i) {
      flow_.kick_tangent(s, V, kicks_[i]);
      flow_.kick(s, kicks_[i]);
      if (i < cos_.size()) {
        flow_.rotate_tangent(V, cos_[i], sin_[i]);
        flow_.rotate(s, cos_[i], sin_[i]);
      }
    }
    if (use_corr_) {
      flow_.corrector_tangent(s, V, corr_);
      flow_.corrector(s, corr_);
    }
  }

  template <class T>
  static std::vector<T> kick_fractions(Scheme scheme) {
    if (scheme == Scheme::Leapfrog) return {T(1) / 2, T(1) / 2};
    return {T(1) / 12, T(5) / 12, T(5) / 12, T(1) / 12};
  }

  template <class T>
  static std::vector<T> drift_fractions(Scheme scheme) {
    switch (scheme) {
      case Scheme::Leapfrog:
        return {T(1)};
      case Scheme::SBAB3:
      case Scheme::SBAB3C: {
        const T r5 = std::sqrt(T(5));
        return {T(1) / 2 - r5 / 10, r5 / 5, T(1) / 2 - r5 / 10};
      }
    }
    return {};
  }

 private:
  Flow flow_;
  double h_ = 0.0;
  std::vector<Scalar> kicks_;
  std::vector<Vec> cos_, sin_;
  Scalar corr_ = 0;
  bool use_corr_ = false;
};

using Real = long double;

// Integrates for icfg.T and samples Y_j + i X_j every delta (T/delta + 1 samples).
Signals integrate(const ChainConfig& cfg, const IntegratorConfig& icfg, const ModeState& s0);
// Final state after time T.
ModeState evolve(const ChainConfig& cfg, const IntegratorConfig& icfg, const ModeState& s0, double T);
// Linearized flow over time T on (X; Y), with the final state.
struct TangentResult {
  ModeState state;
  Eigen::MatrixXd M;
};
TangentResult evolve_tangent(const ChainConfig& cfg, const IntegratorConfig& icfg, const ModeState& s0, double T);

void write_signals(std::ostream& os, const ChainConfig& cfg, const IntegratorConfig& icfg, const Signals& s);
Signals read_signals(std::istream& is);

}  // namespace eltori
