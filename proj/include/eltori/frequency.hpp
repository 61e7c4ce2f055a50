#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eltori/fpu_model.hpp"
#include "eltori/integrator.hpp"

namespace eltori {

using Signal = std::vector<std::complex<double>>;

struct FAConfig {
  int NC = 25;          // components per signal
  int KM = 20;          // bound on |k|_1 of integer combinations
  double eps_tol = 1e-12;
  double mu_tol = 2e-6;
  int max_iters = 20;   // cap on locate_torus iterations
  // Passes that re-refine each frequency with every other fitted component
  // subtracted. Removes the bias a strong neighbour leaks into a weak peak.
  int polish = 2;
};

struct Component {
  double A = 0.0;
  double freq = 0.0;
  double phase = 0.0;  // in [0, 2 pi)
};

struct Decomposition {
  std::vector<Component> comps;  // A descending
  int skipped = 0;               // near-duplicate frequencies dropped
};

// Hanning weight 1 + cos(pi (2t/T - 1)); zero at both ends, mean 1.
double hanning(double t, double T);

// (1/T) int_0^T s(t) e^{-i v t} W(t) dt by the trapezoid rule on the sample grid.
std::complex<double> windowed_transform(const Signal& s, double delta, double v);
double tuning(const Signal& s, double delta, double v);

class NoPeak : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Maximizer of tuning on [lo, hi]: grid scan at spacing pi/T, then a
// safeguarded Newton search on d|F|^2/dv = 0.
double find_peak(const Signal& s, double delta, double lo, double hi);

// Refines a peak known to lie within pi/T of v0.
double refine_peak(const Signal& s, double delta, double v0);

// Global maximizer over (-pi/delta, pi/delta) via a zero-padded FFT scan.
double dominant_frequency(const Signal& s, double delta);

Decomposition decompose(const Signal& s, double delta, const FAConfig& cfg);
std::complex<double> reconstruct(const std::vector<Component>& comps, double t);
// max_i |s(t_i) - reconstruction| over the samples
double reconstruction_error(const Signal& s, double delta, const std::vector<Component>& comps);

// Integer vector with |k|_1 <= KM minimizing |v - k.omega|; returns the distance.
// With period > 0 the distance is taken modulo period (aliasing of sampled signals).
double nearest_combination(double v, const Eigen::VectorXd& omega, int KM, std::vector<int>* k = nullptr,
                           double period = 0.0);

struct FundamentalSet {
  Eigen::VectorXd omega;
  std::vector<int> sbar;                // selected component index per signal
  std::vector<std::vector<int>> kbar;   // integer combination used
  bool reduced = false;                 // fewer independent components than requested
  std::string note;
};

// omega_1 from signal 1; for j >= 2 the largest component of
// signal j that is not a combination of the earlier ones, matched to prior nu_j.
FundamentalSet fundamental_frequencies(const std::vector<Decomposition>& d, int n1, const Eigen::VectorXd& prior,
                                       const FAConfig& cfg, double period = 0.0);

// |omega_{f;1}([0,T]) - omega_{f;1}([T,2T])| of mode 1.
double frequency_variation(const ChainConfig& chain, const ModeState& s0, const IntegratorConfig& icfg);

struct LocateResult {
  ModeState ic;
  Eigen::VectorXd omega;
  bool converged = false;
  int iterations = 0;
  double error = 0.0;  // last max reconstruction error / A_11
  std::string note;
};

LocateResult locate_torus(const ChainConfig& chain, const ModeState& ic0, int n1, const IntegratorConfig& icfg,
                          const FAConfig& cfg);

struct ContinuationConfig {
  double A0 = 0.05;          // starting semi-sinusoidal amplitude
  double zeta0 = 0.1;
  double zeta_min = 0.00025;
  int max_points = 100000;
};

struct TorusFamilyPoint {
  double energy = 0.0;
  double ES = 0.0;
  Eigen::VectorXd omega;
  ModeState ic;
  int iterations = 0;
};

using FamilyCallback = std::function<void(const TorusFamilyPoint&)>;

std::vector<TorusFamilyPoint> continue_family(const ChainConfig& chain, int n1, const IntegratorConfig& icfg,
                                              const FAConfig& cfg, const ContinuationConfig& cc,
                                              const FamilyCallback& on_point = {});

}  // namespace eltori
