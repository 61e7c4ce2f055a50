#pragma once

#include <complex>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "eltori/fpu_model.hpp"
#include "eltori/integrator.hpp"
#include "eltori/normalizer.hpp"
#include "eltori/series.hpp"

namespace eltori {

struct BirkhoffConfig {
  int order = 5;
  Caps caps{8, 24};
  double divisor_floor = 1e-8;
  double prune_rel = 1e-16;
  static BirkhoffConfig for_chain(int N);  // order 5, caps {8,24} for N < 8; order 1, caps {4,16} otherwise
};

// Hamiltonian around a torus, graded by degree in the square roots of (p, J):
// p counts 2, each xi or eta counts 1. by_degree[2] is h = omega.p + sum Omega (xi^2+eta^2)/2.
struct BirkhoffForm {
  Dims dims;
  Caps caps;
  Eigen::VectorXd omega, Omega;
  double energy = 0.0;
  std::vector<TrigSeries> by_degree;  // index = degree, up to caps.max_degree
  std::vector<TrigSeries> chi;        // chi[s-1] generated at step s
  int order = 0;
  double dropped_norm = 0.0;          // l1 norm of degree 1-2 leftovers of the input
  std::vector<double> residuals, min_divisors;

  // Z_s = by_degree[s + 2] for s <= order.
  const TrigSeries& Z(int s) const { return by_degree.at(s + 2); }
  TrigSeries remainder() const;  // degrees above order + 2
};

// Order-0 form from a torus normal form with the torus at p = xi = eta = 0.
BirkhoffForm birkhoff_init(const GradedHamiltonian& H, Caps caps);

// Removes the angle-dependent part of degree order + 3; throws SmallDivisor.
void birkhoff_step(BirkhoffForm& form, double divisor_floor, double prune_rel = 1e-16);

BirkhoffForm run_birkhoff(const GradedHamiltonian& H, const BirkhoffConfig& cfg);

// |R(z)| with z in Birkhoff coordinates.
double remainder_value_at(const BirkhoffForm& form, const PhasePoint& z);

// Point maps between torus coordinates and Birkhoff coordinates. Each direction
// is expanded on first use; building them dominates the cost of a scan.
class BirkhoffMap {
 public:
  explicit BirkhoffMap(const BirkhoffForm& form, double tol = 1e-17);
  PhasePoint to_birkhoff(const PhasePoint& z_torus) const;
  PhasePoint to_torus(const PhasePoint& z_birkhoff) const;

 private:
  const std::vector<LieMap>& maps(bool inverse) const;
  std::vector<TrigSeries> chi_;
  Caps caps_;
  double tol_;
  mutable std::once_flag fwd_once_, inv_once_;
  mutable std::vector<LieMap> fwd_, inv_;
};

struct ScanPoint {
  double A = 0.0;   // semi-sinusoidal amplitude
  double ES = 0.0;  // specific energy of that initial condition
  double remainder = 0.0;
};

struct ScanResult {
  ScanPoint best;
  std::vector<ScanPoint> grid;
};

// Semi-sinusoidal amplitudes A_c (1 + w t), t uniform in [-1, 1]; the best grid
// point is refined by golden section on its two neighbours.
ScanResult scan_semi_sinusoidal(const ChainConfig& chain, const BirkhoffForm& form, const StackMap& torus_map,
                                double A_center, double rel_width = 0.5, int npts = 21);

// |R| at the point of the torus with q = q0, mapped through original coordinates.
double remainder_on_torus(const BirkhoffForm& form, const StackMap& torus_map, double q0 = 0.0);

struct MonodromyAngles {
  std::vector<double> theta;                        // in (-pi, pi], one per transverse pair
  std::vector<std::complex<double>> eigenvalues;    // e^{+-i theta_j}, then the unit pair
};

// theta_j = 2 pi Omega_j / omega_1 reduced to (-pi, pi].
MonodromyAngles monodromy_angles(double omega1, const Eigen::VectorXd& Omega);

struct NumericMonodromy {
  Eigen::MatrixXd M;  // on (X; Y) over one period 2 pi / omega1
  std::vector<std::complex<double>> eigenvalues;
  std::vector<double> theta;     // arguments in [0, pi] of the conjugate pairs, unit pair excluded
  double max_modulus_defect = 0.0;  // max ||lambda| - 1|
};

NumericMonodromy numeric_monodromy(const ChainConfig& chain, const ModeState& ic, double omega1,
                                   const IntegratorConfig& icfg);

// Omega_j / omega_1 from angles in [0, pi]: the branch n +- theta/2pi closest to prev[j].
std::vector<double> unwrap_ratios(const std::vector<double>& theta, const std::vector<double>& prev);

}  // namespace eltori
