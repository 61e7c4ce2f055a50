#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "eltori/series.hpp"

namespace eltori {

// Chain of N+1 particles with fixed ends x_0 = x_N = 0.
struct ChainConfig {
  int N = 4;
  double alpha = 0.0;
  double beta = 0.0;
};

// Interior particles 1..N-1.
struct CartesianState {
  Eigen::VectorXd y, x;
};

// Normal-mode coordinates; X is the coordinate, Y the momentum.
struct ModeState {
  Eigen::VectorXd Y, X;
};

struct TorusSeed {
  int n1 = 1;
  Eigen::VectorXd Istar;
};

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Blocks f_{l}^{(s)} indexed by total sqrt-action degree l and trig block s;
// the normal part omega.p + sum Omega (xi^2+eta^2)/2 + energy is kept apart.
struct GradedHamiltonian {
  Dims dims;
  Caps caps;
  int K = 2;
  Eigen::VectorXd omega, Omega;
  double energy = 0.0;
  std::vector<std::vector<TrigSeries>> blocks;  // [l][s], l <= caps.max_degree, s <= max_s()

  GradedHamiltonian() = default;
  GradedHamiltonian(Dims d, Caps c, int K);

  int max_degree() const { return caps.max_degree; }
  int max_s() const { return caps.max_trig / K; }
  const TrigSeries& block(int l, int s) const { return blocks[l][s]; }
  TrigSeries& block(int l, int s) { return blocks[l][s]; }
  // Routes each term of f by its own class; terms beyond the caps are dropped.
  void add_graded(const TrigSeries& f);
  TrigSeries normal_part() const;
  TrigSeries perturbation() const;
  TrigSeries total() const;
  double perturbation_norm() const;
};

Eigen::VectorXd mode_frequencies(const ChainConfig& cfg);
// S(l-1, j-1) = sqrt(2/N) sin(j l pi / N), symmetric and orthogonal.
Eigen::MatrixXd sine_basis(int N);

ModeState modes_forward(const ChainConfig& cfg, const CartesianState& s);
CartesianState modes_backward(const ChainConfig& cfg, const ModeState& m);

// sum_l prod_i cos(j_i (2l+1) pi / 2N), by integer selection rules.
double cosine_product_sum(int N, const std::vector<int>& j);

// Polynomial in (X, Y) stored with dims (0, N-1): xi_j = Y_j, eta_j = X_j.
TrigSeries hamiltonian_in_modes(const ChainConfig& cfg);
TrigSeries anharmonic_in_modes(const ChainConfig& cfg);

double total_energy(const ChainConfig& cfg, const CartesianState& s);
double total_energy(const ChainConfig& cfg, const ModeState& m);
inline double specific_energy(const ChainConfig& cfg, double E) { return E / cfg.N; }

CartesianState semi_sinusoidal_ic(const ChainConfig& cfg, double A);
// Amplitude whose harmonic energy nu_1 A^2 / 2 equals E.
double semi_sinusoidal_amplitude(const ChainConfig& cfg, double E);

GradedHamiltonian assemble_H0(const ChainConfig& cfg, const TorusSeed& seed, Caps caps, int K = 2);

// (p, q, xi, eta) <-> modes: X_j = sqrt(2 I_j) sin q_j, Y_j = sqrt(2 I_j) cos q_j,
// I = I* + p for j < n1; xi_j = Y_{n1+j}, eta_j = X_{n1+j}.
ModeState from_torus_coordinates(const TorusSeed& seed, const PhasePoint& z);
PhasePoint to_torus_coordinates(const TorusSeed& seed, const ModeState& m);

}  // namespace eltori
