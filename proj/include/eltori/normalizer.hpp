#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eltori/fpu_model.hpp"
#include "eltori/series.hpp"

namespace eltori {

class SmallDivisor : public std::runtime_error {
 public:
  SmallDivisor(const std::string& what, double value) : std::runtime_error(what), value_(value) {}
  double value() const { return value_; }

 private:
  double value_;
};

class EllipticityLost : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateFrequencies : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NormalizerConfig {
  int K = 2;
  int rbar = 12;
  Caps caps{8, 24};  // caps.max_trig = rbar * K
  double divisor_floor = 1e-8;
  double ruleA_base = 0.95;
  double ruleB_ratio = 1e-3;
  double prune_rel = 1e-16;

  static NormalizerConfig for_chain(int N);
};

// {h, chi} for h = omega.p + sum_j Omega_j (xi_j^2 + eta_j^2) / 2.
TrigSeries homological_operator(const TrigSeries& chi, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega);

struct HomologicalSolution {
  TrigSeries chi;
  double min_divisor = std::numeric_limits<double>::infinity();
  double residual = 0.0;  // max |coeff| of {h, chi} + f, relative to ||f||
};

// Solves {h, chi} + f = 0 group by group over (xi, eta)-monomials x {cos, sin}.
// f must have no component in the kernel (angle-free, rotation-invariant terms).
HomologicalSolution solve_homological(const TrigSeries& f, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega,
                                      double divisor_floor);

struct Chi0Solution {
  HomologicalSolution sol;
  double energy_increment = 0.0;
};

Chi0Solution solve_chi0(const GradedHamiltonian& H, int r, double divisor_floor);
HomologicalSolution solve_chi1(const GradedHamiltonian& H, int r, double divisor_floor);
HomologicalSolution solve_X2(const GradedHamiltonian& H, int r, double divisor_floor);
HomologicalSolution solve_Y2(const GradedHamiltonian& H, int r, double divisor_floor);

// Pushes H through exp(L_chi) routing L^i of block (l, s) to (l - i*drop, s + i*r).
// Lh is L_chi applied to the normal part; it lands in block (2 - drop, r).
GradedHamiltonian apply_generator(const GradedHamiltonian& H, const TrigSeries& chi, int drop, int r,
                                  const TrigSeries& Lh, double prune_rel = 1e-16);
GradedHamiltonian apply_stage1(const GradedHamiltonian& H, const Chi0Solution& chi0, int r, double prune_rel = 1e-16);

struct Diagonalization {
  Eigen::MatrixXd M;  // (eta, xi) = M (eta', xi'), symplectic
  Eigen::VectorXd Omega;
};

// Quadratic form sum Omega_prev (xi^2+eta^2)/2 + quad brought to diagonal form.
Diagonalization diagonalize(const TrigSeries& quad, const Eigen::VectorXd& Omega_prev, double divisor_floor);
Eigen::MatrixXd symplectic_J(int n);

struct StepNorms {
  double chi0 = 0, chi1 = 0, X2 = 0, Y2 = 0, D = 0;
};

struct StepReport {
  int r = 0;
  StepNorms norms;
  Eigen::VectorXd omega, Omega;
  double energy = 0.0;
  double min_divisor = std::numeric_limits<double>::infinity();
  double max_residual = 0.0;  // worst homological residual of the step
};

struct StepTransform {
  int r = 0;
  TrigSeries chi0, chi1, X2, Y2;
  Eigen::MatrixXd D;
};

struct TransformStack {
  TorusSeed seed;
  Dims dims;
  Caps caps;
  std::vector<StepTransform> steps;
};

struct StepResult {
  GradedHamiltonian H;
  StepReport report;
  StepTransform transform;
};

StepResult normalization_step(const GradedHamiltonian& H, const NormalizerConfig& cfg, int r);

struct RunResult {
  GradedHamiltonian H;
  std::vector<StepReport> reports;
  TransformStack stack;
  bool converged = false;
  std::string reason;
};

// Rules on ||X2^(r)||: (A) ratio to ||X2^(1)||+||X2^(2)|| below base^(r-1) for r > 2,
// (B) ||X2^(rbar)|| / ||X2^(1)|| below ruleB_ratio.
bool convergence_rules(const std::vector<double>& x2_norms, const NormalizerConfig& cfg, std::string* reason = nullptr);

RunResult run(const GradedHamiltonian& H0, const TorusSeed& seed, const NormalizerConfig& cfg);

// Numeric coordinate change of one generator: z -> exp(L_chi) z.
class LieMap {
 public:
  LieMap() = default;
  LieMap(const TrigSeries& chi, Caps caps, double tol = 1e-17);
  PhasePoint operator()(const PhasePoint& z) const;
  bool identity() const { return shifts_.empty(); }

 private:
  Dims dims_;
  std::vector<TrigSeries> shifts_;  // order p, q, xi, eta
};

// Composed maps between final normalized coordinates and torus coordinates of H0.
class StackMap {
 public:
  explicit StackMap(const TransformStack& stack, double tol = 1e-17);
  // step_map(r) realizes H^(r)(z) = H^(r-1)(step_map(r)(z)).
  PhasePoint step_to_previous(int step_index, const PhasePoint& z) const;
  PhasePoint step_to_next(int step_index, const PhasePoint& z) const;
  PhasePoint to_original(const PhasePoint& z) const;
  PhasePoint from_original(const PhasePoint& z) const;
  const TransformStack& stack() const { return stack_; }

 private:
  struct Step {
    LieMap chi0, chi1, X2, Y2, chi0_inv, chi1_inv, X2_inv, Y2_inv;
    Eigen::MatrixXd D, D_inv;
  };
  TransformStack stack_;
  std::vector<Step> steps_;
};

PhasePoint apply_linear(const Eigen::MatrixXd& M, const PhasePoint& z);

ModeState map_to_original(const StackMap& map, const PhasePoint& z);
ModeState map_to_original(const TransformStack& stack, const PhasePoint& z);
PhasePoint map_from_original(const StackMap& map, const ModeState& m);

void write_stack(std::ostream& os, const TransformStack& stack);
TransformStack read_stack(std::istream& is);

}  // namespace eltori
