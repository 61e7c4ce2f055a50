#pragma once

#include <random>
#include <vector>

#include "eltori/series.hpp"

namespace eltori::testing {

// Small integer coefficients keep brackets of random series exact in binary.
inline TrigSeries random_series(std::mt19937_64& rng, Dims d, int nterms, int max_exp, int max_k,
                                Caps caps = Caps{64, 64}) {
  std::uniform_int_distribution<int> e(0, max_exp), k(-max_k, max_k), c(-8, 8), par(0, 1);
  TrigSeries s(d, caps);
  for (int t = 0; t < nterms; ++t) {
    Monomial mo;
    for (int j = 0; j < d.n1; ++j) {
      mo.m.push_back(e(rng));
      mo.k.push_back(k(rng));
    }
    for (int j = 0; j < d.n2; ++j) {
      mo.l.push_back(e(rng));
      mo.lbar.push_back(e(rng));
    }
    mo.parity = par(rng) ? Parity::Sin : Parity::Cos;
    s.add_term(mo, c(rng));
  }
  return s;
}

inline PhasePoint random_point(std::mt19937_64& rng, Dims d, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PhasePoint z = PhasePoint::zero(d);
  for (int j = 0; j < d.n1; ++j) {
    z.p[j] = scale * u(rng);
    z.q[j] = 3.14159 * u(rng);
  }
  for (int j = 0; j < d.n2; ++j) {
    z.xi[j] = scale * u(rng);
    z.eta[j] = scale * u(rng);
  }
  return z;
}

// Time-1 Hamiltonian flow of chi: q' = chi_p, p' = -chi_q, eta' = chi_xi, xi' = -chi_eta.
// Classical RK4 on a fine grid; independent of the Lie-series machinery.
inline PhasePoint hamiltonian_flow(const TrigSeries& chi, PhasePoint z, double time = 1.0, int steps = 2000) {
  const Dims d = chi.dims();
  std::vector<TrigSeries> dp, dq, dxi, deta;
  for (int j = 0; j < d.n1; ++j) {
    dp.push_back(derivative(chi, VarKind::P, j));
    dq.push_back(derivative(chi, VarKind::Q, j));
  }
  for (int j = 0; j < d.n2; ++j) {
    dxi.push_back(derivative(chi, VarKind::Xi, j));
    deta.push_back(derivative(chi, VarKind::Eta, j));
  }
  auto rhs = [&](const PhasePoint& x) {
    PhasePoint r = PhasePoint::zero(d);
    for (int j = 0; j < d.n1; ++j) {
      r.q[j] = evaluate(dp[j], x);
      r.p[j] = -evaluate(dq[j], x);
    }
    for (int j = 0; j < d.n2; ++j) {
      r.eta[j] = evaluate(dxi[j], x);
      r.xi[j] = -evaluate(deta[j], x);
    }
    return r;
  };
  auto axpy = [](const PhasePoint& x, double a, const PhasePoint& y) {
    return PhasePoint{x.p + a * y.p, x.q + a * y.q, x.xi + a * y.xi, x.eta + a * y.eta};
  };
  const double h = time / steps;
  for (int s = 0; s < steps; ++s) {
    PhasePoint k1 = rhs(z);
    PhasePoint k2 = rhs(axpy(z, h / 2, k1));
    PhasePoint k3 = rhs(axpy(z, h / 2, k2));
    PhasePoint k4 = rhs(axpy(z, h, k3));
    z = axpy(z, h / 6, k1);
    z = axpy(z, h / 3, k2);
    z = axpy(z, h / 3, k3);
    z = axpy(z, h / 6, k4);
  }
  return z;
}

}  // namespace eltori::testing
