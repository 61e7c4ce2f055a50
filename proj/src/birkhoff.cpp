#include "eltori/birkhoff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eltori {

namespace {

TrigSeries normal_h(Dims d, Caps c, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega) {
  TrigSeries h(d, c);
  for (int j = 0; j < d.n1; ++j) h += action(d, c, j, omega[j]);
  for (int j = 0; j < d.n2; ++j) {
    TrigSeries x = xi_var(d, c, j), e = eta_var(d, c, j);
    h += (0.5 * Omega[j]) * (mul(x, x, c) + mul(e, e, c));
  }
  return h;
}

double reduce_angle(double t) {
  t = std::remainder(t, 2 * std::numbers::pi);  // [-pi, pi]
  if (t <= -std::numbers::pi) t += 2 * std::numbers::pi;
  return t;
}

}  // namespace

BirkhoffConfig BirkhoffConfig::for_chain(int N) {
  BirkhoffConfig c;
  if (N >= 8) {
    c.order = 1;
    c.caps = Caps{4, 16};
  }
  return c;
}

TrigSeries BirkhoffForm::remainder() const {
  TrigSeries r(dims, caps);
  for (int d = order + 3; d < static_cast<int>(by_degree.size()); ++d) r += by_degree[d];
  return r;
}

BirkhoffForm birkhoff_init(const GradedHamiltonian& H, Caps caps) {
  BirkhoffForm f;
  f.dims = H.dims;
  f.caps = caps;
  f.omega = H.omega;
  f.Omega = H.Omega;
  f.energy = H.energy;
  f.by_degree.assign(caps.max_degree + 1, TrigSeries(H.dims, caps));
  const TrigSeries P = H.perturbation();
  const KeyView kv = P.view();
  std::vector<std::vector<Term>> buckets(caps.max_degree + 1);
  for (const Term& t : P.terms()) {
    const int d = kv.degree(t.key);
    if (kv.trig(t.key) > caps.max_trig || d > caps.max_degree) continue;
    if (d == 0 && kv.trig(t.key) == 0) {
      f.energy += t.c;
      continue;
    }
    // what the torus construction left below degree 3 is not part of the expansion
    if (d <= 2) {
      f.dropped_norm += std::abs(t.c);
      continue;
    }
    buckets[d].push_back(t);
  }
  for (int d = 3; d <= caps.max_degree; ++d) f.by_degree[d] = TrigSeries::from_terms(H.dims, caps, std::move(buckets[d]));
  if (caps.max_degree >= 2) f.by_degree[2] = normal_h(H.dims, caps, H.omega, H.Omega);
  return f;
}

void birkhoff_step(BirkhoffForm& form, double divisor_floor, double prune_rel) {
  const int r = form.order + 1;
  const int D = form.caps.max_degree;
  if (r + 2 > D) throw std::invalid_argument("birkhoff_step: order exceeds the degree cap");
  const TrigSeries& f = form.by_degree[r + 2];
  const TrigSeries Z = average_over_transverse(average_over_angles(f));
  HomologicalSolution sol = solve_homological(prune(f - Z), form.omega, form.Omega, divisor_floor);
  form.residuals.push_back(sol.residual);
  form.min_divisors.push_back(sol.min_divisor);
  const TrigSeries& chi = sol.chi;
  std::vector<TrigSeries> out = form.by_degree;
  std::vector<bool> touched(D + 1, false);
  if (!chi.empty()) {
    // L_chi raises the degree by r
    for (int d = 3; d <= D; ++d) {
      TrigSeries t = form.by_degree[d];
      for (int i = 1; !t.empty() && d + i * r <= D; ++i) {
        t = poisson(t, chi, form.caps);
        t *= 1.0 / i;
        out[d + i * r] += t;
        touched[d + i * r] = true;
      }
    }
    // {h, chi} = Z - f exactly; higher brackets of h start from it
    TrigSeries t = Z - f;
    for (int i = 2; !t.empty() && 2 + i * r <= D; ++i) {
      t = poisson(t, chi, form.caps);
      t *= 1.0 / i;
      out[2 + i * r] += t;
      touched[2 + i * r] = true;
    }
  }
  out[r + 2] = Z;
  for (int d = 0; d <= D; ++d)
    if (touched[d] && d != r + 2) out[d] = prune(out[d], prune_rel * l1_norm(out[d]));
  form.by_degree = std::move(out);
  form.chi.push_back(chi);
  form.order = r;
}

BirkhoffForm run_birkhoff(const GradedHamiltonian& H, const BirkhoffConfig& cfg) {
  BirkhoffForm f = birkhoff_init(H, cfg.caps);
  for (int s = 1; s <= cfg.order; ++s) birkhoff_step(f, cfg.divisor_floor, cfg.prune_rel);
  return f;
}

double remainder_value_at(const BirkhoffForm& form, const PhasePoint& z) {
  long double v = 0;
  for (int d = form.order + 3; d < static_cast<int>(form.by_degree.size()); ++d) v += evaluate(form.by_degree[d], z);
  return static_cast<double>(std::abs(v));
}

BirkhoffMap::BirkhoffMap(const BirkhoffForm& form, double tol)
    : chi_(form.chi), caps_{form.caps.max_degree + 2, form.caps.max_trig}, tol_(tol) {}

const std::vector<LieMap>& BirkhoffMap::maps(bool inverse) const {
  std::call_once(inverse ? inv_once_ : fwd_once_, [&] {
    std::vector<LieMap>& v = inverse ? inv_ : fwd_;
    for (const TrigSeries& chi : chi_) v.emplace_back(inverse ? -1.0 * chi : chi, caps_, tol_);
  });
  return inverse ? inv_ : fwd_;
}

// H^(r)(z) = H^(0)(phi_1(...phi_r(z)))
PhasePoint BirkhoffMap::to_torus(const PhasePoint& z) const {
  const std::vector<LieMap>& f = maps(false);
  PhasePoint w = z;
  for (int i = static_cast<int>(f.size()) - 1; i >= 0; --i) w = f[i](w);
  return w;
}

PhasePoint BirkhoffMap::to_birkhoff(const PhasePoint& z) const {
  PhasePoint w = z;
  for (const LieMap& m : maps(true)) w = m(w);
  return w;
}

ScanResult scan_semi_sinusoidal(const ChainConfig& chain, const BirkhoffForm& form, const StackMap& torus_map,
                                double A_center, double rel_width, int npts) {
  if (npts < 3 || !(A_center > 0) || !(rel_width > 0) || rel_width >= 1)
    throw std::invalid_argument("scan_semi_sinusoidal: bad grid");
  const BirkhoffMap bmap(form);
  auto eval = [&](double A) {
    ModeState m = modes_forward(chain, semi_sinusoidal_ic(chain, A));
    PhasePoint z = bmap.to_birkhoff(map_from_original(torus_map, m));
    ScanPoint p{A, specific_energy(chain, total_energy(chain, m)), remainder_value_at(form, z)};
    return p;
  };
  ScanResult out;
  for (int i = 0; i < npts; ++i) out.grid.push_back(eval(A_center * (1.0 + rel_width * (2.0 * i / (npts - 1) - 1.0))));
  int b = 0;
  for (int i = 1; i < npts; ++i)
    if (out.grid[i].remainder < out.grid[b].remainder) b = i;
  out.best = out.grid[b];
  if (b == 0 || b == npts - 1) return out;
  // golden section on [A_{b-1}, A_{b+1}]
  const double g = (std::sqrt(5.0) - 1) / 2;
  double lo = out.grid[b - 1].A, hi = out.grid[b + 1].A;
  ScanPoint x1 = eval(hi - g * (hi - lo)), x2 = eval(lo + g * (hi - lo));
  for (int it = 0; it < 60 && hi - lo > 1e-14 * A_center; ++it) {
    if (x1.remainder < x2.remainder) {
      hi = x2.A;
      x2 = x1;
      x1 = eval(hi - g * (hi - lo));
    } else {
      lo = x1.A;
      x1 = x2;
      x2 = eval(lo + g * (hi - lo));
    }
  }
  for (const ScanPoint& p : {x1, x2})
    if (p.remainder < out.best.remainder) out.best = p;
  return out;
}

double remainder_on_torus(const BirkhoffForm& form, const StackMap& torus_map, double q0) {
  PhasePoint z = PhasePoint::zero(form.dims);
  z.q[0] = q0;
  ModeState m = map_to_original(torus_map, z);
  return remainder_value_at(form, BirkhoffMap(form).to_birkhoff(map_from_original(torus_map, m)));
}

MonodromyAngles monodromy_angles(double omega1, const Eigen::VectorXd& Omega) {
  if (omega1 == 0.0) throw std::invalid_argument("monodromy_angles: zero frequency");
  MonodromyAngles out;
  for (int j = 0; j < Omega.size(); ++j) {
    const double t = reduce_angle(2 * std::numbers::pi * Omega[j] / omega1);
    out.theta.push_back(t);
    out.eigenvalues.push_back(std::polar(1.0, t));
    out.eigenvalues.push_back(std::polar(1.0, -t));
  }
  out.eigenvalues.push_back(1.0);
  out.eigenvalues.push_back(1.0);
  return out;
}

NumericMonodromy numeric_monodromy(const ChainConfig& chain, const ModeState& ic, double omega1,
                                   const IntegratorConfig& icfg) {
  if (omega1 == 0.0) throw std::invalid_argument("numeric_monodromy: zero frequency");
  NumericMonodromy out;
  out.M = evolve_tangent(chain, icfg, ic, 2 * std::numbers::pi / std::abs(omega1)).M;
  Eigen::EigenSolver<Eigen::MatrixXd> es(out.M, false);
  std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  for (const auto& l : ev) out.max_modulus_defect = std::max(out.max_modulus_defect, std::abs(std::abs(l) - 1.0));
  // the pair closest to 1 belongs to the flow direction and the energy
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a - 1.0) < std::abs(b - 1.0); });
  out.eigenvalues = ev;
  for (std::size_t i = 2; i < ev.size(); ++i)
    if (ev[i].imag() >= 0) out.theta.push_back(std::abs(std::arg(ev[i])));
  // a real pair contributes one angle per member; keep one per pair
  if (out.theta.size() > (ev.size() - 2) / 2) out.theta.resize((ev.size() - 2) / 2);
  std::sort(out.theta.begin(), out.theta.end());
  return out;
}

std::vector<double> unwrap_ratios(const std::vector<double>& theta, const std::vector<double>& prev) {
  std::vector<double> out(prev.size(), NAN);
  std::vector<bool> used(theta.size(), false);
  for (std::size_t j = 0; j < prev.size(); ++j) {
    double best = INFINITY;
    int bi = -1;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (used[i]) continue;
      const double f = theta[i] / (2 * std::numbers::pi);
      const double n = std::round(prev[j]);
      for (double base : {n - 1, n, n + 1})
        for (double cand : {base + f, base - f})
          if (std::abs(cand - prev[j]) < best) {
            best = std::abs(cand - prev[j]);
            out[j] = cand;
            bi = static_cast<int>(i);
          }
    }
    if (bi >= 0) used[bi] = true;
  }
  return out;
}

}  // namespace eltori
