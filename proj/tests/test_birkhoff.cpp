#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eltori/birkhoff.hpp"
#include "support.hpp"

using namespace eltori;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(v.size());
  int i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

TrigSeries total(const BirkhoffForm& f) {
  TrigSeries t = constant(f.dims, f.caps, f.energy);
  for (const TrigSeries& b : f.by_degree) t += b;
  return t;
}

bool angle_free(const TrigSeries& f) {
  return f.empty() || l1_norm(f - average_over_transverse(average_over_angles(f))) <= 1e-14 * l1_norm(f);
}

// Hand-built order-0 form on one action and one transverse pair.
BirkhoffForm toy_form(const TrigSeries& f3) {
  const Dims d{1, 1};
  const Caps c{6, 8};
  GradedHamiltonian H(d, c, 2);
  H.omega = vec({1.0});
  H.Omega = vec({std::numbers::sqrt2});
  H.add_graded(f3);
  return birkhoff_init(H, c);
}

struct Torus {
  ChainConfig chain;
  RunResult run;
};

Torus beta_torus(double I) {
  Torus t{ChainConfig{4, 0.0, 0.25}, {}};
  TorusSeed seed{1, vec({I})};
  NormalizerConfig nc = NormalizerConfig::for_chain(4);
  t.run = run(assemble_H0(t.chain, seed, nc.caps, nc.K), seed, nc);
  return t;
}

}  // namespace

TEST_CASE("angle-free terms go straight into Z") {
  // p (xi^2 + eta^2) / 2 has degree 4 and is already in normal form
  TrigSeries f(Dims{1, 1}, Caps{6, 8});
  f.add_term(Monomial{{1}, {2}, {0}, {0}, Parity::Cos}, 0.5);
  f.add_term(Monomial{{1}, {0}, {2}, {0}, Parity::Cos}, 0.5);
  BirkhoffForm form = toy_form(f);
  birkhoff_step(form, 1e-8);
  birkhoff_step(form, 1e-8);
  CHECK(form.chi[0].empty());
  CHECK(form.chi[1].empty());
  CHECK(form.Z(1).empty());
  CHECK(to_string(form.Z(2)) == to_string(f));
}

TEST_CASE("a Birkhoff step solves its homological equation") {
  const Dims d{1, 1};
  const Caps c{6, 8};
  TrigSeries f(d, c);
  f.add_term(Monomial{{1}, {1}, {0}, {1}, Parity::Cos}, 0.7);   // p xi cos q
  f.add_term(Monomial{{0}, {2}, {1}, {2}, Parity::Sin}, -0.3);  // xi^2 eta sin 2q
  f.add_term(Monomial{{1}, {1}, {0}, {0}, Parity::Cos}, 0.2);   // p xi
  BirkhoffForm form = toy_form(f);
  birkhoff_step(form, 1e-8);
  REQUIRE(!form.chi[0].empty());
  CHECK(form.residuals[0] < 1e-14);
  CHECK(form.Z(1).empty());  // odd transverse degree has no rotation average
  // {h, chi} + f = Z by central differences of chi
  std::mt19937_64 rng(3);
  const TrigSeries& chi = form.chi[0];
  for (int t = 0; t < 10; ++t) {
    PhasePoint z = testing::random_point(rng, d, 0.6);
    const double e = 1e-5;
    auto diff = [&](auto bump) {
      PhasePoint a = z, b = z;
      bump(a, e);
      bump(b, -e);
      return (evaluate(chi, a) - evaluate(chi, b)) / (2 * e);
    };
    double v = evaluate(f, z) - evaluate(form.Z(1), z);
    v -= 1.0 * diff([](PhasePoint& w, double h) { w.q[0] += h; });
    v += std::numbers::sqrt2 * z.eta[0] * diff([](PhasePoint& w, double h) { w.xi[0] += h; });
    v -= std::numbers::sqrt2 * z.xi[0] * diff([](PhasePoint& w, double h) { w.eta[0] += h; });
    CHECK(std::abs(v) < 1e-8);
  }
}

TEST_CASE("resonant Birkhoff term is rejected") {
  TrigSeries f(Dims{1, 1}, Caps{6, 8});
  // p xi cos q has divisors omega +- Omega; omega = Omega makes one vanish
  f.add_term(Monomial{{1}, {1}, {0}, {1}, Parity::Cos}, 1.0);
  BirkhoffForm form = toy_form(f);
  form.omega[0] = form.Omega[0];
  form.by_degree[2] = TrigSeries(form.dims, form.caps);
  CHECK_THROWS_AS(birkhoff_step(form, 1e-8), SmallDivisor);
}

TEST_CASE("harmonic chain: Birkhoff form is exact at order zero") {
  ChainConfig chain{4, 0, 0};
  TorusSeed seed{1, vec({0.1})};
  NormalizerConfig nc;
  nc.rbar = 2;
  RunResult r = run(assemble_H0(chain, seed, nc.caps, nc.K), seed, nc);
  BirkhoffForm form = run_birkhoff(r.H, BirkhoffConfig{});
  CHECK(form.remainder().empty());
  std::mt19937_64 rng(1);
  CHECK(remainder_value_at(form, testing::random_point(rng, form.dims, 0.5)) == 0.0);
  for (const TrigSeries& chi : form.chi) CHECK(chi.empty());
}

TEST_CASE("beta chain torus: Birkhoff form invariants") {
  Torus t = beta_torus(1e-2);
  REQUIRE(t.run.converged);
  BirkhoffForm form = birkhoff_init(t.run.H, Caps{8, 24});
  CHECK(form.dropped_norm < 1e-10);
  std::vector<TrigSeries> totals{total(form)};
  for (int s = 1; s <= 5; ++s) {
    birkhoff_step(form, 1e-8);
    CHECK(form.residuals.back() < 1e-12);
    totals.push_back(total(form));
  }
  for (int s = 0; s <= 5; ++s) CHECK(angle_free(form.Z(s)));
  // parity of the quartic chain: only even degrees
  for (int d = 3; d <= 8; d += 2) CHECK(form.by_degree[d].empty());
  CHECK(!form.remainder().empty());

  std::mt19937_64 rng(11);
  SUBCASE("canonical invariance under each generator's flow") {
    for (int k = 0; k < 5; ++k) {
      PhasePoint z = testing::random_point(rng, form.dims, 0.02);
      for (int s = 1; s <= 5; ++s) {
        if (form.chi[s - 1].empty()) continue;
        const double a = evaluate(totals[s], z);
        const double b = evaluate(totals[s - 1], testing::hamiltonian_flow(form.chi[s - 1], z, 1.0, 200));
        CHECK(std::abs(a - b) < 1e-6 * std::abs(b));
      }
    }
  }
  SUBCASE("remainder scales with the eighth power of the amplitude") {
    PhasePoint z = testing::random_point(rng, form.dims, 1.0);
    auto at = [&](double lam) {
      PhasePoint w = z;
      w.p *= lam * lam;
      w.xi *= lam;
      w.eta *= lam;
      return remainder_value_at(form, w);
    };
    const double slope = std::log(at(2e-3) / at(1e-3)) / std::log(2.0);
    CHECK(std::abs(slope - 8.0) < 0.3);
    CHECK(remainder_value_at(form, PhasePoint::zero(form.dims)) == 0.0);
  }
  SUBCASE("maps round trip and the torus point has the smallest remainder") {
    BirkhoffMap bm(form);
    PhasePoint z = testing::random_point(rng, form.dims, 1e-2);
    PhasePoint back = bm.to_torus(bm.to_birkhoff(z));
    // both directions are truncated series, so the round trip is not exact
    CHECK((back.p - z.p).norm() < 1e-10);
    CHECK((back.xi - z.xi).norm() < 1e-10);
    CHECK((back.eta - z.eta).norm() < 1e-10);
    StackMap sm(t.run.stack);
    const double Ac = semi_sinusoidal_amplitude(t.chain, total_energy(t.chain, map_to_original(sm, PhasePoint::zero(form.dims))));
    ScanResult scan = scan_semi_sinusoidal(t.chain, form, sm, Ac);
    CHECK(scan.grid.size() == 21);
    for (const ScanPoint& p : scan.grid) CHECK(scan.best.remainder <= p.remainder);
    CHECK(remainder_on_torus(form, sm) < 1e-2 * scan.best.remainder);
  }
}

TEST_CASE("remainder shrinks with the Birkhoff order near the torus") {
  Torus t = beta_torus(1e-2);
  REQUIRE(t.run.converged);
  PhasePoint z = PhasePoint::zero(t.run.H.dims);
  z.p[0] = 1e-4;
  z.q[0] = 0.4;
  z.xi[0] = 3e-3;
  z.eta[1] = -2e-3;
  double prev = INFINITY;
  for (int order : {1, 3, 5}) {
    BirkhoffConfig bc;
    bc.order = order;
    const double v = remainder_value_at(run_birkhoff(t.run.H, bc), z);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("monodromy angles from frequencies") {
  MonodromyAngles m = monodromy_angles(1.0, vec({0.5, 0.25}));
  REQUIRE(m.theta.size() == 2);
  CHECK(m.theta[0] == doctest::Approx(std::numbers::pi));
  CHECK(m.theta[1] == doctest::Approx(std::numbers::pi / 2));
  REQUIRE(m.eigenvalues.size() == 6);
  for (auto l : m.eigenvalues) CHECK(std::abs(std::abs(l) - 1.0) < 1e-15);
  CHECK(m.eigenvalues[4] == std::complex<double>(1.0));
  CHECK(monodromy_angles(1.0, vec({2.25})).theta[0] == doctest::Approx(std::numbers::pi / 2));
  CHECK_THROWS(monodromy_angles(0.0, vec({1.0})));
}

TEST_CASE("harmonic chain monodromy matches the frequency formula") {
  ChainConfig chain{4, 0, 0};
  Eigen::VectorXd nu = mode_frequencies(chain);
  ModeState ic{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  ic.X[0] = 0.1;
  IntegratorConfig icfg;
  icfg.h = 0.01;
  NumericMonodromy nm = numeric_monodromy(chain, ic, nu[0], icfg);
  CHECK(nm.max_modulus_defect < 1e-10);
  MonodromyAngles f = monodromy_angles(nu[0], nu.tail(2));
  std::vector<double> expect{std::abs(f.theta[0]), std::abs(f.theta[1])};
  std::sort(expect.begin(), expect.end());
  REQUIRE(nm.theta.size() == 2);
  CHECK(nm.theta[0] == doctest::Approx(expect[0]).epsilon(1e-8));
  CHECK(nm.theta[1] == doctest::Approx(expect[1]).epsilon(1e-8));
  std::vector<double> ratios = unwrap_ratios(nm.theta, {nu[1] / nu[0], nu[2] / nu[0]});
  CHECK(ratios[0] == doctest::Approx(nu[1] / nu[0]).epsilon(1e-8));
  CHECK(ratios[1] == doctest::Approx(nu[2] / nu[0]).epsilon(1e-8));
}
