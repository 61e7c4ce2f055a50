#include <doctest.h>

#include <cmath>
#include <random>

#include "eltori/fpu_model.hpp"
#include "support.hpp"

using namespace eltori;

namespace {

ModeState random_modes(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ModeState m{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int j = 0; j < n; ++j) {
    m.Y[j] = u(rng);
    m.X[j] = u(rng);
  }
  return m;
}

double evaluate_modes(const TrigSeries& h, const ModeState& m) {
  const int n = static_cast<int>(m.X.size());
  PhasePoint z = PhasePoint::zero(Dims{0, n});
  z.xi = m.Y;
  z.eta = m.X;
  return evaluate(h, z);
}

}  // namespace

TEST_CASE("mode frequencies") {
  Eigen::VectorXd nu = mode_frequencies(ChainConfig{4, 0, 0});
  REQUIRE(nu.size() == 3);
  CHECK(nu[0] == doctest::Approx(0.7653668647).epsilon(1e-10));
  CHECK(nu[1] == doctest::Approx(1.4142135624).epsilon(1e-10));
  CHECK(nu[2] == doctest::Approx(1.8477590650).epsilon(1e-10));
  CHECK(mode_frequencies(ChainConfig{2, 0, 0})[0] == doctest::Approx(std::sqrt(2.0)));
  Eigen::VectorXd nu8 = mode_frequencies(ChainConfig{8, 0, 0});
  for (int j = 1; j < nu8.size(); ++j) CHECK(nu8[j] > nu8[j - 1]);
}

TEST_CASE("mode transform round trip and semi-sinusoidal data") {
  ChainConfig cfg{8, 0.25, 0.0};
  std::mt19937_64 rng(1);
  CartesianState s{Eigen::VectorXd::Random(7), Eigen::VectorXd::Random(7)};
  CartesianState b = modes_backward(cfg, modes_forward(cfg, s));
  CHECK((b.x - s.x).norm() < 1e-12 * s.x.norm());
  CHECK((b.y - s.y).norm() < 1e-12 * s.y.norm());

  ModeState z = modes_forward(cfg, CartesianState{Eigen::VectorXd::Zero(7), Eigen::VectorXd::Zero(7)});
  CHECK(z.X.norm() == 0.0);

  ModeState m = modes_forward(cfg, semi_sinusoidal_ic(cfg, 0.3));
  CHECK(m.X[0] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(m.X.tail(6).norm() < 1e-14);
  CHECK(m.Y.norm() == 0.0);

  ChainConfig h4{4, 0, 0};
  CHECK(total_energy(h4, semi_sinusoidal_ic(h4, 1.0)) == doctest::Approx(0.3826834324).epsilon(1e-10));
  CHECK(total_energy(h4, semi_sinusoidal_ic(h4, 0.0)) == 0.0);
  ChainConfig b4{4, 0, 0.25};
  const double A = 1e-3;
  CHECK(std::abs(total_energy(b4, semi_sinusoidal_ic(b4, A)) - 0.5 * mode_frequencies(b4)[0] * A * A) < A * A * A);
}

TEST_CASE("quadratic energy is preserved by the mode transform") {
  ChainConfig cfg{6, 0, 0};
  std::mt19937_64 rng(4);
  Eigen::VectorXd nu = mode_frequencies(cfg);
  for (int t = 0; t < 20; ++t) {
    ModeState m = random_modes(rng, 5, 1.0);
    double quad = 0.5 * (nu.array() * (m.X.array().square() + m.Y.array().square())).sum();
    CHECK(total_energy(cfg, m) == doctest::Approx(quad).epsilon(1e-12));
  }
}

TEST_CASE("cosine product sums obey selection rules") {
  // direct floating summation as the oracle
  for (int N : {4, 5, 8}) {
    for (int a = 1; a < N; ++a)
      for (int b = 1; b < N; ++b)
        for (int c = 1; c < N; ++c) {
          double direct = 0.0;
          for (int l = 0; l < N; ++l)
            direct += std::cos(a * (2 * l + 1) * M_PI / (2 * N)) * std::cos(b * (2 * l + 1) * M_PI / (2 * N)) *
                      std::cos(c * (2 * l + 1) * M_PI / (2 * N));
          CHECK(cosine_product_sum(N, {a, b, c}) == doctest::Approx(direct).epsilon(1e-12).scale(1.0));
        }
  }
}

TEST_CASE("Hamiltonian in modes matches direct evaluation") {
  std::mt19937_64 rng(7);
  for (ChainConfig cfg : {ChainConfig{4, 0.25, 0.0}, ChainConfig{4, 0.0, 0.25}, ChainConfig{8, 0.25, 0.3}}) {
    TrigSeries h = hamiltonian_in_modes(cfg);
    for (int t = 0; t < 10; ++t) {
      ModeState m = random_modes(rng, cfg.N - 1, 0.8);
      CHECK(evaluate_modes(h, m) == doctest::Approx(total_energy(cfg, m)).epsilon(1e-10));
    }
  }
  ChainConfig harm{4, 0, 0};
  CHECK(anharmonic_in_modes(harm).empty());
  TrigSeries beta = anharmonic_in_modes(ChainConfig{4, 0, 0.25});
  for (const Term& t : beta.terms()) CHECK(KeyView{Dims{0, 3}}.degree(t.key) == 4);
}

TEST_CASE("harmonic H0 is exactly the normal part") {
  ChainConfig cfg{4, 0, 0};
  TorusSeed seed{1, Eigen::VectorXd::Constant(1, 0.2)};
  GradedHamiltonian H = assemble_H0(cfg, seed, Caps{8, 24});
  Eigen::VectorXd nu = mode_frequencies(cfg);
  CHECK(H.omega[0] == nu[0]);
  CHECK(H.Omega[0] == nu[1]);
  CHECK(H.Omega[1] == nu[2]);
  CHECK(H.energy == doctest::Approx(nu[0] * 0.2));
  CHECK(H.perturbation().empty());
  CHECK_THROWS_AS(assemble_H0(cfg, TorusSeed{1, Eigen::VectorXd::Constant(1, 0.0)}, Caps{8, 24}), ModelError);
}

TEST_CASE("H0 agrees with the chain energy near the torus") {
  std::mt19937_64 rng(9);
  for (int n1 : {1, 2}) {
    ChainConfig cfg{4, 0.25, 0.25};
    TorusSeed seed{n1, Eigen::VectorXd::Constant(n1, 0.01)};
    GradedHamiltonian H = assemble_H0(cfg, seed, Caps{8, 24});
    TrigSeries total = H.total();
    for (int t = 0; t < 20; ++t) {
      PhasePoint z = testing::random_point(rng, H.dims, 1.0);
      z.p *= 0.1 * 0.01;
      z.xi *= 0.02;
      z.eta *= 0.02;
      double E = total_energy(cfg, from_torus_coordinates(seed, z));
      // binomial tail beyond the degree cap, (p/I*)^4 relative to the coupling
      CHECK(std::abs(evaluate(total, z) - E) < 1e-6 * std::abs(E));
    }
  }
}

TEST_CASE("H0 grading structure") {
  ChainConfig alpha{4, 0.25, 0.0};
  TorusSeed seed{1, Eigen::VectorXd::Constant(1, 0.01)};
  GradedHamiltonian Ha = assemble_H0(alpha, seed, Caps{8, 24});
  KeyView kv{Ha.dims};
  for (int l = 0; l <= Ha.max_degree(); ++l)
    for (int s = 0; s <= Ha.max_s(); ++s) {
      if (l <= 2 && s == 0) CHECK(Ha.block(l, s).empty());
      if (s > 2) CHECK(Ha.block(l, s).empty());
      for (const Term& t : Ha.block(l, s).terms()) {
        CHECK(kv.degree(t.key) == l);
        CHECK(kv.trig(t.key) <= 3);
      }
    }
  // The quartic model never mixes parities: degree and |k| are congruent mod 2.
  ChainConfig beta{4, 0.0, 0.25};
  GradedHamiltonian Hb = assemble_H0(beta, seed, Caps{8, 24});
  const TrigSeries pert = Hb.perturbation();
  for (const Term& t : pert.terms()) CHECK((kv.degree(t.key) + kv.trig(t.key)) % 2 == 0);
}

TEST_CASE("pure torus-mode blocks scale with the original polynomial degree") {
  for (auto [cfg, power] : {std::pair{ChainConfig{4, 0.0, 0.25}, 2.0}, std::pair{ChainConfig{4, 0.25, 0.0}, 1.5}}) {
    GradedHamiltonian H1 = assemble_H0(cfg, TorusSeed{1, Eigen::VectorXd::Constant(1, 0.02)}, Caps{8, 24});
    GradedHamiltonian H2 = assemble_H0(cfg, TorusSeed{1, Eigen::VectorXd::Constant(1, 0.01)}, Caps{8, 24});
    for (int s = 1; s <= 2; ++s) {
      double a = l1_norm(H1.block(0, s)), b = l1_norm(H2.block(0, s));
      if (a == 0.0) continue;
      CHECK(b / a == doctest::Approx(std::pow(2.0, -power)).epsilon(1e-12));
    }
  }
}

TEST_CASE("torus coordinates round trip") {
  TorusSeed seed{2, Eigen::Vector2d(0.3, 0.1)};
  std::mt19937_64 rng(2);
  PhasePoint z = testing::random_point(rng, Dims{2, 1}, 0.05);
  PhasePoint w = to_torus_coordinates(seed, from_torus_coordinates(seed, z));
  CHECK((w.p - z.p).norm() < 1e-14);
  CHECK((w.q - z.q).norm() < 1e-13);
  CHECK((w.xi - z.xi).norm() == 0.0);
  PhasePoint zero = PhasePoint::zero(Dims{1, 2});
  TorusSeed s1{1, Eigen::VectorXd::Constant(1, 0.5)};
  ModeState m = from_torus_coordinates(s1, zero);
  CHECK(m.X[0] == 0.0);
  CHECK(m.Y[0] == doctest::Approx(1.0));
  zero.p[0] = -1.0;
  CHECK_THROWS_AS(from_torus_coordinates(s1, zero), ModelError);
}
