#include <doctest.h>

#include <cmath>
#include <numbers>

#include "eltori/frequency.hpp"

using namespace eltori;

namespace {

struct Tone {
  double A, v, phi;
};

Signal synth(const std::vector<Tone>& tones, double delta, double T, double t0 = 0.0) {
  const std::size_t n = static_cast<std::size_t>(std::llround(T / delta)) + 1;
  Signal s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const long double t = t0 + static_cast<long double>(i) * delta;
    for (const Tone& a : tones) {
      const long double arg = a.v * t + a.phi;
      s[i] += std::complex<double>(static_cast<double>(a.A * std::cos(arg)), static_cast<double>(a.A * std::sin(arg)));
    }
  }
  return s;
}

double phase_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2 * std::numbers::pi);
  return std::min(d, 2 * std::numbers::pi - d);
}

}  // namespace

TEST_CASE("hanning window has the stated shape and unit mean") {
  const double T = 100.0;
  CHECK(hanning(0, T) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(hanning(T, T) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(hanning(T / 2, T) == doctest::Approx(2.0));
  Signal one(2001, 1.0);
  CHECK(std::abs(windowed_transform(one, 0.05, 0.0) - 1.0) < 1e-12);
}

TEST_CASE("tuning of a pure tone") {
  const double delta = 0.5, T = 4096, v0 = 0.7654;
  Signal s = synth({{1.0, v0, 0.0}}, delta, T);
  CHECK(std::abs(tuning(s, delta, v0) - 1.0) < 1e-6);
  // (1/T) int e^{2 pi i t/T} (1 - cos(2 pi t/T)) dt = -1/2: one bin off sits on the main lobe
  CHECK(std::abs(tuning(s, delta, v0 + 2 * std::numbers::pi / T) - 0.5) < 1e-6);
  CHECK(tuning(s, delta, v0 + 4 * std::numbers::pi / T) < 1e-6);
  Signal z(s.size(), 0.0);
  CHECK(tuning(z, delta, v0) == 0.0);
  CHECK_THROWS_AS(dominant_frequency(z, delta), NoPeak);
}

TEST_CASE("pure tone peak at T = 65536") {
  const double delta = 0.5, T = 65536, v0 = 0.7654;
  Signal s = synth({{1.0, v0, 0.3}}, delta, T);
  CHECK(std::abs(dominant_frequency(s, delta) - v0) < 1e-10);
  CHECK(std::abs(find_peak(s, delta, 0.7, 0.8) - v0) < 1e-10);
  CHECK_THROWS_AS(find_peak(s, delta, 0.1, 0.2), NoPeak);
}

TEST_CASE("dominant tone of two well separated tones") {
  const double delta = 0.5, T = 16384;
  Signal s = synth({{0.4, 1.9, 1.0}, {1.0, -0.6, 2.0}}, delta, T);
  CHECK(std::abs(dominant_frequency(s, delta) + 0.6) < 1e-8);
}

TEST_CASE("decompose recovers a single tone") {
  const double delta = 0.5, T = 65536;
  const Tone tone{0.37, 1.2345, 4.0};
  Decomposition d = decompose(synth({tone}, delta, T), delta, FAConfig{});
  REQUIRE(!d.comps.empty());
  CHECK(std::abs(d.comps[0].A - tone.A) < 1e-8);
  CHECK(std::abs(d.comps[0].freq - tone.v) < 1e-10);
  CHECK(phase_gap(d.comps[0].phase, tone.phi) < 1e-8);
  for (const Component& c : d.comps) {
    CHECK(c.phase >= 0.0);
    CHECK(c.phase < 2 * std::numbers::pi);
  }
}

TEST_CASE("decompose of the zero signal is empty") {
  Decomposition d = decompose(Signal(1001, 0.0), 0.5, FAConfig{});
  CHECK(d.comps.empty());
}

TEST_CASE("decompose recovers two tones and the residual shrinks with the component count") {
  const double delta = 0.5, T = 32768;
  std::vector<Tone> tones{{1.0, 0.9, 0.5}, {0.2, 1.31, 5.0}, {0.01, -0.45, 3.0}};
  Signal s = synth(tones, delta, T);
  FAConfig cfg;
  cfg.NC = 2;
  Decomposition d2 = decompose(s, delta, cfg);
  REQUIRE(d2.comps.size() == 2);
  CHECK(std::abs(d2.comps[0].freq - 0.9) < 1e-6);
  CHECK(std::abs(d2.comps[1].freq - 1.31) < 1e-6);
  double prev = INFINITY;
  for (int nc = 1; nc <= 3; ++nc) {
    cfg.NC = nc;
    const double err = reconstruction_error(s, delta, decompose(s, delta, cfg).comps);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-6 * tones[0].A);
  // sorted by amplitude
  Decomposition d3 = decompose(s, delta, cfg);
  for (std::size_t k = 1; k < d3.comps.size(); ++k) CHECK(d3.comps[k - 1].A >= d3.comps[k].A);
}

TEST_CASE("peak error falls roughly as T^-4") {
  // Leakage from the second tone shifts the first peak; the shift oscillates
  // with T, so compare the envelope over a few nearby windows.
  const double delta = 0.25;
  auto envelope = [&](double T) {
    double worst = 0;
    for (int k = 0; k < 8; ++k) {
      const double TT = T * (1.0 + 0.02 * k);
      Signal s = synth({{1.0, 1.0, 0.0}, {0.5, 1.35, 1.0}}, delta, std::round(TT / delta) * delta);
      worst = std::max(worst, std::abs(dominant_frequency(s, delta) - 1.0));
    }
    return worst;
  };
  const double ratio = envelope(512) / envelope(1024);
  CHECK(ratio > 8);
  CHECK(ratio < 32);
}

TEST_CASE("frequency drift between windows is tiny for a quasi-periodic signal") {
  const double delta = 0.5, T = 16384;
  std::vector<Tone> tones{{1.0, 0.8, 0.2}, {0.3, 0.8 * std::numbers::sqrt2, 1.0}, {0.05, 2.1, 0.0}};
  Signal a = synth(tones, delta, T), b = synth(tones, delta, T, T);
  CHECK(std::abs(dominant_frequency(a, delta) - dominant_frequency(b, delta)) < 1e-9);
}

TEST_CASE("nearest integer combination") {
  Eigen::VectorXd om(2);
  om << 1.0, std::numbers::sqrt2;
  std::vector<int> k;
  const double v = 3.0 - 2.0 * std::numbers::sqrt2;
  CHECK(nearest_combination(v, om, 20, &k) < 1e-14);
  CHECK(k == std::vector<int>{3, -2});
  CHECK(nearest_combination(v, om, 4, &k) > 1e-3);
}

TEST_CASE("harmonics past the sampling band are combinations modulo the alias period") {
  // 7 omega lies above pi / delta; the sampled tone shows up at 7 omega - 2 pi / delta
  const double delta = 0.5, omega = 0.907, period = 2 * std::numbers::pi / delta;
  Eigen::VectorXd om = Eigen::VectorXd::Constant(1, omega);
  Signal s = synth({{1.0, omega, 0.0}, {1e-2, 7 * omega, 0.3}}, delta, 4096);
  Decomposition d = decompose(s, delta, FAConfig{2});
  REQUIRE(d.comps.size() == 2);
  const double aliased = d.comps[1].freq;
  CHECK(std::abs(aliased - (7 * omega - period)) < 1e-9);
  CHECK(nearest_combination(aliased, om, 20) > 0.1);
  std::vector<int> k;
  CHECK(nearest_combination(aliased, om, 20, &k, period) < 1e-9);
  CHECK(k == std::vector<int>{7});
}

TEST_CASE("polishing removes the leakage of a close neighbour of equal size") {
  // tones about 94 bins apart at T = 65536, as for a harmonic next to a transverse mode
  const double delta = 0.5, v1 = 1.9561064674, v2 = 1.9650999797;
  Signal s = synth({{1.5e-6, v1, 0.4}, {1.4e-6, v2, 2.1}}, delta, 65536);
  auto err = [&](int polish) {
    FAConfig cfg{2};
    cfg.polish = polish;
    Decomposition d = decompose(s, delta, cfg);
    REQUIRE(d.comps.size() == 2);
    return std::max(std::abs(d.comps[0].freq - v1), std::abs(d.comps[1].freq - v2));
  };
  const double raw = err(0), polished = err(2);
  MESSAGE("unpolished " << raw << ", polished " << polished);
  CHECK(raw > 1e-12);
  CHECK(polished < 1e-13);
}

TEST_CASE("fundamental frequency rules") {
  auto comps = [](std::vector<double> f) {
    Decomposition d;
    double A = 1.0;
    for (double v : f) {
      d.comps.push_back({A, v, 0.0});
      A *= 0.5;
    }
    return d;
  };
  FAConfig cfg;
  SUBCASE("n1 = 1 takes the top component of signal 1") {
    FundamentalSet fs = fundamental_frequencies({comps({0.77, 2.31})}, 1, Eigen::VectorXd(), cfg);
    REQUIRE(fs.omega.size() == 1);
    CHECK(fs.omega[0] == 0.77);
    CHECK(!fs.reduced);
  }
  SUBCASE("a dependent second signal reduces the dimension") {
    FundamentalSet fs = fundamental_frequencies({comps({0.77}), comps({1.54, -0.77, 2.31})}, 2, Eigen::VectorXd(), cfg);
    CHECK(fs.reduced);
    CHECK(fs.omega.size() == 1);
  }
  SUBCASE("the prior selects the integer multiple of the measured frequency") {
    const double nu2 = 1.7, dlt = 1e-3, ups = (nu2 + dlt) / 2;
    Eigen::VectorXd prior(2);
    prior << 1.0, nu2;
    FundamentalSet fs = fundamental_frequencies({comps({1.0}), comps({ups})}, 2, prior, cfg);
    REQUIRE(fs.omega.size() == 2);
    CHECK(fs.omega[1] == doctest::Approx(2 * ups).epsilon(1e-15));
    CHECK(fs.kbar[1] == std::vector<int>{0, 2});
    CHECK(fs.sbar[1] == 0);
  }
  SUBCASE("without a prior the measured frequency is used") {
    FundamentalSet fs = fundamental_frequencies({comps({1.0}), comps({2.0, 0.61})}, 2, Eigen::VectorXd(), cfg);
    REQUIRE(fs.omega.size() == 2);
    CHECK(fs.omega[1] == 0.61);
    CHECK(fs.sbar[1] == 1);
  }
}

TEST_CASE("harmonic chain: no frequency variation and one-step location") {
  const ChainConfig chain{4, 0.0, 0.0};
  IntegratorConfig icfg;
  icfg.T = 8192;
  ModeState m = modes_forward(chain, semi_sinusoidal_ic(chain, 0.3));
  CHECK(frequency_variation(chain, m, icfg) < 1e-12);
  LocateResult r = locate_torus(chain, m, 1, icfg, FAConfig{});
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(std::abs(r.omega[0] - mode_frequencies(chain)[0]) < 1e-12);
  CHECK((r.ic.X - m.X).norm() < 1e-8);
}

TEST_CASE("harmonic continuation keeps the frequency and increases the energy") {
  const ChainConfig chain{4, 0.0, 0.0};
  IntegratorConfig icfg;
  icfg.T = 2048;
  ContinuationConfig cc;
  cc.max_points = 4;
  int seen = 0;
  auto fam = continue_family(chain, 1, icfg, FAConfig{}, cc, [&](const TorusFamilyPoint&) { ++seen; });
  REQUIRE(fam.size() == 4);
  CHECK(seen == 4);
  for (std::size_t i = 0; i < fam.size(); ++i) {
    CHECK(std::abs(fam[i].omega[0] - mode_frequencies(chain)[0]) < 1e-10);
    if (i > 0) CHECK(fam[i].energy == doctest::Approx(1.21 * fam[i - 1].energy).epsilon(1e-6));
  }
}

TEST_CASE("beta chain: small semi-sinusoidal data locates a regular torus") {
  const ChainConfig chain{4, 0.0, 0.25};
  IntegratorConfig icfg;
  icfg.T = 8192;
  ModeState m = modes_forward(chain, semi_sinusoidal_ic(chain, semi_sinusoidal_amplitude(chain, 0.01 * chain.N)));
  CHECK(frequency_variation(chain, m, icfg) < 1e-9);
  LocateResult r = locate_torus(chain, m, 1, icfg, FAConfig{});
  CHECK(r.converged);
  CHECK(r.error <= 2e-6);
  CHECK(r.omega[0] > mode_frequencies(chain)[0]);
}
