// Experiment drivers: fpu <subcommand> --config <file> --out <dir>
//
// Exit codes: 0 success, 2 some grid points failed, 1 configuration or I/O error.

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "eltori/birkhoff.hpp"
#include "eltori/config.hpp"
#include "eltori/frequency.hpp"
#include "eltori/normalizer.hpp"

using namespace eltori;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "eltori 1.0";

struct Context {
  std::string command;
  Config cfg;
  fs::path out;
  ChainConfig chain;
  IntegratorConfig icfg;
  int threads = 1;
};

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0) || !(hi >= lo) || n < 1) throw ConfigError("log grid needs 0 < min <= max and points >= 1");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return g;
}

// Runs f(i) for i < n on a pool; results are stored by index so output order is fixed.
void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) f(i);
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

class Csv {
 public:
  Csv(const Context& ctx, const std::string& name, const std::string& columns) : path_(ctx.out / name) {
    os_.open(path_);
    if (!os_) throw ConfigError("cannot write " + path_.string());
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, ctx.cfg.hash());
    os_ << "# fpu " << ctx.command << "\n# version: " << kVersion << "\n# config-hash: " << hash << "\n";
    os_ << "# resolved: N=" << ctx.chain.N << " alpha=" << ctx.chain.alpha << " beta=" << ctx.chain.beta
        << " h=" << ctx.icfg.h << " delta=" << ctx.icfg.delta << " T=" << ctx.icfg.T
        << " scheme=" << scheme_name(ctx.icfg.scheme) << "\n";
    std::istringstream is(ctx.cfg.canonical());
    for (std::string line; std::getline(is, line);) os_ << "# " << line << "\n";
    os_ << columns << "\n";
  }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((os_ << (first ? "" : ",") << fmt(v), first = false), ...);
    os_ << "\n";
  }
  std::ostream& stream() { return os_; }

 private:
  static std::string fmt(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", x);
    return b;
  }
  static std::string fmt(int x) { return std::to_string(x); }
  static std::string fmt(const std::string& s) { return s; }
  static std::string fmt(const char* s) { return s; }
  fs::path path_;
  std::ofstream os_;
};

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  char b[40];
  for (int i = 0; i < v.size(); ++i) {
    std::snprintf(b, sizeof b, "%.17g", v[i]);
    s += (i ? "," : "") + std::string(b);
  }
  return s;
}

std::string numbered(const std::string& stem, int n) {
  std::string s;
  for (int i = 1; i <= n; ++i) s += (i > 1 ? "," : "") + stem + std::to_string(i);
  return s;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

NormalizerConfig normalizer_config(const Context& ctx) {
  NormalizerConfig nc = NormalizerConfig::for_chain(ctx.chain.N);
  nc.rbar = ctx.cfg.get_int("rbar", nc.rbar);
  nc.K = ctx.cfg.get_int("K", nc.K);
  nc.caps.max_degree = ctx.cfg.get_int("max_degree", nc.caps.max_degree);
  nc.caps.max_trig = ctx.cfg.get_int("max_trig", nc.caps.max_trig);
  nc.divisor_floor = ctx.cfg.get_double("divisor_floor", nc.divisor_floor);
  if (nc.rbar < 1 || nc.K < 1) throw ConfigError("rbar and K must be positive");
  return nc;
}

FAConfig fa_config(const Context& ctx) {
  FAConfig fa;
  fa.NC = ctx.cfg.get_int("NC", fa.NC);
  fa.KM = ctx.cfg.get_int("KM", fa.KM);
  fa.eps_tol = ctx.cfg.get_double("eps_tol", fa.eps_tol);
  fa.mu_tol = ctx.cfg.get_double("mu_tol", fa.mu_tol);
  fa.max_iters = ctx.cfg.get_int("max_iters", fa.max_iters);
  fa.polish = ctx.cfg.get_int("polish", fa.polish);
  if (fa.NC < 1 || fa.KM < 1 || !(fa.eps_tol > 0) || !(fa.mu_tol > 0) || fa.max_iters < 1 || fa.polish < 0)
    throw ConfigError("frequency-analysis parameters must be positive");
  return fa;
}

struct NfTorus {
  double I = 0, E = 0;
  RunResult run;
  std::string error;
};

// 1D torus construction seeded at I* and its energy in original coordinates.
NfTorus build_torus(const ChainConfig& chain, const NormalizerConfig& nc, const Eigen::VectorXd& Istar) {
  NfTorus t;
  t.I = Istar[0];
  TorusSeed seed{static_cast<int>(Istar.size()), Istar};
  try {
    t.run = run(assemble_H0(chain, seed, nc.caps, nc.K), seed, nc);
    if (t.run.converged) t.E = total_energy(chain, map_to_original(t.run.stack, PhasePoint::zero(t.run.H.dims)));
  } catch (const std::exception& e) {
    t.error = e.what();
  }
  return t;
}

int cmd_chaos_scan(Context& ctx) {
  const auto grid = log_grid(ctx.cfg.get_double("ES_min", 1e-3), ctx.cfg.get_double("ES_max", 10.0),
                             ctx.cfg.get_int("points", 40));
  ctx.cfg.check_unused();
  struct Row {
    double A = 0, dw = NAN;
    std::string status = "ok";
  };
  std::vector<Row> rows(grid.size());
  parallel_for(static_cast<int>(grid.size()), ctx.threads, [&](int i) {
    Row& r = rows[i];
    r.A = semi_sinusoidal_amplitude(ctx.chain, grid[i] * ctx.chain.N);
    try {
      r.dw = frequency_variation(ctx.chain, modes_forward(ctx.chain, semi_sinusoidal_ic(ctx.chain, r.A)), ctx.icfg);
    } catch (const std::exception& e) {
      r.status = sanitize(e.what());
    }
  });
  Csv csv(ctx, "chaos_scan.csv", "E_S,A,delta_omega_f1,status");
  int failed = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv.row(grid[i], rows[i].A, rows[i].dw, rows[i].status);
    failed += rows[i].status != "ok";
  }
  return failed ? 2 : 0;
}

void write_norms(Csv& csv, const RunResult& r) {
  for (const StepReport& s : r.reports)
    csv.row(s.r, s.norms.chi0, s.norms.chi1, s.norms.X2, s.norms.Y2, s.norms.D, s.energy, s.min_divisor,
            s.max_residual, join(s.omega), join(s.Omega));
}

int cmd_normalize(Context& ctx) {
  const NormalizerConfig nc = normalizer_config(ctx);
  const std::vector<double> I = ctx.cfg.get_list("Istar", {1e-4, 1e-4});
  ctx.cfg.check_unused();
  if (I.empty() || static_cast<int>(I.size()) > ctx.chain.N - 2) throw ConfigError("Istar needs 1..N-2 entries");
  Eigen::VectorXd Istar = Eigen::Map<const Eigen::VectorXd>(I.data(), I.size());
  NfTorus t = build_torus(ctx.chain, nc, Istar);
  const int n1 = static_cast<int>(I.size()), n2 = ctx.chain.N - 1 - n1;
  Csv csv(ctx, "norms.csv",
          "r,chi0,chi1,X2,Y2,D,energy,min_divisor,max_residual," + numbered("omega", n1) + "," + numbered("Omega", n2));
  write_norms(csv, t.run);
  Csv sum(ctx, "summary.csv", "converged,reason,E_S");
  sum.row(t.run.converged ? 1 : 0, sanitize(t.error.empty() ? t.run.reason : t.error), t.E / ctx.chain.N);
  std::ofstream st(ctx.out / "stack.txt");
  write_stack(st, t.run.stack);
  return t.error.empty() ? 0 : 2;
}

int cmd_tori_grid_2d(Context& ctx) {
  const NormalizerConfig nc = normalizer_config(ctx);
  const auto grid = log_grid(ctx.cfg.get_double("I_min", 1e-8), ctx.cfg.get_double("I_max", 5.0),
                             ctx.cfg.get_int("points", 8));
  ctx.cfg.check_unused();
  if (ctx.chain.N < 4) throw ConfigError("2D tori need N >= 4");
  const int n = static_cast<int>(grid.size());
  std::vector<NfTorus> out(n * n);
  parallel_for(n * n, ctx.threads, [&](int idx) {
    Eigen::VectorXd I(2);
    I << grid[idx / n], grid[idx % n];
    out[idx] = build_torus(ctx.chain, nc, I);
  });
  Csv csv(ctx, "tori_grid_2d.csv", "I1,I2,E_S,converged,steps,reason");
  int failed = 0;
  for (int idx = 0; idx < n * n; ++idx) {
    const NfTorus& t = out[idx];
    csv.row(grid[idx / n], grid[idx % n], t.E / ctx.chain.N, t.run.converged ? 1 : 0,
            static_cast<int>(t.run.reports.size()), sanitize(t.error.empty() ? t.run.reason : t.error));
    failed += !t.error.empty();
  }
  return failed ? 2 : 0;
}


std::vector<TorusFamilyPoint> run_family(Context& ctx, const FAConfig& fa, ContinuationConfig cc) {
  const int nm = ctx.chain.N - 1;
  Csv csv(ctx, "family_fa.csv", "E_S,energy,omega_f1,iterations," + numbered("Y", nm) + "," + numbered("X", nm));
  return continue_family(ctx.chain, 1, ctx.icfg, fa, cc, [&](const TorusFamilyPoint& p) {
    csv.row(p.ES, p.energy, join(p.omega), p.iterations, join(p.ic.Y), join(p.ic.X));
    csv.stream().flush();
  });
}

ContinuationConfig continuation_config(const Context& ctx) {
  ContinuationConfig cc;
  cc.A0 = semi_sinusoidal_amplitude(ctx.chain, ctx.cfg.get_double("ES_start", 1e-4) * ctx.chain.N);
  cc.zeta0 = ctx.cfg.get_double("zeta0", cc.zeta0);
  cc.zeta_min = ctx.cfg.get_double("zeta_min", cc.zeta_min);
  cc.max_points = ctx.cfg.get_int("max_points", cc.max_points);
  return cc;
}

int cmd_torus_family(Context& ctx) {
  const NormalizerConfig nc = normalizer_config(ctx);
  const FAConfig fa = fa_config(ctx);
  const ContinuationConfig cc = continuation_config(ctx);
  const auto grid = log_grid(ctx.cfg.get_double("I_min", 1e-4), ctx.cfg.get_double("I_max", 5.0),
                             ctx.cfg.get_int("points", 30));
  ctx.cfg.check_unused();
  const int n2 = ctx.chain.N - 2;
  std::vector<NfTorus> nf(grid.size());
  parallel_for(static_cast<int>(grid.size()), ctx.threads, [&](int i) {
    nf[i] = build_torus(ctx.chain, nc, Eigen::VectorXd::Constant(1, grid[i]));
  });
  int failed = 0;
  {
    Csv csv(ctx, "family_nf.csv", "Istar,E_S,energy,omega1," + numbered("Omega", n2) + ",converged,reason");
    for (const NfTorus& t : nf) {
      csv.row(t.I, t.E / ctx.chain.N, t.run.H.energy, t.run.H.omega.size() ? t.run.H.omega[0] : NAN,
              t.run.H.Omega.size() ? join(t.run.H.Omega) : join(Eigen::VectorXd::Constant(n2, NAN)),
              t.run.converged ? 1 : 0, sanitize(t.error.empty() ? t.run.reason : t.error));
      failed += !t.error.empty();
    }
  }
  auto fam = run_family(ctx, fa, cc);
  Csv end(ctx, "family_summary.csv", "points,endpoint_E_S,nf_max_E_S,coverage");
  double nf_max = 0;
  for (const NfTorus& t : nf)
    if (t.run.converged) nf_max = std::max(nf_max, t.E / ctx.chain.N);
  const double endpoint = fam.empty() ? NAN : fam.back().ES;
  end.row(static_cast<int>(fam.size()), endpoint, nf_max, nf_max / endpoint);
  return failed || fam.empty() ? 2 : 0;
}

std::vector<TorusFamilyPoint> read_family(const std::string& path, int nm) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open family file '" + path + "'");
  std::vector<TorusFamilyPoint> out;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> v;
    std::istringstream ls(line);
    for (std::string item; std::getline(ls, item, ',');) v.push_back(std::stod(item));
    if (static_cast<int>(v.size()) != 4 + 2 * nm) throw ConfigError("family file: bad row width");
    TorusFamilyPoint p;
    p.ES = v[0];
    p.energy = v[1];
    p.omega = Eigen::VectorXd::Constant(1, v[2]);
    p.iterations = static_cast<int>(v[3]);
    p.ic.Y = Eigen::Map<Eigen::VectorXd>(v.data() + 4, nm);
    p.ic.X = Eigen::Map<Eigen::VectorXd>(v.data() + 4 + nm, nm);
    out.push_back(p);
  }
  return out;
}

int cmd_monodromy(Context& ctx) {
  const std::string family_file = ctx.cfg.get_string("family_csv", "");
  const NormalizerConfig nc = normalizer_config(ctx);
  const FAConfig fa = fa_config(ctx);
  const ContinuationConfig cc = continuation_config(ctx);
  const auto grid = log_grid(ctx.cfg.get_double("I_min", 1e-4), ctx.cfg.get_double("I_max", 5.0),
                             ctx.cfg.get_int("points", 30));
  ctx.cfg.check_unused();
  const int nm = ctx.chain.N - 1, n2 = nm - 1;
  std::vector<TorusFamilyPoint> fam = family_file.empty() ? run_family(ctx, fa, cc) : read_family(family_file, nm);
  const Eigen::VectorXd nu = mode_frequencies(ctx.chain);
  std::vector<double> prev(n2);
  int failed = 0;
  for (int j = 0; j < n2; ++j) prev[j] = nu[j + 1] / nu[0];
  {
    Csv csv(ctx, "monodromy.csv", "E_S,omega_f1," + numbered("theta", n2) + "," + numbered("ratio", n2) +
                                      ",lambda_unit_pair_distance,modulus_defect");
    std::vector<NumericMonodromy> mono(fam.size());
    parallel_for(static_cast<int>(fam.size()), ctx.threads,
                 [&](int i) {
                   try {
                     mono[i] = numeric_monodromy(ctx.chain, fam[i].ic, fam[i].omega[0], ctx.icfg);
                   } catch (const std::exception&) {
                     mono[i].eigenvalues.clear();
                   }
                 });
    for (std::size_t i = 0; i < fam.size(); ++i) {
      if (mono[i].eigenvalues.size() < 2) {
        ++failed;
        continue;
      }
      std::vector<double> th = mono[i].theta;
      th.resize(n2, NAN);
      std::vector<double> ratio = unwrap_ratios(mono[i].theta, prev);
      for (int j = 0; j < n2; ++j)
        if (std::isfinite(ratio[j])) prev[j] = ratio[j];
      const double unit = std::abs(mono[i].eigenvalues[0] - 1.0) + std::abs(mono[i].eigenvalues[1] - 1.0);
      csv.row(fam[i].ES, fam[i].omega[0], join(Eigen::Map<Eigen::VectorXd>(th.data(), n2)),
              join(Eigen::Map<Eigen::VectorXd>(ratio.data(), n2)), unit, mono[i].max_modulus_defect);
    }
  }
  std::vector<NfTorus> nf(grid.size());
  parallel_for(static_cast<int>(grid.size()), ctx.threads, [&](int i) {
    nf[i] = build_torus(ctx.chain, nc, Eigen::VectorXd::Constant(1, grid[i]));
  });
  Csv csv(ctx, "monodromy_nf.csv", "E_S,omega1," + numbered("theta", n2) + "," + numbered("ratio", n2));
  for (const NfTorus& t : nf) {
    if (!t.run.converged) continue;
    MonodromyAngles m = monodromy_angles(t.run.H.omega[0], t.run.H.Omega);
    csv.row(t.E / ctx.chain.N, t.run.H.omega[0], join(Eigen::Map<Eigen::VectorXd>(m.theta.data(), n2)),
            join(t.run.H.Omega / t.run.H.omega[0]));
  }
  return fam.empty() || failed ? 2 : 0;
}

int cmd_birkhoff_scan(Context& ctx) {
  const NormalizerConfig nc = normalizer_config(ctx);
  BirkhoffConfig bc = BirkhoffConfig::for_chain(ctx.chain.N);
  bc.order = ctx.cfg.get_int("order", bc.order);
  bc.caps.max_degree = ctx.cfg.get_int("birkhoff_max_degree", bc.caps.max_degree);
  bc.caps.max_trig = ctx.cfg.get_int("birkhoff_max_trig", bc.caps.max_trig);
  const double width = ctx.cfg.get_double("scan_width", 0.5);
  const int scan_points = ctx.cfg.get_int("scan_points", 21);
  const auto grid = log_grid(ctx.cfg.get_double("I_min", 1e-4), ctx.cfg.get_double("I_max", 5.0),
                             ctx.cfg.get_int("points", 30));
  ctx.cfg.check_unused();
  struct Row {
    NfTorus t;
    ScanResult scan;
    double on_torus = NAN;
    std::string status = "ok";
  };
  std::vector<Row> rows(grid.size());
  parallel_for(static_cast<int>(grid.size()), ctx.threads, [&](int i) {
    Row& r = rows[i];
    r.t = build_torus(ctx.chain, nc, Eigen::VectorXd::Constant(1, grid[i]));
    if (!r.t.run.converged) {
      r.status = "torus not converged";
      return;
    }
    try {
      BirkhoffForm form = run_birkhoff(r.t.run.H, bc);
      StackMap sm(r.t.run.stack);
      r.scan = scan_semi_sinusoidal(ctx.chain, form, sm, semi_sinusoidal_amplitude(ctx.chain, r.t.E), width, scan_points);
      r.on_torus = remainder_on_torus(form, sm);
    } catch (const std::exception& e) {
      r.status = sanitize(e.what());
    }
  });
  Csv csv(ctx, "birkhoff_scan.csv", "Istar,E_S_torus,E_S,A,min_abs_R,abs_R_on_torus,status");
  int failed = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Row& r = rows[i];
    csv.row(grid[i], r.t.E / ctx.chain.N, r.scan.best.ES, r.scan.best.A, r.scan.best.remainder, r.on_torus, r.status);
    failed += r.status != "ok" && r.status != "torus not converged";
  }
  return failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elliptic tori in Fermi-Pasta-Ulam chains: experiment drivers"};
  app.require_subcommand(1);
  std::string config, out;
  const std::vector<std::pair<std::string, std::function<int(Context&)>>> commands{
      {"chaos-scan", cmd_chaos_scan},     {"normalize", cmd_normalize}, {"tori-grid-2d", cmd_tori_grid_2d},
      {"torus-family", cmd_torus_family}, {"monodromy", cmd_monodromy}, {"birkhoff-scan", cmd_birkhoff_scan}};
  for (const auto& [name, _] : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment config file (key = value lines)")->required();
    sub->add_option("--out", out, "output directory")->required();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  for (const auto& [name, fn] : commands) {
    if (!app.got_subcommand(name)) continue;
    Context ctx;
    ctx.command = name;
    try {
      ctx.cfg = Config::load(config);
      ctx.chain.N = ctx.cfg.get_int("N", 4);
      // model selects which coefficient takes its default 1/4; alpha and beta override
      const std::string model = ctx.cfg.get_string("model", "beta");
      if (model != "alpha" && model != "beta" && model != "harmonic") throw ConfigError("model must be alpha, beta or harmonic");
      ctx.chain.alpha = ctx.cfg.get_double("alpha", model == "alpha" ? 0.25 : 0.0);
      ctx.chain.beta = ctx.cfg.get_double("beta", model == "beta" ? 0.25 : 0.0);
      ctx.icfg.h = ctx.cfg.get_double("h", ctx.icfg.h);
      ctx.icfg.delta = ctx.cfg.get_double("delta", ctx.icfg.delta);
      ctx.icfg.T = ctx.cfg.get_double("T", ctx.icfg.T);
      ctx.icfg.scheme = parse_scheme(ctx.cfg.get_string("scheme", scheme_name(ctx.icfg.scheme)));
      ctx.threads = ctx.cfg.get_int("threads", static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
      if (ctx.chain.N < 3) throw ConfigError("N must be at least 3");
      if (ctx.threads < 1) throw ConfigError("threads must be positive");
      ctx.icfg.steps_per_sample();
      fs::create_directories(out);
      ctx.out = out;
      return fn(ctx);
    } catch (const ConfigError& e) {
      std::cerr << "fpu " << name << ": " << e.what() << "\n";
      return 1;
    } catch (const std::invalid_argument& e) {
      std::cerr << "fpu " << name << ": " << e.what() << "\n";
      return 1;
    } catch (const fs::filesystem_error& e) {
      std::cerr << "fpu " << name << ": " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
