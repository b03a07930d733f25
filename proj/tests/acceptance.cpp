#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "sbs/sbs.hpp"

// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any gating criterion fails.

using namespace sbs;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Verdict {
  std::string id;
  bool passed = false;
  std::string detail;
};

void report(const Verdict& v, bool gating = true) {
  std::cout << (v.passed ? "PASS" : (gating ? "FAIL" : "MISS")) << "  " << v.id << "  " << v.detail << std::endl;
}

std::vector<std::pair<int, int>> bond_pairs(const Lattice& lat) {
  std::vector<std::pair<int, int>> out;
  for (const auto& b : lat.bonds()) out.emplace_back(b.a, b.b);
  return out;
}

oracle::Mat oracle_tfi(const Lattice& lat, double h) { return oracle::tfi_matrix(lat.size(), bond_pairs(lat), 1.0, h); }

oracle::Mat oracle_fxx(const Lattice& lat, double h) {
  std::vector<double> j;
  for (int s : default_frustration(lat)) j.push_back(s);
  return oracle::xx_matrix(lat.size(), bond_pairs(lat), j, h);
}

// ---- 1: oracle equivalence ------------------------------------------------

Verdict criterion_oracle(double time_limit) {
  const auto t0 = Clock::now();
  struct Case {
    Lattice lat;
    std::string pattern;
    int dim;
  };
  std::vector<Case> cases;
  for (const auto& lat : {Lattice(2, 3, Boundary::open), Lattice(3, 3, Boundary::periodic)})
    for (const char* pat : {"lines", "lines+loops", "snake"})
      for (int dim : {2, 3}) cases.push_back({lat, pat, dim});

  // enumeration against the dense Rayleigh quotient, TFI on both lattices
  // and the frustrated XX model where its sign pattern exists
  double worst = 0.0;
  int checked = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const auto st = random_state(c.lat, named_pattern(c.lat, c.pattern), c.dim, 100 + i, 0.5);
    const auto v = oracle::dense(st);
    for (double h : {0.5, 2.0}) {
      const double e = enumerate_estimates(st, build_tfi(c.lat, 1.0, h)).energy.real();
      const double ref = oracle::rayleigh(oracle_tfi(c.lat, h), v);
      worst = std::max(worst, std::abs(e - ref) / std::abs(ref));
      ++checked;
    }
    if (c.lat.boundary() == Boundary::open) {
      const double e = enumerate_estimates(st, build_frustrated_xx(c.lat, 1.0, 0.5)).energy.real();
      const double ref = oracle::rayleigh(oracle_fxx(c.lat, 0.5), v);
      worst = std::max(worst, std::abs(e - ref) / std::abs(ref));
      ++checked;
    }
  }

  // sampled energies: 100 seeds, each with its own random state drawn from
  // the case list
  int inside = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const auto& c = cases[static_cast<std::size_t>(s) % cases.size()];
    const auto st = random_state(c.lat, named_pattern(c.lat, c.pattern), c.dim, 5000 + s, 0.5);
    const double h = 0.5 + 0.5 * (s % 4);
    const auto ham = build_tfi(c.lat, 1.0, h);
    const double ref = oracle::rayleigh(oracle_tfi(c.lat, h), oracle::dense(st));
    SamplerConfig cfg;
    cfg.samples = 100000;
    cfg.seed = 9000 + static_cast<std::uint64_t>(s);
    const auto e = sample_energy(st, ham, cfg);
    inside += std::abs(e.mean.real() - ref) <= 3.0 * e.std_error ? 1 : 0;
  }
  const double t = seconds_since(t0);
  const bool ok = worst <= 1e-10 && inside >= 95 && t < time_limit;
  return {"C1 oracle equivalence", ok,
          "enumeration vs dense max rel err " + fmt("%.2e", worst) + " over " + std::to_string(checked) +
              " cases; sampled within 3 stderr " + std::to_string(inside) + "/100 (need 95); " + fmt("%.0f", t) +
              " s (limit " + fmt("%.0f", time_limit) + ")"};
}

// ---- 2: gradient ----------------------------------------------------------

std::vector<double> oracle_fd(const StringBondState& st, const oracle::Mat& h, double eps) {
  StringBondState probe = st;
  auto params = probe.params();
  std::vector<double> out;
  out.reserve(2 * params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const cplx orig = params[i];
    for (const cplx dir : {cplx(1.0, 0.0), cplx(0.0, 1.0)}) {
      params[i] = orig + eps * dir;
      const double up = oracle::rayleigh(h, oracle::dense(probe));
      params[i] = orig - eps * dir;
      const double down = oracle::rayleigh(h, oracle::dense(probe));
      params[i] = orig;
      out.push_back((up - down) / (2.0 * eps));
    }
  }
  return out;
}

Verdict criterion_gradient(double time_limit) {
  const auto t0 = Clock::now();
  const Lattice lat(2, 3, Boundary::open);
  const auto tfi = oracle_tfi(lat, 1.0);
  const auto fxx = oracle_fxx(lat, 0.5);
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, seed, 0.5);
    for (int model = 0; model < 2; ++model) {
      const auto h = model == 0 ? build_tfi(lat, 1.0, 1.0) : build_frustrated_xx(lat, 1.0, 0.5);
      const auto g = enumerated_gradient(st, h).real_coordinates();
      const auto fd = oracle_fd(st, model == 0 ? tfi : fxx, 1e-5);
      double top = 0.0;
      for (double v : fd) top = std::max(top, std::abs(v));
      for (std::size_t i = 0; i < g.size(); ++i)
        worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-3 * top));
      coords += g.size();
    }
  }
  const double t = seconds_since(t0);
  return {"C2 gradient vs finite differences", worst <= 1e-6 && t < time_limit,
          "max componentwise rel err " + fmt("%.2e", worst) + " (tol 1e-06) over " + std::to_string(coords) +
              " coordinates, 10 seeds x {TFI, frustrated XX}; " + fmt("%.0f", t) + " s"};
}

// ---- 3: cache integrity ---------------------------------------------------

Verdict criterion_cache(double time_limit) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::uint64_t flips = 0;
  for (auto b : {Boundary::open, Boundary::periodic}) {
    const Lattice lat(4, 4, b);
    const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 4, 21, 0.3);
    Chain chain(st, 77);
    while (chain.accepted() < 10000) chain.step();
    flips += chain.accepted();
    const cplx direct = oracle::amplitude(st, chain.config());
    const cplx cached = chain.cache().log_amplitude().value();
    worst = std::max(worst, std::abs(cached - direct) / std::abs(direct));
  }
  const double t = seconds_since(t0);
  return {"C3 cache integrity", worst <= 1e-8 && t < time_limit,
          "relative drift " + fmt("%.2e", worst) + " (tol 1e-08) after " + std::to_string(flips) +
              " accepted flips on 4x4 open and periodic, D=4; " + fmt("%.1f", t) + " s"};
}

// ---- 4: toric-code parity -------------------------------------------------

Verdict criterion_toric() {
  std::size_t configs = 0, bad = 0;
  for (int l : {2, 3}) {
    const Lattice lat(l, l, Boundary::open);
    const auto st = toric_code_state(lat);
    const double full = std::pow(2.0, static_cast<double>(lat.plaquettes().size()));
    const int n = lat.size();
    Configuration cfg(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < (std::size_t{1} << n); ++i) {
      for (int x = 0; x < n; ++x) cfg[static_cast<std::size_t>(x)] = static_cast<int>((i >> (n - 1 - x)) & 1);
      bool even = true;
      for (const auto& q : lat.plaquettes()) even = even && (cfg[q[0]] + cfg[q[1]] + cfg[q[2]] + cfg[q[3]]) % 2 == 0;
      const cplx expect = even ? full : 0.0;
      AmplitudeCache cache(st, cfg);
      cplx cached = 1.0;
      for (int s = 0; s < st.num_strings(); ++s) cached *= cache.string_value(s);
      if (oracle::amplitude(st, cfg) != expect || cached != expect || cache.nonzero() != even) ++bad;
      ++configs;
    }
  }
  return {"C4 toric-code parity", bad == 0,
          std::to_string(configs) + " configurations on 2x2 and 3x3 open, " + std::to_string(bad) + " mismatches"};
}

// ---- 5 and 8: ground-state quality and determinism ------------------------

struct QualityRun {
  std::string label;
  RunConfig config;
  double field = 0.0;
  double tolerance = 0.0;
  double exact = 0.0;
};

struct QualityResult {
  double energy = 0.0;
  double rel = 0.0;
  int iterations = 0;
  int bond_dim = 0;
  std::size_t samples = 0;
  std::string csv;
};

QualityResult run_quality(const QualityRun& q, const fs::path& out) {
  RunConfig c = q.config;
  c.trajectory_csv.clear();
  c.checkpoint.clear();
  std::ostringstream traj;
  write_csv_preamble(traj, "optimize trajectory", c,
                     "energy and stderr in units of J (total, not per site); wallclock_s in seconds");
  traj << kTrajectoryColumns << '\n';
  auto run = run_optimizer(c, q.field, std::nullopt, &traj);
  QualityResult r;
  const auto h = make_hamiltonian(c, make_lattice(c), q.field);
  r.energy = enumerate_estimates(run.state, h).energy.real();
  r.rel = std::abs(r.energy - q.exact) / std::abs(q.exact);
  r.iterations = run.result.progress.iteration;
  r.bond_dim = run.state.bond_dim();
  r.samples = run.result.progress.samples;
  r.csv = traj.str();
  std::ofstream(out / (q.label + "_trajectory.csv"), std::ios::binary) << r.csv;
  save_checkpoint((out / (q.label + ".sbs")).string(), run.state, c.sampler.seed, run.result.progress);
  return r;
}

std::vector<QualityRun> quality_runs(const fs::path& configs) {
  std::vector<QualityRun> runs;
  const auto tfi = load_config((configs / "tfi_3x3.ini").string());
  for (double h : {0.5, 2.0, 3.5}) {
    const Lattice lat = make_lattice(tfi);
    // 512 x 512 dense diagonalization, independent of the library
    const double exact = oracle::lowest_eigenvalue(oracle_tfi(lat, h));
    runs.push_back({"tfi_3x3_h" + fmt("%.1f", h), tfi, h, 0.01, exact});
  }
  const auto fxx = load_config((configs / "fxx_4x4.ini").string());
  runs.push_back({"fxx_4x4_h0.5", fxx, fxx.field, 0.02, exact_ground_energy(make_hamiltonian(fxx, make_lattice(fxx), fxx.field))});
  return runs;
}

std::vector<Verdict> criterion_quality(const fs::path& configs, const fs::path& out, double time_limit,
                                       bool determinism) {
  std::vector<Verdict> verdicts;
  const auto runs = quality_runs(configs);
  const auto t0 = Clock::now();
  std::vector<QualityResult> first;
  for (const auto& q : runs) {
    const auto t1 = Clock::now();
    const auto r = run_quality(q, out);
    first.push_back(r);
    const bool ok = r.rel <= q.tolerance && r.iterations <= 2000 && r.bond_dim == 4 && r.samples == 10000;
    verdicts.push_back({"C5 " + q.label, ok,
                        "E = " + fmt("%.6f", r.energy) + " vs exact " + fmt("%.6f", q.exact) + ", rel err " +
                            fmt("%.4f", r.rel) + " (tol " + fmt("%.2f", q.tolerance) + "), " +
                            std::to_string(r.iterations) + " iterations, final D=" + std::to_string(r.bond_dim) +
                            " M=" + std::to_string(r.samples) + ", " + fmt("%.0f", seconds_since(t1)) + " s"});
    report(verdicts.back());
  }
  const double t = seconds_since(t0);
  verdicts.push_back({"C5 total runtime", t <= time_limit,
                      fmt("%.0f", t) + " s (limit " + fmt("%.0f", time_limit) + ")"});
  report(verdicts.back());
  if (determinism) {
    bool same = true;
    std::string detail;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto again = run_quality(runs[i], out);
      const bool eq = again.csv == first[i].csv;
      same = same && eq;
      detail += runs[i].label + (eq ? " identical" : " DIFFERS") + (i + 1 < runs.size() ? ", " : "");
    }
    verdicts.push_back({"C8 determinism", same, detail});
    report(verdicts.back());
  }
  return verdicts;
}

// ---- 6: cost scaling ------------------------------------------------------

Verdict criterion_scaling(double time_limit) {
  const auto t0 = Clock::now();
  const std::vector<int> dims{4, 8, 16, 32};
  const Lattice closed_lat(6, 6, Boundary::periodic), open_lat(6, 6, Boundary::open);
  const auto closed = measure_scaling(closed_lat, lines_pattern(closed_lat), dims, 1.0);
  const auto open = measure_scaling(open_lat, lines_pattern(open_lat), dims, 1.0);
  const double ec = fit_exponent(closed), eo = fit_exponent(open);
  const double t = seconds_since(t0);
  std::string times;
  for (std::size_t i = 0; i < dims.size(); ++i)
    times += " D=" + std::to_string(dims[i]) + ":" + fmt("%.2e", closed[i].seconds) + "/" + fmt("%.2e", open[i].seconds);
  return {"C6 cost scaling", std::abs(ec - 3.0) <= 0.5 && std::abs(eo - 2.0) <= 0.5 && t < time_limit,
          "exponent closed " + fmt("%.2f", ec) + " (3 +- 0.5), open " + fmt("%.2f", eo) +
              " (2 +- 0.5); sweep s closed/open" + times + "; " + fmt("%.0f", t) + " s"};
}

// ---- 7: stretch -----------------------------------------------------------

Verdict criterion_stretch(const fs::path& configs, const fs::path& out) {
  const auto c = load_config((configs / "fxx_8x8.ini").string());
  std::ofstream traj(out / "fxx_8x8_trajectory.csv", std::ios::binary);
  write_csv_preamble(traj, "optimize trajectory", c, "energy and stderr in units of J (total, not per site)");
  traj << kTrajectoryColumns << '\n';
  auto run = run_optimizer(c, c.field, std::nullopt, &traj, {}, &std::clog);
  SamplerConfig sc = c.sampler;
  sc.samples = 50000;
  const auto e = sample_energy(run.state, make_hamiltonian(c, make_lattice(c), c.field), sc);
  return {"C7 stretch 8x8 frustrated XX", e.mean.real() <= -92.39,
          "E = " + fmt("%.3f", e.mean.real()) + " +- " + fmt("%.3f", e.std_error) +
              " (reference -92.39 for D=4 PEPS, target -93.31)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string configs = SBS_CONFIG_DIR;
  std::string out = "acceptance_out";
  std::set<int> only;
  bool stretch = false;
  app.add_option("--configs", configs, "directory with the shipped configs");
  app.add_option("--out", out, "directory for trajectories and checkpoints");
  app.add_option("--only", only, "run only these criteria");
  app.add_flag("--stretch", stretch, "also run the long 8x8 criterion");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);
  auto want = [&](int c) { return only.empty() || only.count(c); };

  bool ok = true;
  auto gate = [&](const Verdict& v) {
    report(v);
    ok = ok && v.passed;
  };
  if (want(1)) gate(criterion_oracle(300.0));
  if (want(2)) gate(criterion_gradient(120.0));
  if (want(3)) gate(criterion_cache(60.0));
  if (want(4)) gate(criterion_toric());
  if (want(5) || want(8))
    for (const auto& v : criterion_quality(configs, out, 1800.0, want(8))) ok = ok && v.passed;
  if (want(6)) gate(criterion_scaling(600.0));
  if (stretch && want(7)) report(criterion_stretch(configs, out), false);
  else std::cout << "SKIP  C7 stretch 8x8 frustrated XX  (off by default; pass --stretch)" << std::endl;
  return ok ? 0 : 1;
}
