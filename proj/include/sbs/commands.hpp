#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sbs/checkpoint.hpp"
#include "sbs/config.hpp"
#include "sbs/optimizer.hpp"
#include "sbs/selfcheck.hpp"

namespace sbs {

enum ExitCode : int {
  kExitSuccess = 0,
  kExitInputError = 1,
  kExitRuntimeFailure = 2,
  kExitNotConverged = 3,
};

/// Sampling stream reserved for post-optimization measurements, far from
/// the iteration-numbered optimizer streams.
inline constexpr std::uint64_t kMeasureStream = 0x6d65617375726500ULL;

// ---- CSV ---------------------------------------------------------------

inline std::string csv_num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_csv_preamble(std::ostream& os, const std::string& what, const RunConfig& c,
                               const std::string& units) {
  os << "# sbs " << what << '\n';
  os << "# config_hash " << hex64(c.hash) << '\n';
  os << "# units: " << units << '\n';
}

inline constexpr const char* kTrajectoryColumns = "iter,energy,stderr,acceptance,eta,M,D,wallclock_s";

inline std::string trajectory_line(const TrajectoryRow& r, bool wallclock) {
  return std::to_string(r.iteration) + "," + csv_num(r.energy) + "," + csv_num(r.std_error) + "," +
         csv_num(r.acceptance) + "," + csv_num(r.eta) + "," + std::to_string(r.samples) + "," +
         std::to_string(r.bond_dim) + "," + csv_num(wallclock ? r.wallclock : 0.0);
}

inline std::ofstream open_output(const std::string& path, bool append = false) {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw InputError("cannot open output file '" + path + "'");
  return os;
}

// ---- optimize ----------------------------------------------------------

struct OptimizeOutcome {
  StringBondState state;
  OptimizeResult result;
};

/// Optimizes at field `field`, starting from `initial` (or a fresh random
/// state), writing trajectory rows to `trajectory` when non-null.
inline OptimizeOutcome run_optimizer(const RunConfig& c, double field, std::optional<StringBondState> initial,
                                     std::ostream* trajectory, OptimizerProgress start = {},
                                     std::ostream* log = nullptr) {
  const Lattice lat = make_lattice(c);
  const auto h = make_hamiltonian(c, lat, field);
  StringBondState st = initial ? std::move(*initial)
                               : random_state(lat, make_pattern(c, lat), c.bond_dim, c.sampler.seed,
                                              c.init_noise, c.real_only);
  auto on_iteration = [&](const TrajectoryRow& row, const StringBondState& s, const OptimizerProgress& p) {
    if (trajectory) *trajectory << trajectory_line(row, c.wallclock) << '\n' << std::flush;
    if (log && row.iteration % 50 == 0)
      *log << "iter " << row.iteration << " E " << csv_num(row.energy) << " +- " << csv_num(row.std_error)
           << " D " << row.bond_dim << " M " << row.samples << '\n';
    if (c.checkpoint_every > 0 && !c.checkpoint.empty() && p.iteration % c.checkpoint_every == 0)
      save_checkpoint(c.checkpoint, s, c.sampler.seed, p);
  };
  auto result = optimize(st, h, c.optimizer, c.sampler, on_iteration, start);
  return {std::move(st), std::move(result)};
}

/// `optimize`: trajectory CSV plus final checkpoint. Resumes from
/// `resume_path` when given (the trajectory file is appended to).
inline int cmd_optimize(const RunConfig& c, const std::string& resume_path = "",
                        std::ostream& log = std::clog) {
  std::optional<StringBondState> initial;
  OptimizerProgress start;
  if (!resume_path.empty()) {
    auto cp = load_checkpoint(resume_path);
    const Lattice lat = make_lattice(c);
    if (cp.state.lattice().lx() != lat.lx() || cp.state.lattice().ly() != lat.ly() ||
        cp.state.lattice().boundary() != lat.boundary() || cp.state.local_dim() != lat.local_dim())
      throw InputError("checkpoint lattice does not match the config");
    if (cp.progress) start = *cp.progress;
    initial = std::move(cp.state);
  }
  std::optional<std::ofstream> traj;
  if (!c.trajectory_csv.empty()) {
    const bool append = !resume_path.empty() && std::filesystem::exists(c.trajectory_csv);
    traj = open_output(c.trajectory_csv, append);
    if (!append) {
      write_csv_preamble(*traj, "optimize trajectory", c,
                         "energy and stderr in units of J (total, not per site); wallclock_s in seconds");
      *traj << kTrajectoryColumns << '\n';
    }
  }
  auto out = run_optimizer(c, c.field, std::move(initial), traj ? &*traj : nullptr, start, &log);
  if (!c.checkpoint.empty()) save_checkpoint(c.checkpoint, out.state, c.sampler.seed, out.result.progress);
  const auto& last = out.result.trajectory.back();
  log << (out.result.converged ? "converged" : "not converged") << " after " << out.result.progress.iteration
      << " iterations, E = " << csv_num(last.energy) << " +- " << csv_num(last.std_error) << '\n';
  return out.result.converged ? kExitSuccess : kExitNotConverged;
}

// ---- measure -----------------------------------------------------------

struct Measurement {
  std::string name;
  EstimateWithError value;
};

inline std::vector<Measurement> measure_state(const StringBondState& st, const LocalHamiltonian& h,
                                              const std::vector<std::string>& tokens, const SamplerConfig& sc) {
  SampleRequest req;
  for (const auto& t : tokens) req.observables.push_back(make_observable(st.lattice(), t));
  const auto batch = sample(st, h, sc, req, kMeasureStream);
  std::vector<Measurement> out{{"energy", batch.energy()}};
  for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back({tokens[i], batch.observable(i)});
  return out;
}

inline constexpr const char* kMeasureColumns = "quantity,value,stderr,autocorrelation,samples";

inline int cmd_measure(const RunConfig& c, const std::string& checkpoint_path, std::ostream& out = std::cout) {
  auto cp = load_checkpoint(checkpoint_path);
  const Lattice lat = make_lattice(c);
  const Lattice& got = cp.state.lattice();
  if (got.lx() != lat.lx() || got.ly() != lat.ly() || got.boundary() != lat.boundary() ||
      got.local_dim() != lat.local_dim())
    throw InputError("checkpoint lattice does not match the config");
  const auto h = make_hamiltonian(c, lat, c.field);
  const auto rows = measure_state(cp.state, h, c.observables, c.sampler);
  auto emit = [&](std::ostream& os) {
    write_csv_preamble(os, "measure", c, "energy in units of J; observables dimensionless");
    os << kMeasureColumns << '\n';
    for (const auto& m : rows)
      os << m.name << ',' << csv_num(m.value.mean.real()) << ',' << csv_num(m.value.std_error) << ','
         << csv_num(m.value.autocorrelation) << ',' << m.value.samples << '\n';
  };
  if (c.measure_csv.empty()) {
    emit(out);
  } else {
    auto os = open_output(c.measure_csv);
    emit(os);
  }
  return kExitSuccess;
}

// ---- sweep -------------------------------------------------------------

inline constexpr const char* kSweepColumns = "h,energy,stderr,m_x,m_x_err,m_z2,m_z2_err,acceptance,D,M,status";

/// Optimizes at each field in turn, warm-starting from the previous optimum
/// unless output.cold_start is set. A failed point is recorded with status
/// `failed` and the next point starts cold.
inline int cmd_sweep(const RunConfig& c, std::ostream& log = std::clog) {
  if (c.fields.size() < 2) throw InputError("sweep needs 'model.h_values' with at least two points");
  std::optional<std::ofstream> file;
  if (!c.sweep_csv.empty()) file = open_output(c.sweep_csv);
  std::ostream& os = file ? *file : std::cout;
  write_csv_preamble(os, "sweep", c,
                     "h and energy in units of J (total energy); m_x = mean <X_i>, m_z2 = <(mean Z_i)^2>");
  os << kSweepColumns << '\n';

  const Lattice lat = make_lattice(c);
  std::optional<StringBondState> previous;
  int code = kExitSuccess;
  for (double field : c.fields) {
    std::string status = "ok";
    try {
      std::optional<StringBondState> start;
      if (!c.cold_start && previous) start = *previous;
      auto run = run_optimizer(c, field, std::move(start), nullptr);
      const auto h = make_hamiltonian(c, lat, field);
      SamplerConfig sc = c.sampler;
      sc.samples = run.result.progress.samples;
      SampleRequest req;
      req.observables = {make_observable(lat, "mx"), make_observable(lat, "mz2")};
      const auto batch = sample(run.state, h, sc, req, kMeasureStream);
      const auto e = batch.energy(), mx = batch.observable(0), mz2 = batch.observable(1);
      if (!run.result.converged) {
        status = "nonconverged";
        if (code == kExitSuccess) code = kExitNotConverged;
      }
      os << csv_num(field) << ',' << csv_num(e.mean.real()) << ',' << csv_num(e.std_error) << ','
         << csv_num(mx.mean.real()) << ',' << csv_num(mx.std_error) << ',' << csv_num(mz2.mean.real()) << ','
         << csv_num(mz2.std_error) << ',' << csv_num(batch.acceptance()) << ',' << run.state.bond_dim() << ','
         << sc.samples << ',' << status << '\n'
         << std::flush;
      log << "h " << csv_num(field) << " E " << csv_num(e.mean.real()) << " +- " << csv_num(e.std_error) << " ("
          << status << ")\n";
      previous = std::move(run.state);
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& ex) {
      log << "h " << csv_num(field) << " failed: " << ex.what() << '\n';
      const std::string nan = "nan";
      os << csv_num(field);
      for (int i = 0; i < 7; ++i) os << ',' << nan;
      os << ",0,0,failed\n" << std::flush;
      previous.reset();
      code = kExitRuntimeFailure;
    }
  }
  return code;
}

// ---- check -------------------------------------------------------------

inline int cmd_check(const CheckOptions& opt = {}, std::ostream& out = std::cout) {
  const auto rows = run_self_checks(opt);
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  bool ok = true;
  for (const auto& r : rows) {
    const char* tag = r.informational ? "INFO" : (r.passed ? "PASS" : "FAIL");
    out << tag << "  " << r.name << std::string(width - r.name.size() + 2, ' ') << r.detail << '\n';
    ok = ok && (r.informational || r.passed);
  }
  return ok ? kExitSuccess : kExitRuntimeFailure;
}

}  // namespace sbs
