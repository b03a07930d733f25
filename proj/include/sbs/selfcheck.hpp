#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sbs/exact.hpp"
#include "sbs/optimizer.hpp"
#include "sbs/sampler.hpp"
#include "sbs/timing.hpp"

// Embedded invariant suite behind `sbs check`. Each check is small enough to
// run in seconds on one core.

namespace sbs {

struct CheckResult {
  std::string name;
  bool passed = false;
  bool informational = false;  // reported, never fails the run
  std::string detail;
};

struct CheckOptions {
  bool corrupt_cache = false;  // disable prefix/suffix invalidation in apply()
  int flips = 2000;
  bool timing = true;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

inline double rel_diff(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// |log-amplitude difference| as a relative amplitude error.
inline double log_rel_diff(const LogAmplitude& a, const LogAmplitude& b) {
  if (a.is_zero() || b.is_zero()) return a.is_zero() == b.is_zero() ? 0.0 : 1.0;
  return std::abs(std::exp(cplx(a.log_abs - b.log_abs, a.phase - b.phase)) - 1.0);
}

}  // namespace detail

/// Runs accepted Metropolis flips and compares the cached amplitude and every
/// cached string factor with a from-scratch evaluation afterwards.
inline CheckResult check_cache_drift(const StringBondState& st, int accepted_flips, bool corrupt,
                                     std::uint64_t seed, double tol = 1e-8) {
  Chain chain(st, seed);
  chain.cache().set_skip_invalidation(corrupt);
  std::uint64_t guard = 0;
  const std::uint64_t limit = 1000ULL * static_cast<std::uint64_t>(accepted_flips) + 1000;
  while (chain.accepted() < static_cast<std::uint64_t>(accepted_flips) && ++guard < limit) chain.step();
  auto& cache = chain.cache();
  double worst = detail::log_rel_diff(cache.log_amplitude(), st.amplitude(cache.config()));
  for (int s = 0; s < st.num_strings(); ++s)
    worst = std::max(worst, detail::rel_diff(cache.string_value(s), st.string_value(s, cache.config())));
  // also probe fresh ratios from the evolved cache
  std::mt19937_64 rng(seed ^ 0x5eed);
  for (int k = 0; k < 20; ++k) {
    const int x = static_cast<int>(rng() % static_cast<std::uint64_t>(st.num_sites()));
    const int lv = (cache.level(x) + 1) % st.local_dim();
    Configuration m = cache.config();
    m[static_cast<std::size_t>(x)] = lv;
    const LogAmplitude a = st.amplitude(m), b = st.amplitude(cache.config());
    const cplx expect = ratio_of(a, b);
    worst = std::max(worst, detail::rel_diff(cache.ratio(x, lv), expect));
  }
  return {"cache drift", worst <= tol, false,
          "max relative error " + detail::fmt(worst) + " after " + std::to_string(chain.accepted()) +
              " accepted flips (tol " + detail::fmt(tol) + ")"};
}

/// Single- and multi-site ratios against two from-scratch amplitudes.
inline CheckResult check_ratios(const StringBondState& st, std::uint64_t seed, double tol = 1e-10) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  Chain chain(st, seed);
  for (int trial = 0; trial < 200; ++trial) {
    chain.sweep();
    auto& cache = chain.cache();
    const int k = 1 + static_cast<int>(rng() % 3);
    std::vector<SiteChange> changes;
    Configuration m = cache.config();
    while (static_cast<int>(changes.size()) < k) {
      const int x = static_cast<int>(rng() % static_cast<std::uint64_t>(st.num_sites()));
      if (std::any_of(changes.begin(), changes.end(), [x](const SiteChange& c) { return c.site == x; })) continue;
      const int lv = (cache.level(x) + 1) % st.local_dim();
      changes.push_back({x, lv});
      m[static_cast<std::size_t>(x)] = lv;
    }
    const cplx expect = ratio_of(st.amplitude(m), st.amplitude(cache.config()));
    worst = std::max(worst, detail::rel_diff(cache.ratio(changes), expect));
  }
  return {"ratio vs from-scratch", worst <= tol, false,
          "max relative error " + detail::fmt(worst) + " over 200 random 1-3 site changes"};
}

/// Compares enumerated gradients with central differences of the dense
/// Rayleigh quotient. Each real coordinate must agree to `tol` relative to
/// max(|fd_i|, floor * max_j |fd_j|).
inline CheckResult check_gradient(const StringBondState& st, const LocalHamiltonian& h, double tol = 1e-6,
                                  double floor = 1e-3) {
  const auto g = enumerated_gradient(st, h).real_coordinates();
  const auto fd = fd_gradient(st, h, 1e-5);
  double top = 0.0;
  for (double v : fd) top = std::max(top, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(std::abs(fd[i]), floor * top));
  return {"gradient vs finite differences", worst <= tol, false,
          "max componentwise relative error " + detail::fmt(worst) + " over " + std::to_string(g.size()) +
              " coordinates"};
}

/// Exact detailed balance of the single-flip Metropolis kernel: for every
/// pair of configurations one flip apart, p(n) T(n->m) = p(m) T(m->n), with
/// T from cached ratios and p from from-scratch amplitudes.
inline CheckResult check_detailed_balance(const StringBondState& st, double tol = 1e-10) {
  const int d = st.local_dim();
  const std::size_t dim = hilbert_dim(st.num_sites(), d);
  const auto psi = dense_wavefunction(st);
  Configuration n(static_cast<std::size_t>(st.num_sites()));
  double worst = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    config_from_index(i, d, n);
    const double pn = std::norm(psi.amplitudes[i]);
    if (pn == 0.0) continue;
    AmplitudeCache cache(st, n);
    for (int x = 0; x < st.num_sites(); ++x) {
      for (int lv = 0; lv < d; ++lv) {
        if (lv == n[static_cast<std::size_t>(x)]) continue;
        Configuration m = n;
        m[static_cast<std::size_t>(x)] = lv;
        const std::size_t j = index_of(m, d);
        const double pm = std::norm(psi.amplitudes[j]);
        const double forward = pn * std::min(1.0, std::norm(cache.ratio(x, lv)));
        double backward = 0.0;
        if (pm > 0.0) {
          AmplitudeCache back(st, m);
          backward = pm * std::min(1.0, std::norm(back.ratio(x, n[static_cast<std::size_t>(x)])));
        }
        if (forward > 0.0 || backward > 0.0)
          worst = std::max(worst, std::abs(forward - backward) / std::max(forward, backward));
        ++pairs;
      }
    }
  }
  return {"detailed balance", worst <= tol, false,
          "max relative flux mismatch " + detail::fmt(worst) + " over " + std::to_string(pairs) + " moves"};
}

/// Every configuration of the toric-code state has amplitude
/// 2^{#plaquettes} when all plaquette parities are even and 0 otherwise,
/// through both the cache and the direct product.
inline CheckResult check_toric_parity(const Lattice& lat) {
  const auto st = toric_code_state(lat);
  const double full = std::pow(2.0, static_cast<double>(lat.plaquettes().size()));
  const std::size_t dim = hilbert_dim(lat.size(), 2);
  Configuration n(static_cast<std::size_t>(lat.size()));
  std::size_t bad = 0, even = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    config_from_index(i, 2, n);
    bool all_even = true;
    for (const auto& q : lat.plaquettes()) {
      int ones = 0;
      for (int x : q) ones += n[static_cast<std::size_t>(x)];
      all_even = all_even && ones % 2 == 0;
    }
    even += all_even ? 1 : 0;
    const cplx expect = all_even ? full : 0.0;
    AmplitudeCache cache(st, n);
    cplx direct = 1.0, cached = 1.0;
    for (int s = 0; s < st.num_strings(); ++s) {
      direct *= st.string_value(s, n);
      cached *= cache.string_value(s);
    }
    // the string factors are exact small integers; the log-domain total is
    // only good to rounding
    const cplx logged = cache.log_amplitude().value();
    if (direct != expect || cached != expect || std::abs(logged - expect) > 1e-12 * full) ++bad;
  }
  return {"toric-code parity " + std::to_string(lat.lx()) + "x" + std::to_string(lat.ly()), bad == 0, false,
          std::to_string(dim) + " configurations, " + std::to_string(even) + " even, " + std::to_string(bad) +
              " mismatches"};
}

inline CheckResult check_cost_scaling(const std::vector<int>& dims) {
  const Lattice lat(6, 6, Boundary::periodic);
  const Lattice open_lat(6, 6, Boundary::open);
  const double closed = fit_exponent(measure_scaling(lat, lines_pattern(lat), dims, 0.05));
  const double open = fit_exponent(measure_scaling(open_lat, lines_pattern(open_lat), dims, 0.05));
  return {"sweep cost exponent in D", true, true,
          "closed strings " + detail::fmt(closed) + ", open strings " + detail::fmt(open) + " (6x6 lines)"};
}

inline std::vector<CheckResult> run_self_checks(const CheckOptions& opt = {}) {
  std::vector<CheckResult> out;
  {
    const Lattice lat(4, 4, Boundary::open);
    const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 4, 3, 0.3);
    out.push_back(check_cache_drift(st, opt.flips, opt.corrupt_cache, 5));
  }
  {
    const Lattice lat(3, 3, Boundary::periodic);
    const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 3, 4, 0.3);
    out.push_back(check_ratios(st, 6));
  }
  {
    const Lattice lat(2, 3, Boundary::open);
    const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 8, 0.3);
    auto r = check_gradient(st, build_tfi(lat, 1.0, 0.7));
    r.name += " (TFI)";
    out.push_back(r);
    r = check_gradient(st, build_frustrated_xx(lat, 1.0, 0.5));
    r.name += " (frustrated XX)";
    out.push_back(r);
  }
  {
    const Lattice lat(2, 2, Boundary::open);
    out.push_back(check_detailed_balance(random_state(lat, named_pattern(lat, "lines"), 2, 9, 0.5)));
  }
  out.push_back(check_toric_parity(Lattice(2, 2, Boundary::open)));
  out.push_back(check_toric_parity(Lattice(3, 3, Boundary::open)));
  if (opt.timing) out.push_back(check_cost_scaling({4, 8, 16}));
  return out;
}

}  // namespace sbs
