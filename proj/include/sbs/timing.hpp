#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "sbs/cache.hpp"
#include "sbs/state.hpp"

namespace sbs {

struct ScalingPoint {
  int bond_dim = 0;
  double seconds = 0.0;  // median time of one full sweep
};

/// Median wall time of a full sweep in which every site, in order, has its
/// ratio evaluated and the flip applied. At least `min_sweeps` sweeps and at
/// least `min_seconds` of work are timed.
inline double sweep_seconds(const StringBondState& st, int min_sweeps = 3, double min_seconds = 0.2,
                            std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Configuration n(static_cast<std::size_t>(st.num_sites()));
  for (auto& v : n) v = static_cast<int>(rng() % static_cast<std::uint64_t>(st.local_dim()));
  AmplitudeCache cache(st, n);
  const int d = st.local_dim();
  volatile double sink = 0.0;
  auto one_sweep = [&] {
    for (int x = 0; x < st.num_sites(); ++x) {
      const int next = (cache.level(x) + 1) % d;
      sink = sink + std::abs(cache.ratio(x, next));
      cache.apply(x, next);
    }
  };
  one_sweep();
  std::vector<double> times;
  double total = 0.0;
  while (static_cast<int>(times.size()) < min_sweeps || total < min_seconds) {
    const auto t0 = std::chrono::steady_clock::now();
    one_sweep();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    times.push_back(dt);
    total += dt;
  }
  std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
  return times[times.size() / 2];
}

/// Least-squares slope of log(seconds) against log(D).
inline double fit_exponent(const std::vector<ScalingPoint>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (const auto& p : pts) {
    const double x = std::log(p.bond_dim), y = std::log(p.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline std::vector<ScalingPoint> measure_scaling(const Lattice& lat, const StringPattern& pattern,
                                                 const std::vector<int>& dims, double min_seconds = 0.2) {
  std::vector<ScalingPoint> pts;
  for (int dim : dims) {
    const auto st = random_state(lat, pattern, dim, 11);
    pts.push_back({dim, sweep_seconds(st, 3, min_seconds)});
  }
  return pts;
}

}  // namespace sbs
