#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "sbs/types.hpp"

namespace sbs {

struct EstimateWithError {
  cplx mean = 0.0;
  double std_error = 0.0;
  std::size_t bin_count = 0;
  double autocorrelation = 0.0;  // integrated autocorrelation time, in samples
  std::size_t samples = 0;
};

struct BinningLevel {
  std::size_t bin_size;
  std::size_t bins;
  double std_error;
};

/// Standard error of the mean at every binning level that still has at
/// least `min_bins` bins (bin sizes 1, 2, 4, ...).
inline std::vector<BinningLevel> binning_levels(std::span<const double> x, std::size_t min_bins = 32) {
  std::vector<BinningLevel> levels;
  std::vector<double> cur(x.begin(), x.end());
  std::size_t size = 1;
  while (cur.size() >= std::max<std::size_t>(min_bins, 2)) {
    const double n = static_cast<double>(cur.size());
    const double mean = std::accumulate(cur.begin(), cur.end(), 0.0) / n;
    double var = 0.0;
    for (double v : cur) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    levels.push_back({size, cur.size(), std::sqrt(var / n)});
    std::vector<double> next(cur.size() / 2);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = 0.5 * (cur[2 * i] + cur[2 * i + 1]);
    cur.swap(next);
    size *= 2;
  }
  return levels;
}

/// Mean and binning error bar of a correlated series. The error is the
/// largest level value (the plateau for a converged analysis).
inline EstimateWithError binning_estimate(std::span<const cplx> series) {
  EstimateWithError e;
  e.samples = series.size();
  if (series.empty()) return e;
  cplx sum = 0.0;
  for (const cplx& v : series) sum += v;
  e.mean = sum / static_cast<double>(series.size());
  std::vector<double> re(series.size());
  std::transform(series.begin(), series.end(), re.begin(), [](const cplx& v) { return v.real(); });
  const auto levels = binning_levels(re);
  if (levels.empty()) {
    // Too short for binning: plain standard error.
    double var = 0.0;
    for (double v : re) var += (v - e.mean.real()) * (v - e.mean.real());
    const double n = static_cast<double>(re.size());
    e.std_error = n > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    e.bin_count = re.size();
    return e;
  }
  auto best = std::max_element(levels.begin(), levels.end(),
                               [](const BinningLevel& a, const BinningLevel& b) { return a.std_error < b.std_error; });
  e.std_error = best->std_error;
  e.bin_count = best->bins;
  const double naive = levels.front().std_error;
  e.autocorrelation = naive > 0.0 ? 0.5 * (e.std_error * e.std_error / (naive * naive) - 1.0) : 0.0;
  return e;
}

/// Inverse-variance pooling of independent estimates, in the given order.
/// Falls back to sample-count weights when any error bar is zero.
inline EstimateWithError pool(std::span<const EstimateWithError> parts) {
  EstimateWithError out;
  if (parts.empty()) return out;
  bool any_zero = false;
  for (const auto& p : parts) {
    out.samples += p.samples;
    out.bin_count += p.bin_count;
    any_zero = any_zero || !(p.std_error > 0.0);
  }
  if (parts.size() == 1) return parts.front();
  cplx mean = 0.0;
  double wsum = 0.0, var = 0.0, tau = 0.0;
  for (const auto& p : parts) {
    const double w = any_zero ? static_cast<double>(p.samples) : 1.0 / (p.std_error * p.std_error);
    mean += w * p.mean;
    wsum += w;
    tau += static_cast<double>(p.samples) * p.autocorrelation;
  }
  out.mean = mean / wsum;
  if (any_zero) {
    for (const auto& p : parts) {
      const double w = static_cast<double>(p.samples) / wsum;
      var += w * w * p.std_error * p.std_error;
    }
    out.std_error = std::sqrt(var);
  } else {
    out.std_error = std::sqrt(1.0 / wsum);
  }
  out.autocorrelation = tau / static_cast<double>(out.samples);
  return out;
}

}  // namespace sbs
