#pragma once

#include <cmath>
#include <vector>

#include "sbs/exact.hpp"
#include "sbs/sampler.hpp"

namespace sbs {

/// Exact sums over all configurations, evaluated with the same cache-based
/// local estimators the sampler uses. Weights p(n) are normalized.
struct EnumeratedEstimates {
  double log_norm = 0.0;  // log sum_n |<n|psi>|^2
  cplx energy = 0.0;
  std::vector<cplx> observables;
  std::vector<cplx> mean_conj_b;    // sum_n p(n) conj(b_n), if requested
  std::vector<cplx> mean_conj_b_h;  // sum_n p(n) conj(b_n) h_n
  std::vector<double> probabilities;  // p(n) in lexicographic order
};

/// Calls fn(index, cache) for every configuration in lexicographic order.
template <class Fn>
void for_each_configuration(const StringBondState& st, Fn&& fn) {
  const int d = st.local_dim();
  const std::size_t dim = hilbert_dim(st.num_sites(), d);
  Configuration n(static_cast<std::size_t>(st.num_sites()));
  for (std::size_t i = 0; i < dim; ++i) {
    config_from_index(i, d, n);
    AmplitudeCache cache(st, n);
    fn(i, cache);
  }
}

inline EnumeratedEstimates enumerate_estimates(const StringBondState& st, const LocalHamiltonian& h,
                                               const std::vector<Observable>& observables = {},
                                               bool gradient = false) {
  EnumeratedEstimates out;
  const std::size_t dim = hilbert_dim(st.num_sites(), st.local_dim());
  std::vector<double> logp(dim, -std::numeric_limits<double>::infinity());
  std::vector<cplx> energies(dim, 0.0);
  std::vector<std::vector<cplx>> obs(observables.size(), std::vector<cplx>(dim, 0.0));
  double top = -std::numeric_limits<double>::infinity();
  for_each_configuration(st, [&](std::size_t i, AmplitudeCache& cache) {
    if (!cache.nonzero()) return;
    logp[i] = 2.0 * cache.log_amplitude().log_abs;
    top = std::max(top, logp[i]);
    energies[i] = local_energy(h, cache);
    for (std::size_t o = 0; o < observables.size(); ++o) obs[o][i] = local_value(observables[o], cache);
  });
  if (std::isinf(top)) throw ZeroAmplitudeError("state vanishes on every configuration");
  out.probabilities.resize(dim);
  double z = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    out.probabilities[i] = std::isinf(logp[i]) ? 0.0 : std::exp(logp[i] - top);
    z += out.probabilities[i];
  }
  out.log_norm = top + std::log(z);
  for (auto& p : out.probabilities) p /= z;
  out.observables.assign(observables.size(), 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    out.energy += out.probabilities[i] * energies[i];
    for (std::size_t o = 0; o < observables.size(); ++o)
      out.observables[o] += out.probabilities[i] * obs[o][i];
  }
  if (gradient) {
    out.mean_conj_b.assign(st.num_params(), 0.0);
    out.mean_conj_b_h.assign(st.num_params(), 0.0);
    std::vector<cplx> sb(st.num_params()), sbh(st.num_params());
    for_each_configuration(st, [&](std::size_t i, AmplitudeCache& cache) {
      if (out.probabilities[i] == 0.0) return;
      std::fill(sb.begin(), sb.end(), cplx(0.0));
      std::fill(sbh.begin(), sbh.end(), cplx(0.0));
      detail::accumulate_gradient(cache, energies[i], sb, sbh);
      for (std::size_t c = 0; c < sb.size(); ++c) {
        out.mean_conj_b[c] += out.probabilities[i] * sb[c];
        out.mean_conj_b_h[c] += out.probabilities[i] * sbh[c];
      }
    });
  }
  return out;
}

}  // namespace sbs
