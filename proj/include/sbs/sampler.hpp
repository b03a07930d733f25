#pragma once

#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "sbs/cache.hpp"
#include "sbs/hamiltonian.hpp"
#include "sbs/stats.hpp"

namespace sbs {

/// Sampling parameters. `samples` (M) counts retained samples pooled over
/// all chains; one sweep is N single-site proposals.
struct SamplerConfig {
  std::size_t samples = 2000;
  long burn_in_sweeps = -1;  // negative: 10 * N
  std::size_t thinning = 1;  // sweeps between retained samples
  int chains = 1;
  int threads = 1;
  std::uint64_t seed = 0;
};

/// Deterministic per-chain seed derived from (seed, stream, chain).
inline std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t stream, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(chain)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// One Markov chain over configurations with probability |<n|psi>|^2.
class Chain {
 public:
  static constexpr int kStartAttempts = 32;

  Chain(const StringBondState& state, std::uint64_t seed)
      : rng_(seed), cache_(state, start_configuration(state, rng_)) {}

  /// Proposes one single-site change with uniform site (and, for d > 2,
  /// uniform new level) and accepts with probability min(1, |ratio|^2).
  bool step() {
    const auto& st = cache_.state();
    const int site = site_dist(rng_, decltype(site_dist)::param_type(0, st.num_sites() - 1));
    const int d = st.local_dim();
    int level = 1 - cache_.level(site);
    if (d > 2) {
      level = site_dist(rng_, decltype(site_dist)::param_type(0, d - 2));
      if (level >= cache_.level(site)) ++level;
    }
    ++proposed_;
    const double p = std::norm(cache_.ratio(site, level));
    if (p >= 1.0 || unit_(rng_) < p) {
      cache_.apply(site, level);
      ++accepted_;
      return true;
    }
    return false;
  }

  void sweep() {
    for (int i = 0; i < cache_.state().num_sites(); ++i) step();
  }

  AmplitudeCache& cache() { return cache_; }
  const Configuration& config() const { return cache_.config(); }
  std::uint64_t accepted() const { return accepted_; }
  std::uint64_t proposed() const { return proposed_; }
  double acceptance() const {
    return proposed_ ? static_cast<double>(accepted_) / static_cast<double>(proposed_) : 0.0;
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  static Configuration start_configuration(const StringBondState& st, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> lv(0, st.local_dim() - 1);
    Configuration n(static_cast<std::size_t>(st.num_sites()));
    for (int attempt = 0; attempt < kStartAttempts; ++attempt) {
      for (auto& v : n) v = lv(rng);
      if (!st.amplitude(n).is_zero()) return n;
    }
    std::fill(n.begin(), n.end(), 0);
    if (!st.amplitude(n).is_zero()) return n;
    throw ZeroAmplitudeError("no nonzero-amplitude start configuration found after " +
                             std::to_string(kStartAttempts + 1) + " attempts");
  }

  std::mt19937_64 rng_;
  std::uniform_int_distribution<int> site_dist;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  AmplitudeCache cache_;
  std::uint64_t accepted_ = 0;
  std::uint64_t proposed_ = 0;
};

/// b-vector of tensor (s, p) on an arbitrary configuration, from scratch,
/// scaled by 1 / `denominator` instead of the string's own factor.
inline std::vector<cplx> environment_from_scratch(const StringBondState& st, int s, int p,
                                                  std::span<const int> n) {
  const auto& sites = st.pattern().string(s).sites;
  const int len = st.string_length(s);
  const int r0 = st.rows(s, 0);
  // P = M_0 ... M_{p-1}  (r0 x rows(p))
  std::vector<cplx> pre(static_cast<std::size_t>(r0 * r0)), tmp;
  kernels::set_identity(pre.data(), r0);
  int w = r0;
  for (int q = 0; q < p; ++q) {
    tmp.assign(static_cast<std::size_t>(r0 * st.cols(s, q)), 0.0);
    kernels::gemm(pre.data(), st.matrix(s, q, n[sites[q]]), tmp.data(), r0, w, st.cols(s, q));
    pre.swap(tmp);
    w = st.cols(s, q);
  }
  // S = M_{p+1} ... M_last  (cols(p) x cols(last))
  const int cl = st.cols(s, len - 1);
  std::vector<cplx> suf(static_cast<std::size_t>(cl * cl));
  kernels::set_identity(suf.data(), cl);
  int h = cl;
  for (int q = len - 1; q > p; --q) {
    tmp.assign(static_cast<std::size_t>(st.rows(s, q) * cl), 0.0);
    kernels::gemm(st.matrix(s, q, n[sites[q]]), suf.data(), tmp.data(), st.rows(s, q), h, cl);
    suf.swap(tmp);
    h = st.rows(s, q);
  }
  std::vector<cplx> env(static_cast<std::size_t>(st.cols(s, p) * st.rows(s, p)));
  kernels::gemm(suf.data(), pre.data(), env.data(), st.cols(s, p), cl, st.rows(s, p));
  return env;
}

/// Per-sample ingredients of the quadratic forms for one tensor A at (s, p):
/// b with b.A = <n|psi_A>/<n|psi_0> and a with a.A = <n|H|psi_A>/<n|psi_0>.
struct TensorRecord {
  std::vector<cplx> b;
  std::vector<cplx> a;
};

inline TensorRecord tensor_record(const LocalHamiltonian& h, AmplitudeCache& cache, TensorId id,
                                  cplx local_e) {
  const auto& st = cache.state();
  const int s = id.string, p = id.position;
  const int d = st.local_dim();
  const int r = st.rows(s, p), c = st.cols(s, p);
  TensorRecord rec;
  rec.b = cache.b_vector(s, p);
  // Branches that leave string s untouched contribute (their ratio) * b.
  cplx untouched = local_e;
  std::vector<cplx> touched(rec.b.size(), 0.0);
  const auto& string_sites = st.pattern().string(s).sites;
  auto on_string = [&](int site) {
    return std::find(string_sites.begin(), string_sites.end(), site) != string_sites.end();
  };
  Configuration n2 = cache.config();
  for (const auto& t : h.terms()) {
    bool hits = false;
    for (int x : t.support) hits = hits || on_string(x);
    if (!hits) continue;
    const int idx = local_index(cache.config(), t.support, d);
    for (const auto& br : t.branches) {
      const cplx coef = br.coeff[static_cast<std::size_t>(idx)];
      if (coef == cplx(0.0) || br.diagonal()) continue;
      bool touches = false;
      std::vector<SiteChange> changes;
      for (std::size_t i = 0; i < t.support.size(); ++i) {
        if (br.shift[i] == 0) continue;
        const int x = t.support[i];
        changes.push_back({x, (cache.level(x) + br.shift[i]) % d});
        touches = touches || on_string(x);
      }
      if (!touches) continue;
      // This branch was counted in local_e with the b-vector of n; move it.
      untouched -= coef * cache.ratio(changes);
      for (const auto& ch : changes) n2[static_cast<std::size_t>(ch.site)] = ch.level;
      // ratio of all other strings' factors, n -> n2
      cplx others = 1.0;
      std::vector<int> strings;
      for (const auto& ch : changes)
        for (const auto& inc : st.pattern().incidence(ch.site))
          if (inc.string != s) strings.push_back(inc.string);
      std::sort(strings.begin(), strings.end());
      strings.erase(std::unique(strings.begin(), strings.end()), strings.end());
      for (int t2 : strings) others *= st.string_value(t2, n2) / cache.string_value(t2);
      const auto env = environment_from_scratch(st, s, p, n2);
      const cplx scale = coef * others / cache.string_value(s);
      const int k = n2[static_cast<std::size_t>(string_sites[static_cast<std::size_t>(p)])];
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          touched[static_cast<std::size_t>((k * r + i) * c + j)] += scale * env[static_cast<std::size_t>(j * r + i)];
      for (const auto& ch : changes) n2[static_cast<std::size_t>(ch.site)] = cache.level(ch.site);
    }
  }
  rec.a.resize(rec.b.size());
  for (std::size_t i = 0; i < rec.a.size(); ++i) rec.a[i] = untouched * rec.b[i] + touched[i];
  return rec;
}

struct SampleRequest {
  bool gradient = false;
  std::vector<TensorId> tracked;
  std::vector<Observable> observables;
};

/// Everything recorded during one sampling run, kept per chain so merging
/// is order-fixed.
struct SampleBatch {
  std::vector<std::vector<cplx>> energies;                  // [chain][sample]
  std::vector<std::vector<std::vector<cplx>>> observables;  // [observable][chain][sample]
  std::vector<std::vector<std::vector<TensorRecord>>> tracked;  // [tensor][chain][sample]
  std::vector<TensorId> tracked_ids;
  std::vector<cplx> sum_conj_b;    // sum_n conj(b_n), all parameters
  std::vector<cplx> sum_conj_b_h;  // sum_n conj(b_n) h_n
  std::size_t count = 0;
  std::uint64_t accepted = 0;
  std::uint64_t proposed = 0;

  double acceptance() const {
    return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  }

  /// Plain mean of h_n over every retained sample.
  cplx mean_energy() const {
    cplx s = 0.0;
    for (const auto& c : energies)
      for (const auto& v : c) s += v;
    return count ? s / static_cast<double>(count) : cplx(0.0);
  }

  EstimateWithError energy() const { return pooled(energies); }
  EstimateWithError observable(std::size_t i) const { return pooled(observables[i]); }

  static EstimateWithError pooled(const std::vector<std::vector<cplx>>& per_chain) {
    std::vector<EstimateWithError> parts;
    for (const auto& c : per_chain) parts.push_back(binning_estimate(c));
    return pool(parts);
  }
};

namespace detail {

struct ChainResult {
  std::vector<cplx> energies;
  std::vector<std::vector<cplx>> observables;
  std::vector<std::vector<TensorRecord>> tracked;
  std::vector<cplx> sum_conj_b;
  std::vector<cplx> sum_conj_b_h;
  std::uint64_t accepted = 0;
  std::uint64_t proposed = 0;
};

inline void accumulate_gradient(AmplitudeCache& cache, cplx h, std::vector<cplx>& sum_b,
                                std::vector<cplx>& sum_bh) {
  const auto& st = cache.state();
  for (int s = 0; s < st.num_strings(); ++s) {
    const cplx inv = 1.0 / cache.string_value(s);
    const auto& sites = st.pattern().string(s).sites;
    for (int p = 0; p < st.string_length(s); ++p) {
      const int r = st.rows(s, p), c = st.cols(s, p);
      const auto env = cache.environment(s, p);
      const std::size_t base = st.index(s, p, cache.level(sites[static_cast<std::size_t>(p)]), 0, 0);
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
          const cplx b = std::conj(env[static_cast<std::size_t>(j * r + i)] * inv);
          const std::size_t at = base + static_cast<std::size_t>(i * c + j);
          sum_b[at] += b;
          sum_bh[at] += b * h;
        }
      }
    }
  }
}

inline ChainResult run_chain(const StringBondState& st, const LocalHamiltonian& h,
                             const SamplerConfig& cfg, const SampleRequest& req, std::size_t samples,
                             std::uint64_t seed) {
  ChainResult out;
  Chain chain(st, seed);
  const long burn = cfg.burn_in_sweeps < 0 ? 10L * st.num_sites() : cfg.burn_in_sweeps;
  for (long i = 0; i < burn; ++i) chain.sweep();
  const std::uint64_t acc0 = chain.accepted(), prop0 = chain.proposed();
  out.observables.resize(req.observables.size());
  out.tracked.resize(req.tracked.size());
  if (req.gradient) {
    out.sum_conj_b.assign(st.num_params(), 0.0);
    out.sum_conj_b_h.assign(st.num_params(), 0.0);
  }
  out.energies.reserve(samples);
  for (std::size_t m = 0; m < samples; ++m) {
    for (std::size_t t = 0; t < std::max<std::size_t>(cfg.thinning, 1); ++t) chain.sweep();
    auto& cache = chain.cache();
    const cplx e = local_energy(h, cache);
    out.energies.push_back(e);
    for (std::size_t o = 0; o < req.observables.size(); ++o)
      out.observables[o].push_back(local_value(req.observables[o], cache));
    for (std::size_t t = 0; t < req.tracked.size(); ++t)
      out.tracked[t].push_back(tensor_record(h, cache, req.tracked[t], e));
    if (req.gradient) accumulate_gradient(cache, e, out.sum_conj_b, out.sum_conj_b_h);
  }
  out.accepted = chain.accepted() - acc0;
  out.proposed = chain.proposed() - prop0;
  return out;
}

}  // namespace detail

/// Runs `cfg.chains` independent chains (optionally on several threads) and
/// merges their records in chain order. `stream` separates the random
/// streams of successive runs with the same base seed.
inline SampleBatch sample(const StringBondState& st, const LocalHamiltonian& h,
                          const SamplerConfig& cfg, const SampleRequest& req = {},
                          std::uint64_t stream = 0) {
  if (cfg.samples < 1) throw InputError("sample count M must be at least 1");
  const int chains = std::max(cfg.chains, 1);
  std::vector<detail::ChainResult> results(static_cast<std::size_t>(chains));
  auto work = [&](int c) {
    const std::size_t share = cfg.samples / static_cast<std::size_t>(chains) +
                              (static_cast<std::size_t>(c) < cfg.samples % static_cast<std::size_t>(chains) ? 1 : 0);
    results[static_cast<std::size_t>(c)] =
        detail::run_chain(st, h, cfg, req, share, chain_seed(cfg.seed, stream, c));
  };
  const int threads = std::clamp(cfg.threads, 1, chains);
  if (threads == 1) {
    for (int c = 0; c < chains; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int c = t; c < chains; c += threads) work(c);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  SampleBatch batch;
  batch.tracked_ids = req.tracked;
  batch.observables.resize(req.observables.size());
  batch.tracked.resize(req.tracked.size());
  if (req.gradient) {
    batch.sum_conj_b.assign(st.num_params(), 0.0);
    batch.sum_conj_b_h.assign(st.num_params(), 0.0);
  }
  for (auto& r : results) {
    batch.count += r.energies.size();
    batch.accepted += r.accepted;
    batch.proposed += r.proposed;
    batch.energies.push_back(std::move(r.energies));
    for (std::size_t o = 0; o < r.observables.size(); ++o)
      batch.observables[o].push_back(std::move(r.observables[o]));
    for (std::size_t t = 0; t < r.tracked.size(); ++t)
      batch.tracked[t].push_back(std::move(r.tracked[t]));
    for (std::size_t i = 0; i < r.sum_conj_b.size(); ++i) {
      batch.sum_conj_b[i] += r.sum_conj_b[i];
      batch.sum_conj_b_h[i] += r.sum_conj_b_h[i];
    }
  }
  return batch;
}

inline EstimateWithError sample_energy(const StringBondState& st, const LocalHamiltonian& h,
                                       const SamplerConfig& cfg) {
  return sample(st, h, cfg).energy();
}

inline std::vector<EstimateWithError> sample_observables(const StringBondState& st,
                                                         const LocalHamiltonian& h,
                                                         const std::vector<Observable>& observables,
                                                         const SamplerConfig& cfg) {
  SampleRequest req;
  req.observables = observables;
  const auto batch = sample(st, h, cfg, req);
  std::vector<EstimateWithError> out;
  for (std::size_t i = 0; i < observables.size(); ++i) out.push_back(batch.observable(i));
  return out;
}

}  // namespace sbs
