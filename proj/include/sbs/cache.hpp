#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "sbs/kernels.hpp"
#include "sbs/state.hpp"

namespace sbs {

/// Per-configuration contraction cache for a StringBondState.
///
/// For every string s it keeps prefix products P_k = M_0 ... M_{k-1} and
/// suffix products S_k = M_{k+1} ... M_last, extended lazily, plus the
/// environments E_k = S_k P_k, so that the string factor with the tensor at
/// position k replaced by M is tr(M E_k). The cache points at its state; the
/// state must not change while the cache is bound to it.
class AmplitudeCache {
 public:
  AmplitudeCache(const StringBondState& state, Configuration n)
      : state_(&state), config_(std::move(n)) {
    if (static_cast<int>(config_.size()) != state.num_sites())
      throw InputError("configuration length does not match the lattice");
    for (int v : config_)
      if (v < 0 || v >= state.local_dim()) throw InputError("configuration level out of range");
    const int d2 = state.bond_dim() * state.bond_dim();
    strings_.resize(static_cast<std::size_t>(state.num_strings()));
    for (int s = 0; s < state.num_strings(); ++s) {
      auto& c = strings_[static_cast<std::size_t>(s)];
      const auto len = static_cast<std::size_t>(state.string_length(s));
      c.prefix.assign(len * d2, 0.0);
      c.suffix.assign(len * d2, 0.0);
      c.env.assign(len * d2, 0.0);
      c.env_valid.assign(len, 0);
    }
    scratch_a_.resize(static_cast<std::size_t>(d2));
    scratch_b_.resize(static_cast<std::size_t>(d2));
    rebuild();
  }

  const StringBondState& state() const { return *state_; }
  const Configuration& config() const { return config_; }
  int level(int site) const { return config_[static_cast<std::size_t>(site)]; }
  LogAmplitude log_amplitude() const {
    LogAmplitude a = amp_;
    a *= pending_;
    return a;
  }
  cplx string_value(int s) const { return strings_[static_cast<std::size_t>(s)].value; }
  bool nonzero() const { return !amp_.is_zero(); }

  /// Recomputes every cached product and factor from the matrices.
  void rebuild() {
    amp_ = {0.0, 0.0};
    pending_ = 1.0;
    memo_site_ = -1;
    for (int s = 0; s < state_->num_strings(); ++s) {
      auto& c = strings_[static_cast<std::size_t>(s)];
      const int len = state_->string_length(s);
      kernels::set_identity(c.prefix.data(), state_->rows(s, 0));
      kernels::set_identity(slot(c.suffix, len - 1), state_->cols(s, len - 1));
      c.prefix_valid = 0;
      c.suffix_valid = len - 1;
      std::fill(c.env_valid.begin(), c.env_valid.end(), 0);
      extend_prefix(s, len - 1);
      c.value = kernels::trace_product(slot(c.prefix, len - 1), mat(s, len - 1), state_->rows(s, 0),
                                       state_->rows(s, len - 1));
      amp_ *= c.value;
    }
    updates_since_refresh_ = 0;
  }

  /// E_p = S_p P_p for string s, a cols(p) x rows(p) row-major matrix.
  std::span<const cplx> environment(int s, int p) {
    auto& c = strings_[static_cast<std::size_t>(s)];
    const auto d2 = static_cast<std::size_t>(state_->bond_dim() * state_->bond_dim());
    cplx* e = c.env.data() + static_cast<std::size_t>(p) * d2;
    const int r = state_->rows(s, p), cl = state_->cols(s, p);
    if (!c.env_valid[static_cast<std::size_t>(p)]) {
      extend_prefix(s, p);
      extend_suffix(s, p);
      const int r0 = state_->rows(s, 0);
      kernels::gemm(slot(c.suffix, p), slot(c.prefix, p), e, cl, r0, r);
      c.env_valid[static_cast<std::size_t>(p)] = 1;
    }
    return {e, static_cast<std::size_t>(r * cl)};
  }

  /// <n'|psi>/<n|psi> for n' = n with `site` set to `new_level`.
  cplx ratio(int site, int new_level) {
    require_nonzero();
    if (level(site) == new_level) return 1.0;
    // The new string factors are kept so that apply() of the same move reuses them.
    new_values_.clear();
    cplx r = 1.0;
    for (const auto& inc : state_->pattern().incidence(site)) {
      const cplx v = changed_value(inc.string, inc.position, new_level);
      new_values_.push_back(v);
      r *= v * kernels::reciprocal(strings_[static_cast<std::size_t>(inc.string)].value);
    }
    memo_site_ = site;
    memo_level_ = new_level;
    return r;
  }

  /// <n'|psi>/<n|psi> for several simultaneous changes on distinct sites.
  cplx ratio(std::span<const SiteChange> changes) {
    require_nonzero();
    if (changes.size() == 1) return ratio(changes[0].site, changes[0].level);
    group(changes);
    cplx r = 1.0;
    for (std::size_t a = 0; a < grouped_.size();) {
      std::size_t b = a;
      while (b < grouped_.size() && grouped_[b].string == grouped_[a].string) ++b;
      const int s = grouped_[a].string;
      r *= segment_value(a, b) / strings_[static_cast<std::size_t>(s)].value;
      a = b;
    }
    return r;
  }

  /// Moves the cache to n' = n with `site` set to `new_level`.
  void apply(int site, int new_level) {
    if (level(site) == new_level) return;
    // A site appears at most once per string, so each incidence is its own group.
    const auto& incs = state_->pattern().incidence(site);
    if (memo_site_ != site || memo_level_ != new_level) {
      new_values_.clear();
      for (const auto& inc : incs)
        new_values_.push_back(changed_value(inc.string, inc.position, new_level));
    }
    memo_site_ = -1;
    config_[static_cast<std::size_t>(site)] = new_level;
    cplx factor = 1.0;
    bool was_zero = false;
    for (std::size_t i = 0; i < incs.size(); ++i) {
      auto& c = strings_[static_cast<std::size_t>(incs[i].string)];
      const cplx old = c.value;
      c.value = new_values_[i];
      if (old != cplx(0.0)) factor *= c.value * kernels::reciprocal(old);
      else was_zero = true;
      if (!skip_invalidation_) {
        c.prefix_valid = std::min(c.prefix_valid, incs[i].position);
        c.suffix_valid = std::max(c.suffix_valid, incs[i].position);
      }
      std::fill(c.env_valid.begin(), c.env_valid.end(), 0);
    }
    if (was_zero || factor == cplx(0.0)) {
      amp_ = {};
      pending_ = 1.0;
    } else {
      pending_ *= factor;
      const double m = std::norm(pending_);
      if (m > 1e200 || m < 1e-200) fold_pending();
    }
    if (++updates_since_refresh_ >= kRefreshInterval) refresh_amplitude();
  }

  void apply(std::span<const SiteChange> changes) {
    group(changes);
    std::erase_if(grouped_, [this](const Entry& e) {
      return level(state_->pattern().string(e.string).sites[static_cast<std::size_t>(e.position)]) ==
             e.level;
    });
    memo_site_ = -1;
    if (grouped_.empty()) return;
    new_values_.clear();
    for (std::size_t a = 0; a < grouped_.size();) {
      std::size_t b = a;
      while (b < grouped_.size() && grouped_[b].string == grouped_[a].string) ++b;
      new_values_.push_back(b - a == 1 ? changed_value(grouped_[a].string, grouped_[a].position,
                                                       grouped_[a].level)
                                       : segment_value(a, b));
      a = b;
    }
    for (const auto& ch : changes) config_[static_cast<std::size_t>(ch.site)] = ch.level;
    std::size_t v = 0;
    for (std::size_t a = 0; a < grouped_.size();) {
      std::size_t b = a;
      while (b < grouped_.size() && grouped_[b].string == grouped_[a].string) ++b;
      auto& c = strings_[static_cast<std::size_t>(grouped_[a].string)];
      const cplx old = c.value;
      c.value = new_values_[v++];
      if (old != cplx(0.0)) amp_ *= c.value / old;
      else amp_ = {};
      if (!skip_invalidation_) {
        c.prefix_valid = std::min(c.prefix_valid, grouped_[a].position);
        c.suffix_valid = std::max(c.suffix_valid, grouped_[b - 1].position);
      }
      std::fill(c.env_valid.begin(), c.env_valid.end(), 0);
      a = b;
    }
    if (++updates_since_refresh_ >= kRefreshInterval) refresh_amplitude();
  }

  /// Coefficients b with sum_c b[c] A[c] = <n|psi_A>/<n|psi> when the tensor
  /// at (s, p) is replaced by A. Layout matches the state's tensor layout.
  void b_vector(int s, int p, std::span<cplx> out) {
    require_nonzero();
    const int r = state_->rows(s, p), cl = state_->cols(s, p);
    std::fill(out.begin(), out.end(), cplx(0.0));
    const auto env = environment(s, p);
    const cplx inv = 1.0 / strings_[static_cast<std::size_t>(s)].value;
    const int k = level(state_->pattern().string(s).sites[static_cast<std::size_t>(p)]);
    cplx* block = out.data() + static_cast<std::ptrdiff_t>(k) * r * cl;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < cl; ++j) block[i * cl + j] = env[static_cast<std::size_t>(j * r + i)] * inv;
  }

  std::vector<cplx> b_vector(int s, int p) {
    std::vector<cplx> out(static_cast<std::size_t>(state_->tensor_size(s, p)));
    b_vector(s, p, out);
    return out;
  }

  /// Test hook: when set, apply() leaves stale prefix/suffix products in
  /// place. Used by the self-check to prove the cache audit can fail.
  void set_skip_invalidation(bool on) { skip_invalidation_ = on; }

 private:
  struct StringCache {
    std::vector<cplx> prefix;
    std::vector<cplx> suffix;
    std::vector<cplx> env;
    std::vector<char> env_valid;
    int prefix_valid = 0;
    int suffix_valid = 0;
    cplx value = 0.0;
  };
  struct Entry {
    int string;
    int position;
    int level;
  };

  static constexpr int kRefreshInterval = 256;

  cplx* slot(std::vector<cplx>& buf, int k) const {
    return buf.data() + static_cast<std::size_t>(k) * state_->bond_dim() * state_->bond_dim();
  }
  const cplx* mat(int s, int p) const {
    return state_->matrix(s, p, level(state_->pattern().string(s).sites[static_cast<std::size_t>(p)]));
  }

  void require_nonzero() const {
    if (amp_.is_zero()) throw ZeroAmplitudeError("amplitude of the bound configuration is zero");
  }

  void fold_pending() {
    amp_ *= pending_;
    pending_ = 1.0;
  }

  void refresh_amplitude() {
    pending_ = 1.0;
    amp_ = {0.0, 0.0};
    for (const auto& c : strings_) amp_ *= c.value;
    updates_since_refresh_ = 0;
  }

  void extend_prefix(int s, int k) {
    auto& c = strings_[static_cast<std::size_t>(s)];
    const int r0 = state_->rows(s, 0);
    while (c.prefix_valid < k) {
      const int q = c.prefix_valid;
      kernels::gemm(slot(c.prefix, q), mat(s, q), slot(c.prefix, q + 1), r0, state_->rows(s, q),
                    state_->cols(s, q));
      ++c.prefix_valid;
    }
  }

  void extend_suffix(int s, int k) {
    auto& c = strings_[static_cast<std::size_t>(s)];
    const int len = state_->string_length(s);
    const int cl = state_->cols(s, len - 1);
    while (c.suffix_valid > k) {
      const int q = c.suffix_valid;
      kernels::gemm(mat(s, q), slot(c.suffix, q), slot(c.suffix, q - 1), state_->rows(s, q),
                    state_->cols(s, q), cl);
      --c.suffix_valid;
    }
  }

  cplx changed_value(int s, int p, int new_level) {
    const auto env = environment(s, p);
    return kernels::trace_product(state_->matrix(s, p, new_level), env.data(), state_->rows(s, p),
                                  state_->cols(s, p));
  }

  void group(std::span<const SiteChange> changes) {
    grouped_.clear();
    for (const auto& ch : changes)
      for (const auto& inc : state_->pattern().incidence(ch.site))
        grouped_.push_back({inc.string, inc.position, ch.level});
    std::sort(grouped_.begin(), grouped_.end(), [](const Entry& x, const Entry& y) {
      return x.string != y.string ? x.string < y.string : x.position < y.position;
    });
  }

  // New factor of one string whose changed positions are grouped_[a, b).
  cplx segment_value(std::size_t a, std::size_t b) {
    const int s = grouped_[a].string;
    if (b - a == 1) return changed_value(s, grouped_[a].position, grouped_[a].level);
    auto& c = strings_[static_cast<std::size_t>(s)];
    const int first = grouped_[a].position;
    const int last = grouped_[b - 1].position;
    extend_prefix(s, first);
    extend_suffix(s, last);
    const auto& sites = state_->pattern().string(s).sites;
    const int r0 = state_->rows(s, 0);
    std::size_t next = a;
    auto* acc = scratch_a_.data();
    auto* out = scratch_b_.data();
    std::copy_n(slot(c.prefix, first), r0 * state_->rows(s, first), acc);
    for (int q = first; q <= last; ++q) {
      int lv = level(sites[static_cast<std::size_t>(q)]);
      if (next < b && grouped_[next].position == q) lv = grouped_[next++].level;
      kernels::gemm(acc, state_->matrix(s, q, lv), out, r0, state_->rows(s, q), state_->cols(s, q));
      std::swap(acc, out);
    }
    return kernels::trace_product(acc, slot(c.suffix, last), r0, state_->cols(s, last));
  }

  const StringBondState* state_;
  Configuration config_;
  std::vector<StringCache> strings_;
  LogAmplitude amp_;
  cplx pending_ = 1.0;  // product of flip ratios not yet folded into amp_
  int memo_site_ = -1;
  int memo_level_ = 0;
  int updates_since_refresh_ = 0;
  bool skip_invalidation_ = false;
  std::vector<Entry> grouped_;
  std::vector<cplx> new_values_;
  std::vector<cplx> scratch_a_;
  std::vector<cplx> scratch_b_;
};

}  // namespace sbs
