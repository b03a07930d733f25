#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sbs/kernels.hpp"
#include "sbs/lattice.hpp"
#include "sbs/pattern.hpp"
#include "sbs/types.hpp"

namespace sbs {

/// Location of one variational tensor: the matrices (M_k), k = 0..d-1, that
/// string `string` carries at its `position`-th site.
struct TensorId {
  int string = 0;
  int position = 0;
  friend bool operator==(const TensorId&, const TensorId&) = default;
};

/// A string-bond state: one d-tuple of matrices per (string, position).
///
/// Closed strings hold D x D matrices and contribute a trace. Open strings
/// hold a 1 x D row at their first position and a D x 1 column at their
/// last, so each factor is a scalar contraction. All parameters live in a
/// single flat complex buffer ordered (string, position, level, row, col)
/// with row-major matrices; `index()` maps into it.
class StringBondState {
 public:
  StringBondState(Lattice lattice, StringPattern pattern, int bond_dim, bool real_only = false)
      : lattice_(std::move(lattice)), pattern_(std::move(pattern)), bond_dim_(bond_dim),
        real_only_(real_only) {
    if (bond_dim < 1) throw InputError("bond dimension must be positive");
    if (pattern_.num_sites() != lattice_.size())
      throw InputError("pattern covers " + std::to_string(pattern_.num_sites()) +
                       " sites but the lattice has " + std::to_string(lattice_.size()));
    layout();
  }

  const Lattice& lattice() const { return lattice_; }
  const StringPattern& pattern() const { return pattern_; }
  int bond_dim() const { return bond_dim_; }
  int local_dim() const { return lattice_.local_dim(); }
  int num_sites() const { return lattice_.size(); }
  int num_strings() const { return pattern_.num_strings(); }
  bool real_only() const { return real_only_; }
  int string_length(int s) const { return static_cast<int>(pattern_.string(s).sites.size()); }

  int rows(int s, int p) const {
    return pattern_.string(s).topology == Topology::open && p == 0 ? 1 : bond_dim_;
  }
  int cols(int s, int p) const {
    return pattern_.string(s).topology == Topology::open && p == string_length(s) - 1
               ? 1
               : bond_dim_;
  }
  /// Number of complex entries in one site tensor (d matrices).
  int tensor_size(int s, int p) const { return local_dim() * rows(s, p) * cols(s, p); }
  std::size_t tensor_offset(int s, int p) const { return offsets_[s][p]; }
  std::size_t index(int s, int p, int level, int i, int j) const {
    return offsets_[s][p] +
           static_cast<std::size_t>((level * rows(s, p) + i) * cols(s, p) + j);
  }

  const cplx* matrix(int s, int p, int level) const { return &params_[index(s, p, level, 0, 0)]; }
  cplx* matrix(int s, int p, int level) { return &params_[index(s, p, level, 0, 0)]; }

  std::span<const cplx> tensor(int s, int p) const {
    return {&params_[offsets_[s][p]], static_cast<std::size_t>(tensor_size(s, p))};
  }
  std::span<cplx> tensor(int s, int p) {
    return {&params_[offsets_[s][p]], static_cast<std::size_t>(tensor_size(s, p))};
  }

  std::span<const cplx> params() const { return params_; }
  std::span<cplx> params() { return params_; }
  std::size_t num_params() const { return params_.size(); }

  /// All (string, position) pairs in parameter order.
  std::vector<TensorId> tensors() const {
    std::vector<TensorId> ids;
    for (int s = 0; s < num_strings(); ++s)
      for (int p = 0; p < string_length(s); ++p) ids.push_back({s, p});
    return ids;
  }

  /// Factor of string s on configuration n, by direct multiplication.
  cplx string_value(int s, std::span<const int> n) const {
    const auto& sites = pattern_.string(s).sites;
    const int len = string_length(s);
    const int r0 = rows(s, 0);
    std::vector<cplx> acc(static_cast<std::size_t>(r0 * r0));
    kernels::set_identity(acc.data(), r0);
    std::vector<cplx> next;
    int width = r0;
    for (int p = 0; p < len; ++p) {
      const int c = cols(s, p);
      next.assign(static_cast<std::size_t>(r0 * c), 0.0);
      kernels::gemm(acc.data(), matrix(s, p, n[sites[p]]), next.data(), r0, width, c);
      acc.swap(next);
      width = c;
    }
    cplx t = 0.0;
    for (int i = 0; i < r0; ++i) t += acc[static_cast<std::size_t>(i * width + i)];
    return t;
  }

  /// <n|psi> = prod_s string_value(s, n), without any caching.
  LogAmplitude amplitude(std::span<const int> n) const {
    LogAmplitude a{0.0, 0.0};
    for (int s = 0; s < num_strings(); ++s) {
      a *= string_value(s, n);
      if (a.is_zero()) break;
    }
    return a;
  }

  /// Sets every matrix to identity (or e_0 for boundary vectors) plus
  /// `noise` times a complex Gaussian.
  void randomize(std::uint64_t seed, double noise = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int s = 0; s < num_strings(); ++s) {
      for (int p = 0; p < string_length(s); ++p) {
        for (int k = 0; k < local_dim(); ++k) {
          cplx* m = matrix(s, p, k);
          for (int i = 0; i < rows(s, p); ++i) {
            for (int j = 0; j < cols(s, p); ++j) {
              const double re = g(rng);
              const double im = real_only_ ? 0.0 : g(rng);
              m[i * cols(s, p) + j] = (i == j ? 1.0 : 0.0) + noise * cplx(re, im);
            }
          }
        }
      }
    }
  }

  /// Throws unless the all-zeros configuration or a random one has nonzero
  /// amplitude.
  void check_nonzero(std::uint64_t seed = 0) const {
    Configuration zeros(static_cast<std::size_t>(num_sites()), 0);
    if (!amplitude(zeros).is_zero()) return;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> level(0, local_dim() - 1);
    Configuration n(zeros.size());
    for (auto& v : n) v = level(rng);
    if (amplitude(n).is_zero())
      throw InputError("state has zero amplitude on the probe configurations");
  }

  /// Multiplies each site tensor by a positive scalar so its matrices have
  /// unit average scale. The physical state changes only by a global factor.
  /// Returns, per string, the log of the factor removed.
  std::vector<double> rescale_strings() {
    std::vector<double> removed(static_cast<std::size_t>(num_strings()), 0.0);
    for (int s = 0; s < num_strings(); ++s) {
      for (int p = 0; p < string_length(s); ++p) {
        auto t = tensor(s, p);
        double norm2 = 0.0;
        for (const cplx& z : t) norm2 += std::norm(z);
        const double unit = static_cast<double>(local_dim()) * std::min(rows(s, p), cols(s, p));
        const double scale = std::sqrt(norm2 / unit);
        if (!(scale > 0.0) || !std::isfinite(scale)) continue;
        for (cplx& z : t) z /= scale;
        removed[static_cast<std::size_t>(s)] += std::log(scale);
      }
    }
    return removed;
  }

 private:
  void layout() {
    offsets_.assign(static_cast<std::size_t>(num_strings()), {});
    std::size_t offset = 0;
    for (int s = 0; s < num_strings(); ++s) {
      for (int p = 0; p < string_length(s); ++p) {
        offsets_[s].push_back(offset);
        offset += static_cast<std::size_t>(tensor_size(s, p));
      }
    }
    params_.assign(offset, 0.0);
  }

  Lattice lattice_;
  StringPattern pattern_;
  int bond_dim_;
  bool real_only_;
  std::vector<std::vector<std::size_t>> offsets_;
  std::vector<cplx> params_;
};

inline StringBondState random_state(const Lattice& lattice, const StringPattern& pattern,
                                    int bond_dim, std::uint64_t seed, double noise = 0.1,
                                    bool real_only = false) {
  StringBondState st(lattice, pattern, bond_dim, real_only);
  st.randomize(seed, noise);
  st.check_nonzero(seed);
  return st;
}

/// Plaquette loops with M_0 = identity and M_1 = Pauli X: each loop
/// contributes tr(X^k), i.e. 2 when its four spins have even parity and 0
/// otherwise.
inline StringBondState toric_code_state(const Lattice& lattice) {
  if (lattice.local_dim() != 2) throw InputError("the toric-code state needs d = 2");
  if (lattice.plaquettes().empty()) throw InputError("the toric-code state needs plaquettes");
  StringBondState st(lattice, loops_pattern(lattice), 2, true);
  for (const auto& id : st.tensors()) {
    cplx* m0 = st.matrix(id.string, id.position, 0);
    cplx* m1 = st.matrix(id.string, id.position, 1);
    m0[0] = m0[3] = 1.0;
    m0[1] = m0[2] = 0.0;
    m1[1] = m1[2] = 1.0;
    m1[0] = m1[3] = 0.0;
  }
  return st;
}

/// Real coordinates of all parameters, real and imaginary parts interleaved.
inline std::vector<double> flatten(const StringBondState& st) {
  std::vector<double> v;
  v.reserve(2 * st.num_params());
  for (const cplx& z : st.params()) {
    v.push_back(z.real());
    v.push_back(z.imag());
  }
  return v;
}

inline void unflatten(StringBondState& st, std::span<const double> v) {
  if (v.size() != 2 * st.num_params()) throw InputError("parameter vector has the wrong length");
  auto params = st.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] = {v[2 * i], v[2 * i + 1]};
}

}  // namespace sbs
