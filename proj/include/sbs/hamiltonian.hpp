#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sbs/cache.hpp"
#include "sbs/lattice.hpp"

namespace sbs {

/// One diagonal-times-permutation piece of a local operator: it maps
/// |n> to the configuration with each support site shifted by `shift`
/// (mod d), weighted by coeff[local index of the bra configuration].
///
/// In other words <n| T |n + shift> = coeff[n restricted to the support].
struct Branch {
  std::vector<std::uint8_t> shift;
  std::vector<cplx> coeff;

  bool diagonal() const {
    for (auto v : shift)
      if (v != 0) return false;
    return true;
  }
};

/// An operator acting on a handful of sites, as a sum of branches.
struct LocalTerm {
  std::vector<int> support;
  std::vector<Branch> branches;
};

/// Index of a configuration restricted to `support`, site support[0] fastest.
inline int local_index(std::span<const int> n, std::span<const int> support, int d) {
  int idx = 0;
  for (std::size_t i = support.size(); i-- > 0;) idx = idx * d + n[static_cast<std::size_t>(support[i])];
  return idx;
}

/// Dense d^k x d^k matrix of a term on its own support (row = bra index).
inline std::vector<cplx> term_matrix(const LocalTerm& t, int d) {
  const int k = static_cast<int>(t.support.size());
  int dim = 1;
  for (int i = 0; i < k; ++i) dim *= d;
  std::vector<cplx> m(static_cast<std::size_t>(dim * dim), 0.0);
  std::vector<int> digits(static_cast<std::size_t>(k));
  for (int row = 0; row < dim; ++row) {
    int r = row;
    for (int i = 0; i < k; ++i) {
      digits[static_cast<std::size_t>(i)] = r % d;
      r /= d;
    }
    for (const auto& br : t.branches) {
      int col = 0;
      for (int i = k; i-- > 0;) col = col * d + (digits[static_cast<std::size_t>(i)] + br.shift[static_cast<std::size_t>(i)]) % d;
      m[static_cast<std::size_t>(row * dim + col)] += br.coeff[static_cast<std::size_t>(row)];
    }
  }
  return m;
}

inline bool is_hermitian(const LocalTerm& t, int d, double tol = 1e-12) {
  const auto m = term_matrix(t, d);
  const auto dim = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m.size()))));
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      if (std::abs(m[i * dim + j] - std::conj(m[j * dim + i])) > tol) return false;
  return true;
}

/// Value of sum_branches coeff(n) <n+shift|psi>/<n|psi> for the cache's n.
inline cplx local_value(const LocalTerm& t, AmplitudeCache& cache) {
  const int d = cache.state().local_dim();
  const auto& n = cache.config();
  const int idx = local_index(n, t.support, d);
  cplx sum = 0.0;
  SiteChange changes[8];
  for (const auto& br : t.branches) {
    const cplx c = br.coeff[static_cast<std::size_t>(idx)];
    if (c == cplx(0.0)) continue;
    std::size_t nc = 0;
    for (std::size_t i = 0; i < t.support.size(); ++i) {
      if (br.shift[i] == 0) continue;
      const int site = t.support[i];
      changes[nc++] = {site, (n[static_cast<std::size_t>(site)] + br.shift[i]) % d};
    }
    if (nc == 0) sum += c;
    else sum += c * cache.ratio(std::span<const SiteChange>(changes, nc));
  }
  return sum;
}

/// A lattice Hamiltonian written as a sum of local terms.
class LocalHamiltonian {
 public:
  LocalHamiltonian(Lattice lattice, std::vector<LocalTerm> terms)
      : lattice_(std::move(lattice)), terms_(std::move(terms)),
        incidence_(static_cast<std::size_t>(lattice_.size())) {
    const int d = lattice_.local_dim();
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      const auto& term = terms_[t];
      if (term.support.empty() || term.support.size() > 8)
        throw InputError("term support must have between 1 and 8 sites");
      std::size_t dim = 1;
      for (std::size_t i = 0; i < term.support.size(); ++i) dim *= static_cast<std::size_t>(d);
      for (int x : term.support) {
        if (x < 0 || x >= lattice_.size()) throw InputError("term support outside the lattice");
        incidence_[static_cast<std::size_t>(x)].push_back(static_cast<int>(t));
      }
      for (const auto& br : term.branches)
        if (br.shift.size() != term.support.size() || br.coeff.size() != dim)
          throw InputError("branch shape does not match its term support");
    }
  }

  const Lattice& lattice() const { return lattice_; }
  const std::vector<LocalTerm>& terms() const { return terms_; }
  const std::vector<int>& terms_at(int site) const { return incidence_[static_cast<std::size_t>(site)]; }

 private:
  Lattice lattice_;
  std::vector<LocalTerm> terms_;
  std::vector<std::vector<int>> incidence_;
};

/// h_n = <n|H|psi>/<n|psi> for the configuration bound to `cache`.
inline cplx local_energy(const LocalHamiltonian& h, AmplitudeCache& cache) {
  cplx e = 0.0;
  for (const auto& t : h.terms()) e += local_value(t, cache);
  return e;
}

namespace detail {

inline double z_of(int level) { return level == 0 ? 1.0 : -1.0; }

inline void require_qubits(const Lattice& lat) {
  if (lat.local_dim() != 2) throw InputError("spin-1/2 models need local dimension 2");
}

}  // namespace detail

/// H = -J sum_<ij> Z_i Z_j - h sum_i X_i in the Z basis (level 0 is z = +1).
inline LocalHamiltonian build_tfi(const Lattice& lat, double coupling, double field) {
  detail::require_qubits(lat);
  std::vector<LocalTerm> terms;
  for (const auto& b : lat.bonds()) {
    LocalTerm t{{b.a, b.b}, {}};
    Branch diag{{0, 0}, std::vector<cplx>(4)};
    for (int idx = 0; idx < 4; ++idx)
      diag.coeff[static_cast<std::size_t>(idx)] = -coupling * detail::z_of(idx & 1) * detail::z_of(idx >> 1);
    t.branches.push_back(std::move(diag));
    terms.push_back(std::move(t));
  }
  if (field != 0.0) {
    for (int x = 0; x < lat.size(); ++x)
      terms.push_back({{x}, {Branch{{1}, {cplx(-field), cplx(-field)}}}});
  }
  return LocalHamiltonian(lat, std::move(terms));
}

/// Bond signs for the frustrated XX model, indexed like Lattice::bonds().
using FrustrationPattern = std::vector<int>;

/// +1 everywhere except vertical bonds in odd columns, which are -1.
inline FrustrationPattern default_frustration(const Lattice& lat) {
  FrustrationPattern signs;
  for (const auto& b : lat.bonds()) signs.push_back(!b.horizontal && lat.x_of(b.a) % 2 == 1 ? -1 : 1);
  return signs;
}

/// Index of the first plaquette with an even number of negative bonds, or -1.
inline int first_unfrustrated_plaquette(const Lattice& lat, const FrustrationPattern& signs) {
  std::vector<int> product(lat.plaquettes().size(), 1);
  for (std::size_t i = 0; i < lat.bonds().size(); ++i)
    for (int p : lat.bonds()[i].plaquettes) product[static_cast<std::size_t>(p)] *= signs[i];
  for (std::size_t p = 0; p < product.size(); ++p)
    if (product[p] > 0) return static_cast<int>(p);
  return -1;
}

inline void validate_frustration(const Lattice& lat, const FrustrationPattern& signs) {
  if (signs.size() != lat.bonds().size())
    throw InputError("frustration pattern has " + std::to_string(signs.size()) + " signs for " +
                     std::to_string(lat.bonds().size()) + " bonds");
  for (int s : signs)
    if (s != 1 && s != -1) throw InputError("frustration signs must be +1 or -1");
  if (const int p = first_unfrustrated_plaquette(lat, signs); p >= 0)
    throw InputError("plaquette " + std::to_string(p) + " has an even number of negative bonds");
}

/// Reads lines `a b sign`; bonds that are not listed keep sign +1.
inline FrustrationPattern load_frustration(std::istream& in, const Lattice& lat) {
  FrustrationPattern signs(lat.bonds().size(), 1);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    int a = 0, b = 0, sign = 0;
    if (!(ls >> a >> b >> sign))
      throw InputError("frustration line " + std::to_string(line_no) + ": expected 'a b sign'");
    bool found = false;
    for (std::size_t i = 0; i < lat.bonds().size(); ++i) {
      const auto& bond = lat.bonds()[i];
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) {
        signs[i] = sign;
        found = true;
      }
    }
    if (!found)
      throw InputError("frustration line " + std::to_string(line_no) + ": " + std::to_string(a) +
                       "-" + std::to_string(b) + " is not a bond");
  }
  return signs;
}

inline FrustrationPattern load_frustration_file(const std::string& path, const Lattice& lat) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open frustration file '" + path + "'");
  return load_frustration(in, lat);
}

/// H = sum_<ij> J_ij (X_i X_j + Y_i Y_j) - h sum_i Z_i with J_ij = sign_ij * J.
inline LocalHamiltonian build_frustrated_xx(const Lattice& lat, double coupling, double field,
                                            const FrustrationPattern& signs) {
  detail::require_qubits(lat);
  validate_frustration(lat, signs);
  std::vector<LocalTerm> terms;
  for (std::size_t i = 0; i < lat.bonds().size(); ++i) {
    const auto& b = lat.bonds()[i];
    const double jij = signs[i] * coupling;
    // XX + YY = 2 (|01><10| + |10><01|)
    Branch hop{{1, 1}, {0.0, 2.0 * jij, 2.0 * jij, 0.0}};
    terms.push_back({{b.a, b.b}, {std::move(hop)}});
  }
  if (field != 0.0) {
    for (int x = 0; x < lat.size(); ++x)
      terms.push_back({{x}, {Branch{{0}, {cplx(-field), cplx(field)}}}});
  }
  return LocalHamiltonian(lat, std::move(terms));
}

inline LocalHamiltonian build_frustrated_xx(const Lattice& lat, double coupling, double field) {
  return build_frustrated_xx(lat, coupling, field, default_frustration(lat));
}

/// Product of Pauli operators, e.g. ("ZZ", {0, 1}) or ("XZZX", {0, 1, 2, 3}).
/// 'I' factors are allowed.
inline LocalTerm observable_term(const std::string& name, const std::vector<int>& sites) {
  if (name.empty() || name.size() != sites.size())
    throw InputError("Pauli string '" + name + "' does not match " + std::to_string(sites.size()) +
                     " sites");
  if (sites.size() > 8) throw InputError("Pauli strings are limited to 8 sites");
  const std::size_t k = sites.size();
  Branch br{std::vector<std::uint8_t>(k, 0), std::vector<cplx>(std::size_t{1} << k, 1.0)};
  for (std::size_t i = 0; i < k; ++i) {
    const char op = name[i];
    if (op != 'I' && op != 'X' && op != 'Y' && op != 'Z')
      throw InputError("unknown operator '" + std::string(1, op) + "' in '" + name + "'");
    if (op == 'X' || op == 'Y') br.shift[i] = 1;
  }
  for (std::size_t idx = 0; idx < br.coeff.size(); ++idx) {
    cplx c = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const int bit = static_cast<int>((idx >> i) & 1U);
      // <0|Y|1> = -i, <1|Y|0> = +i
      if (name[i] == 'Z') c *= detail::z_of(bit);
      else if (name[i] == 'Y') c *= bit == 0 ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
    }
    br.coeff[idx] = c;
  }
  return {sites, {std::move(br)}};
}

/// A named observable: offset + scale * sum of terms.
struct Observable {
  std::string name;
  std::vector<LocalTerm> terms;
  double scale = 1.0;
  double offset = 0.0;
};

inline cplx local_value(const Observable& o, AmplitudeCache& cache) {
  cplx sum = 0.0;
  for (const auto& t : o.terms) sum += local_value(t, cache);
  return o.offset + o.scale * sum;
}

/// Builds observables from tokens:
///   mx, mz        (1/N) sum_i <X_i>, (1/N) sum_i <Z_i>
///   mz2           (1/N^2) sum_ij <Z_i Z_j>
///   plaquette_parity  mean over plaquettes of Z Z Z Z
///   PAULI:i,j,... an explicit Pauli string, e.g. ZZ:0,1
inline Observable make_observable(const Lattice& lat, const std::string& token) {
  const int n = lat.size();
  Observable o{token, {}, 1.0, 0.0};
  if (token == "mx" || token == "mz") {
    for (int x = 0; x < n; ++x) o.terms.push_back(observable_term(token == "mx" ? "X" : "Z", {x}));
    o.scale = 1.0 / n;
  } else if (token == "mz2") {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) o.terms.push_back(observable_term("ZZ", {i, j}));
    o.scale = 2.0 / (static_cast<double>(n) * n);
    o.offset = 1.0 / n;
  } else if (token == "plaquette_parity") {
    if (lat.plaquettes().empty()) throw InputError("lattice has no plaquettes");
    for (const auto& q : lat.plaquettes()) o.terms.push_back(observable_term("ZZZZ", {q.begin(), q.end()}));
    o.scale = 1.0 / static_cast<double>(lat.plaquettes().size());
  } else {
    const auto colon = token.find(':');
    if (colon == std::string::npos) throw InputError("unknown observable '" + token + "'");
    std::vector<int> sites;
    std::stringstream ss(token.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        sites.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw InputError("bad site '" + item + "' in observable '" + token + "'");
      }
    }
    for (int x : sites)
      if (x < 0 || x >= n) throw InputError("observable site out of range in '" + token + "'");
    o.terms.push_back(observable_term(token.substr(0, colon), sites));
  }
  return o;
}

}  // namespace sbs
