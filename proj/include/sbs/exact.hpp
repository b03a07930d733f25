#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "sbs/hamiltonian.hpp"
#include "sbs/state.hpp"

// Brute-force reference computations on the full d^N Hilbert space. These
// deliberately avoid AmplitudeCache so they can check the sampling path.

namespace sbs {

constexpr std::size_t kMaxEnumerationDim = std::size_t{1} << 20;

inline std::size_t hilbert_dim(int n_sites, int d) {
  std::size_t dim = 1;
  for (int i = 0; i < n_sites; ++i) {
    dim *= static_cast<std::size_t>(d);
    if (dim > kMaxEnumerationDim) throw InputError("system too large for exact enumeration");
  }
  return dim;
}

/// Configuration for a lexicographic index (site 0 is the most significant digit).
inline void config_from_index(std::size_t idx, int d, Configuration& n) {
  for (std::size_t i = n.size(); i-- > 0;) {
    n[i] = static_cast<int>(idx % static_cast<std::size_t>(d));
    idx /= static_cast<std::size_t>(d);
  }
}

inline std::size_t index_of(std::span<const int> n, int d) {
  std::size_t idx = 0;
  for (int v : n) idx = idx * static_cast<std::size_t>(d) + static_cast<std::size_t>(v);
  return idx;
}

/// Amplitudes in lexicographic order, scaled by exp(-log_scale).
struct DenseState {
  std::vector<cplx> amplitudes;
  double log_scale = 0.0;
  double norm2 = 0.0;
};

inline DenseState dense_wavefunction(const StringBondState& st) {
  const int d = st.local_dim();
  const std::size_t dim = hilbert_dim(st.num_sites(), d);
  std::vector<LogAmplitude> logs(dim);
  Configuration n(static_cast<std::size_t>(st.num_sites()));
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dim; ++i) {
    config_from_index(i, d, n);
    logs[i] = st.amplitude(n);
    top = std::max(top, logs[i].log_abs);
  }
  DenseState out;
  if (std::isinf(top)) throw ZeroAmplitudeError("state vanishes on every configuration");
  out.log_scale = top;
  out.amplitudes.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    LogAmplitude a = logs[i];
    if (!a.is_zero()) a.log_abs -= top;
    out.amplitudes[i] = a.value();
    out.norm2 += std::norm(out.amplitudes[i]);
  }
  return out;
}

/// H |v> by applying every branch to every basis state.
inline std::vector<cplx> apply_hamiltonian(const LocalHamiltonian& h, std::span<const cplx> v) {
  const int nsites = h.lattice().size();
  const int d = h.lattice().local_dim();
  const std::size_t dim = hilbert_dim(nsites, d);
  if (v.size() != dim) throw InputError("vector length does not match the Hilbert space");
  std::vector<std::size_t> place(static_cast<std::size_t>(nsites));
  std::size_t pv = 1;
  for (int i = nsites; i-- > 0;) {
    place[static_cast<std::size_t>(i)] = pv;
    pv *= static_cast<std::size_t>(d);
  }
  std::vector<cplx> out(dim, 0.0);
  Configuration n(static_cast<std::size_t>(nsites));
  for (std::size_t i = 0; i < dim; ++i) {
    config_from_index(i, d, n);
    cplx acc = 0.0;
    for (const auto& t : h.terms()) {
      const int idx = local_index(n, t.support, d);
      for (const auto& br : t.branches) {
        const cplx c = br.coeff[static_cast<std::size_t>(idx)];
        if (c == cplx(0.0)) continue;
        std::size_t j = i;
        for (std::size_t k = 0; k < t.support.size(); ++k) {
          const auto site = static_cast<std::size_t>(t.support[k]);
          const int old = n[site];
          const int neu = (old + br.shift[k]) % d;
          j = j - static_cast<std::size_t>(old) * place[site] + static_cast<std::size_t>(neu) * place[site];
        }
        acc += c * v[j];
      }
    }
    out[i] = acc;
  }
  return out;
}

inline cplx dense_expectation(const DenseState& psi, const LocalHamiltonian& h) {
  const auto hv = apply_hamiltonian(h, psi.amplitudes);
  cplx num = 0.0;
  for (std::size_t i = 0; i < hv.size(); ++i) num += std::conj(psi.amplitudes[i]) * hv[i];
  return num / psi.norm2;
}

/// <psi|H|psi>/<psi|psi>, real part.
inline double dense_expectation(const StringBondState& st, const LocalHamiltonian& h) {
  return dense_expectation(dense_wavefunction(st), h).real();
}

/// Expectation of an observable built from local terms.
inline cplx dense_expectation(const DenseState& psi, const Lattice& lat, const Observable& o) {
  cplx sum = 0.0;
  for (const auto& t : o.terms) sum += dense_expectation(psi, LocalHamiltonian(lat, {t}));
  return o.offset + o.scale * sum;
}

struct GroundState {
  double energy = 0.0;
  double residual = 0.0;
  std::vector<cplx> vector;
};

/// Dense matrix of H; only for small Hilbert spaces.
inline Eigen::MatrixXcd dense_matrix(const LocalHamiltonian& h) {
  const std::size_t dim = hilbert_dim(h.lattice().size(), h.lattice().local_dim());
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  std::vector<cplx> e(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    e[j] = 1.0;
    const auto col = apply_hamiltonian(h, e);
    for (std::size_t i = 0; i < dim; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    e[j] = 0.0;
  }
  return m;
}

/// Smallest eigenpair of H: dense diagonalization up to 2^10 states,
/// explicitly restarted Lanczos with full reorthogonalization above.
inline GroundState ground_state(const LocalHamiltonian& h, double tolerance = 1e-8,
                                int krylov_dim = 100, int max_restarts = 200) {
  const std::size_t dim = hilbert_dim(h.lattice().size(), h.lattice().local_dim());
  GroundState gs;
  if (dim <= 1024) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_matrix(h));
    gs.energy = es.eigenvalues()(0);
    gs.vector.assign(es.eigenvectors().col(0).data(), es.eigenvectors().col(0).data() + dim);
    const auto hv = apply_hamiltonian(h, gs.vector);
    double r = 0.0;
    for (std::size_t i = 0; i < dim; ++i) r += std::norm(hv[i] - gs.energy * gs.vector[i]);
    gs.residual = std::sqrt(r);
    return gs;
  }

  using Vec = Eigen::VectorXcd;
  const auto n = static_cast<Eigen::Index>(dim);
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> g;
  Vec x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = cplx(g(rng), g(rng));
  x.normalize();
  auto matvec = [&](const Vec& v) {
    const auto r = apply_hamiltonian(h, std::span<const cplx>(v.data(), dim));
    return Vec(Eigen::Map<const Vec>(r.data(), n));
  };
  const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(krylov_dim), dim));
  for (int restart = 0; restart < max_restarts; ++restart) {
    std::vector<Vec> basis;
    std::vector<double> alpha, beta;
    basis.push_back(x);
    for (int j = 0; j < k; ++j) {
      Vec w = matvec(basis[static_cast<std::size_t>(j)]);
      alpha.push_back(basis[static_cast<std::size_t>(j)].dot(w).real());
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : basis) w -= b * b.dot(w);
      const double nb = w.norm();
      if (j + 1 == k || nb < 1e-12) break;
      beta.push_back(nb);
      basis.push_back(w / nb);
    }
    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const double theta = es.eigenvalues()(0);
    x.setZero();
    for (Eigen::Index i = 0; i < m; ++i) x += es.eigenvectors()(i, 0) * basis[static_cast<std::size_t>(i)];
    x.normalize();
    const double res = (matvec(x) - theta * x).norm();
    gs.energy = theta;
    gs.residual = res;
    if (res <= tolerance) {
      gs.vector.assign(x.data(), x.data() + dim);
      return gs;
    }
  }
  throw std::runtime_error("Lanczos did not converge: residual " + std::to_string(gs.residual));
}

inline double exact_ground_energy(const LocalHamiltonian& h) { return ground_state(h).energy; }

/// Central finite differences of dense_expectation over every real
/// parameter coordinate (real and imaginary parts interleaved).
inline std::vector<double> fd_gradient(const StringBondState& st, const LocalHamiltonian& h,
                                       double eps) {
  StringBondState probe = st;
  auto params = probe.params();
  std::vector<double> grad(2 * params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const cplx orig = params[i];
    for (int part = 0; part < 2; ++part) {
      const cplx step = part == 0 ? cplx(eps, 0.0) : cplx(0.0, eps);
      params[i] = orig + step;
      const double up = dense_expectation(probe, h);
      params[i] = orig - step;
      const double down = dense_expectation(probe, h);
      params[i] = orig;
      grad[2 * i + static_cast<std::size_t>(part)] = (up - down) / (2.0 * eps);
    }
  }
  return grad;
}

}  // namespace sbs
