#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <functional>
#include <random>
#include <vector>

#include "sbs/enumerate.hpp"
#include "sbs/reweight.hpp"
#include "sbs/sampler.hpp"

namespace sbs {

/// Energy gradient with respect to the conjugated parameters, dE/dconj(A),
/// for every site tensor, from one batch. The gradient over the real
/// coordinates (Re A, Im A) is (2 Re G, 2 Im G), so A - eta G descends.
struct GradientEstimate {
  std::vector<cplx> grad;
  cplx energy = 0.0;
  std::size_t samples = 0;

  std::vector<double> real_coordinates() const {
    std::vector<double> out;
    out.reserve(2 * grad.size());
    for (const cplx& g : grad) {
      out.push_back(2.0 * g.real());
      out.push_back(2.0 * g.imag());
    }
    return out;
  }

  double norm() const {
    double s = 0.0;
    for (const cplx& g : grad) s += std::norm(g);
    return std::sqrt(s);
  }
};

namespace detail {

// G = <conj(b) h> - <conj(b)> <h>
inline GradientEstimate gradient_from_means(std::span<const cplx> mean_b, std::span<const cplx> mean_bh,
                                            cplx mean_h, std::size_t samples, bool real_only) {
  GradientEstimate g;
  g.energy = mean_h;
  g.samples = samples;
  g.grad.resize(mean_b.size());
  for (std::size_t i = 0; i < mean_b.size(); ++i) {
    g.grad[i] = mean_bh[i] - mean_b[i] * mean_h;
    if (real_only) g.grad[i] = g.grad[i].real();
  }
  return g;
}

}  // namespace detail

/// All-site gradient from one batch sampled at the current parameters.
inline GradientEstimate sampled_gradient(const StringBondState& st, const SampleBatch& batch) {
  if (batch.count == 0) throw std::invalid_argument("empty sample batch");
  if (batch.sum_conj_b.size() != st.num_params())
    throw std::invalid_argument("batch was sampled without gradient records");
  const double inv = 1.0 / static_cast<double>(batch.count);
  std::vector<cplx> mb(batch.sum_conj_b.size()), mbh(batch.sum_conj_b.size());
  for (std::size_t i = 0; i < mb.size(); ++i) {
    mb[i] = batch.sum_conj_b[i] * inv;
    mbh[i] = batch.sum_conj_b_h[i] * inv;
  }
  return detail::gradient_from_means(mb, mbh, batch.mean_energy(), batch.count, st.real_only());
}

/// The same estimator with exact weights p(n) from full enumeration.
inline GradientEstimate enumerated_gradient(const StringBondState& st, const LocalHamiltonian& h) {
  const auto ex = enumerate_estimates(st, h, {}, true);
  return detail::gradient_from_means(ex.mean_conj_b, ex.mean_conj_b_h, ex.energy, 0, st.real_only());
}

struct StepResult {
  bool accepted = true;
  double displacement = 0.0;
};

enum class StepNormalization {
  none,        // A <- A - eta G
  global,      // A <- A - eta G / |G|
  per_tensor,  // each site tensor moves eta along its own normalized gradient
};

inline std::string to_string(StepNormalization n) {
  switch (n) {
    case StepNormalization::none: return "none";
    case StepNormalization::global: return "global";
    case StepNormalization::per_tensor: return "per_tensor";
  }
  return "?";
}

inline StepNormalization parse_normalization(const std::string& s) {
  if (s == "none") return StepNormalization::none;
  if (s == "global") return StepNormalization::global;
  if (s == "per_tensor") return StepNormalization::per_tensor;
  throw InputError("unknown step normalization '" + s + "' (expected none|global|per_tensor)");
}

/// Moves all tensors at once against the gradient, then rescale_strings().
/// Non-finite updates leave the state untouched.
inline StepResult step(StringBondState& st, const GradientEstimate& g, double eta,
                       StepNormalization mode = StepNormalization::global, bool rescale = true) {
  if (g.grad.size() != st.num_params()) throw std::invalid_argument("gradient shape mismatch");
  std::vector<double> factor(st.num_params(), eta);
  if (mode == StepNormalization::global) {
    const double n = g.norm();
    std::fill(factor.begin(), factor.end(), n > 0.0 ? eta / n : 0.0);
  } else if (mode == StepNormalization::per_tensor) {
    for (const auto& id : st.tensors()) {
      const std::size_t off = st.tensor_offset(id.string, id.position);
      const auto len = static_cast<std::size_t>(st.tensor_size(id.string, id.position));
      double n2 = 0.0;
      for (std::size_t i = off; i < off + len; ++i) n2 += std::norm(g.grad[i]);
      const double f = n2 > 0.0 ? eta / std::sqrt(n2) : 0.0;
      std::fill(factor.begin() + static_cast<std::ptrdiff_t>(off),
                factor.begin() + static_cast<std::ptrdiff_t>(off + len), f);
    }
  }
  std::vector<cplx> next(st.params().begin(), st.params().end());
  double disp2 = 0.0;
  for (std::size_t i = 0; i < next.size(); ++i) {
    const cplx delta = factor[i] * g.grad[i];
    next[i] -= delta;
    disp2 += std::norm(delta);
    if (!std::isfinite(next[i].real()) || !std::isfinite(next[i].imag())) return {false, 0.0};
  }
  std::copy(next.begin(), next.end(), st.params().begin());
  if (rescale) st.rescale_strings();
  return {true, std::sqrt(disp2)};
}

/// Copies a state into bond dimension `new_dim`: every matrix occupies the
/// top-left block and the padding is filled with `noise` times complex
/// Gaussians (real ones for real-only states).
inline StringBondState grow_bond_dimension(const StringBondState& st, int new_dim, double noise,
                                           std::uint64_t seed) {
  if (new_dim <= st.bond_dim()) throw InputError("new bond dimension must exceed the current one");
  StringBondState out(st.lattice(), st.pattern(), new_dim, st.real_only());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (int s = 0; s < st.num_strings(); ++s) {
    for (int p = 0; p < st.string_length(s); ++p) {
      for (int k = 0; k < st.local_dim(); ++k) {
        const cplx* src = st.matrix(s, p, k);
        cplx* dst = out.matrix(s, p, k);
        const int r = out.rows(s, p), c = out.cols(s, p);
        const int r0 = st.rows(s, p), c0 = st.cols(s, p);
        for (int i = 0; i < r; ++i) {
          for (int j = 0; j < c; ++j) {
            const double re = g(rng);
            const double im = st.real_only() ? 0.0 : g(rng);
            dst[i * c + j] = i < r0 && j < c0 ? src[i * c0 + j] : noise * cplx(re, im);
          }
        }
      }
    }
  }
  return out;
}

/// Generalized eigenvector of (Hermitized X, Y + lambda I) with the smallest
/// eigenvalue, lambda = 1e-8 tr(Y)/dim. Rescaled so that b.A has the same
/// phase convention as the current tensor (A0^H Y A = positive).
inline Eigen::VectorXcd local_eigensolve_update(const QuadraticForms& q, std::span<const cplx> current,
                                                double* eigenvalue = nullptr) {
  const Eigen::Index n = q.x.rows();
  const Eigen::MatrixXcd xh = 0.5 * (q.x + q.x.adjoint());
  Eigen::MatrixXcd y = 0.5 * (q.y + q.y.adjoint());
  const double lambda = 1e-8 * y.trace().real() / static_cast<double>(n);
  y.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXcd> llt(y);
  if (llt.info() != Eigen::Success) throw std::runtime_error("Y is singular beyond regularization");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(xh, y);
  if (es.info() != Eigen::Success) throw std::runtime_error("generalized eigensolver failed");
  Eigen::VectorXcd v = es.eigenvectors().col(0);
  if (eigenvalue) *eigenvalue = es.eigenvalues()(0);
  const Eigen::Map<const Eigen::VectorXcd> a0(current.data(), n);
  const cplx overlap = a0.dot(y * v);
  if (std::abs(overlap) > 0.0) v *= std::abs(overlap) / overlap;
  return v;
}

struct OptimizerConfig {
  double eta = 0.05;
  double eta_min = 1e-4;
  StepNormalization normalization = StepNormalization::global;
  std::size_t samples = 2000;
  std::size_t samples_cap = 10000;
  double samples_growth = 2.0;
  std::vector<std::pair<int, int>> bond_schedule;  // (iteration, new D)
  int max_iterations = 1000;
  int window = 20;
  double tolerance = 1e-4;  // relative windowed energy change
  double growth_noise = 1e-3;
  std::uint64_t seed = 0;
};

struct TrajectoryRow {
  int iteration = 0;
  double energy = 0.0;
  double std_error = 0.0;
  double acceptance = 0.0;
  double eta = 0.0;
  std::size_t samples = 0;
  int bond_dim = 0;
  double wallclock = 0.0;
};

/// Resumable optimizer state.
struct OptimizerProgress {
  int iteration = 0;
  double eta = 0.0;
  std::size_t samples = 0;
};

struct OptimizeResult {
  std::vector<TrajectoryRow> trajectory;
  OptimizerProgress progress;
  bool converged = false;
};

using IterationCallback = std::function<void(const TrajectoryRow&, const StringBondState&,
                                             const OptimizerProgress&)>;

/// Sampled-gradient descent. Each iteration samples M configurations,
/// forms the all-site gradient and moves every tensor by eta along it.
///
/// Adaptive policy: once two full windows of energies exist, if the mean of
/// the latest window exceeds the previous one by more than twice its
/// standard error, eta is halved and M grows (up to the cap). Scheduled
/// bond-dimension growths also grow M. Convergence is declared when the
/// relative change between window means falls below `tolerance` and no
/// growth remains scheduled.
inline OptimizeResult optimize(StringBondState& state, const LocalHamiltonian& h, const OptimizerConfig& cfg,
                               const SamplerConfig& sampler, const IterationCallback& on_iteration = {},
                               OptimizerProgress start = {}) {
  OptimizeResult res;
  OptimizerProgress prog = start;
  if (prog.eta <= 0.0) prog.eta = cfg.eta;
  if (prog.samples == 0) prog.samples = cfg.samples;
  std::vector<double> energies, errors;
  const auto t0 = std::chrono::steady_clock::now();
  const int w = std::max(cfg.window, 1);

  for (; prog.iteration < cfg.max_iterations; ++prog.iteration) {
    for (const auto& [at, dim] : cfg.bond_schedule) {
      if (at == prog.iteration && dim > state.bond_dim()) {
        state = grow_bond_dimension(state, dim, cfg.growth_noise, chain_seed(cfg.seed, 0xD0D0, prog.iteration));
        prog.samples = std::min(cfg.samples_cap,
                                static_cast<std::size_t>(static_cast<double>(prog.samples) * cfg.samples_growth));
        energies.clear();
        errors.clear();
      }
    }

    SamplerConfig sc = sampler;
    sc.samples = prog.samples;
    sc.seed = cfg.seed;
    SampleRequest req;
    req.gradient = true;
    const auto batch = sample(state, h, sc, req, static_cast<std::uint64_t>(prog.iteration));
    const auto est = batch.energy();
    const auto grad = sampled_gradient(state, batch);

    TrajectoryRow row;
    row.iteration = prog.iteration;
    row.energy = est.mean.real();
    row.std_error = est.std_error;
    row.acceptance = batch.acceptance();
    row.eta = prog.eta;
    row.samples = prog.samples;
    row.bond_dim = state.bond_dim();
    row.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.trajectory.push_back(row);

    energies.push_back(row.energy);
    errors.push_back(row.std_error);

    double eta = prog.eta;
    auto moved = step(state, grad, eta, cfg.normalization);
    while (!moved.accepted && eta > cfg.eta_min) {
      eta *= 0.5;
      moved = step(state, grad, eta, cfg.normalization);
    }
    prog.eta = eta;

    bool pending_growth = false;
    for (const auto& [at, dim] : cfg.bond_schedule)
      pending_growth = pending_growth || (at > prog.iteration && dim > state.bond_dim());

    if (static_cast<int>(energies.size()) >= 2 * w) {
      const auto n = energies.size();
      double recent = 0.0, previous = 0.0, var = 0.0;
      for (std::size_t i = n - static_cast<std::size_t>(w); i < n; ++i) recent += energies[i];
      for (std::size_t i = n - 2 * static_cast<std::size_t>(w); i < n - static_cast<std::size_t>(w); ++i)
        previous += energies[i];
      for (std::size_t i = n - 2 * static_cast<std::size_t>(w); i < n; ++i) var += errors[i] * errors[i];
      recent /= w;
      previous /= w;
      const double se = std::sqrt(var) / w;
      if (recent - previous > 2.0 * se) {
        prog.eta = std::max(cfg.eta_min, prog.eta * 0.5);
        prog.samples = std::min(cfg.samples_cap,
                                static_cast<std::size_t>(static_cast<double>(prog.samples) * cfg.samples_growth));
        energies.clear();
        errors.clear();
      } else if (!pending_growth &&
                 std::abs(recent - previous) < cfg.tolerance * std::max(1.0, std::abs(recent))) {
        res.converged = true;
      }
    }

    OptimizerProgress after = prog;
    after.iteration = prog.iteration + 1;
    if (on_iteration) on_iteration(row, state, after);
    if (res.converged) {
      ++prog.iteration;
      break;
    }
  }
  res.progress = prog;
  return res;
}

}  // namespace sbs
