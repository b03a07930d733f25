#pragma once

#include <Eigen/Dense>

#include "sbs/enumerate.hpp"
#include "sbs/sampler.hpp"

namespace sbs {

/// Quadratic forms of one site tensor: E(A) = (A^H X A) / (A^H Y A), with
/// the other tensors held at their current values.
struct QuadraticForms {
  Eigen::MatrixXcd x;
  Eigen::MatrixXcd y;

  double energy(const Eigen::VectorXcd& a) const {
    return (a.dot(x * a) / a.dot(y * a)).real();
  }
};

namespace detail {

inline void add_record(QuadraticForms& q, const TensorRecord& rec, double w) {
  const auto n = static_cast<Eigen::Index>(rec.b.size());
  const Eigen::Map<const Eigen::VectorXcd> b(rec.b.data(), n);
  const Eigen::Map<const Eigen::VectorXcd> a(rec.a.data(), n);
  q.x.noalias() += w * b.conjugate() * a.transpose();
  q.y.noalias() += w * b.conjugate() * b.transpose();
}

}  // namespace detail

/// X and Y as sample averages over the tracked records of `tensor_slot`.
inline QuadraticForms estimate_xy(const SampleBatch& batch, std::size_t tensor_slot) {
  const auto& chains = batch.tracked.at(tensor_slot);
  Eigen::Index n = 0;
  for (const auto& c : chains)
    if (!c.empty()) n = static_cast<Eigen::Index>(c.front().b.size());
  QuadraticForms q{Eigen::MatrixXcd::Zero(n, n), Eigen::MatrixXcd::Zero(n, n)};
  std::size_t count = 0;
  for (const auto& c : chains) count += c.size();
  if (count == 0) return q;
  const double w = 1.0 / static_cast<double>(count);
  for (const auto& c : chains)
    for (const auto& rec : c) detail::add_record(q, rec, w);
  return q;
}

/// X and Y by full enumeration of p(n).
inline QuadraticForms enumerate_xy(const StringBondState& st, const LocalHamiltonian& h, TensorId id) {
  const auto ex = enumerate_estimates(st, h);
  const auto n = static_cast<Eigen::Index>(st.tensor_size(id.string, id.position));
  QuadraticForms q{Eigen::MatrixXcd::Zero(n, n), Eigen::MatrixXcd::Zero(n, n)};
  for_each_configuration(st, [&](std::size_t i, AmplitudeCache& cache) {
    const double p = ex.probabilities[i];
    if (p == 0.0) return;
    const cplx e = local_energy(h, cache);
    detail::add_record(q, tensor_record(h, cache, id, e), p);
  });
  return q;
}

struct ReweightedEstimate {
  EstimateWithError estimate;
  double effective_samples = 0.0;
  bool trusted = true;
};

/// Energy at a modified tensor A from samples drawn at A0, with weights
/// p_A/p_A0 = |b.A|^2. Flags the estimate when (sum w)^2 / sum w^2 drops
/// below `trust_fraction` of the sample count.
inline ReweightedEstimate reweighted_estimate(const SampleBatch& batch, std::size_t tensor_slot,
                                              std::span<const cplx> target,
                                              double trust_fraction = 0.1) {
  std::vector<double> w;
  std::vector<cplx> f;
  for (const auto& c : batch.tracked.at(tensor_slot)) {
    for (const auto& rec : c) {
      cplx ba = 0.0, aa = 0.0;
      for (std::size_t i = 0; i < target.size(); ++i) {
        ba += rec.b[i] * target[i];
        aa += rec.a[i] * target[i];
      }
      w.push_back(std::norm(ba));
      f.push_back(ba == cplx(0.0) ? cplx(0.0) : aa / ba);
    }
  }
  double sw = 0.0, sw2 = 0.0;
  cplx swf = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sw += w[i];
    sw2 += w[i] * w[i];
    swf += w[i] * f[i];
  }
  if (!(sw > 0.0)) throw std::domain_error("all reweighting weights vanish");
  ReweightedEstimate out;
  out.estimate.mean = swf / sw;
  out.estimate.samples = w.size();
  double var = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) var += w[i] * w[i] * std::norm(f[i] - out.estimate.mean);
  out.estimate.std_error = std::sqrt(var) / sw;
  out.effective_samples = sw * sw / sw2;
  out.trusted = out.effective_samples >= trust_fraction * static_cast<double>(w.size());
  return out;
}

}  // namespace sbs
